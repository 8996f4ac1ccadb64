#pragma once

// Run configuration: named presets, flat key=value files, overrides and a
// resolved echo that is written next to every output.

#include <cstdint>
#include <filesystem>
#include <string>

#include "docmae/mae.hpp"

namespace docmae {

struct RunConfig {
  std::string preset = "desk";
  std::size_t height = 96;
  std::size_t width = 96;
  std::size_t patch = 8;
  std::size_t dim = 128;
  std::size_t heads = 0;  // 0 picks default_heads(dim)
  std::size_t enc_depth = 4;
  std::size_t dec_depth = 2;
  double mask_ratio = 0.75;
  double max_lr = 1e-4;
  double warmup_fraction = 0.3;
  std::size_t pretrain_epochs = 20;
  std::size_t finetune_epochs = 20;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::size_t count = 200;  // gen-data sample count
  std::string corpus;
  bool freeze_encoder = false;
  bool from_scratch = false;
};

// "paper" or "desk"; anything else is a ValidationError.
RunConfig preset_config(const std::string& name);

// Sets one key from its text form. Unknown keys and unparsable values throw
// ValidationError. Setting "preset" resets every other key to that preset.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Lines of "key = value"; '#' starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Rejects geometry with H or W not divisible by P, D not divisible by 4 or
// by the head count, and out-of-range optimisation settings.
void validate(const RunConfig& cfg);

// Resolved configuration as key=value lines in a fixed order. Parsing the
// echo with apply_config_text reproduces the configuration.
std::string echo(const RunConfig& cfg);
RunConfig parse_echo(const std::string& text);

ModelConfig model_config(const RunConfig& cfg);

}  // namespace docmae
