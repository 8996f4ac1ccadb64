#pragma once

// On-disk formats: binary PPM images, Middlebury .flo flows, checkpoints and
// small CSV helpers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "docmae/rectifier.hpp"
#include "docmae/transformer.hpp"

namespace docmae {

namespace fs = std::filesystem;

// P6, maxval 255. Values are clamped to [0, 1] and rounded to 8 bits.
void write_ppm(const fs::path& path, const Tensor& image);  // [H, W, 3] or [H, W, 1]
Tensor read_ppm(const fs::path& path);                      // [H, W, 3]
Tensor read_mask_ppm(const fs::path& path);                 // [H, W, 1], binarised at 0.5

// Middlebury container: "PIEH", width, height, then interleaved float32
// pairs. The pair holds (du, dv) in the FlowField convention (row first).
void write_flo(const fs::path& path, const FlowField& flow);
FlowField read_flo(const fs::path& path);

struct Checkpoint {
  std::map<std::string, std::string> meta;
  NamedTensors tensors;

  const Tensor* find(const std::string& name) const;
  const std::string& get(const std::string& key) const;  // IoError when absent
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "DOCMAECK", u32 version, u64 header length, JSON header (meta and tensor
// directory of name, shape, byte offset), then float32 little-endian payload.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");
void save_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const fs::path& path);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// Minimal CSV: comma separated, no quoting (fields never contain commas).
std::vector<std::string> split_csv_line(const std::string& line);
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace docmae
