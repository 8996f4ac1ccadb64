#pragma once

// The end-to-end commands behind the CLI. Corpus layout (one directory):
//   manifest.csv           one row per sample: seeds, specs, annotation
//   config.txt             resolved configuration echo
//   <id>_distorted.ppm     I_d
//   <id>_clean.ppm         clean page
//   <id>_mask.ppm          foreground mask (gray PPM)
//   <id>_flow.flo          ground-truth flow

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "docmae/config.hpp"
#include "docmae/io.hpp"
#include "docmae/metrics.hpp"
#include "docmae/synth.hpp"

namespace docmae {

struct ManifestEntry {
  std::string id;
  std::size_t index = 0;
  std::size_t attempts = 1;
  std::uint64_t background_seed = 0;
  PageSpec page;
  WarpSpec warp;
  double roundtrip_mae = 0.0;
  std::string annotation;
};

std::string sample_id(std::size_t index);
void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const fs::path& path);

struct GenDataReport {
  std::vector<ManifestEntry> entries;
  std::size_t spot_checked = 0;
};

// Writes cfg.count samples derived from cfg.seed. Every tenth sample is read
// back from disk and its round-trip certificate re-verified.
GenDataReport cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir);

struct CorpusSample {
  std::string id;
  Tensor distorted;
  Tensor clean;
  Tensor mask;
  FlowField flow;
  std::string annotation;
};

// ValidationError when the files disagree with the manifest or with the
// expected extents (when given).
std::vector<CorpusSample> load_corpus(const fs::path& dir, std::size_t height = 0, std::size_t width = 0);

struct TrainOptions {
  std::optional<fs::path> resume;                // checkpoint written by an earlier run
  std::optional<std::size_t> halt_after_epochs;  // stop early (to exercise resume)
  bool verbose = true;
};

struct TrainResult {
  double initial_loss = 0.0;  // mean over the first epoch
  double final_loss = 0.0;    // mean over the last epoch run
  std::size_t epochs_done = 0;
  std::size_t trace_rows = 0;
  fs::path checkpoint;
};

// Stage 1. Writes out_dir/mae.ckpt, loss.csv and config.txt.
TrainResult cmd_pretrain(const RunConfig& cfg, const fs::path& corpus_dir, const fs::path& out_dir,
                         const TrainOptions& opts = {});

// Stage 2. The encoder comes from `pretrained` unless cfg.from_scratch.
// Writes out_dir/rect.ckpt, loss.csv and config.txt.
TrainResult cmd_finetune(const RunConfig& cfg, const fs::path& corpus_dir, const std::optional<fs::path>& pretrained,
                         const fs::path& out_dir, const TrainOptions& opts = {});

struct RectifyReport {
  std::size_t written = 0;
  std::vector<std::string> failures;  // "path: message"
};

// `input` is a corpus directory or a single PPM. Without a mask file next to
// the image the mask comes from threshold_segment.
RectifyReport cmd_rectify(const fs::path& checkpoint, const fs::path& input, const fs::path& out_dir);

struct EvalRow {
  std::string id;
  double ms_ssim = 0.0;
  double ld_epe = 0.0;
  std::optional<double> ed;
  std::optional<double> cer;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<std::string> missing;
  MetricsReport mean;
  std::size_t ms_ssim_scales = 0;
};

// Scores <id>_rectified.ppm / <id>_flow.flo in pred_dir against the corpus
// and writes a CSV report. Throws ValidationError after writing the report
// when more than 10% of the pairs are missing.
EvalReport cmd_eval(const fs::path& pred_dir, const fs::path& corpus_dir, const fs::path& report_path);

// Writes <id>_masked.ppm, <id>_reconstruction.ppm, <id>_target.ppm for the
// first `count` corpus samples.
std::size_t cmd_demo_reconstruct(const fs::path& checkpoint, const fs::path& corpus_dir, const fs::path& out_dir,
                                 std::size_t count, std::uint64_t mask_seed, std::optional<double> mask_ratio);

// Checkpoint assembly, shared with the Python bindings and tests.
Checkpoint make_checkpoint(const std::string& kind, const RunConfig& cfg, const NamedTensors& params,
                           const AdamState* opt = nullptr);
RunConfig checkpoint_config(const Checkpoint& ckpt);
// Copies every tensor of `params` from the checkpoint (CompatibilityError on a
// missing name or a shape mismatch).
void load_parameters(const Checkpoint& ckpt, const NamedTensors& params, const std::string& prefix = "");
MaeModel load_mae(const Checkpoint& ckpt);
RectModel load_rect(const Checkpoint& ckpt);

}  // namespace docmae
