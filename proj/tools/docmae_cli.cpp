// docmae command-line driver.
//
// Exit codes: 0 ok, 2 validation, 3 numeric / poisoned state, 4 io.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "docmae/errors.hpp"
#include "docmae/pipeline.hpp"

namespace {

using namespace docmae;

enum Exit { kOk = 0, kValidation = 2, kNumeric = 3, kIo = 4 };

struct Options {
  std::string config_file;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<double> mask_ratio;
  bool freeze_encoder = false;
  bool from_scratch = false;
  std::string checkpoint;
  std::string out;
  std::string corpus;
  std::string input;
  std::string pred;
  std::vector<std::string> settings;
  std::optional<std::size_t> count;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> max_lr;
  std::string resume;
  std::optional<std::size_t> halt_after;
  bool quiet = false;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = preset_config(o.preset.empty() ? "desk" : o.preset);
  if (!o.config_file.empty()) apply_config_file(cfg, o.config_file);
  for (const auto& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.mask_ratio) cfg.mask_ratio = *o.mask_ratio;
  if (o.freeze_encoder) cfg.freeze_encoder = true;
  if (o.from_scratch) cfg.from_scratch = true;
  if (o.count) cfg.count = *o.count;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.max_lr) cfg.max_lr = *o.max_lr;
  if (!o.corpus.empty()) cfg.corpus = o.corpus;
  validate(cfg);
  return cfg;
}

fs::path require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ValidationError(flag + " is required for this command");
  return value;
}

TrainOptions train_options(const Options& o) {
  TrainOptions t;
  if (!o.resume.empty()) t.resume = fs::path(o.resume);
  t.halt_after_epochs = o.halt_after;
  t.verbose = !o.quiet;
  return t;
}

int run(const std::string& command, const Options& o) {
  RunConfig cfg = resolve(o);
  if (command == "gen-data") {
    const auto report = cmd_gen_data(cfg, require(o.out, "--out"));
    std::cout << "wrote " << report.entries.size() << " samples (" << report.spot_checked << " re-verified) to "
              << o.out << "\n";
  } else if (command == "pretrain") {
    if (o.epochs) cfg.pretrain_epochs = *o.epochs;
    const auto r = cmd_pretrain(cfg, require(cfg.corpus, "--corpus"), require(o.out, "--out"), train_options(o));
    std::cout << "pretrain: " << r.epochs_done << " epochs, loss " << r.initial_loss << " -> " << r.final_loss
              << ", checkpoint " << r.checkpoint.string() << "\n";
  } else if (command == "finetune") {
    if (o.epochs) cfg.finetune_epochs = *o.epochs;
    std::optional<fs::path> pretrained;
    if (!o.checkpoint.empty()) pretrained = fs::path(o.checkpoint);
    if (cfg.from_scratch && pretrained) std::cerr << "finetune: --from-scratch ignores --checkpoint\n";
    const auto r = cmd_finetune(cfg, require(cfg.corpus, "--corpus"), pretrained, require(o.out, "--out"),
                                train_options(o));
    std::cout << "finetune: " << r.epochs_done << " epochs, loss " << r.initial_loss << " -> " << r.final_loss
              << ", checkpoint " << r.checkpoint.string() << "\n";
  } else if (command == "rectify") {
    const fs::path input = o.input.empty() ? require(cfg.corpus, "--input or --corpus") : fs::path(o.input);
    const auto r = cmd_rectify(require(o.checkpoint, "--checkpoint"), input, require(o.out, "--out"));
    std::cout << "rectify: wrote " << r.written << " outputs, " << r.failures.size() << " failures\n";
    if (!r.failures.empty()) return kIo;
  } else if (command == "eval") {
    const fs::path pred = require(o.pred, "--pred");
    const fs::path report = o.out.empty() ? pred / "report.csv" : fs::path(o.out);
    const auto r = cmd_eval(pred, require(cfg.corpus, "--corpus"), report);
    std::cout << "eval: " << r.rows.size() << " samples";
    if (r.mean.ms_ssim) std::cout << ", ms_ssim " << *r.mean.ms_ssim << ", ld_epe " << *r.mean.ld_epe;
    if (r.mean.cer) std::cout << ", ed " << *r.mean.ed << ", cer " << *r.mean.cer;
    std::cout << ", report " << report.string() << "\n";
  } else if (command == "demo-reconstruct") {
    const auto n = cmd_demo_reconstruct(require(o.checkpoint, "--checkpoint"), require(cfg.corpus, "--corpus"),
                                        require(o.out, "--out"), o.count.value_or(4), cfg.seed, o.mask_ratio);
    std::cout << "demo-reconstruct: wrote " << n << " triples to " << o.out << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"docmae: masked-autoencoder pre-training and flow-based document rectification"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_file, "Flat key=value configuration file");
    sub->add_option("--preset", o.preset, "Named preset")->check(CLI::IsMember({"paper", "desk"}));
    sub->add_option("--seed", o.seed, "Run seed");
    sub->add_option("--mask-ratio", o.mask_ratio, "Fraction of masked patches");
    sub->add_flag("--freeze-encoder", o.freeze_encoder, "Keep the pre-trained encoder fixed");
    sub->add_flag("--from-scratch", o.from_scratch, "Skip loading the pre-trained encoder");
    sub->add_option("--checkpoint", o.checkpoint, "Input checkpoint");
    sub->add_option("--out", o.out, "Output directory (eval: report file)");
    sub->add_option("--corpus", o.corpus, "Corpus directory");
    sub->add_option("--set", o.settings, "Extra key=value overrides")->take_all();
    sub->add_option("--batch-size", o.batch_size, "Batch size");
    sub->add_option("--max-lr", o.max_lr, "Peak learning rate");
    sub->add_flag("--quiet", o.quiet, "No per-epoch progress lines");
  };
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  common(gen);
  gen->add_option("--count", o.count, "Number of samples");
  auto* pre = app.add_subcommand("pretrain", "Stage 1: masked reconstruction pre-training");
  auto* fin = app.add_subcommand("finetune", "Stage 2: flow rectifier fine-tuning");
  for (auto* sub : {pre, fin}) {
    common(sub);
    sub->add_option("--epochs", o.epochs, "Epoch count for this stage");
    sub->add_option("--resume", o.resume, "Resume from a checkpoint of this stage");
    sub->add_option("--halt-after-epochs", o.halt_after, "Stop after this many epochs in this invocation");
  }
  auto* rect = app.add_subcommand("rectify", "Rectify an image or a corpus");
  common(rect);
  rect->add_option("--input", o.input, "Distorted PPM or corpus directory");
  auto* ev = app.add_subcommand("eval", "Score rectified outputs against a corpus");
  common(ev);
  ev->add_option("--pred", o.pred, "Directory with rectified images and flows");
  auto* demo = app.add_subcommand("demo-reconstruct", "Write masked / reconstruction / target triples");
  common(demo);
  demo->add_option("--count", o.count, "Number of triples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const PoisonedStateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const InversionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const CertificateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
