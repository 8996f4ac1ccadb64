#include "docmae/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "docmae/errors.hpp"

namespace docmae {

namespace {

constexpr std::uint64_t kPretrainStream = 0x7072657472;
constexpr std::uint64_t kFinetuneStream = 0x66696e6574;
constexpr std::uint64_t kMaskStream = 0x6d61736b;

const char* const kManifestColumns[] = {
    "id",          "index",         "attempts",       "background_seed",  "height",           "width",
    "page_seed",   "line_count",    "line_thickness", "margin",           "border_thickness", "ink",
    "paper",       "warp_seed",     "warp_margin",    "homography",       "fold_amplitude_0", "fold_amplitude_1",
    "fold_frequency_0", "fold_frequency_1", "bump_count", "bump_amplitude", "bump_sigma",  "roundtrip_mae",
    "annotation"};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::uint64_t to_u64(const std::map<std::string, std::string>& row, const std::string& key) {
  try {
    return std::stoull(row.at(key));
  } catch (const std::exception&) {
    throw ValidationError("manifest: bad or missing '" + key + "'");
  }
}

double to_double(const std::map<std::string, std::string>& row, const std::string& key) {
  try {
    return std::stod(row.at(key));
  } catch (const std::exception&) {
    throw ValidationError("manifest: bad or missing '" + key + "'");
  }
}

void log(bool verbose, const std::string& line) {
  if (verbose) std::cerr << line << "\n";
}

std::size_t steps_per_epoch(std::size_t samples, std::size_t batch) { return (samples + batch - 1) / batch; }

// Resumable training bookkeeping shared by both stages.
struct TrainingState {
  std::size_t epochs_done = 0;
  std::string trace = "epoch,step,global_step,lr,loss\n";
  std::size_t trace_rows = 0;
  std::vector<double> epoch_means;
};

void store_adam(Checkpoint& ckpt, const NamedTensors& params, const AdamState& opt) {
  if (opt.m.empty()) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& shape = params[i].second.shape();
    ckpt.tensors.emplace_back("adam.m/" + params[i].first, Tensor(shape, opt.m[i]));
    ckpt.tensors.emplace_back("adam.v/" + params[i].first, Tensor(shape, opt.v[i]));
  }
}

void restore_adam(const Checkpoint& ckpt, const NamedTensors& params, AdamState& opt) {
  opt = AdamState{};
  opt.step = std::stoll(ckpt.get("adam_step"));
  if (opt.step == 0) return;
  for (const auto& [name, t] : params) {
    const Tensor* m = ckpt.find("adam.m/" + name);
    const Tensor* v = ckpt.find("adam.v/" + name);
    if (!m || !v || m->shape() != t.shape() || v->shape() != t.shape()) {
      throw CompatibilityError("checkpoint optimiser state missing or mis-shaped for " + name);
    }
    opt.m.emplace_back(m->data().begin(), m->data().end());
    opt.v.emplace_back(v->data().begin(), v->data().end());
  }
}

Checkpoint training_checkpoint(const std::string& kind, const RunConfig& cfg, const NamedTensors& params,
                               const AdamState& opt, const TrainingState& st) {
  Checkpoint ckpt = make_checkpoint(kind, cfg, params, &opt);
  ckpt.meta["epochs_done"] = std::to_string(st.epochs_done);
  ckpt.meta["trace"] = st.trace;
  std::string means;
  for (double m : st.epoch_means) means += format_double(m) + "\n";
  ckpt.meta["epoch_means"] = means;
  return ckpt;
}

TrainingState resume_state(const Checkpoint& ckpt, const std::string& kind, const RunConfig& cfg) {
  if (ckpt.get("kind") != kind) throw ValidationError("resume: expected a " + kind + " checkpoint");
  if (ckpt.get("config") != echo(cfg)) {
    throw ValidationError("resume: checkpoint configuration differs from the current run");
  }
  TrainingState st;
  st.epochs_done = std::stoul(ckpt.get("epochs_done"));
  st.trace = ckpt.get("trace");
  st.trace_rows = std::size_t(std::count(st.trace.begin(), st.trace.end(), '\n')) - 1;
  std::istringstream means(ckpt.get("epoch_means"));
  for (std::string line; std::getline(means, line);)
    if (!line.empty()) st.epoch_means.push_back(std::stod(line));
  return st;
}

void append_trace(TrainingState& st, std::size_t epoch, std::size_t step, std::int64_t global, double lr,
                  double loss) {
  st.trace += std::to_string(epoch) + "," + std::to_string(step) + "," + std::to_string(global) + "," +
              format_double(lr) + "," + format_double(loss) + "\n";
  ++st.trace_rows;
}

TrainResult finish(const TrainingState& st, const fs::path& ckpt_path) {
  TrainResult r;
  r.epochs_done = st.epochs_done;
  r.trace_rows = st.trace_rows;
  r.checkpoint = ckpt_path;
  if (!st.epoch_means.empty()) {
    r.initial_loss = st.epoch_means.front();
    r.final_loss = st.epoch_means.back();
  }
  return r;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t stream, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {stream, epoch}));
  rng.shuffle(order);
  return order;
}

Tensor ones_mask(std::size_t h, std::size_t w) { return Tensor::ones({h, w, 1}); }

}  // namespace

// ---- manifest and corpus -----------------------------------------------------

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%06zu", index);
  return buf;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const char* col : kManifestColumns) text += std::string(text.empty() ? "" : ",") + col;
  text += "\n";
  for (const auto& e : entries) {
    const PageSpec& p = e.page;
    const WarpSpec& w = e.warp;
    const std::vector<std::string> fields = {e.id,
                                             std::to_string(e.index),
                                             std::to_string(e.attempts),
                                             std::to_string(e.background_seed),
                                             std::to_string(p.height),
                                             std::to_string(p.width),
                                             std::to_string(p.seed),
                                             std::to_string(p.line_count),
                                             std::to_string(p.line_thickness),
                                             std::to_string(p.margin),
                                             std::to_string(p.border_thickness),
                                             format_double(p.ink),
                                             format_double(p.paper),
                                             std::to_string(w.seed),
                                             format_double(w.margin),
                                             format_double(w.homography),
                                             format_double(w.fold_amplitude[0]),
                                             format_double(w.fold_amplitude[1]),
                                             format_double(w.fold_frequency[0]),
                                             format_double(w.fold_frequency[1]),
                                             std::to_string(w.bump_count),
                                             format_double(w.bump_amplitude),
                                             format_double(w.bump_sigma),
                                             format_double(e.roundtrip_mae),
                                             e.annotation};
    for (std::size_t i = 0; i < fields.size(); ++i) text += (i ? "," : "") + fields[i];
    text += "\n";
  }
  write_text(path, text);
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::vector<ManifestEntry> out;
  for (const auto& row : read_csv(path)) {
    ManifestEntry e;
    e.id = row.at("id");
    if (e.id.empty()) throw ValidationError("manifest: empty sample id in " + path.string());
    e.index = to_u64(row, "index");
    e.attempts = to_u64(row, "attempts");
    e.background_seed = to_u64(row, "background_seed");
    e.page.height = to_u64(row, "height");
    e.page.width = to_u64(row, "width");
    e.page.seed = to_u64(row, "page_seed");
    e.page.line_count = to_u64(row, "line_count");
    e.page.line_thickness = to_u64(row, "line_thickness");
    e.page.margin = to_u64(row, "margin");
    e.page.border_thickness = to_u64(row, "border_thickness");
    e.page.ink = to_double(row, "ink");
    e.page.paper = to_double(row, "paper");
    e.warp.seed = to_u64(row, "warp_seed");
    e.warp.margin = to_double(row, "warp_margin");
    e.warp.homography = to_double(row, "homography");
    e.warp.fold_amplitude = {to_double(row, "fold_amplitude_0"), to_double(row, "fold_amplitude_1")};
    e.warp.fold_frequency = {to_double(row, "fold_frequency_0"), to_double(row, "fold_frequency_1")};
    e.warp.bump_count = to_u64(row, "bump_count");
    e.warp.bump_amplitude = to_double(row, "bump_amplitude");
    e.warp.bump_sigma = to_double(row, "bump_sigma");
    e.roundtrip_mae = to_double(row, "roundtrip_mae");
    e.annotation = row.at("annotation");
    out.push_back(std::move(e));
  }
  return out;
}

GenDataReport cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  ensure_dir(out_dir);
  GenDataReport report;
  for (std::size_t i = 0; i < cfg.count; ++i) {
    std::size_t attempts = 0;
    SyntheticSample s = gen_indexed_sample(cfg.seed, i, cfg.height, cfg.width, &attempts);
    ManifestEntry e{sample_id(i), i, attempts, s.background_seed, s.page, s.warp, s.certificate.roundtrip_mae,
                    s.annotation};
    const fs::path base = out_dir / e.id;
    write_ppm(base.string() + "_distorted.ppm", s.distorted);
    write_ppm(base.string() + "_clean.ppm", s.clean);
    write_ppm(base.string() + "_mask.ppm", s.mask);
    write_flo(base.string() + "_flow.flo", s.gt_flow);
    if (i % 10 == 0) {
      // Re-verify from the files actually written.
      const Certificate c = check_roundtrip(read_ppm(base.string() + "_clean.ppm"),
                                            read_ppm(base.string() + "_distorted.ppm"),
                                            read_mask_ppm(base.string() + "_mask.ppm"),
                                            read_flo(base.string() + "_flow.flo"));
      if (!c.passed) {
        throw CertificateError("gen-data: spot check failed for " + e.id + " (round trip " +
                               std::to_string(c.roundtrip_mae) + ")");
      }
      ++report.spot_checked;
    }
    report.entries.push_back(std::move(e));
  }
  write_manifest(out_dir / "manifest.csv", report.entries);
  write_text(out_dir / "config.txt", echo(cfg));
  return report;
}

std::vector<CorpusSample> load_corpus(const fs::path& dir, std::size_t height, std::size_t width) {
  const auto entries = read_manifest(dir / "manifest.csv");
  std::vector<CorpusSample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if ((height && e.page.height != height) || (width && e.page.width != width)) {
      throw ValidationError("corpus " + dir.string() + ": sample " + e.id + " is " + std::to_string(e.page.height) +
                            "x" + std::to_string(e.page.width) + ", config expects " + std::to_string(height) + "x" +
                            std::to_string(width));
    }
    const std::string base = (dir / e.id).string();
    CorpusSample s{e.id,
                   read_ppm(base + "_distorted.ppm"),
                   read_ppm(base + "_clean.ppm"),
                   read_mask_ppm(base + "_mask.ppm"),
                   read_flo(base + "_flow.flo"),
                   e.annotation};
    const Shape want{e.page.height, e.page.width, 3};
    if (s.distorted.shape() != want || s.clean.shape() != want || s.mask.size(0) != want[0] ||
        s.mask.size(1) != want[1] || s.flow.height() != want[0] || s.flow.width() != want[1]) {
      throw ValidationError("corpus " + dir.string() + ": files of " + e.id + " disagree with the manifest extents");
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---- checkpoints ---------------------------------------------------------------

Checkpoint make_checkpoint(const std::string& kind, const RunConfig& cfg, const NamedTensors& params,
                           const AdamState* opt) {
  Checkpoint ckpt;
  ckpt.meta["format"] = "docmae";
  ckpt.meta["kind"] = kind;
  ckpt.meta["config"] = echo(cfg);
  ckpt.meta["adam_step"] = std::to_string(opt ? opt->step : 0);
  for (const auto& [name, t] : params) ckpt.tensors.emplace_back(name, t.detach());
  if (opt) store_adam(ckpt, params, *opt);
  return ckpt;
}

RunConfig checkpoint_config(const Checkpoint& ckpt) { return parse_echo(ckpt.get("config")); }

void load_parameters(const Checkpoint& ckpt, const NamedTensors& params, const std::string& prefix) {
  for (const auto& [name, t] : params) {
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
    const Tensor* src = ckpt.find(name);
    if (!src) throw CompatibilityError("checkpoint is missing tensor " + name);
    if (src->shape() != t.shape()) {
      throw CompatibilityError("tensor " + name + " has shape " + shape_str(src->shape()) + " in the checkpoint, " +
                               shape_str(t.shape()) + " in the model");
    }
    Tensor dst = t;
    std::copy(src->data().begin(), src->data().end(), dst.data().begin());
  }
}

MaeModel load_mae(const Checkpoint& ckpt) {
  if (ckpt.get("kind") != "mae") throw ValidationError("expected a pre-training (mae) checkpoint");
  MaeModel model = MaeModel::init(model_config(checkpoint_config(ckpt)), 0);
  load_parameters(ckpt, model.named_parameters());
  return model;
}

RectModel load_rect(const Checkpoint& ckpt) {
  if (ckpt.get("kind") != "rect") throw ValidationError("expected a rectifier (rect) checkpoint");
  RectModel model = RectModel::init(model_config(checkpoint_config(ckpt)), 0);
  load_parameters(ckpt, model.named_parameters());
  return model;
}

// ---- training ------------------------------------------------------------------

TrainResult cmd_pretrain(const RunConfig& cfg, const fs::path& corpus_dir, const fs::path& out_dir,
                         const TrainOptions& opts) {
  const ModelConfig mc = model_config(cfg);
  const auto corpus = load_corpus(corpus_dir, cfg.height, cfg.width);
  if (corpus.empty()) throw ValidationError("pretrain: corpus " + corpus_dir.string() + " is empty");
  ensure_dir(out_dir);
  write_text(out_dir / "config.txt", echo(cfg));
  std::vector<Tensor> images;
  for (const auto& s : corpus) images.push_back(background_exclude(s.distorted, s.mask));

  MaeModel model = MaeModel::init(mc, derive_seed(cfg.seed, {kPretrainStream}));
  const NamedTensors named = model.named_parameters();
  AdamState opt;
  TrainingState st;
  if (opts.resume) {
    const Checkpoint ckpt = load_checkpoint(*opts.resume);
    st = resume_state(ckpt, "mae", cfg);
    load_parameters(ckpt, named);
    restore_adam(ckpt, named, opt);
  }
  const std::size_t spe = steps_per_epoch(images.size(), cfg.batch_size);
  const OneCycleSchedule sched{cfg.max_lr, std::int64_t(std::max<std::size_t>(1, cfg.pretrain_epochs * spe)),
                               cfg.warmup_fraction};
  const fs::path ckpt_path = out_dir / "mae.ckpt";
  std::size_t run = 0;
  for (std::size_t epoch = st.epochs_done; epoch < cfg.pretrain_epochs; ++epoch) {
    const auto order = epoch_order(images.size(), cfg.seed, kPretrainStream, epoch);
    double total = 0;
    for (std::size_t step = 0; step < spe; ++step) {
      PretrainBatch batch;
      for (std::size_t j = step * cfg.batch_size; j < std::min(images.size(), (step + 1) * cfg.batch_size); ++j) {
        batch.images.push_back(images[order[j]]);
        batch.plans.push_back(
            make_mask_plan(mc.geometry.count(), cfg.mask_ratio, derive_seed(cfg.seed, {kMaskStream, epoch, step, j})));
      }
      const auto global = std::int64_t(epoch * spe + step);
      const double loss = pretrain_step(model, batch, opt, sched, global);
      append_trace(st, epoch, step, global, one_cycle_lr(sched, global), loss);
      total += loss;
    }
    st.epoch_means.push_back(total / double(spe));
    st.epochs_done = epoch + 1;
    save_checkpoint(ckpt_path, training_checkpoint("mae", cfg, named, opt, st));
    write_text(out_dir / "loss.csv", st.trace);
    log(opts.verbose, "pretrain epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.pretrain_epochs) +
                          " loss " + format_double(st.epoch_means.back()));
    if (opts.halt_after_epochs && ++run >= *opts.halt_after_epochs) break;
  }
  if (st.epochs_done == 0 || cfg.pretrain_epochs == 0) {
    save_checkpoint(ckpt_path, training_checkpoint("mae", cfg, named, opt, st));
    write_text(out_dir / "loss.csv", st.trace);
  }
  return finish(st, ckpt_path);
}

TrainResult cmd_finetune(const RunConfig& cfg, const fs::path& corpus_dir, const std::optional<fs::path>& pretrained,
                         const fs::path& out_dir, const TrainOptions& opts) {
  const ModelConfig mc = model_config(cfg);
  if (!cfg.from_scratch && !pretrained && !opts.resume) {
    throw ValidationError("finetune: a pre-trained checkpoint is required unless from_scratch is set");
  }
  const auto corpus = load_corpus(corpus_dir, cfg.height, cfg.width);
  if (corpus.empty()) throw ValidationError("finetune: corpus " + corpus_dir.string() + " is empty");
  ensure_dir(out_dir);
  write_text(out_dir / "config.txt", echo(cfg));
  std::vector<Tensor> images;
  for (const auto& s : corpus) images.push_back(background_exclude(s.distorted, s.mask));

  RectModel model = RectModel::init(mc, derive_seed(cfg.seed, {kFinetuneStream}));
  const NamedTensors named = model.named_parameters();
  AdamState opt;
  TrainingState st;
  if (opts.resume) {
    const Checkpoint ckpt = load_checkpoint(*opts.resume);
    st = resume_state(ckpt, "rect", cfg);
    load_parameters(ckpt, named);
    restore_adam(ckpt, named, opt);
  } else if (!cfg.from_scratch) {
    const Checkpoint ckpt = load_checkpoint(*pretrained);
    load_parameters(ckpt, named, "encoder.");
  }
  model.set_encoder_trainable(!cfg.freeze_encoder);

  const std::size_t spe = steps_per_epoch(images.size(), cfg.batch_size);
  const OneCycleSchedule sched{cfg.max_lr, std::int64_t(std::max<std::size_t>(1, cfg.finetune_epochs * spe)),
                               cfg.warmup_fraction};
  const fs::path ckpt_path = out_dir / "rect.ckpt";
  std::size_t run = 0;
  for (std::size_t epoch = st.epochs_done; epoch < cfg.finetune_epochs; ++epoch) {
    const auto order = epoch_order(images.size(), cfg.seed, kFinetuneStream, epoch);
    double total = 0;
    for (std::size_t step = 0; step < spe; ++step) {
      FinetuneBatch batch;
      for (std::size_t j = step * cfg.batch_size; j < std::min(images.size(), (step + 1) * cfg.batch_size); ++j) {
        batch.images.push_back(images[order[j]]);
        batch.flows.push_back(corpus[order[j]].flow);
      }
      const auto global = std::int64_t(epoch * spe + step);
      const double loss = finetune_step(model, batch, opt, sched, global, cfg.freeze_encoder);
      append_trace(st, epoch, step, global, one_cycle_lr(sched, global), loss);
      total += loss;
    }
    st.epoch_means.push_back(total / double(spe));
    st.epochs_done = epoch + 1;
    save_checkpoint(ckpt_path, training_checkpoint("rect", cfg, named, opt, st));
    write_text(out_dir / "loss.csv", st.trace);
    log(opts.verbose, "finetune epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.finetune_epochs) +
                          " loss " + format_double(st.epoch_means.back()));
    if (opts.halt_after_epochs && ++run >= *opts.halt_after_epochs) break;
  }
  if (st.epochs_done == 0 || cfg.finetune_epochs == 0) {
    save_checkpoint(ckpt_path, training_checkpoint("rect", cfg, named, opt, st));
    write_text(out_dir / "loss.csv", st.trace);
  }
  return finish(st, ckpt_path);
}

// ---- inference and evaluation ----------------------------------------------------

RectifyReport cmd_rectify(const fs::path& checkpoint, const fs::path& input, const fs::path& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const RectModel model = load_rect(ckpt);
  ensure_dir(out_dir);
  write_text(out_dir / "rectify_config.txt", ckpt.get("config"));

  struct Job {
    std::string id;
    fs::path image;
    std::optional<fs::path> mask;
  };
  std::vector<Job> jobs;
  if (fs::is_directory(input)) {
    for (const auto& e : read_manifest(input / "manifest.csv")) {
      jobs.push_back({e.id, input / (e.id + "_distorted.ppm"), input / (e.id + "_mask.ppm")});
    }
  } else {
    std::string id = input.stem().string();
    const std::string suffix = "_distorted";
    if (id.size() > suffix.size() && id.compare(id.size() - suffix.size(), suffix.size(), suffix) == 0) {
      id.resize(id.size() - suffix.size());
    }
    const fs::path mask = input.parent_path() / (id + "_mask.ppm");
    jobs.push_back({id, input, fs::exists(mask) ? std::optional<fs::path>(mask) : std::nullopt});
  }

  RectifyReport report;
  for (const Job& job : jobs) {
    try {
      const Tensor image = read_ppm(job.image);
      const Tensor mask = job.mask ? read_mask_ppm(*job.mask) : threshold_segment(image);
      const Rectified r = rectify(model, image, mask);
      write_ppm(out_dir / (job.id + "_rectified.ppm"), r.image);
      write_flo(out_dir / (job.id + "_flow.flo"), r.flow);
      ++report.written;
    } catch (const Error& e) {
      report.failures.push_back(job.image.string() + ": " + e.what());
      std::cerr << "rectify: " << job.image.string() << ": " << e.what() << "\n";
    }
  }
  return report;
}

EvalReport cmd_eval(const fs::path& pred_dir, const fs::path& corpus_dir, const fs::path& report_path) {
  const auto entries = read_manifest(corpus_dir / "manifest.csv");
  EvalReport report;
  for (const auto& e : entries) {
    const fs::path rect = pred_dir / (e.id + "_rectified.ppm");
    const fs::path flow = pred_dir / (e.id + "_flow.flo");
    if (!fs::exists(rect) || !fs::exists(flow)) {
      report.missing.push_back(e.id);
      continue;
    }
    const std::string base = (corpus_dir / e.id).string();
    const Tensor clean = read_ppm(base + "_clean.ppm");
    const Tensor rectified = read_ppm(rect);
    const FlowField gt = read_flo(base + "_flow.flo");
    const FlowField pred = read_flo(flow);
    EvalRow row;
    row.id = e.id;
    const MsSsimResult ms = ms_ssim_detail(rectified, clean);
    report.ms_ssim_scales = ms.scales;
    row.ms_ssim = ms.value;
    row.ld_epe = ld_epe(pred, gt, ones_mask(gt.height(), gt.width()));
    if (!e.annotation.empty()) {
      const EditResult ed = edit_distance(line_pattern_string(rectified), e.annotation);
      row.ed = double(ed.ed);
      row.cer = cer(ed, e.annotation.size());
    }
    report.rows.push_back(std::move(row));
  }

  auto field = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string text = "id,ms_ssim_gray_" + std::to_string(report.ms_ssim_scales) + "scale,ld_epe,ed,cer\n";
  double sum_ms = 0, sum_epe = 0, sum_ed = 0, sum_cer = 0;
  std::size_t n_ed = 0;
  for (const auto& r : report.rows) {
    text += r.id + "," + format_double(r.ms_ssim) + "," + format_double(r.ld_epe) + "," + field(r.ed) + "," +
            field(r.cer) + "\n";
    sum_ms += r.ms_ssim;
    sum_epe += r.ld_epe;
    if (r.ed) {
      sum_ed += *r.ed;
      sum_cer += *r.cer;
      ++n_ed;
    }
  }
  report.mean.samples = report.rows.size();
  if (!report.rows.empty()) {
    report.mean.ms_ssim = sum_ms / double(report.rows.size());
    report.mean.ld_epe = sum_epe / double(report.rows.size());
  }
  if (n_ed) {
    report.mean.ed = sum_ed / double(n_ed);
    report.mean.cer = sum_cer / double(n_ed);
  }
  text += "mean," + field(report.mean.ms_ssim) + "," + field(report.mean.ld_epe) + "," + field(report.mean.ed) + "," +
          field(report.mean.cer) + "\n";
  if (!report_path.parent_path().empty()) ensure_dir(report_path.parent_path());
  write_text(report_path, text);

  for (const auto& id : report.missing) std::cerr << "eval: missing prediction for " << id << "\n";
  if (!entries.empty() && double(report.missing.size()) > 0.1 * double(entries.size())) {
    throw ValidationError("eval: " + std::to_string(report.missing.size()) + " of " + std::to_string(entries.size()) +
                          " predictions missing");
  }
  return report;
}

std::size_t cmd_demo_reconstruct(const fs::path& checkpoint, const fs::path& corpus_dir, const fs::path& out_dir,
                                 std::size_t count, std::uint64_t mask_seed, std::optional<double> mask_ratio) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const MaeModel model = load_mae(ckpt);
  const RunConfig cfg = checkpoint_config(ckpt);
  const double ratio = mask_ratio.value_or(cfg.mask_ratio);
  const auto corpus = load_corpus(corpus_dir, cfg.height, cfg.width);
  ensure_dir(out_dir);
  std::size_t written = 0;
  for (std::size_t i = 0; i < std::min(count, corpus.size()); ++i) {
    const auto& s = corpus[i];
    const MaskPlan plan =
        make_mask_plan(model.config.geometry.count(), ratio, derive_seed(mask_seed, {kMaskStream, i}));
    const DemoTriple t = reconstruct_demo(model, background_exclude(s.distorted, s.mask), plan);
    write_ppm(out_dir / (s.id + "_masked.ppm"), t.masked_input);
    write_ppm(out_dir / (s.id + "_reconstruction.ppm"), t.composite);
    write_ppm(out_dir / (s.id + "_target.ppm"), t.target);
    ++written;
  }
  return written;
}

}  // namespace docmae
