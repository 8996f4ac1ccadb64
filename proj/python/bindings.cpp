// Python bindings. Arrays cross the boundary as float32 numpy copies in the
// library's [H, W, C] layout.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "docmae/config.hpp"
#include "docmae/errors.hpp"
#include "docmae/metrics.hpp"
#include "docmae/pipeline.hpp"

namespace py = pybind11;
using namespace docmae;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  std::vector<Scalar> values(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(values));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

FlowField to_flow(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 2) throw DimensionError("flow must have shape [H, W, 2]");
  return FlowField{to_tensor(a)};
}

py::dict plan_dict(const MaskPlan& p) {
  py::dict d;
  d["ratio"] = p.ratio;
  d["keep"] = p.keep;
  d["masked"] = p.masked;
  d["restore"] = p.restore;
  d["seed"] = p.seed;
  return d;
}

py::dict config_dict(const RunConfig& c) {
  py::dict d;
  std::istringstream lines(echo(c));
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) d[py::str(line.substr(0, eq))] = line.substr(eq + 3);
  }
  return d;
}

RunConfig make_config(const std::string& preset, const py::dict& overrides) {
  RunConfig c = preset_config(preset);
  for (const auto& [k, v] : overrides) {
    const std::string value = py::isinstance<py::bool_>(v) ? (v.cast<bool>() ? "true" : "false") : std::string(py::str(v));
    apply_setting(c, py::str(k), value);
  }
  validate(c);
  return c;
}

}  // namespace

PYBIND11_MODULE(_docmae, m) {
  m.doc() = "Masked-autoencoder pre-training and flow-based document rectification";

  static py::exception<Error> base(m, "DocmaeError");
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<GeometryError> geometry(m, "GeometryError", base.ptr());
  static py::exception<DimensionError> dimension(m, "DimensionError", base.ptr());
  static py::exception<CompatibilityError> compat(m, "CompatibilityError", base.ptr());
  static py::exception<IoError> io(m, "IoError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const GeometryError& e) {
      py::set_error(geometry, e.what());
    } catch (const DimensionError& e) {
      py::set_error(dimension, e.what());
    } catch (const CompatibilityError& e) {
      py::set_error(compat, e.what());
    } catch (const IoError& e) {
      py::set_error(io, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  // Patch ops.
  m.def("patchify", [](const Array& image, std::size_t patch) { return to_array(patchify(to_tensor(image), patch).rows); },
        py::arg("image"), py::arg("patch"));
  m.def(
      "unpatchify",
      [](const Array& rows, std::size_t height, std::size_t width, std::size_t patch) {
        return to_array(unpatchify(PatchSequence{PatchGeometry::make(height, width, patch), to_tensor(rows)}));
      },
      py::arg("rows"), py::arg("height"), py::arg("width"), py::arg("patch"));
  m.def("make_mask_plan", [](std::size_t n, double ratio, std::uint64_t seed) { return plan_dict(make_mask_plan(n, ratio, seed)); },
        py::arg("n"), py::arg("ratio"), py::arg("seed"));
  m.def("visible_count", &visible_count, py::arg("n"), py::arg("ratio"));

  // Warping.
  m.def("bilinear_warp", [](const Array& image, const Array& disp) { return to_array(bilinear_warp(to_tensor(image), to_tensor(disp))); },
        py::arg("image"), py::arg("disp"));
  m.def(
      "convex_upsample",
      [](const Array& coarse, const Array& logits, std::size_t patch) {
        return to_array(convex_upsample(to_tensor(coarse), to_tensor(logits), patch));
      },
      py::arg("coarse"), py::arg("logits"), py::arg("patch"));
  m.def("background_exclude", [](const Array& image, const Array& mask) { return to_array(background_exclude(to_tensor(image), to_tensor(mask))); },
        py::arg("image"), py::arg("mask"));

  // Synthetic data.
  m.def(
      "gen_sample",
      [](std::uint64_t corpus_seed, std::size_t index, std::size_t height, std::size_t width) {
        const SyntheticSample s = gen_indexed_sample(corpus_seed, index, height, width);
        py::dict d;
        d["clean"] = to_array(s.clean);
        d["distorted"] = to_array(s.distorted);
        d["mask"] = to_array(s.mask);
        d["flow"] = to_array(s.gt_flow.disp);
        d["annotation"] = s.annotation;
        d["roundtrip_mae"] = s.certificate.roundtrip_mae;
        d["max_residual"] = s.certificate.max_residual;
        return d;
      },
      py::arg("corpus_seed"), py::arg("index"), py::arg("height") = 96, py::arg("width") = 96);
  m.def("threshold_segment", [](const Array& image) { return to_array(threshold_segment(to_tensor(image))); },
        py::arg("image"));
  m.def("line_pattern_string", [](const Array& image) { return line_pattern_string(to_tensor(image)); },
        py::arg("image"));

  // Metrics.
  m.def("ms_ssim", [](const Array& a, const Array& b) { return ms_ssim(to_tensor(a), to_tensor(b)); }, py::arg("a"),
        py::arg("b"));
  m.def(
      "edit_distance",
      [](const std::string& pred, const std::string& target) {
        const EditResult r = edit_distance(pred, target);
        py::dict d;
        d["ed"] = r.ed;
        d["deletions"] = r.deletions;
        d["insertions"] = r.insertions;
        d["substitutions"] = r.substitutions;
        return d;
      },
      py::arg("pred"), py::arg("target"));
  m.def(
      "cer", [](const std::string& pred, const std::string& target) { return cer(edit_distance(pred, target), target.size()); },
      py::arg("pred"), py::arg("target"));
  m.def(
      "ld_epe",
      [](const Array& pred, const Array& gt, const Array& mask) {
        return ld_epe(to_flow(pred), to_flow(gt), to_tensor(mask));
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask"));

  // Files.
  m.def("read_ppm", [](const fs::path& p) { return to_array(read_ppm(p)); }, py::arg("path"));
  m.def("write_ppm", [](const fs::path& p, const Array& image) { write_ppm(p, to_tensor(image)); }, py::arg("path"),
        py::arg("image"));
  m.def("read_flo", [](const fs::path& p) { return to_array(read_flo(p).disp); }, py::arg("path"));
  m.def("write_flo", [](const fs::path& p, const Array& flow) { write_flo(p, to_flow(flow)); }, py::arg("path"),
        py::arg("flow"));
  m.def(
      "checkpoint_info",
      [](const fs::path& p) {
        const Checkpoint ck = load_checkpoint(p);
        py::dict d;
        d["meta"] = ck.meta;
        py::dict shapes;
        for (const auto& [name, t] : ck.tensors) shapes[py::str(name)] = t.shape();
        d["tensors"] = shapes;
        return d;
      },
      py::arg("path"));

  // Configuration and commands. Overrides use the config-file keys.
  m.def("preset_config", [](const std::string& preset, const py::dict& overrides) { return config_dict(make_config(preset, overrides)); },
        py::arg("preset") = "desk", py::arg("overrides") = py::dict());
  m.def(
      "gen_data",
      [](const fs::path& out, const std::string& preset, const py::dict& overrides) {
        return cmd_gen_data(make_config(preset, overrides), out).entries.size();
      },
      py::arg("out"), py::arg("preset") = "desk", py::arg("overrides") = py::dict());
  m.def(
      "pretrain",
      [](const fs::path& corpus, const fs::path& out, const std::string& preset, const py::dict& overrides) {
        TrainOptions quiet;
        quiet.verbose = false;
        const RunConfig cfg = make_config(preset, overrides);
        py::gil_scoped_release release;
        return cmd_pretrain(cfg, corpus, out, quiet).final_loss;
      },
      py::arg("corpus"), py::arg("out"), py::arg("preset") = "desk", py::arg("overrides") = py::dict());
  m.def(
      "finetune",
      [](const fs::path& corpus, const std::optional<fs::path>& checkpoint, const fs::path& out,
         const std::string& preset, const py::dict& overrides) {
        TrainOptions quiet;
        quiet.verbose = false;
        const RunConfig cfg = make_config(preset, overrides);
        py::gil_scoped_release release;
        return cmd_finetune(cfg, corpus, checkpoint, out, quiet).final_loss;
      },
      py::arg("corpus"), py::arg("checkpoint"), py::arg("out"), py::arg("preset") = "desk",
      py::arg("overrides") = py::dict());
  m.def(
      "rectify",
      [](const fs::path& checkpoint, const fs::path& input, const fs::path& out) {
        const RectifyReport r = cmd_rectify(checkpoint, input, out);
        py::dict d;
        d["written"] = r.written;
        d["failures"] = r.failures;
        return d;
      },
      py::arg("checkpoint"), py::arg("input"), py::arg("out"));
  m.def(
      "evaluate",
      [](const fs::path& pred, const fs::path& corpus, const fs::path& report) {
        const EvalReport r = cmd_eval(pred, corpus, report);
        py::dict d;
        d["samples"] = r.rows.size();
        d["ms_ssim"] = r.mean.ms_ssim;
        d["ld_epe"] = r.mean.ld_epe;
        d["ed"] = r.mean.ed;
        d["cer"] = r.mean.cer;
        d["missing"] = r.missing;
        return d;
      },
      py::arg("pred"), py::arg("corpus"), py::arg("report"));
}
