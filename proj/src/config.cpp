#include "docmae/config.hpp"

#include <charconv>
#include <sstream>

#include "docmae/errors.hpp"
#include "docmae/io.hpp"

namespace docmae {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ValidationError("config: '" + key + "' expects a number, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ValidationError("config: '" + key + "' expects true or false, got '" + value + "'");
}

}  // namespace

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "desk") return c;
  if (name == "paper") {
    c.height = 288;
    c.width = 288;
    c.patch = 16;
    c.dim = 512;
    c.enc_depth = 6;
    c.dec_depth = 4;
    c.mask_ratio = 0.75;
    c.max_lr = 1e-4;
    c.pretrain_epochs = 65;
    c.finetune_epochs = 65;
    c.batch_size = 64;
    return c;
  }
  throw ValidationError("config: unknown preset '" + name + "' (expected paper or desk)");
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "preset") {
    c = preset_config(value);
  } else if (key == "height") {
    c.height = parse_number<std::size_t>(key, value);
  } else if (key == "width") {
    c.width = parse_number<std::size_t>(key, value);
  } else if (key == "patch") {
    c.patch = parse_number<std::size_t>(key, value);
  } else if (key == "dim") {
    c.dim = parse_number<std::size_t>(key, value);
  } else if (key == "heads") {
    c.heads = parse_number<std::size_t>(key, value);
  } else if (key == "enc_depth") {
    c.enc_depth = parse_number<std::size_t>(key, value);
  } else if (key == "dec_depth") {
    c.dec_depth = parse_number<std::size_t>(key, value);
  } else if (key == "mask_ratio") {
    c.mask_ratio = parse_number<double>(key, value);
  } else if (key == "max_lr") {
    c.max_lr = parse_number<double>(key, value);
  } else if (key == "warmup_fraction") {
    c.warmup_fraction = parse_number<double>(key, value);
  } else if (key == "pretrain_epochs") {
    c.pretrain_epochs = parse_number<std::size_t>(key, value);
  } else if (key == "finetune_epochs") {
    c.finetune_epochs = parse_number<std::size_t>(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "count") {
    c.count = parse_number<std::size_t>(key, value);
  } else if (key == "corpus") {
    c.corpus = value;
  } else if (key == "freeze_encoder") {
    c.freeze_encoder = parse_bool(key, value);
  } else if (key == "from_scratch") {
    c.from_scratch = parse_bool(key, value);
  } else {
    throw ValidationError("config: unknown key '" + key + "'");
  }
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  apply_config_text(cfg, read_text(path), path.string());
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (c.patch == 0) fail("patch must be positive");
  if (c.height == 0 || c.width == 0) fail("height and width must be positive");
  if (c.height % c.patch != 0 || c.width % c.patch != 0) {
    fail("image " + std::to_string(c.height) + "x" + std::to_string(c.width) + " is not divisible by patch " +
         std::to_string(c.patch));
  }
  if (c.dim == 0 || c.dim % 4 != 0) fail("dim " + std::to_string(c.dim) + " is not divisible by 4");
  const std::size_t heads = c.heads ? c.heads : default_heads(c.dim);
  if (c.dim % heads != 0) fail("dim " + std::to_string(c.dim) + " is not divisible by heads " + std::to_string(heads));
  if (!(c.mask_ratio >= 0.0 && c.mask_ratio < 1.0)) fail("mask_ratio must lie in [0, 1)");
  if (!(c.max_lr >= 0.0)) fail("max_lr must be non-negative");
  if (!(c.warmup_fraction > 0.0 && c.warmup_fraction < 1.0)) fail("warmup_fraction must lie in (0, 1)");
  if (c.batch_size == 0) fail("batch_size must be positive");
}

std::string echo(const RunConfig& c) {
  std::ostringstream os;
  os << "preset = " << c.preset << "\n"
     << "height = " << c.height << "\n"
     << "width = " << c.width << "\n"
     << "patch = " << c.patch << "\n"
     << "dim = " << c.dim << "\n"
     << "heads = " << (c.heads ? c.heads : default_heads(c.dim)) << "\n"
     << "enc_depth = " << c.enc_depth << "\n"
     << "dec_depth = " << c.dec_depth << "\n"
     << "mask_ratio = " << format_double(c.mask_ratio) << "\n"
     << "max_lr = " << format_double(c.max_lr) << "\n"
     << "warmup_fraction = " << format_double(c.warmup_fraction) << "\n"
     << "pretrain_epochs = " << c.pretrain_epochs << "\n"
     << "finetune_epochs = " << c.finetune_epochs << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "seed = " << c.seed << "\n"
     << "count = " << c.count << "\n"
     << "corpus = " << c.corpus << "\n"
     << "freeze_encoder = " << (c.freeze_encoder ? "true" : "false") << "\n"
     << "from_scratch = " << (c.from_scratch ? "true" : "false") << "\n";
  return os.str();
}

RunConfig parse_echo(const std::string& text) {
  RunConfig c;
  apply_config_text(c, text, "<config echo>");
  return c;
}

ModelConfig model_config(const RunConfig& c) {
  validate(c);
  ModelConfig m;
  m.geometry = PatchGeometry::make(c.height, c.width, c.patch);
  m.dim = c.dim;
  m.heads = c.heads ? c.heads : default_heads(c.dim);
  m.enc_depth = c.enc_depth;
  m.dec_depth = c.dec_depth;
  return m;
}

}  // namespace docmae
