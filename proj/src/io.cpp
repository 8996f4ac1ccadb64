#include "docmae/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "docmae/errors.hpp"

namespace docmae {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'O', 'C', 'M', 'A', 'E', 'C', 'K'};

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void check_written(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

// Next whitespace-delimited token of a PNM header, skipping comments.
std::string pnm_token(std::istream& in, const fs::path& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(char(ch));
  }
  if (tok.empty()) throw IoError("truncated PPM header: " + path.string());
  return tok;
}

std::size_t parse_size(const std::string& s, const fs::path& path) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad number '" + s + "' in " + path.string());
  return v;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos, const std::string& origin) {
  if (pos + sizeof(T) > in.size()) throw IoError("truncated file: " + origin);
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void write_ppm(const fs::path& path, const Tensor& image) {
  if (image.dim() != 3 || (image.size(2) != 3 && image.size(2) != 1)) {
    throw DimensionError("write_ppm: expected [H, W, 3] or [H, W, 1], got " + shape_str(image.shape()));
  }
  const std::size_t h = image.size(0), w = image.size(1), c = image.size(2);
  std::string bytes = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double v = std::clamp(double(image[p * c + (c == 1 ? 0 : ch)]), 0.0, 1.0);
      bytes.push_back(char(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  auto out = open_out(path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  check_written(out, path);
}

Tensor read_ppm(const fs::path& path) {
  auto in = open_in(path);
  if (pnm_token(in, path) != "P6") throw IoError("not a binary PPM (P6): " + path.string());
  const std::size_t w = parse_size(pnm_token(in, path), path);
  const std::size_t h = parse_size(pnm_token(in, path), path);
  const std::size_t maxval = parse_size(pnm_token(in, path), path);
  if (maxval != 255 || w == 0 || h == 0) throw IoError("unsupported PPM geometry or maxval: " + path.string());
  std::vector<unsigned char> raw(h * w * 3);
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (std::size_t(in.gcount()) != raw.size()) throw IoError("truncated PPM payload: " + path.string());
  Tensor img = Tensor::zeros({h, w, 3});
  for (std::size_t i = 0; i < raw.size(); ++i) img[i] = static_cast<Scalar>(raw[i] / 255.0);
  return img;
}

Tensor read_mask_ppm(const fs::path& path) {
  Tensor rgb = read_ppm(path);
  const std::size_t h = rgb.size(0), w = rgb.size(1);
  Tensor mask = Tensor::zeros({h, w, 1});
  for (std::size_t p = 0; p < h * w; ++p) mask[p] = rgb[p * 3] >= Scalar(0.5) ? Scalar(1) : Scalar(0);
  return mask;
}

void write_flo(const fs::path& path, const FlowField& flow) {
  const std::size_t h = flow.height(), w = flow.width();
  std::string bytes = "PIEH";
  put(bytes, std::int32_t(w));
  put(bytes, std::int32_t(h));
  for (std::size_t i = 0; i < h * w * 2; ++i) put(bytes, static_cast<float>(flow.disp[i]));
  auto out = open_out(path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  check_written(out, path);
}

FlowField read_flo(const fs::path& path) {
  const std::string bytes = read_text(path);
  if (bytes.size() < 12 || bytes.compare(0, 4, "PIEH") != 0) throw IoError("not a .flo file: " + path.string());
  std::size_t pos = 4;
  const auto w = get<std::int32_t>(bytes, pos, path.string());
  const auto h = get<std::int32_t>(bytes, pos, path.string());
  if (w <= 0 || h <= 0 || bytes.size() != 12 + std::size_t(w) * std::size_t(h) * 8) {
    throw IoError("bad .flo extents in " + path.string());
  }
  FlowField flow = FlowField::zeros(std::size_t(h), std::size_t(w));
  for (std::size_t i = 0; i < flow.disp.numel(); ++i) flow.disp[i] = static_cast<Scalar>(get<float>(bytes, pos, path.string()));
  return flow;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const std::string& Checkpoint::get(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("checkpoint has no '" + key + "' entry");
  return it->second;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel() * sizeof(float);
  }
  const std::string text = header.dump(1);
  std::string bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  put(bytes, kCheckpointVersion);
  put(bytes, std::uint64_t(text.size()));
  bytes += text;
  bytes.reserve(bytes.size() + offset);
  for (const auto& [name, t] : ckpt.tensors)
    for (Scalar v : t.data()) put(bytes, static_cast<float>(v));
  return bytes;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 20 || bytes.compare(0, 8, std::string(kCheckpointMagic, 8)) != 0) {
    throw IoError("not a checkpoint: " + origin);
  }
  std::size_t pos = 8;
  const auto version = get<std::uint32_t>(bytes, pos, origin);
  if (version != kCheckpointVersion) {
    throw CompatibilityError("checkpoint format version " + std::to_string(version) + " unsupported: " + origin);
  }
  const auto header_len = get<std::uint64_t>(bytes, pos, origin);
  if (pos + header_len > bytes.size()) throw IoError("truncated checkpoint header: " + origin);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in " + origin + ": " + e.what());
  }
  const std::size_t payload = pos + header_len;
  const std::size_t payload_size = bytes.size() - payload;
  Checkpoint ckpt;
  ckpt.meta = header.at("meta").get<std::map<std::string, std::string>>();
  std::size_t expected = 0;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const std::size_t n = shape_numel(shape);
    // Offsets must tile the payload in directory order.
    if (offset != expected || offset + n * sizeof(float) > payload_size) {
      throw IoError("checkpoint tensor '" + name + "' has a bad offset in " + origin);
    }
    expected = offset + n * sizeof(float);
    std::size_t p = payload + offset;
    std::vector<Scalar> values(n);
    for (auto& v : values) v = static_cast<Scalar>(get<float>(bytes, p, origin));
    ckpt.tensors.emplace_back(name, Tensor(shape, std::move(values)));
  }
  if (expected != payload_size) throw IoError("checkpoint payload has trailing bytes: " + origin);
  return ckpt;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) { write_text(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const fs::path& path) { return decode_checkpoint(read_text(path), path.string()); }

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out.write(text.data(), std::streamsize(text.size()));
  check_written(out, path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV file: " + path.string());
  const auto columns = split_csv_line(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != columns.size()) {
      throw IoError("CSV row " + std::to_string(rows.size() + 2) + " of " + path.string() + " has " +
                    std::to_string(fields.size()) + " fields, expected " + std::to_string(columns.size()));
    }
    auto& row = rows.emplace_back();
    for (std::size_t i = 0; i < columns.size(); ++i) row[columns[i]] = fields[i];
  }
  return rows;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace docmae
