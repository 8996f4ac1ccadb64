#include "docmae/transformer.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "docmae/errors.hpp"

namespace docmae {

LinearParams LinearParams::init(std::size_t in, std::size_t out, Rng& rng) {
  LinearParams p = zeros(in, out);
  trunc_normal_(p.weight, rng, 0.02);
  return p;
}

LinearParams LinearParams::zeros(std::size_t in, std::size_t out) {
  return LinearParams{Tensor::zeros({in, out}), Tensor::zeros({out})};
}

void LinearParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

BlockParams BlockParams::init(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw DimensionError("block: width " + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
                         " heads");
  }
  BlockParams b;
  b.dim = dim;
  b.heads = heads;
  b.norm1_gamma = Tensor::ones({dim});
  b.norm1_beta = Tensor::zeros({dim});
  b.qkv = LinearParams::init(dim, 3 * dim, rng);
  b.proj = LinearParams::init(dim, dim, rng);
  b.norm2_gamma = Tensor::ones({dim});
  b.norm2_beta = Tensor::zeros({dim});
  b.fc1 = LinearParams::init(dim, 4 * dim, rng);
  b.fc2 = LinearParams::init(4 * dim, dim, rng);
  return b;
}

void BlockParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".norm1.gamma", norm1_gamma);
  out.emplace_back(prefix + ".norm1.beta", norm1_beta);
  qkv.collect(prefix + ".attn.qkv", out);
  proj.collect(prefix + ".attn.proj", out);
  out.emplace_back(prefix + ".norm2.gamma", norm2_gamma);
  out.emplace_back(prefix + ".norm2.beta", norm2_beta);
  fc1.collect(prefix + ".mlp.fc1", out);
  fc2.collect(prefix + ".mlp.fc2", out);
}

std::size_t default_heads(std::size_t dim) { return std::max<std::size_t>(2, dim / 64); }

PosTable sincos_pos_2d(std::size_t grid_h, std::size_t grid_w, std::size_t dim) {
  if (dim == 0 || dim % 4 != 0) {
    throw ContractError("sincos_pos_2d: width " + std::to_string(dim) + " is not divisible by 4");
  }
  const std::size_t half = dim / 2;
  const std::size_t quarter = dim / 4;
  std::vector<double> omega(quarter);
  for (std::size_t k = 0; k < quarter; ++k) omega[k] = 1.0 / std::pow(10000.0, double(k) / double(quarter));
  Tensor table = Tensor::zeros({grid_h * grid_w, dim});
  auto data = table.data();
  for (std::size_t r = 0; r < grid_h; ++r) {
    for (std::size_t c = 0; c < grid_w; ++c) {
      Scalar* row = data.data() + (r * grid_w + c) * dim;
      for (std::size_t k = 0; k < quarter; ++k) {
        row[k] = static_cast<Scalar>(std::sin(double(r) * omega[k]));
        row[quarter + k] = static_cast<Scalar>(std::cos(double(r) * omega[k]));
        row[half + k] = static_cast<Scalar>(std::sin(double(c) * omega[k]));
        row[half + quarter + k] = static_cast<Scalar>(std::cos(double(c) * omega[k]));
      }
    }
  }
  return PosTable{grid_h, grid_w, std::move(table)};
}

const PosTable& cached_pos_table(std::size_t grid_h, std::size_t grid_w, std::size_t dim) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, std::size_t>, PosTable> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_tuple(grid_h, grid_w, dim);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, sincos_pos_2d(grid_h, grid_w, dim)).first;
  return it->second;
}

Tensor block_forward(const Tensor& x, const BlockParams& p, std::vector<Tensor>* attention) {
  if (x.dim() != 2 || x.size(1) != p.dim) {
    throw DimensionError("block_forward: input " + shape_str(x.shape()) + " does not match width " +
                         std::to_string(p.dim));
  }
  if (x.size(0) == 0) throw ContractError("block_forward: empty token sequence");
  const std::size_t d = p.dim;
  const std::size_t hd = d / p.heads;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(Scalar(hd));

  Tensor qkv = p.qkv(layer_norm(x, p.norm1_gamma, p.norm1_beta));
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor q = slice_cols(qkv, h * hd, hd);
    Tensor k = slice_cols(qkv, d + h * hd, hd);
    Tensor v = slice_cols(qkv, 2 * d + h * hd, hd);
    Tensor weights = softmax_lastdim(scale(matmul_nt(q, k), inv_sqrt));
    if (attention) attention->push_back(weights);
    heads.push_back(matmul(weights, v));
  }
  Tensor y = add(x, p.proj(heads.size() == 1 ? heads[0] : concat_cols(heads)));
  Tensor mlp = p.fc2(gelu(p.fc1(layer_norm(y, p.norm2_gamma, p.norm2_beta))));
  return add(y, mlp);
}

Tensor encoder_forward(const Tensor& visible_tokens, const PosTable& pos, const MaskPlan& plan,
                       const std::vector<BlockParams>& blocks) {
  if (pos.table.size(0) != plan.count() || visible_tokens.dim() != 2 || visible_tokens.size(0) != plan.keep.size()) {
    throw ContractError("encoder_forward: plan over " + std::to_string(plan.count()) + " patches, table " +
                        shape_str(pos.table.shape()) + ", tokens " + shape_str(visible_tokens.shape()));
  }
  if (visible_tokens.size(1) != pos.table.size(1)) {
    throw DimensionError("encoder_forward: token width " + shape_str(visible_tokens.shape()) +
                         " does not match table " + shape_str(pos.table.shape()));
  }
  Tensor x = add(visible_tokens, gather_rows(pos.table, plan.keep));
  for (const auto& b : blocks) x = block_forward(x, b);
  return x;
}

Tensor decoder_forward(const Tensor& tokens, const PosTable& pos, const std::vector<BlockParams>& blocks) {
  if (tokens.shape() != pos.table.shape()) {
    throw ContractError("decoder_forward: tokens " + shape_str(tokens.shape()) + " vs table " +
                        shape_str(pos.table.shape()));
  }
  Tensor x = add(tokens, pos.table);
  for (const auto& b : blocks) x = block_forward(x, b);
  return x;
}

}  // namespace docmae
