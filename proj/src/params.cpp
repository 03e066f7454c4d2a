#include "ifnet/params.hpp"

#include "ifnet/errors.hpp"
#include "ifnet/geom.hpp"

#include <cmath>
#include <random>

namespace ifnet {

void PipelineConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ParameterError(std::string("config: ") + name + " must be >= 1");
  };
  positive(iterations, "iterations");
  positive(time_steps, "time_steps");
  positive(k_geo, "k_geo");
  positive(k_feat, "k_feat");
  positive(k_match, "k_match");
  positive(k_overlap, "k_overlap");
  positive(feature_dim, "feature_dim");
  positive(reliability_dim, "reliability_dim");
  positive(loss.k_consistency, "loss.k_consistency");
  for (int w : edge_widths) positive(w, "edge_widths[]");
  if (loss.top_k < 0) throw ParameterError("config: loss.top_k must be >= 0");
  if (!(loss.huber_delta > 0.0)) throw ParameterError("config: loss.huber_delta must be > 0");
  if (!std::isfinite(alpha)) throw ParameterError("config: alpha must be finite");
}

namespace {

ad::Matrix uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  ad::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

LinearT<ad::Matrix> linear(std::mt19937_64& rng, Eigen::Index in, Eigen::Index out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  LinearT<ad::Matrix> l;
  l.weight = uniform(rng, in, out, bound);
  l.bias = uniform(rng, 1, out, bound);
  return l;
}

}  // namespace

NetworkParameters init_parameters(const PipelineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  NetworkParameters params;
  const Eigen::Index d = cfg.feature_dim;
  const Eigen::Index pos_in = cfg.positional_embedding == PositionalEmbedding::kXyz ? 3 : geom::kDescriptorWidth;
  for (int b = 0; b < cfg.iterations; ++b) {
    std::mt19937_64 rng(geom::derive_seed(seed, static_cast<std::uint64_t>(b)));
    BlockParameters block;
    Eigen::Index in = 3;
    std::vector<int> widths = cfg.edge_widths;
    widths.push_back(cfg.feature_dim);
    for (int w : widths) {
      block.edge.push_back(linear(rng, 2 * in, w));
      in = w;
    }
    block.score_hidden = linear(rng, d, d);
    block.score_out = linear(rng, d, d);
    block.position = uniform(rng, pos_in, d, 1.0 / std::sqrt(static_cast<double>(pos_in)));
    block.reliability = linear(rng, 3, cfg.reliability_dim);
    block.attention = linear(rng, cfg.reliability_dim, 1);
    block.overlap = linear(rng, cfg.reliability_dim, 1);
    params.blocks.push_back(std::move(block));
  }
  return params;
}

NetworkVars bind(ad::Tape& tape, const NetworkParameters& params, bool trainable) {
  std::vector<ad::Var> flat;
  params.visit([&](const std::string&, const ad::Matrix& m) { flat.push_back(trainable ? tape.leaf(m) : tape.constant(m)); });
  NetworkVars vars;
  vars.blocks.resize(params.blocks.size());
  for (std::size_t b = 0; b < params.blocks.size(); ++b) vars.blocks[b].edge.resize(params.blocks[b].edge.size());
  std::size_t next = 0;
  vars.visit([&](const std::string&, ad::Var& v) { v = flat[next++]; });
  return vars;
}

NetworkParameters gradients(const ad::Tape& tape, NetworkVars& vars) {
  std::vector<ad::Matrix> flat;
  vars.visit([&](const std::string&, ad::Var& v) { flat.push_back(tape.grad(v)); });
  NetworkParameters out;
  out.blocks.resize(vars.blocks.size());
  for (std::size_t b = 0; b < vars.blocks.size(); ++b) out.blocks[b].edge.resize(vars.blocks[b].edge.size());
  std::size_t next = 0;
  out.visit([&](const std::string&, ad::Matrix& m) { m = std::move(flat[next++]); });
  return out;
}

std::size_t parameter_count(const NetworkParameters& params) {
  std::size_t n = 0;
  params.visit([&](const std::string&, const ad::Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

}  // namespace ifnet
