#pragma once

#include "ifnet/autodiff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ifnet {

enum class PositionalEmbedding { kDescriptor, kXyz, kNone };
/// Where the neighbourhood-consistency loss draws its target-side neighbourhoods.
enum class ConsistencyTarget { kPseudoTarget, kTrueTarget };

struct LossConfig {
  double huber_delta = 0.1;
  /// Neighbours per overlap pair in the neighbourhood-consistency loss.
  int k_consistency = 8;
  /// Overlap pairs used by the consistency losses; 0 means ceil(N / 2).
  int top_k = 0;
  ConsistencyTarget consistency_target = ConsistencyTarget::kPseudoTarget;
  bool use_global = true;
  bool use_neighborhood = true;
  bool use_pseudo = true;
};

struct PipelineConfig {
  int iterations = 3;
  int time_steps = 3;
  /// Coordinate graph for EdgeConv.
  int k_geo = 16;
  /// Neighbours in the feedback transformer and positional embedding.
  int k_feat = 16;
  /// Neighbourhood size of the matching-matrix neighbour score.
  int k_match = 8;
  /// Neighbourhood size of the overlap predictor.
  int k_overlap = 8;
  double alpha = 0.5;
  /// Output width of the feature extractor.
  int feature_dim = 64;
  /// Hidden EdgeConv widths; the last layer maps to feature_dim.
  std::vector<int> edge_widths{64, 64};
  /// Width of the reliability-difference features.
  int reliability_dim = 32;
  PositionalEmbedding positional_embedding = PositionalEmbedding::kDescriptor;
  /// Compose increments across time steps (true) or restart each step from the input pose.
  bool accumulate_across_steps = true;
  /// Relative spectral gap below which the rotation gradient is stopped.
  double rotation_gradient_gap = 1e-6;
  LossConfig loss;

  /// Throws ParameterError on any non-positive count or width.
  void validate() const;
};

template <typename T>
struct LinearT {
  T weight;  // in x out
  T bias;    // 1 x out
};

/// Weights of one feedback registration block.
template <typename T>
struct BlockT {
  std::vector<LinearT<T>> edge;  // EdgeConv stack
  LinearT<T> score_hidden;       // feedback-transformer score network
  LinearT<T> score_out;
  T position;                    // positional-embedding projection (no bias)
  LinearT<T> reliability;        // v: edge -> reliability feature
  LinearT<T> attention;          // u: reliability feature -> score
  LinearT<T> overlap;            // f: aggregated reliability -> scalar

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    visit_impl(*this, prefix, fn);
  }
  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    visit_impl(*this, prefix, fn);
  }

  /// Parameters only the feedback transformer reads.
  template <typename Fn>
  void visit_feedback(const std::string& prefix, Fn&& fn) {
    fn(prefix + "score_hidden.weight", score_hidden.weight);
    fn(prefix + "score_hidden.bias", score_hidden.bias);
    fn(prefix + "score_out.weight", score_out.weight);
    fn(prefix + "score_out.bias", score_out.bias);
    fn(prefix + "position.weight", position);
  }

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, const std::string& prefix, Fn& fn) {
    for (std::size_t l = 0; l < self.edge.size(); ++l) {
      fn(prefix + "edge" + std::to_string(l) + ".weight", self.edge[l].weight);
      fn(prefix + "edge" + std::to_string(l) + ".bias", self.edge[l].bias);
    }
    fn(prefix + "score_hidden.weight", self.score_hidden.weight);
    fn(prefix + "score_hidden.bias", self.score_hidden.bias);
    fn(prefix + "score_out.weight", self.score_out.weight);
    fn(prefix + "score_out.bias", self.score_out.bias);
    fn(prefix + "position.weight", self.position);
    fn(prefix + "reliability.weight", self.reliability.weight);
    fn(prefix + "reliability.bias", self.reliability.bias);
    fn(prefix + "attention.weight", self.attention.weight);
    fn(prefix + "attention.bias", self.attention.bias);
    fn(prefix + "overlap.weight", self.overlap.weight);
    fn(prefix + "overlap.bias", self.overlap.bias);
  }
};

/// One weight set per block; the same object is reused at every time step.
template <typename T>
struct NetworkT {
  std::vector<BlockT<T>> blocks;

  template <typename Fn>
  void visit(Fn&& fn) {
    for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b].visit("block" + std::to_string(b) + ".", fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b].visit("block" + std::to_string(b) + ".", fn);
  }
};

using NetworkParameters = NetworkT<ad::Matrix>;
using NetworkVars = NetworkT<ad::Var>;
using BlockParameters = BlockT<ad::Matrix>;
using BlockVars = BlockT<ad::Var>;
using LinearVar = LinearT<ad::Var>;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation, deterministic in seed.
NetworkParameters init_parameters(const PipelineConfig& cfg, std::uint64_t seed);

/// Binds parameters onto a tape; leaves when `trainable`, constants otherwise.
NetworkVars bind(ad::Tape& tape, const NetworkParameters& params, bool trainable);

/// Gradients of the last backward pass laid out like the parameters.
NetworkParameters gradients(const ad::Tape& tape, NetworkVars& vars);

/// Element count over all arrays.
std::size_t parameter_count(const NetworkParameters& params);

}  // namespace ifnet
