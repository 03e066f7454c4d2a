#pragma once

#include "ifnet/autodiff.hpp"
#include "ifnet/geom.hpp"
#include "ifnet/params.hpp"

#include <map>
#include <utility>

namespace ifnet::features {

using geom::Index;
using geom::NeighborIndex;

/// max over the k graph neighbours of silu([f_i, f_j - f_i] * W + b).
ad::Var edgeconv_layer(ad::Var features, const NeighborIndex& graph, const LinearVar& layer);

/// Stacked EdgeConv over a fixed coordinate graph; the first layer reads raw points.
ad::Var edgeconv_features(ad::Var points, const NeighborIndex& graph, const std::vector<LinearVar>& layers);

struct PositionalEmbedding {
  ad::Var embedding;       // (N*k) x D
  ad::Var differences;     // (N*k) x W, before projection
  NeighborIndex neighbors; // rows of cat[g_x, g_y]
};

/// pos = (g_x - kNN(cat[g_x, g_y])) * projection. Self rows of the union may be selected.
PositionalEmbedding positional_embedding(ad::Var g_x, ad::Var g_y, Index k, ad::Var projection);

struct FeedbackOutput {
  ad::Var features;   // N x D
  ad::Var attention;  // (N*k) x D, softmax over each group of k rows
  NeighborIndex fused;
};

/// Refines low-level source features with the previous step's high-level target
/// features: out_i = sum_k softmax_k(MLP(f_i - ff_ik) + pos_ik) * (ff_ik + pos_ik),
/// where ff are the k nearest rows of cat[low, high_prev] in feature space.
FeedbackOutput feedback_transformer(ad::Var low, ad::Var high_prev, ad::Var pos, const BlockVars& block, Index k);

enum class Side { kSource, kTarget };

/// Per-block output features carried from one time step to the next.
class FeedbackState {
 public:
  explicit FeedbackState(int blocks);

  int time_step() const { return step_; }
  int blocks() const { return blocks_; }

  /// Features written by `block` during the previous time step.
  const ad::Var& previous(int block, Side side) const;
  bool has_previous(int block, Side side) const;

  void write(int block, Side side, ad::Var features);
  /// Entries written during the current time step.
  std::size_t current_entries() const { return current_.size(); }
  std::size_t previous_entries() const { return previous_.size(); }

  /// Closes the current time step.
  void advance();

 private:
  int blocks_;
  int step_ = 0;
  std::map<std::pair<int, Side>, ad::Var> previous_;
  std::map<std::pair<int, Side>, ad::Var> current_;
};

/// Block whose previous-step target features feed `block`: the next one, or itself for the last.
int feedback_source_block(int block, int blocks);

struct BlockFeatures {
  ad::Var source;
  ad::Var target;
};

/// EdgeConv features for both clouds; from time step 1 on, source features are refined
/// by the feedback transformer. Target features are never refined. Does not write `state`.
BlockFeatures block_features(ad::Var source, ad::Var target, const FeedbackState& state, int block,
                             const NetworkVars& net, const PipelineConfig& cfg);

}  // namespace ifnet::features
