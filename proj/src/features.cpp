#include "ifnet/features.hpp"

#include "ifnet/errors.hpp"

#include <algorithm>

namespace ifnet::features {

ad::Var edgeconv_layer(ad::Var features, const NeighborIndex& graph, const LinearVar& layer) {
  const Index in = features.cols();
  if (layer.weight.rows() != 2 * in) throw ParameterError("edgeconv: weight rows must be twice the input width");
  if (graph.rows() != features.rows()) throw ParameterError("edgeconv: graph does not match feature rows");
  // [f_i, f_j - f_i] W = f_i (W_top - W_bottom) + f_j W_bottom
  ad::Var top = ad::slice_rows(layer.weight, 0, in);
  ad::Var bottom = ad::slice_rows(layer.weight, in, in);
  ad::Var centre = ad::matmul(features, ad::sub(top, bottom));
  ad::Var neighbour = ad::matmul(features, bottom);
  ad::Var pre = ad::add(ad::gather_rows(centre, graph.repeated_rows()), ad::gather_rows(neighbour, graph.flat()));
  return ad::group_max(ad::silu(ad::add_row(pre, layer.bias)), graph.k());
}

ad::Var edgeconv_features(ad::Var points, const NeighborIndex& graph, const std::vector<LinearVar>& layers) {
  if (layers.empty()) throw ParameterError("edgeconv: no layers");
  ad::Var f = points;
  for (const LinearVar& layer : layers) f = edgeconv_layer(f, graph, layer);
  return f;
}

PositionalEmbedding positional_embedding(ad::Var g_x, ad::Var g_y, Index k, ad::Var projection) {
  if (g_x.cols() != g_y.cols()) throw ParameterError("positional_embedding: descriptor widths differ");
  if (projection.rows() != g_x.cols()) throw ParameterError("positional_embedding: projection width mismatch");
  if (k < 1 || k > g_x.rows() + g_y.rows()) {
    throw ParameterError("positional_embedding: k exceeds the union of descriptor rows");
  }
  ad::Var uni = ad::concat_rows(g_x, g_y);
  NeighborIndex nn = geom::knn_rows(g_x.value(), uni.value(), k, false);
  ad::Var diff = ad::sub(ad::gather_rows(g_x, nn.repeated_rows()), ad::gather_rows(uni, nn.flat()));
  return {ad::matmul(diff, projection), diff, std::move(nn)};
}

FeedbackOutput feedback_transformer(ad::Var low, ad::Var high_prev, ad::Var pos, const BlockVars& block, Index k) {
  if (low.cols() != high_prev.cols()) throw ParameterError("feedback_transformer: feature width mismatch");
  if (k < 1 || k > low.rows() + high_prev.rows()) throw ParameterError("feedback_transformer: k out of range");
  if (pos.rows() != low.rows() * k || pos.cols() != low.cols()) {
    throw ParameterError("feedback_transformer: positional embedding must be (N*k) x D");
  }
  ad::Var uni = ad::concat_rows(low, high_prev);
  NeighborIndex nn = geom::knn_rows(low.value(), uni.value(), k, false);
  ad::Var fused = ad::gather_rows(uni, nn.flat());
  ad::Var diff = ad::sub(ad::gather_rows(low, nn.repeated_rows()), fused);
  ad::Var hidden = ad::silu(ad::add_row(ad::matmul(diff, block.score_hidden.weight), block.score_hidden.bias));
  ad::Var score = ad::add_row(ad::matmul(hidden, block.score_out.weight), block.score_out.bias);
  ad::Var attention = ad::group_softmax(ad::add(score, pos), k);
  ad::Var out = ad::group_sum(ad::mul(attention, ad::add(fused, pos)), k);
  return {out, attention, std::move(nn)};
}

FeedbackState::FeedbackState(int blocks) : blocks_(blocks) {
  if (blocks < 1) throw ParameterError("FeedbackState: need at least one block");
}

const ad::Var& FeedbackState::previous(int block, Side side) const {
  auto it = previous_.find({block, side});
  if (it == previous_.end()) {
    throw InternalStateError("feedback state: no entry for block " + std::to_string(block) + " at time step " +
                             std::to_string(step_ - 1));
  }
  return it->second;
}

bool FeedbackState::has_previous(int block, Side side) const { return previous_.count({block, side}) > 0; }

void FeedbackState::write(int block, Side side, ad::Var features) {
  if (block < 0 || block >= blocks_) throw ParameterError("feedback state: block index out of range");
  current_[{block, side}] = features;
}

void FeedbackState::advance() {
  previous_ = std::move(current_);
  current_.clear();
  ++step_;
}

int feedback_source_block(int block, int blocks) { return std::min(block + 1, blocks - 1); }

BlockFeatures block_features(ad::Var source, ad::Var target, const FeedbackState& state, int block,
                             const NetworkVars& net, const PipelineConfig& cfg) {
  if (block < 0 || block >= static_cast<int>(net.blocks.size())) throw ParameterError("block_features: bad block");
  const BlockVars& weights = net.blocks[static_cast<std::size_t>(block)];
  const geom::PointCloud src_cloud(source.value());
  const geom::PointCloud tgt_cloud(target.value());
  const NeighborIndex src_graph = geom::knn_self(src_cloud, cfg.k_geo);
  const NeighborIndex tgt_graph = geom::knn_self(tgt_cloud, cfg.k_geo);
  BlockFeatures out{edgeconv_features(source, src_graph, weights.edge),
                    edgeconv_features(target, tgt_graph, weights.edge)};
  if (state.time_step() == 0) return out;

  const int from = feedback_source_block(block, state.blocks());
  const ad::Var& high = state.previous(from, Side::kTarget);
  const Index k = cfg.k_feat;
  ad::Var pos;
  switch (cfg.positional_embedding) {
    case ifnet::PositionalEmbedding::kDescriptor: {
      ad::Var gx = geom::geometry_descriptor(source, geom::knn_self(src_cloud, 2));
      ad::Var gy = geom::geometry_descriptor(target, geom::knn_self(tgt_cloud, 2));
      pos = positional_embedding(gx, gy, k, weights.position).embedding;
      break;
    }
    case ifnet::PositionalEmbedding::kXyz:
      pos = positional_embedding(source, target, k, weights.position).embedding;
      break;
    case ifnet::PositionalEmbedding::kNone:
      pos = source.tape()->constant(ad::Matrix::Zero(source.rows() * k, out.source.cols()));
      break;
  }
  out.source = feedback_transformer(out.source, high, pos, weights, k).features;
  return out;
}

}  // namespace ifnet::features
