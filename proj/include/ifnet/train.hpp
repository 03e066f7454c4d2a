#pragma once

#include "ifnet/checkpoint.hpp"
#include "ifnet/dataset.hpp"
#include "ifnet/losses.hpp"
#include "ifnet/metrics.hpp"
#include "ifnet/params.hpp"

#include <filesystem>
#include <functional>
#include <ostream>
#include <vector>

namespace ifnet::train {

class Adam {
 public:
  Adam(const NetworkParameters& like, const TrainConfig& cfg);
  void step(NetworkParameters& params, const NetworkParameters& grads);
  int steps() const { return t_; }

 private:
  TrainConfig cfg_;
  NetworkParameters m_, v_;
  int t_ = 0;
};

struct PairLoss {
  losses::LossValues total;  // summed over passes
  NetworkParameters grads;
};

/// Throws NumericalError naming the pass when any loss component is non-finite.
void require_finite(const losses::LossValues& v, int time_step, int iteration);

/// Forward and backward for one pair. Throws NumericalError naming the pass on a non-finite loss.
PairLoss loss_and_gradients(const NetworkParameters& params, const PipelineConfig& cfg,
                            const geom::PointCloud& source, const geom::PointCloud& target);

struct EpochRow {
  int epoch = 0;
  double gr = 0.0, nc = 0.0, pc = 0.0, total = 0.0;
  metrics::Summary val;
  int skipped = 0;
};

struct TrainResult {
  NetworkParameters initial;
  NetworkParameters best;
  NetworkParameters last;
  int best_epoch = 0;
  std::vector<EpochRow> epochs;
  double seconds = 0.0;
};

/// Validation summary of `params` on `pairs` (final composition).
metrics::Summary validate(const NetworkParameters& params, const PipelineConfig& cfg,
                          const std::vector<data::LoadedPair>& pairs);

/// Trains on the manifest's train split and selects on its val split. Writes train_log.csv,
/// best.ckpt, last.ckpt and train_timing.txt into `out_dir`. Fully deterministic in cfg.seed.
TrainResult train(const Config& cfg, const data::Manifest& manifest, const std::filesystem::path& out_dir,
                  std::ostream* progress = nullptr);

}  // namespace ifnet::train
