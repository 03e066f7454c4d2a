#pragma once

#include "ifnet/checkpoint.hpp"
#include "ifnet/dataset.hpp"
#include "ifnet/losses.hpp"
#include "ifnet/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ifnet::eval {

struct PairResult {
  metrics::PairRecord ifnet;
  std::optional<metrics::PairRecord> icp;
  losses::LossValues losses;  // summed over passes
  /// Procrustes hit a rank-deficient problem; the prediction fell back to identity.
  bool degenerate = false;
  double seconds = 0.0;
};

struct SubsetSummary {
  std::string method;  // "ifnet" or "icp"
  std::string subset;  // "all" or "rot_ge_30"
  metrics::Summary summary;
};

struct MetricsReport {
  std::string split;
  bool has_gt = false;
  std::vector<PairResult> pairs;
  std::vector<SubsetSummary> summaries;
  /// One entry per time step: composition through that step's last iteration.
  std::vector<metrics::Summary> per_time_step;
  double seconds_per_pair = 0.0;

  const metrics::Summary& summary(const std::string& method = "ifnet", const std::string& subset = "all") const;
};

struct EvalOptions {
  data::Split split = data::Split::kTest;
  bool run_icp = true;
  /// Stop after this many pairs; 0 evaluates the whole split.
  int limit = 0;
};

MetricsReport evaluate(const Checkpoint& ckpt, const data::Manifest& manifest, const EvalOptions& opts = {});

/// pairs.csv, summary.csv, time_steps.csv and timing.txt. Timing lives apart so the CSVs stay byte-stable.
void write_report(const MetricsReport& report, const std::filesystem::path& out_dir);

struct SweepRow {
  std::string axis;  // "points" or "noise"
  double value = 0.0;
  metrics::Summary summary;
};

/// Re-samples the first eval.sweep_pairs test shapes at each point count and noise sigma.
std::vector<SweepRow> robustness_sweep(const Checkpoint& ckpt, const data::Manifest& manifest,
                                       const EvalConfig& cfg);
void write_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace ifnet::eval
