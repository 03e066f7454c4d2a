#include "ifnet/evaluate.hpp"

#include "ifnet/csv.hpp"
#include "ifnet/errors.hpp"
#include "ifnet/solver.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace ifnet::eval {

namespace {

constexpr double kLargeRotationDeg = 30.0;

struct Prediction {
  solver::RegistrationResult result;
  bool degenerate = false;
};

Prediction predict(const geom::PointCloud& source, const geom::PointCloud& target, const Checkpoint& ckpt) {
  Prediction p;
  try {
    p.result = solver::ifnet_register(source, target, ckpt.params, ckpt.config.pipeline);
  } catch (const DegeneracyError&) {
    p.degenerate = true;
    p.result = {};
    p.result.accumulated = ckpt.config.pipeline.accumulate_across_steps;
  }
  return p;
}

std::vector<std::string> summary_fields(const metrics::Summary& s, bool present) {
  if (!present) return {"0", "0", "absent", "absent", "absent", "absent"};
  return {std::to_string(s.pairs), std::to_string(s.gimbal_excluded), csv::num(s.rmse_r),
          csv::num(s.mae_r),       csv::num(s.rmse_t),                 csv::num(s.mae_t)};
}

}  // namespace

const metrics::Summary& MetricsReport::summary(const std::string& method, const std::string& subset) const {
  for (const SubsetSummary& s : summaries) {
    if (s.method == method && s.subset == subset) return s.summary;
  }
  throw ParameterError("report has no summary for " + method + "/" + subset);
}

MetricsReport evaluate(const Checkpoint& ckpt, const data::Manifest& manifest, const EvalOptions& opts) {
  const PipelineConfig& cfg = ckpt.config.pipeline;
  MetricsReport report;
  report.split = data::split_name(opts.split);
  std::vector<std::vector<metrics::PairRecord>> per_step(static_cast<std::size_t>(cfg.time_steps));
  double seconds = 0.0;
  for (const data::ManifestEntry* e : manifest.split(opts.split)) {
    if (opts.limit > 0 && static_cast<int>(report.pairs.size()) >= opts.limit) break;
    const data::LoadedPair pair = data::load_pair(manifest, *e);
    PairResult r;
    const auto t0 = std::chrono::steady_clock::now();
    const Prediction pred = predict(pair.source, pair.target, ckpt);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    seconds += r.seconds;
    r.degenerate = pred.degenerate;
    for (const solver::StepRecord& step : pred.result.per_step) {
      r.losses.gr += step.losses.gr;
      r.losses.nc += step.losses.nc;
      r.losses.pc += step.losses.pc;
      r.losses.total += step.losses.total;
    }
    if (e->has_gt()) {
      report.has_gt = true;
      const geom::RigidTransform gt = e->gt();
      r.ifnet = metrics::score_pair(e->id, pred.result.final, gt);
      for (int s = 0; s < cfg.time_steps; ++s) {
        per_step[static_cast<std::size_t>(s)].push_back(
            metrics::score_pair(e->id, pred.result.through_time_step(s), gt));
      }
      if (opts.run_icp) {
        const solver::IcpResult icp =
            solver::icp_baseline(pair.source, pair.target, ckpt.config.eval.icp_max_iterations);
        r.icp = metrics::score_pair(e->id, icp.transform, gt);
      }
    } else {
      r.ifnet.id = e->id;
    }
    report.pairs.push_back(std::move(r));
  }
  if (!report.pairs.empty()) report.seconds_per_pair = seconds / static_cast<double>(report.pairs.size());

  for (const char* method : {"ifnet", "icp"}) {
    const bool is_icp = std::string(method) == "icp";
    if (is_icp && !opts.run_icp) continue;
    for (const char* subset : {"all", "rot_ge_30"}) {
      const bool large_only = std::string(subset) == "rot_ge_30";
      std::vector<metrics::PairRecord> recs;
      for (const PairResult& p : report.pairs) {
        if (!p.ifnet.has_gt) continue;
        if (large_only && p.ifnet.gt_angle_deg < kLargeRotationDeg) continue;
        recs.push_back(is_icp ? *p.icp : p.ifnet);
      }
      report.summaries.push_back({method, subset, metrics::aggregate(recs)});
    }
  }
  for (const auto& recs : per_step) report.per_time_step.push_back(metrics::aggregate(recs));
  return report;
}

void write_report(const MetricsReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  csv::Writer pairs({"id", "has_gt", "gimbal", "degenerate", "gt_angle_deg", "geodesic_error_deg", "err_z_deg",
                     "err_y_deg", "err_x_deg", "err_tx", "err_ty", "err_tz", "icp_geodesic_error_deg", "gr", "nc",
                     "pc", "total"});
  for (const PairResult& p : report.pairs) {
    const metrics::PairRecord& r = p.ifnet;
    auto gt_num = [&](double v) { return r.has_gt ? csv::num(v) : std::string("absent"); };
    pairs.row({r.id, r.has_gt ? "1" : "0", r.gimbal ? "1" : "0", p.degenerate ? "1" : "0", gt_num(r.gt_angle_deg),
               gt_num(r.geodesic_error_deg), gt_num(r.rotation_residual[0]), gt_num(r.rotation_residual[1]),
               gt_num(r.rotation_residual[2]), gt_num(r.translation_residual[0]), gt_num(r.translation_residual[1]),
               gt_num(r.translation_residual[2]), p.icp ? csv::num(p.icp->geodesic_error_deg) : "absent",
               csv::num(p.losses.gr), csv::num(p.losses.nc), csv::num(p.losses.pc), csv::num(p.losses.total)});
  }
  pairs.save(out_dir / "pairs.csv");

  csv::Writer summary({"method", "subset", "pairs", "gimbal_excluded", "rmse_r", "mae_r", "rmse_t", "mae_t"});
  for (const SubsetSummary& s : report.summaries) {
    std::vector<std::string> row{s.method, s.subset};
    for (std::string& f : summary_fields(s.summary, report.has_gt)) row.push_back(std::move(f));
    summary.row(row);
  }
  summary.save(out_dir / "summary.csv");

  csv::Writer steps({"time_step", "pairs", "gimbal_excluded", "rmse_r", "mae_r", "rmse_t", "mae_t"});
  for (std::size_t s = 0; s < report.per_time_step.size(); ++s) {
    std::vector<std::string> row{std::to_string(s + 1)};
    for (std::string& f : summary_fields(report.per_time_step[s], report.has_gt)) row.push_back(std::move(f));
    steps.row(row);
  }
  steps.save(out_dir / "time_steps.csv");

  std::ofstream timing(out_dir / "timing.txt");
  timing << "pairs " << report.pairs.size() << "\nseconds_per_pair " << report.seconds_per_pair << "\n";
}

std::vector<SweepRow> robustness_sweep(const Checkpoint& ckpt, const data::Manifest& manifest,
                                       const EvalConfig& cfg) {
  std::vector<const data::ManifestEntry*> entries = manifest.split(data::Split::kTest);
  if (entries.empty()) entries = manifest.split(data::Split::kVal);
  if (entries.empty()) throw ParameterError("robustness sweep: manifest has no test or val pairs");
  if (static_cast<int>(entries.size()) > cfg.sweep_pairs) entries.resize(static_cast<std::size_t>(cfg.sweep_pairs));

  auto run = [&](const std::string& axis, double value, const DataConfig& dc) {
    std::vector<metrics::PairRecord> recs;
    for (const data::ManifestEntry* e : entries) {
      const data::Pair pair = data::make_pair(e->seed, dc);
      const Prediction pred = predict(pair.source, pair.target, ckpt);
      recs.push_back(metrics::score_pair(e->id, pred.result.final, pair.gt));
    }
    return SweepRow{axis, value, metrics::aggregate(recs)};
  };

  std::vector<SweepRow> rows;
  const DataConfig base = manifest.data;
  const double keep_ratio = static_cast<double>(base.crop_keep) / static_cast<double>(base.num_points);
  for (int n : cfg.sweep_points) {
    DataConfig dc = base;
    dc.num_points = n;
    dc.crop_keep = std::max(3, static_cast<int>(std::lround(keep_ratio * n)));
    rows.push_back(run("points", n, dc));
  }
  for (double sigma : cfg.sweep_noise) {
    DataConfig dc = base;
    dc.noise_sigma = sigma;
    rows.push_back(run("noise", sigma, dc));
  }
  return rows;
}

void write_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  csv::Writer w({"axis", "value", "pairs", "rmse_r", "mae_r", "rmse_t", "mae_t"});
  for (const SweepRow& r : rows) {
    w.row({r.axis, csv::num(r.value), std::to_string(r.summary.pairs), csv::num(r.summary.rmse_r),
           csv::num(r.summary.mae_r), csv::num(r.summary.rmse_t), csv::num(r.summary.mae_t)});
  }
  w.save(path);
}

}  // namespace ifnet::eval
