// Command-line front end: generate, train, eval, register, icp, plot.
#include "ifnet/checkpoint.hpp"
#include "ifnet/config.hpp"
#include "ifnet/csv.hpp"
#include "ifnet/dataset.hpp"
#include "ifnet/errors.hpp"
#include "ifnet/evaluate.hpp"
#include "ifnet/plot.hpp"
#include "ifnet/solver.hpp"
#include "ifnet/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace ifnet;
namespace fs = std::filesystem;

nlohmann::json transform_json(const geom::RigidTransform& t) {
  const Eigen::Quaterniond q = t.quaternion();
  return {{"quaternion", {{"w", q.w()}, {"x", q.x()}, {"y", q.y()}, {"z", q.z()}}},
          {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

void emit(const nlohmann::json& doc, const std::string& out) {
  const std::string text = doc.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw ParameterError("cannot write " + out);
  f << text;
}

Config resolve_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  Config cfg = path.empty() ? Config{} : load_config(path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised point-cloud registration with recurrent feedback blocks"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, checkpoint_path, source_path, target_path, split = "test";
  std::optional<std::uint64_t> seed;
  bool sweep = false, no_icp = false, print_config = false;
  int limit = 0;
  std::vector<std::string> reports;

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset and manifest");
  gen->add_option("--config", config_path, "JSON config");
  gen->add_option("--out", out_path, "Output directory")->required();
  gen->add_option("--seed", seed, "Overrides the config seed");

  auto* tr = app.add_subcommand("train", "Train on a generated dataset");
  tr->add_option("--config", config_path, "JSON config");
  tr->add_option("--data", data_path, "Dataset directory or manifest.json")->required();
  tr->add_option("--out", out_path, "Run directory")->required();
  tr->add_option("--seed", seed, "Overrides the config seed");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
  ev->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  ev->add_option("--data", data_path, "Dataset directory or manifest.json")->required();
  ev->add_option("--out", out_path, "Report directory")->required();
  ev->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--limit", limit, "Evaluate at most this many pairs");
  ev->add_option("--config", config_path, "Overrides the eval section (sweep lists)");
  ev->add_flag("--sweep", sweep, "Also run the point-count and noise robustness sweep");
  ev->add_flag("--no-icp", no_icp, "Skip the ICP comparison");

  auto* reg = app.add_subcommand("register", "Register one pair and print the transform as JSON");
  reg->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  reg->add_option("--source", source_path, "Source cloud file")->required();
  reg->add_option("--target", target_path, "Target cloud file")->required();
  reg->add_option("--out", out_path, "Output JSON (default stdout)");

  auto* icp = app.add_subcommand("icp", "Point-to-point ICP from the identity");
  icp->add_option("--source", source_path, "Source cloud file")->required();
  icp->add_option("--target", target_path, "Target cloud file")->required();
  icp->add_option("--config", config_path, "JSON config (eval.icp_max_iterations)");
  icp->add_option("--out", out_path, "Output JSON (default stdout)");

  auto* pl = app.add_subcommand("plot", "Render figures from report CSVs");
  pl->add_option("reports", reports, "train_log.csv, time_steps.csv or robustness.csv")->required();
  pl->add_option("--out", out_path, "Figure directory")->required();

  auto* cfg_cmd = app.add_subcommand("config", "Print the default config");
  cfg_cmd->add_flag("--print", print_config);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const Config cfg = resolve_config(config_path, seed);
      const data::Manifest m = data::generate_dataset(cfg, out_path);
      save_config(fs::path(out_path) / "config.json", cfg);
      std::cerr << "wrote " << m.entries.size() << " pairs to " << out_path << "\n";
    } else if (*tr) {
      const Config cfg = resolve_config(config_path, seed);
      const data::Manifest m = data::load_manifest(data_path);
      const train::TrainResult r = train::train(cfg, m, out_path, &std::cerr);
      std::cerr << "best epoch " << r.best_epoch << ", " << r.seconds << " s\n";
    } else if (*ev) {
      Checkpoint ckpt = load_checkpoint(checkpoint_path);
      if (!config_path.empty()) ckpt.config.eval = load_config(config_path).eval;
      const data::Manifest m = data::load_manifest(data_path);
      eval::EvalOptions opts;
      opts.split = split == "train" ? data::Split::kTrain : (split == "val" ? data::Split::kVal : data::Split::kTest);
      opts.run_icp = !no_icp;
      opts.limit = limit;
      const eval::MetricsReport report = eval::evaluate(ckpt, m, opts);
      eval::write_report(report, out_path);
      if (report.has_gt) {
        const metrics::Summary& s = report.summary();
        std::cerr << "mae_r " << s.mae_r << " rmse_r " << s.rmse_r << " mae_t " << s.mae_t << " rmse_t " << s.rmse_t
                  << " over " << s.pairs << " pairs\n";
      } else {
        std::cerr << "no ground truth: losses-only report\n";
      }
      if (sweep) {
        const auto rows = eval::robustness_sweep(ckpt, m, ckpt.config.eval);
        eval::write_sweep(rows, fs::path(out_path) / "robustness.csv");
        plot::plot_report(fs::path(out_path) / "robustness.csv", out_path);
      }
      if (report.has_gt) plot::plot_report(fs::path(out_path) / "time_steps.csv", out_path);
    } else if (*reg) {
      const Checkpoint ckpt = load_checkpoint(checkpoint_path);
      const geom::PointCloud source = geom::read_cloud(source_path);
      const geom::PointCloud target = geom::read_cloud(target_path);
      const solver::RegistrationResult r = solver::ifnet_register(source, target, ckpt.params, ckpt.config.pipeline);
      nlohmann::json doc = transform_json(r.final);
      nlohmann::json steps = nlohmann::json::array();
      for (const solver::StepRecord& s : r.per_step) {
        nlohmann::json j = transform_json(s.increment);
        j["time_step"] = s.time_step;
        j["iteration"] = s.iteration;
        steps.push_back(std::move(j));
      }
      doc["increments"] = std::move(steps);
      emit(doc, out_path);
    } else if (*icp) {
      const Config cfg = resolve_config(config_path, seed);
      const solver::IcpResult r = solver::icp_baseline(geom::read_cloud(source_path), geom::read_cloud(target_path),
                                                       cfg.eval.icp_max_iterations);
      nlohmann::json doc = transform_json(r.transform);
      doc["iterations"] = r.iterations;
      doc["mean_residual"] = r.mean_residual;
      emit(doc, out_path);
    } else if (*pl) {
      for (const std::string& csv : reports) {
        for (const fs::path& p : plot::plot_report(csv, out_path)) std::cerr << "wrote " << p.string() << "\n";
      }
    } else if (*cfg_cmd) {
      std::cout << to_json(Config{});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
