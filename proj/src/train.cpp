#include "ifnet/train.hpp"

#include "ifnet/csv.hpp"
#include "ifnet/errors.hpp"
#include "ifnet/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace ifnet::train {

namespace {

NetworkParameters zeros_like(const NetworkParameters& like) {
  NetworkParameters out = like;
  out.visit([](const std::string&, ad::Matrix& m) { m.setZero(); });
  return out;
}

// Visits matching arrays of two parameter sets in lockstep.
template <typename Fn>
void zip(NetworkParameters& a, const NetworkParameters& b, Fn&& fn) {
  std::vector<const ad::Matrix*> rhs;
  b.visit([&](const std::string&, const ad::Matrix& m) { rhs.push_back(&m); });
  std::size_t i = 0;
  a.visit([&](const std::string&, ad::Matrix& m) { fn(m, *rhs.at(i++)); });
}

double squared_norm(const NetworkParameters& p) {
  double s = 0.0;
  p.visit([&](const std::string&, const ad::Matrix& m) { s += m.squaredNorm(); });
  return s;
}

std::vector<data::LoadedPair> load_split(const data::Manifest& m, data::Split split, int limit) {
  std::vector<data::LoadedPair> out;
  for (const data::ManifestEntry* e : m.split(split)) {
    if (limit > 0 && static_cast<int>(out.size()) >= limit) break;
    out.push_back(data::load_pair(m, *e));
  }
  return out;
}

}  // namespace

Adam::Adam(const NetworkParameters& like, const TrainConfig& cfg)
    : cfg_(cfg), m_(zeros_like(like)), v_(zeros_like(like)) {}

void Adam::step(NetworkParameters& params, const NetworkParameters& grads) {
  ++t_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  zip(m_, grads, [&](ad::Matrix& m, const ad::Matrix& g) { m = b1 * m + (1.0 - b1) * g; });
  zip(v_, grads, [&](ad::Matrix& v, const ad::Matrix& g) { v = b2 * v + (1.0 - b2) * g.cwiseAbs2(); });
  const double c1 = 1.0 - std::pow(b1, t_);
  const double c2 = 1.0 - std::pow(b2, t_);
  std::vector<const ad::Matrix*> ms, vs;
  m_.visit([&](const std::string&, const ad::Matrix& m) { ms.push_back(&m); });
  v_.visit([&](const std::string&, const ad::Matrix& v) { vs.push_back(&v); });
  std::size_t i = 0;
  params.visit([&](const std::string&, ad::Matrix& p) {
    const ad::Matrix& m = *ms[i];
    const ad::Matrix& v = *vs[i];
    ++i;
    p.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  });
}

void require_finite(const losses::LossValues& v, int time_step, int iteration) {
  if (std::isfinite(v.gr) && std::isfinite(v.nc) && std::isfinite(v.pc) && std::isfinite(v.total)) return;
  throw NumericalError("non-finite loss at time step " + std::to_string(time_step) + ", iteration " +
                       std::to_string(iteration) + " (gr=" + csv::num(v.gr) + " nc=" + csv::num(v.nc) +
                       " pc=" + csv::num(v.pc) + ")");
}

PairLoss loss_and_gradients(const NetworkParameters& params, const PipelineConfig& cfg,
                            const geom::PointCloud& source, const geom::PointCloud& target) {
  ad::Tape tape;
  NetworkVars vars = bind(tape, params, true);
  const solver::Unrolled u = solver::unroll(tape.constant(source.points()), tape.constant(target.points()), vars, cfg);
  PairLoss out;
  for (const solver::PassVars& p : u.passes) {
    const losses::LossValues v{p.gr.scalar(), p.nc.scalar(), p.pc.scalar(), p.total.scalar()};
    require_finite(v, p.time_step, p.iteration);
    out.total.gr += v.gr;
    out.total.nc += v.nc;
    out.total.pc += v.pc;
  }
  out.total.total = u.loss.scalar();
  tape.backward(u.loss);
  out.grads = gradients(tape, vars);
  if (!std::isfinite(squared_norm(out.grads))) throw NumericalError("non-finite gradient");
  return out;
}

metrics::Summary validate(const NetworkParameters& params, const PipelineConfig& cfg,
                          const std::vector<data::LoadedPair>& pairs) {
  std::vector<metrics::PairRecord> records;
  for (const data::LoadedPair& p : pairs) {
    if (!p.entry->has_gt()) continue;
    geom::RigidTransform pred;
    try {
      pred = solver::ifnet_register(p.source, p.target, params, cfg).final;
    } catch (const DegeneracyError&) {
      pred = geom::RigidTransform::identity();
    }
    records.push_back(metrics::score_pair(p.entry->id, pred, p.entry->gt()));
  }
  return metrics::aggregate(records);
}

TrainResult train(const Config& cfg, const data::Manifest& manifest, const std::filesystem::path& out_dir,
                  std::ostream* progress) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  double slowest = 0.0, previous_elapsed = 0.0;
  std::filesystem::create_directories(out_dir);
  const std::vector<data::LoadedPair> train_pairs = load_split(manifest, data::Split::kTrain, 0);
  const std::vector<data::LoadedPair> val_pairs = load_split(manifest, data::Split::kVal, cfg.train.val_pairs);
  if (train_pairs.empty() && cfg.train.epochs > 0) throw ParameterError("train: manifest has no train pairs");

  TrainResult result;
  result.initial = init_parameters(cfg.pipeline, geom::derive_seed(cfg.seed, 0x1417));
  NetworkParameters params = result.initial;
  result.best = params;
  double best_mae = std::numeric_limits<double>::infinity();
  Adam adam(params, cfg.train);

  csv::Writer log({"epoch", "gr", "nc", "pc", "total", "val_rmse_r", "val_mae_r", "val_rmse_t", "val_mae_t",
                   "skipped"});
  std::vector<std::size_t> order(train_pairs.size());
  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(geom::derive_seed(cfg.seed, 0x5000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRow row;
    row.epoch = epoch;
    int used = 0;
    NetworkParameters acc = zeros_like(params);
    int in_batch = 0;
    auto flush = [&] {
      if (in_batch == 0) return;
      acc.visit([&](const std::string&, ad::Matrix& g) { g /= static_cast<double>(in_batch); });
      if (cfg.train.gradient_clip > 0.0) {
        const double norm = std::sqrt(squared_norm(acc));
        if (norm > cfg.train.gradient_clip) {
          acc.visit([&](const std::string&, ad::Matrix& g) { g *= cfg.train.gradient_clip / norm; });
        }
      }
      adam.step(params, acc);
      acc = zeros_like(params);
      in_batch = 0;
    };
    for (std::size_t idx : order) {
      const data::LoadedPair& pair = train_pairs[idx];
      PairLoss pl;
      try {
        pl = loss_and_gradients(params, cfg.pipeline, pair.source, pair.target);
      } catch (const DegeneracyError&) {
        ++row.skipped;
        continue;
      } catch (const NumericalError& e) {
        throw NumericalError(std::string("train: epoch ") + std::to_string(epoch) + ", pair " + pair.entry->id +
                             ": " + e.what());
      }
      row.gr += pl.total.gr;
      row.nc += pl.total.nc;
      row.pc += pl.total.pc;
      row.total += pl.total.total;
      ++used;
      zip(acc, pl.grads, [](ad::Matrix& a, const ad::Matrix& g) { a += g; });
      if (++in_batch == cfg.train.batch_size) flush();
    }
    flush();
    if (used > 0) {
      row.gr /= used;
      row.nc /= used;
      row.pc /= used;
      row.total /= used;
    }
    row.val = validate(params, cfg.pipeline, val_pairs);
    log.row({std::to_string(epoch), csv::num(row.gr), csv::num(row.nc), csv::num(row.pc), csv::num(row.total),
             csv::num(row.val.rmse_r), csv::num(row.val.mae_r), csv::num(row.val.rmse_t), csv::num(row.val.mae_t),
             std::to_string(row.skipped)});
    result.epochs.push_back(row);
    if (row.val.mae_r < best_mae || val_pairs.empty()) {
      best_mae = row.val.mae_r;
      result.best = params;
      result.best_epoch = epoch;
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (progress) {
      *progress << "epoch " << epoch << " total " << row.total << " val mae_r " << row.val.mae_r << " mae_t "
                << row.val.mae_t << " (" << elapsed << " s)" << std::endl;
    }
    log.save(out_dir / "train_log.csv");
    save_checkpoint(out_dir / "best.ckpt", {cfg, result.best});
    // The limit is a hard budget: stop unless another epoch as slow as the slowest so far still fits.
    slowest = std::max(slowest, elapsed - previous_elapsed);
    previous_elapsed = elapsed;
    if (cfg.train.time_limit_seconds > 0.0 && elapsed + slowest > cfg.train.time_limit_seconds) break;
  }
  result.last = params;
  log.save(out_dir / "train_log.csv");
  save_checkpoint(out_dir / "best.ckpt", {cfg, result.best});
  save_checkpoint(out_dir / "last.ckpt", {cfg, result.last});
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream timing(out_dir / "train_timing.txt");
  timing << "seconds " << result.seconds << "\nepochs " << result.epochs.size() << "\n";
  return result;
}

}  // namespace ifnet::train
