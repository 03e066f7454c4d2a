#include "ifnet/dataset.hpp"

#include "ifnet/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace ifnet::data {

using nlohmann::json;
using geom::Index;

namespace {

constexpr double kPi = std::numbers::pi;

enum class Primitive { kEllipsoid, kBox, kCylinder, kTorus };

struct Part {
  Primitive kind;
  Eigen::Vector3d size;  // semi-axes, half-extents, (r, h/2, -) or (R, r, -)
  Eigen::Matrix3d rotation;
  Eigen::Vector3d offset;
  double area;
};

double approx_area(Primitive kind, const Eigen::Vector3d& s) {
  switch (kind) {
    case Primitive::kEllipsoid: {
      // Knud Thomsen's approximation.
      const double p = 1.6075;
      const double t = (std::pow(s.x() * s.y(), p) + std::pow(s.x() * s.z(), p) + std::pow(s.y() * s.z(), p)) / 3.0;
      return 4.0 * kPi * std::pow(t, 1.0 / p);
    }
    case Primitive::kBox: return 8.0 * (s.x() * s.y() + s.y() * s.z() + s.x() * s.z());
    case Primitive::kCylinder: return 2.0 * kPi * s.x() * (s.x() + 2.0 * s.y());
    case Primitive::kTorus: return 4.0 * kPi * kPi * s.x() * s.y();
  }
  return 1.0;
}

Eigen::Vector3d sample_on(const Part& part, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Vector3d& s = part.size;
  Eigen::Vector3d p;
  switch (part.kind) {
    case Primitive::kEllipsoid: {
      Eigen::Vector3d d;
      do {
        d = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      } while (d.norm() < 1e-12);
      p = d.normalized().cwiseProduct(s);
      break;
    }
    case Primitive::kBox: {
      const double axy = s.x() * s.y();
      const double ayz = s.y() * s.z();
      const double axz = s.x() * s.z();
      const double pick = unit(rng) * (axy + ayz + axz);
      const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
      const double a = 2.0 * unit(rng) - 1.0;
      const double b = 2.0 * unit(rng) - 1.0;
      if (pick < axy) {
        p = {a * s.x(), b * s.y(), sign * s.z()};
      } else if (pick < axy + ayz) {
        p = {sign * s.x(), a * s.y(), b * s.z()};
      } else {
        p = {a * s.x(), sign * s.y(), b * s.z()};
      }
      break;
    }
    case Primitive::kCylinder: {
      const double side = 2.0 * s.y();
      const double cap = s.x();
      const double theta = 2.0 * kPi * unit(rng);
      if (unit(rng) * (side + cap) < side) {
        p = {s.x() * std::cos(theta), s.x() * std::sin(theta), (2.0 * unit(rng) - 1.0) * s.y()};
      } else {
        const double r = s.x() * std::sqrt(unit(rng));
        p = {r * std::cos(theta), r * std::sin(theta), unit(rng) < 0.5 ? -s.y() : s.y()};
      }
      break;
    }
    case Primitive::kTorus: {
      const double u = 2.0 * kPi * unit(rng);
      const double v = 2.0 * kPi * unit(rng);
      const double ring = s.x() + s.y() * std::cos(v);
      p = {ring * std::cos(u), ring * std::sin(u), s.y() * std::sin(v)};
      break;
    }
  }
  return part.rotation * p + part.offset;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  if (q.norm() < 1e-12) return Eigen::Matrix3d::Identity();
  return q.normalized().toRotationMatrix();
}

std::vector<Part> make_parts(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int count = 2 + static_cast<int>(unit(rng) * 3.0);
  std::vector<Part> parts;
  for (int i = 0; i < count; ++i) {
    Part part;
    part.kind = static_cast<Primitive>(std::min(3, static_cast<int>(unit(rng) * 4.0)));
    auto scale = [&] { return 0.15 + 0.5 * unit(rng); };
    part.size = {scale(), scale(), scale()};
    if (part.kind == Primitive::kTorus) part.size.y() = std::min(part.size.y(), 0.6 * part.size.x());
    part.rotation = random_rotation(rng);
    // The first part anchors the shape; the rest hang off it in random directions.
    part.offset = Eigen::Vector3d::Zero();
    if (i > 0) {
      for (int c = 0; c < 3; ++c) part.offset[c] = 0.6 * (2.0 * unit(rng) - 1.0);
    }
    part.area = approx_area(part.kind, part.size);
    parts.push_back(part);
  }
  return parts;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot write " + path.string());
  out << text;
  if (!out) throw ParameterError("write failed: " + path.string());
}

const char* crop_name(CropMode c) {
  switch (c) {
    case CropMode::kNone: return "none";
    case CropMode::kJoint: return "joint";
    case CropMode::kIndependent: return "independent";
  }
  return "none";
}

CropMode crop_from(const std::string& s) {
  if (s == "none") return CropMode::kNone;
  if (s == "joint") return CropMode::kJoint;
  if (s == "independent") return CropMode::kIndependent;
  throw ParseError("manifest: unknown crop mode " + s, 0);
}

Split split_from(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ParseError("manifest: unknown split " + s, 0);
}

}  // namespace

PointCloud sample_shape(std::uint64_t seed, int num_points) {
  if (num_points < 1) throw ParameterError("sample_shape: num_points must be >= 1");
  const std::vector<Part> parts = make_parts(geom::derive_seed(seed, 0));
  double total = 0.0;
  for (const Part& p : parts) total += p.area;
  std::mt19937_64 rng(geom::derive_seed(seed, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd pts(num_points, 3);
  for (int i = 0; i < num_points; ++i) {
    double pick = unit(rng) * total;
    std::size_t which = 0;
    while (which + 1 < parts.size() && pick >= parts[which].area) pick -= parts[which++].area;
    pts.row(i) = sample_on(parts[which], rng).transpose();
  }
  return PointCloud(std::move(pts));
}

Pair make_pair(std::uint64_t sample_seed, const DataConfig& cfg) {
  Pair out;
  const PointCloud shape = geom::normalize(sample_shape(geom::derive_seed(sample_seed, 0), cfg.num_points));
  out.gt = geom::sample_rigid_transform(geom::derive_seed(sample_seed, 1), cfg.max_angle_deg, cfg.max_translation);
  PointCloud source = shape;
  PointCloud target = geom::apply_transform(shape, out.gt);
  if (cfg.crop_mode == CropMode::kJoint) {
    // One far point in world coordinates for both clouds.
    const Eigen::Vector3d far = geom::crop_far_point(source, geom::derive_seed(sample_seed, 2));
    source = geom::crop_toward(source, cfg.crop_keep, far);
    target = geom::crop_toward(target, cfg.crop_keep, far);
  } else if (cfg.crop_mode == CropMode::kIndependent) {
    source = geom::crop_partial(source, cfg.crop_keep, geom::derive_seed(sample_seed, 2));
    target = geom::crop_partial(target, cfg.crop_keep, geom::derive_seed(sample_seed, 3));
  }
  if (cfg.noise_sigma > 0.0) {
    source = geom::add_noise(source, cfg.noise_sigma, cfg.noise_clip, geom::derive_seed(sample_seed, 4));
    target = geom::add_noise(target, cfg.noise_sigma, cfg.noise_clip, geom::derive_seed(sample_seed, 5));
  }
  out.source = std::move(source);
  out.target = std::move(target);
  return out;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

RigidTransform ManifestEntry::gt() const {
  if (!has_gt()) throw ParameterError("manifest entry " + id + " has no ground truth");
  const Eigen::Vector4d& q = *gt_rotation;
  return RigidTransform::from_quaternion(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), *gt_translation);
}

std::vector<const ManifestEntry*> Manifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const ManifestEntry& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

std::string manifest_json(const Manifest& m) {
  json entries = json::array();
  for (const ManifestEntry& e : m.entries) {
    json j = {{"id", e.id},
              {"split", split_name(e.split)},
              {"source_path", e.source_path},
              {"target_path", e.target_path},
              {"noise_sigma", e.noise_sigma},
              {"crop_keep", e.crop_keep},
              {"seed", e.seed}};
    if (e.gt_rotation) j["gt_rotation"] = {(*e.gt_rotation)[0], (*e.gt_rotation)[1], (*e.gt_rotation)[2], (*e.gt_rotation)[3]};
    if (e.gt_translation) j["gt_translation"] = {e.gt_translation->x(), e.gt_translation->y(), e.gt_translation->z()};
    entries.push_back(std::move(j));
  }
  json doc = {{"version", 1},
              {"seed", m.seed},
              {"euler_convention", "intrinsic ZYX, R = Rz(z) * Ry(y) * Rx(x), degrees"},
              {"quaternion_order", "w x y z"},
              {"normalization", {{"center", "centroid"}, {"scale", "unit max radius"}, {"applied", "before transform"}}},
              {"surface_sampling", "points sampled once per generated sample and fixed; never resampled per epoch"},
              {"data",
               {{"num_shapes", m.data.num_shapes},
                {"num_points", m.data.num_points},
                {"crop_keep", m.data.crop_keep},
                {"crop_mode", crop_name(m.data.crop_mode)},
                {"max_angle_deg", m.data.max_angle_deg},
                {"max_translation", m.data.max_translation},
                {"noise_sigma", m.data.noise_sigma},
                {"noise_clip", m.data.noise_clip},
                {"train_fraction", m.data.train_fraction},
                {"val_fraction", m.data.val_fraction}}},
              {"entries", std::move(entries)}};
  return doc.dump(2) + "\n";
}

Manifest generate_dataset(const Config& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "clouds", ec);
  if (ec) throw ParameterError("generate: cannot create " + (out_dir / "clouds").string() + ": " + ec.message());
  Manifest m;
  m.root = out_dir;
  m.data = cfg.data;
  m.seed = cfg.seed;
  const int n = cfg.data.num_shapes;
  const int n_train = static_cast<int>(std::floor(cfg.data.train_fraction * n + 1e-9));
  const int n_val = static_cast<int>(std::floor(cfg.data.val_fraction * n + 1e-9));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = geom::derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    const Pair pair = make_pair(seed, cfg.data);
    char id[16];
    std::snprintf(id, sizeof id, "%05d", i);
    ManifestEntry e;
    e.id = id;
    e.split = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    e.source_path = std::string("clouds/") + id + "_src.xyz";
    e.target_path = std::string("clouds/") + id + "_tgt.xyz";
    const Eigen::Quaterniond q = pair.gt.quaternion();
    e.gt_rotation = Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
    e.gt_translation = pair.gt.translation;
    e.noise_sigma = cfg.data.noise_sigma;
    e.crop_keep = cfg.data.crop_mode == CropMode::kNone ? static_cast<int>(pair.source.size()) : cfg.data.crop_keep;
    e.seed = seed;
    geom::write_cloud(out_dir / e.source_path, pair.source);
    geom::write_cloud(out_dir / e.target_path, pair.target);
    m.entries.push_back(std::move(e));
  }
  write_text(out_dir / "manifest.json", manifest_json(m));
  return m;
}

Manifest load_manifest(const std::filesystem::path& path_or_dir) {
  const std::filesystem::path path =
      std::filesystem::is_directory(path_or_dir) ? path_or_dir / "manifest.json" : path_or_dir;
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError("manifest: malformed JSON in " + path.string() + ": " + e.what(), 0);
  }
  Manifest m;
  m.root = path.parent_path();
  try {
    m.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("data")) {
      const json& d = doc.at("data");
      m.data.num_shapes = d.value("num_shapes", m.data.num_shapes);
      m.data.num_points = d.value("num_points", m.data.num_points);
      m.data.crop_keep = d.value("crop_keep", m.data.crop_keep);
      m.data.crop_mode = crop_from(d.value("crop_mode", std::string("joint")));
      m.data.max_angle_deg = d.value("max_angle_deg", m.data.max_angle_deg);
      m.data.max_translation = d.value("max_translation", m.data.max_translation);
      m.data.noise_sigma = d.value("noise_sigma", m.data.noise_sigma);
      m.data.noise_clip = d.value("noise_clip", m.data.noise_clip);
      m.data.train_fraction = d.value("train_fraction", m.data.train_fraction);
      m.data.val_fraction = d.value("val_fraction", m.data.val_fraction);
    }
    for (const json& j : doc.at("entries")) {
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.split = split_from(j.value("split", std::string("test")));
      e.source_path = j.at("source_path").get<std::string>();
      e.target_path = j.at("target_path").get<std::string>();
      e.noise_sigma = j.value("noise_sigma", 0.0);
      e.crop_keep = j.value("crop_keep", 0);
      e.seed = j.value("seed", std::uint64_t{0});
      if (j.contains("gt_rotation")) {
        const auto q = j.at("gt_rotation").get<std::vector<double>>();
        if (q.size() != 4) throw ParseError("manifest: gt_rotation needs 4 components in entry " + e.id, 0);
        e.gt_rotation = Eigen::Vector4d(q[0], q[1], q[2], q[3]);
      }
      if (j.contains("gt_translation")) {
        const auto t = j.at("gt_translation").get<std::vector<double>>();
        if (t.size() != 3) throw ParseError("manifest: gt_translation needs 3 components in entry " + e.id, 0);
        e.gt_translation = Eigen::Vector3d(t[0], t[1], t[2]);
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError("manifest: " + path.string() + ": " + e.what(), 0);
  }
  return m;
}

LoadedPair load_pair(const Manifest& m, const ManifestEntry& e) {
  return {&e, geom::read_cloud(m.root / e.source_path), geom::read_cloud(m.root / e.target_path)};
}

}  // namespace ifnet::data
