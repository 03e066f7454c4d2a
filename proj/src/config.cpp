#include "ifnet/config.hpp"

#include "ifnet/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace ifnet {

using nlohmann::json;

namespace {

const char* name(PositionalEmbedding p) {
  switch (p) {
    case PositionalEmbedding::kDescriptor: return "descriptor";
    case PositionalEmbedding::kXyz: return "xyz";
    case PositionalEmbedding::kNone: return "none";
  }
  return "descriptor";
}

const char* name(ConsistencyTarget c) {
  return c == ConsistencyTarget::kTrueTarget ? "true_target" : "pseudo_target";
}

const char* name(CropMode c) {
  switch (c) {
    case CropMode::kNone: return "none";
    case CropMode::kJoint: return "joint";
    case CropMode::kIndependent: return "independent";
  }
  return "joint";
}

// Reads the keys of one object, rejecting anything it does not know about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError("config: " + path_ + " must be an object", 0);
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ParseError("config: unknown key " + path_ + "." + key, 0);
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParseError("config: bad value for " + path_ + "." + key + ": " + e.what(), 0);
    }
  }

  template <typename E>
  void get_enum(const char* key, E& out, std::initializer_list<E> options) {
    std::string text = name(out);
    get(key, text);
    for (E e : options) {
      if (text == name(e)) {
        out = e;
        return;
      }
    }
    throw ParseError("config: bad value for " + path_ + "." + key + ": " + text, 0);
  }

  const json& child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return j_.contains(key) ? j_.at(key) : empty;
  }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json loss_json(const LossConfig& l) {
  return {{"huber_delta", l.huber_delta},
          {"k_consistency", l.k_consistency},
          {"top_k", l.top_k},
          {"consistency_target", name(l.consistency_target)},
          {"use_global", l.use_global},
          {"use_neighborhood", l.use_neighborhood},
          {"use_pseudo", l.use_pseudo}};
}

json pipeline_json(const PipelineConfig& p) {
  return {{"iterations", p.iterations},
          {"time_steps", p.time_steps},
          {"k_geo", p.k_geo},
          {"k_feat", p.k_feat},
          {"k_match", p.k_match},
          {"k_overlap", p.k_overlap},
          {"alpha", p.alpha},
          {"feature_dim", p.feature_dim},
          {"edge_widths", p.edge_widths},
          {"reliability_dim", p.reliability_dim},
          {"positional_embedding", name(p.positional_embedding)},
          {"accumulate_across_steps", p.accumulate_across_steps},
          {"rotation_gradient_gap", p.rotation_gradient_gap},
          {"loss", loss_json(p.loss)}};
}

void read_loss(Section s, LossConfig& l) {
  s.get("huber_delta", l.huber_delta);
  s.get("k_consistency", l.k_consistency);
  s.get("top_k", l.top_k);
  s.get_enum("consistency_target", l.consistency_target,
             {ConsistencyTarget::kPseudoTarget, ConsistencyTarget::kTrueTarget});
  s.get("use_global", l.use_global);
  s.get("use_neighborhood", l.use_neighborhood);
  s.get("use_pseudo", l.use_pseudo);
}

void read_pipeline(Section s, PipelineConfig& p) {
  s.get("iterations", p.iterations);
  s.get("time_steps", p.time_steps);
  s.get("k_geo", p.k_geo);
  s.get("k_feat", p.k_feat);
  s.get("k_match", p.k_match);
  s.get("k_overlap", p.k_overlap);
  s.get("alpha", p.alpha);
  s.get("feature_dim", p.feature_dim);
  s.get("edge_widths", p.edge_widths);
  s.get("reliability_dim", p.reliability_dim);
  s.get_enum("positional_embedding", p.positional_embedding,
             {PositionalEmbedding::kDescriptor, PositionalEmbedding::kXyz, PositionalEmbedding::kNone});
  s.get("accumulate_across_steps", p.accumulate_across_steps);
  s.get("rotation_gradient_gap", p.rotation_gradient_gap);
  read_loss(Section(s.child("loss"), s.path() + ".loss"), p.loss);
}

}  // namespace

void Config::validate() const {
  pipeline.validate();
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ParameterError("config: " + what);
  };
  require(train.learning_rate > 0.0, "train.learning_rate must be > 0");
  require(train.beta1 >= 0.0 && train.beta1 < 1.0, "train.beta1 must be in [0, 1)");
  require(train.beta2 >= 0.0 && train.beta2 < 1.0, "train.beta2 must be in [0, 1)");
  require(train.epsilon > 0.0, "train.epsilon must be > 0");
  require(train.epochs >= 0, "train.epochs must be >= 0");
  require(train.batch_size >= 1, "train.batch_size must be >= 1");
  require(train.gradient_clip >= 0.0, "train.gradient_clip must be >= 0");
  require(train.time_limit_seconds >= 0.0, "train.time_limit_seconds must be >= 0");
  require(train.val_pairs >= 0, "train.val_pairs must be >= 0");
  require(data.num_shapes >= 1, "data.num_shapes must be >= 1");
  require(data.num_points >= 3, "data.num_points must be >= 3");
  require(data.crop_mode == CropMode::kNone || (data.crop_keep >= 3 && data.crop_keep <= data.num_points),
          "data.crop_keep must be in [3, num_points]");
  require(data.max_angle_deg >= 0.0 && data.max_angle_deg <= 180.0, "data.max_angle_deg must be in [0, 180]");
  require(data.max_translation >= 0.0, "data.max_translation must be >= 0");
  require(data.noise_sigma >= 0.0 && data.noise_clip >= 0.0, "data noise parameters must be >= 0");
  require(data.train_fraction >= 0.0 && data.val_fraction >= 0.0 && data.train_fraction + data.val_fraction <= 1.0,
          "data split fractions must be >= 0 and sum to <= 1");
  for (int n : eval.sweep_points) require(n >= 3, "eval.sweep_points entries must be >= 3");
  for (double s : eval.sweep_noise) require(s >= 0.0, "eval.sweep_noise entries must be >= 0");
  require(eval.sweep_pairs >= 1, "eval.sweep_pairs must be >= 1");
  require(eval.icp_max_iterations >= 1, "eval.icp_max_iterations must be >= 1");
}

std::string to_json(const Config& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["pipeline"] = pipeline_json(cfg.pipeline);
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"epsilon", cfg.train.epsilon},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"gradient_clip", cfg.train.gradient_clip},
                {"time_limit_seconds", cfg.train.time_limit_seconds},
                {"val_pairs", cfg.train.val_pairs}};
  j["data"] = {{"num_shapes", cfg.data.num_shapes},
               {"num_points", cfg.data.num_points},
               {"crop_keep", cfg.data.crop_keep},
               {"crop_mode", name(cfg.data.crop_mode)},
               {"max_angle_deg", cfg.data.max_angle_deg},
               {"max_translation", cfg.data.max_translation},
               {"noise_sigma", cfg.data.noise_sigma},
               {"noise_clip", cfg.data.noise_clip},
               {"train_fraction", cfg.data.train_fraction},
               {"val_fraction", cfg.data.val_fraction}};
  j["eval"] = {{"sweep_points", cfg.eval.sweep_points},
               {"sweep_noise", cfg.eval.sweep_noise},
               {"sweep_pairs", cfg.eval.sweep_pairs},
               {"icp_max_iterations", cfg.eval.icp_max_iterations}};
  return j.dump(2) + "\n";
}

Config config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to a line for the message.
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(end), '\n'));
    throw ParseError(std::string("config: malformed JSON: ") + e.what(), line);
  }
  Config cfg;
  {
    Section root(j, "config");
    root.get("seed", cfg.seed);
    read_pipeline(Section(root.child("pipeline"), "pipeline"), cfg.pipeline);
    {
      Section t(root.child("train"), "train");
      t.get("learning_rate", cfg.train.learning_rate);
      t.get("beta1", cfg.train.beta1);
      t.get("beta2", cfg.train.beta2);
      t.get("epsilon", cfg.train.epsilon);
      t.get("epochs", cfg.train.epochs);
      t.get("batch_size", cfg.train.batch_size);
      t.get("gradient_clip", cfg.train.gradient_clip);
      t.get("time_limit_seconds", cfg.train.time_limit_seconds);
      t.get("val_pairs", cfg.train.val_pairs);
    }
    {
      Section d(root.child("data"), "data");
      d.get("num_shapes", cfg.data.num_shapes);
      d.get("num_points", cfg.data.num_points);
      d.get("crop_keep", cfg.data.crop_keep);
      d.get_enum("crop_mode", cfg.data.crop_mode, {CropMode::kNone, CropMode::kJoint, CropMode::kIndependent});
      d.get("max_angle_deg", cfg.data.max_angle_deg);
      d.get("max_translation", cfg.data.max_translation);
      d.get("noise_sigma", cfg.data.noise_sigma);
      d.get("noise_clip", cfg.data.noise_clip);
      d.get("train_fraction", cfg.data.train_fraction);
      d.get("val_fraction", cfg.data.val_fraction);
    }
    {
      Section e(root.child("eval"), "eval");
      e.get("sweep_points", cfg.eval.sweep_points);
      e.get("sweep_noise", cfg.eval.sweep_noise);
      e.get("sweep_pairs", cfg.eval.sweep_pairs);
      e.get("icp_max_iterations", cfg.eval.icp_max_iterations);
    }
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

void save_config(const std::filesystem::path& path, const Config& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("config: cannot write " + path.string());
  out << to_json(cfg);
}

}  // namespace ifnet
