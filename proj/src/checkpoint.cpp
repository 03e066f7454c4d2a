#include "ifnet/checkpoint.hpp"

#include "ifnet/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace ifnet {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'I', 'F', 'N', 'E', 'T', 'C', 'K', 'P'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) throw ParseError(std::string("checkpoint: truncated while reading ") + what, 0);
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string cfg = to_json(ckpt.config);
  put<std::uint64_t>(out, cfg.size());
  out += cfg;
  std::uint32_t count = 0;
  ckpt.params.visit([&](const std::string&, const ad::Matrix&) { ++count; });
  put<std::uint32_t>(out, count);
  ckpt.params.visit([&](const std::string& name, const ad::Matrix& m) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
    }
  });
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParameterError("checkpoint: cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ParameterError("checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParameterError("checkpoint: cannot open " + path.string());
  Reader in(std::string(std::istreambuf_iterator<char>(f), {}));
  if (in.bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw ParseError("checkpoint: bad magic in " + path.string(), 0);
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version), 0);
  const auto cfg_len = in.get<std::uint64_t>("config length");
  Checkpoint ckpt;
  ckpt.config = config_from_json(in.bytes(cfg_len, "config"));

  std::map<std::string, ad::Matrix> arrays;
  const auto count = in.get<std::uint32_t>("array count");
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto name_len = in.get<std::uint32_t>("name length");
    std::string name = in.bytes(name_len, "name");
    const auto rows = in.get<std::uint32_t>("rows");
    const auto cols = in.get<std::uint32_t>("cols");
    ad::Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = in.get<double>("values");
    }
    if (!arrays.emplace(std::move(name), std::move(m)).second) throw ParseError("checkpoint: duplicate array", 0);
  }
  if (!in.done()) throw ParseError("checkpoint: trailing bytes", 0);

  // Shapes and names come from the stored config; every array must be present exactly once.
  ckpt.params = init_parameters(ckpt.config.pipeline, 0);
  ckpt.params.visit([&](const std::string& name, ad::Matrix& m) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw ParseError("checkpoint: missing array " + name, 0);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw ParseError("checkpoint: shape mismatch for " + name, 0);
    }
    m = std::move(it->second);
    arrays.erase(it);
  });
  if (!arrays.empty()) throw ParseError("checkpoint: unexpected array " + arrays.begin()->first, 0);
  return ckpt;
}

}  // namespace ifnet
