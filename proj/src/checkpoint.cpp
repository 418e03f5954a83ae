#include "dsstdp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dsstdp {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'S', 'T', 'D', 'P', 'C', 'K'};
constexpr std::uint32_t kNoClass = 0xFFFFFFFFu;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void reals(std::span<const double> v) {
    for (double x : v) f64(x);
  }
  void bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t{in_[pos_++]} << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t{in_[pos_++]} << (8 * b);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void reals(std::span<double> out) {
    need(8 * out.size());
    for (double& x : out) x = f64();
  }
  bool magic() {
    need(sizeof kMagic);
    const bool ok = std::memcmp(in_.data() + pos_, kMagic, sizeof kMagic) == 0;
    pos_ += sizeof kMagic;
    return ok;
  }
  std::size_t size(std::size_t limit) {
    const std::uint64_t v = u64();
    if (v > limit) throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint: implausible size field");
    return static_cast<std::size_t>(v);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint: truncated");
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

bool same_classifier(const ClassifierModel& a, const ClassifierModel& b) {
  return a.kind == b.kind && a.classes == b.classes && a.association == b.association && a.response == b.response &&
         a.counts == b.counts;
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& o) const {
  if (config_hash != o.config_hash || rule != o.rule || weights != o.weights || delays != o.delays ||
      thresholds != o.thresholds || classifiers.size() != o.classifiers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < classifiers.size(); ++i) {
    if (!same_classifier(classifiers[i], o.classifiers[i])) return false;
  }
  return true;
}

Checkpoint make_checkpoint(const DiehlCookNetwork& network, const ExperimentConfig& config,
                           std::vector<ClassifierModel> classifiers) {
  Checkpoint c;
  c.config_hash = config.model_hash();
  c.rule = network.config().rule.rule;
  c.weights = network.input_connection().weights();
  c.delays = network.input_connection().delays();
  const auto theta = network.excitatory().thresholds();
  c.thresholds.assign(theta.begin(), theta.end());
  c.classifiers = std::move(classifiers);
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  if (!c.delays.same_shape(c.weights) || c.thresholds.size() != c.neurons()) {
    throw CheckpointError(CheckpointError::Kind::shape, "checkpoint: inconsistent parameter shapes");
  }
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(Checkpoint::kVersion);
  w.u64(c.config_hash);
  w.u32(static_cast<std::uint32_t>(c.rule));
  w.u64(c.neurons());
  w.u64(c.inputs());
  w.reals(c.weights.values());
  w.reals(c.delays.values());
  w.reals(c.thresholds);
  w.u32(static_cast<std::uint32_t>(c.classifiers.size()));
  for (const auto& m : c.classifiers) {
    if (m.neurons() != c.neurons()) {
      throw CheckpointError(CheckpointError::Kind::shape, "checkpoint: classifier width differs from network");
    }
    w.u32(static_cast<std::uint32_t>(m.kind));
    w.u64(m.classes);
    for (const auto& a : m.association) w.u32(a ? *a : kNoClass);
    w.reals(m.response.values());
    for (auto n : m.counts) w.u64(n);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (!r.magic()) throw CheckpointError(CheckpointError::Kind::bad_magic, "checkpoint: not a checkpoint file");
  const auto version = r.u32();
  if (version != Checkpoint::kVersion) {
    throw CheckpointError(CheckpointError::Kind::version,
                          "checkpoint: unsupported version " + std::to_string(version));
  }
  constexpr std::size_t kLimit = std::size_t{1} << 32;
  Checkpoint c;
  c.config_hash = r.u64();
  const auto rule = r.u32();
  if (rule > static_cast<std::uint32_t>(LearningRule::dr_stdp)) {
    throw CheckpointError(CheckpointError::Kind::bad_magic, "checkpoint: unknown rule id");
  }
  c.rule = static_cast<LearningRule>(rule);
  const std::size_t n = r.size(kLimit);
  const std::size_t in = r.size(kLimit);
  c.weights = RealMatrix(n, in);
  c.delays = RealMatrix(n, in);
  c.thresholds.resize(n);
  r.reals(c.weights.values());
  r.reals(c.delays.values());
  r.reals(c.thresholds);
  const auto models = r.u32();
  for (std::uint32_t i = 0; i < models; ++i) {
    ClassifierModel m;
    const auto kind = r.u32();
    if (kind > static_cast<std::uint32_t>(ScoreKind::responsiveness)) {
      throw CheckpointError(CheckpointError::Kind::bad_magic, "checkpoint: unknown score kind id");
    }
    m.kind = static_cast<ScoreKind>(kind);
    m.classes = r.size(1u << 16);
    m.association.resize(n);
    for (auto& a : m.association) {
      const auto v = r.u32();
      if (v == kNoClass) {
        a.reset();
      } else if (v < m.classes) {
        a = v;
      } else {
        throw CheckpointError(CheckpointError::Kind::shape, "checkpoint: association out of range");
      }
    }
    m.response = RealMatrix(n, m.classes);
    r.reals(m.response.values());
    m.counts.resize(m.classes);
    for (auto& k : m.counts) k = static_cast<std::size_t>(r.u64());
    c.classifiers.push_back(std::move(m));
  }
  if (!r.done()) throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

void check_compatible(const Checkpoint& ckpt, const ExperimentConfig& expected) {
  const auto& n = expected.network;
  if (ckpt.neurons() != n.neurons || ckpt.inputs() != n.input_size) {
    throw CheckpointError(CheckpointError::Kind::shape,
                          "checkpoint holds " + std::to_string(ckpt.neurons()) + "x" + std::to_string(ckpt.inputs()) +
                              " parameters, config expects " + std::to_string(n.neurons) + "x" +
                              std::to_string(n.input_size));
  }
  if (ckpt.rule != n.rule.rule) {
    throw CheckpointError(CheckpointError::Kind::config_mismatch,
                          "checkpoint was trained with " + std::string(to_string(ckpt.rule)) + ", config says " +
                              std::string(to_string(n.rule.rule)));
  }
  if (ckpt.config_hash != expected.model_hash()) {
    throw CheckpointError(CheckpointError::Kind::config_mismatch,
                          "checkpoint model hash differs from the config's; network settings changed");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ExperimentConfig& expected) {
  Checkpoint c = load_checkpoint(path);
  check_compatible(c, expected);
  return c;
}

DiehlCookNetwork restore_network(const Checkpoint& ckpt, const ExperimentConfig& config) {
  check_compatible(ckpt, config);
  DiehlCookNetwork net(config.network);
  net.set_parameters(ckpt.weights, ckpt.delays, ckpt.thresholds);
  return net;
}

MetricsRecord run_eval(const Checkpoint& ckpt, const ExperimentConfig& config, const Dataset& data) {
  const auto net = restore_network(ckpt, config);
  return evaluate(net, config, data).record;
}

}  // namespace dsstdp
