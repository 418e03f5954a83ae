#include "dsstdp/harness.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "dsstdp/rng.hpp"
#include "json.hpp"

namespace dsstdp {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kFitPresentation = 0xF17F17F17F17F170ULL;
constexpr std::uint64_t kTestPresentation = 0x7E577E577E577E50ULL;

// ---- config parsing ----

void check_keys(const YAML::Node& node, std::initializer_list<const char*> known, const std::string& where) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key '" + (where.empty() ? std::string(key) : where + "." + key) + "' has a bad value");
  }
}

void read_kernel(const YAML::Node& node, KernelParams& k, const std::string& where) {
  check_keys(node, {"a_plus", "a_minus", "tau_plus_ms", "tau_minus_ms"}, where);
  read(node, "a_plus", k.a_plus, where);
  read(node, "a_minus", k.a_minus, where);
  read(node, "tau_plus_ms", k.tau_plus_ms, where);
  read(node, "tau_minus_ms", k.tau_minus_ms, where);
}

void read_kernel(const YAML::Node& node, DelayKernelParams& k, const std::string& where) {
  check_keys(node, {"a_plus", "a_minus", "tau_plus_ms", "tau_minus_ms"}, where);
  read(node, "a_plus", k.a_plus, where);
  read(node, "a_minus", k.a_minus, where);
  read(node, "tau_plus_ms", k.tau_plus_ms, where);
  read(node, "tau_minus_ms", k.tau_minus_ms, where);
}

void read_neuron(const YAML::Node& node, NeuronConfig& n, const std::string& where) {
  check_keys(node,
             {"rest_mv", "reset_mv", "tau_membrane_ms", "resistance_mohm", "threshold_mv", "threshold_increment_mv",
              "tau_threshold_ms", "refractory_ms"},
             where);
  read(node, "rest_mv", n.rest_mv, where);
  read(node, "reset_mv", n.reset_mv, where);
  read(node, "tau_membrane_ms", n.tau_membrane_ms, where);
  read(node, "resistance_mohm", n.resistance_mohm, where);
  read(node, "threshold_mv", n.threshold_mv, where);
  read(node, "threshold_increment_mv", n.threshold_increment_mv, where);
  read(node, "tau_threshold_ms", n.tau_threshold_ms, where);
  read(node, "refractory_ms", n.refractory_ms, where);
}

template <class E, class F>
void read_enum(const YAML::Node& node, const char* key, E& out, const std::string& where, F parse) {
  if (!node || !node[key]) return;
  std::string text;
  read(node, key, text, where);
  try {
    out = parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

TraceKind parse_trace_kind(std::string_view s) {
  if (s == "cumulative") return TraceKind::cumulative;
  if (s == "saturating") return TraceKind::saturating;
  if (s == "nearest") return TraceKind::nearest;
  throw std::invalid_argument("unknown trace kind '" + std::string(s) + "'");
}

std::string_view trace_kind_name(TraceKind k) {
  switch (k) {
    case TraceKind::cumulative: return "cumulative";
    case TraceKind::saturating: return "saturating";
    case TraceKind::nearest: return "nearest";
  }
  return "cumulative";
}

void set_scores(ExperimentConfig& c, std::string_view s) {
  if (s == "rate") {
    c.score_rate = true;
    c.score_responsiveness = false;
  } else if (s == "responsiveness" || s == "resp") {
    c.score_rate = false;
    c.score_responsiveness = true;
  } else if (s == "both") {
    c.score_rate = c.score_responsiveness = true;
  } else {
    throw ConfigError("score must be rate, responsiveness or both, got '" + std::string(s) + "'");
  }
}

std::string scores_name(const ExperimentConfig& c) {
  if (c.score_rate && c.score_responsiveness) return "both";
  return c.score_rate ? "rate" : "responsiveness";
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---- evaluation helpers ----

struct ScoreRows {
  RealMatrix rate;
  RealMatrix responsiveness;
};

// Runs a frozen copy of `network` over `indices` and collects both scores.
ScoreRows frozen_scores(const DiehlCookNetwork& network, const ExperimentConfig& config,
                        std::span<const ImageSample> pool, std::span<const std::size_t> indices,
                        std::uint64_t presentation) {
  const std::size_t n = network.neurons();
  ScoreRows rows{RealMatrix(indices.size(), n), RealMatrix(indices.size(), n)};
  const PoissonEncoder encoder = config.encoder();

  auto run_range = [&](std::size_t begin, std::size_t end) {
    DiehlCookNetwork net = network;
    net.discard_staged();
    net.set_training(false);
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t idx = indices[s];
      net.reset_dynamic_state();
      const auto input = encoder.encode(pool[idx].pixels, encoding_key(config.encoding_seed, presentation, idx));
      const auto out = net.run_sample(input);
      const auto r = score_rate(out);
      const auto q = score_responsiveness(out);
      std::copy(r.begin(), r.end(), rows.rate.row(s).begin());
      std::copy(q.begin(), q.end(), rows.responsiveness.row(s).begin());
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, indices.size()));
  if (workers == 1) {
    run_range(0, indices.size());
    return rows;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (indices.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(indices.size(), w * chunk);
    const std::size_t end = std::min(indices.size(), begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      try {
        run_range(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::vector<std::uint8_t> labels_of(std::span<const ImageSample> pool, std::span<const std::size_t> indices) {
  std::vector<std::uint8_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(pool[i].label);
  return out;
}

ScoreMetrics accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint8_t> truth) {
  std::array<std::size_t, kClasses> correct{}, total{};
  std::size_t all = 0;
  for (std::size_t s = 0; s < truth.size(); ++s) {
    ++total[truth[s]];
    if (predicted[s] == truth[s]) {
      ++correct[truth[s]];
      ++all;
    }
  }
  ScoreMetrics m;
  m.accuracy = truth.empty() ? std::nan("") : static_cast<double>(all) / static_cast<double>(truth.size());
  for (std::size_t k = 0; k < kClasses; ++k) {
    m.class_accuracy[k] =
        total[k] ? static_cast<double>(correct[k]) / static_cast<double>(total[k]) : std::nan("");
  }
  return m;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same_scores(const std::optional<ScoreMetrics>& a, const std::optional<ScoreMetrics>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  if (!same_double(a->accuracy, b->accuracy)) return false;
  for (std::size_t k = 0; k < kClasses; ++k) {
    if (!same_double(a->class_accuracy[k], b->class_accuracy[k])) return false;
  }
  return true;
}

}  // namespace

// ---- config ----

ExperimentConfig ExperimentConfig::defaults(LearningRule rule) {
  ExperimentConfig c;
  c.network.rule = RuleParams::defaults(rule);
  return c;
}

void ExperimentConfig::validate() const {
  try {
    network.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(duration_ms > 0.0)) throw ConfigError("duration_ms must be positive");
  if (!(max_rate_hz > 0.0)) throw ConfigError("max_rate_hz must be positive");
  const double steps = duration_ms / network.dt_ms;
  if (std::abs(steps - std::round(steps)) > 1e-9) throw ConfigError("duration_ms must be a multiple of dt_ms");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (!score_rate && !score_responsiveness) throw ConfigError("at least one score kind is required");
  if (split_per_class == 0) throw ConfigError("split_per_class must be positive");
  if (train_per_class > split_per_class) throw ConfigError("train_per_class exceeds split_per_class");
  if (network.input_size != kImagePixels) throw ConfigError("input_size must be 784 for MNIST");
}

std::uint64_t ExperimentConfig::model_hash() const {
  const auto& n = network;
  std::ostringstream s;
  auto neuron = [&](const NeuronConfig& c) {
    s << num(c.rest_mv) << ',' << num(c.reset_mv) << ',' << num(c.tau_membrane_ms) << ','
      << num(c.resistance_mohm) << ',' << num(c.threshold_mv) << ',' << num(c.threshold_increment_mv) << ','
      << num(c.tau_threshold_ms) << ',' << num(c.refractory_ms) << ';';
  };
  s << n.input_size << ';' << n.neurons << ';' << num(n.dt_ms) << ';' << to_string(n.rule.rule) << ';'
    << num(n.rule.weight.a_plus) << ',' << num(n.rule.weight.a_minus) << ',' << num(n.rule.weight.tau_plus_ms)
    << ',' << num(n.rule.weight.tau_minus_ms) << ';' << num(n.rule.delay.a_plus) << ','
    << num(n.rule.delay.a_minus) << ',' << num(n.rule.delay.tau_plus_ms) << ',' << num(n.rule.delay.tau_minus_ms)
    << ';' << trace_kind_name(n.rule.trace_kind) << ',' << num(n.rule.trace_saturation_k) << ','
    << n.rule.learns_delays() << ';' << num(n.bounds.w_min) << ',' << num(n.bounds.w_max) << ','
    << num(n.bounds.mu_plus) << ',' << num(n.bounds.mu_minus) << ',' << num(n.bounds.d_min) << ','
    << num(n.bounds.d_max) << ',' << num(n.bounds.norm_target) << ',' << num(n.bounds.norm_order) << ';'
    << (n.batch_reduction == BatchReduction::mean ? "mean" : "sum") << ';';
  neuron(n.excitatory);
  neuron(n.inhibitory);
  s << num(n.w_exc) << ',' << num(n.w_inh) << ',' << num(n.charge_exc_pc) << ',' << num(n.charge_inh_pc) << ';'
    << num(n.weight_init_max) << ',' << num(n.delay_init_max_ms) << ','
    << (n.delay_init == DelayInit::uniform ? "uniform" : "zero");

  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentConfig parse_config(const std::string& yaml_text, const ConfigOverrides& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  check_keys(root,
             {"rule", "neurons", "epochs", "batch_size", "dt_ms", "duration_ms", "max_rate_hz", "batch_reduction",
              "workers", "seeds", "data", "evaluation", "init", "weight_kernel", "delay_kernel", "traces",
              "learn_delays", "bounds", "connections", "excitatory", "inhibitory"},
             "");

  LearningRule rule = LearningRule::ds_stdp;
  read_enum(root, "rule", rule, "", parse_learning_rule);
  if (overrides.rule) rule = *overrides.rule;
  ExperimentConfig c = ExperimentConfig::defaults(rule);
  auto& n = c.network;

  read(root, "neurons", n.neurons, "");
  read(root, "epochs", c.epochs, "");
  read(root, "batch_size", c.batch_size, "");
  read(root, "dt_ms", n.dt_ms, "");
  read(root, "duration_ms", c.duration_ms, "");
  read(root, "max_rate_hz", c.max_rate_hz, "");
  read(root, "workers", c.workers, "");
  read_enum(root, "batch_reduction", n.batch_reduction, "", [](std::string_view s) {
    if (s == "mean") return BatchReduction::mean;
    if (s == "sum") return BatchReduction::sum;
    throw std::invalid_argument("expected mean or sum");
  });

  const auto seeds = root["seeds"];
  check_keys(seeds, {"init", "encoding", "split"}, "seeds");
  read(seeds, "init", n.seed, "seeds");
  read(seeds, "encoding", c.encoding_seed, "seeds");
  read(seeds, "split", c.split_seed, "seeds");

  const auto data = root["data"];
  check_keys(data, {"dir", "split_per_class", "train_per_class", "test_limit", "fit_set", "fit_limit"}, "data");
  std::string dir;
  read(data, "dir", dir, "data");
  if (!dir.empty()) c.data_dir = dir;
  read(data, "split_per_class", c.split_per_class, "data");
  read(data, "train_per_class", c.train_per_class, "data");
  read(data, "test_limit", c.test_limit, "data");
  read(data, "fit_limit", c.fit_limit, "data");
  read_enum(data, "fit_set", c.fit_set, "data", [](std::string_view s) {
    if (s == "train") return FitSet::train;
    if (s == "validation") return FitSet::validation;
    throw std::invalid_argument("expected train or validation");
  });

  const auto eval = root["evaluation"];
  check_keys(eval, {"scores", "every"}, "evaluation");
  if (eval && eval["scores"] && eval["scores"].IsSequence()) {
    std::vector<std::string> kinds;
    read(eval, "scores", kinds, "evaluation");
    c.score_rate = c.score_responsiveness = false;
    for (const auto& k : kinds) {
      if (k == "rate") c.score_rate = true;
      else if (k == "responsiveness" || k == "resp") c.score_responsiveness = true;
      else throw ConfigError("evaluation.scores: unknown score '" + k + "'");
    }
  } else if (eval && eval["scores"]) {
    std::string kinds;
    read(eval, "scores", kinds, "evaluation");
    set_scores(c, kinds);
  }
  read(eval, "every", c.eval_every, "evaluation");

  const auto init = root["init"];
  check_keys(init, {"weight_max", "delay_max_ms", "delays"}, "init");
  read(init, "weight_max", n.weight_init_max, "init");
  read(init, "delay_max_ms", n.delay_init_max_ms, "init");
  read_enum(init, "delays", n.delay_init, "init", [](std::string_view s) {
    if (s == "uniform") return DelayInit::uniform;
    if (s == "zero") return DelayInit::zero;
    throw std::invalid_argument("expected uniform or zero");
  });

  read_kernel(root["weight_kernel"], n.rule.weight, "weight_kernel");
  read_kernel(root["delay_kernel"], n.rule.delay, "delay_kernel");
  const auto traces = root["traces"];
  check_keys(traces, {"kind", "saturation_k"}, "traces");
  read_enum(traces, "kind", n.rule.trace_kind, "traces", parse_trace_kind);
  read(traces, "saturation_k", n.rule.trace_saturation_k, "traces");
  read(root, "learn_delays", n.rule.learn_delays, "");

  const auto b = root["bounds"];
  check_keys(b, {"w_min", "w_max", "mu_plus", "mu_minus", "d_min", "d_max", "norm_target", "norm_order"}, "bounds");
  read(b, "w_min", n.bounds.w_min, "bounds");
  read(b, "w_max", n.bounds.w_max, "bounds");
  read(b, "mu_plus", n.bounds.mu_plus, "bounds");
  read(b, "mu_minus", n.bounds.mu_minus, "bounds");
  read(b, "d_min", n.bounds.d_min, "bounds");
  read(b, "d_max", n.bounds.d_max, "bounds");
  read(b, "norm_target", n.bounds.norm_target, "bounds");
  read(b, "norm_order", n.bounds.norm_order, "bounds");

  const auto conn = root["connections"];
  check_keys(conn, {"w_exc", "w_inh", "charge_exc_pc", "charge_inh_pc"}, "connections");
  read(conn, "w_exc", n.w_exc, "connections");
  read(conn, "w_inh", n.w_inh, "connections");
  read(conn, "charge_exc_pc", n.charge_exc_pc, "connections");
  read(conn, "charge_inh_pc", n.charge_inh_pc, "connections");

  read_neuron(root["excitatory"], n.excitatory, "excitatory");
  read_neuron(root["inhibitory"], n.inhibitory, "inhibitory");

  if (overrides.neurons) n.neurons = *overrides.neurons;
  if (overrides.epochs) c.epochs = *overrides.epochs;
  if (overrides.seed) n.seed = *overrides.seed;
  if (overrides.data_dir) c.data_dir = *overrides.data_dir;
  if (overrides.score) set_scores(c, *overrides.score);
  if (overrides.workers) c.workers = *overrides.workers;

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string dump_config(const ExperimentConfig& c) {
  const auto& n = c.network;
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  auto neuron = [&](const char* name, const NeuronConfig& x) {
    e << YAML::Key << name << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "rest_mv" << YAML::Value << x.rest_mv;
    e << YAML::Key << "reset_mv" << YAML::Value << x.reset_mv;
    e << YAML::Key << "tau_membrane_ms" << YAML::Value << x.tau_membrane_ms;
    e << YAML::Key << "resistance_mohm" << YAML::Value << x.resistance_mohm;
    e << YAML::Key << "threshold_mv" << YAML::Value << x.threshold_mv;
    e << YAML::Key << "threshold_increment_mv" << YAML::Value << x.threshold_increment_mv;
    e << YAML::Key << "tau_threshold_ms" << YAML::Value << x.tau_threshold_ms;
    e << YAML::Key << "refractory_ms" << YAML::Value << x.refractory_ms;
    e << YAML::EndMap;
  };
  auto kernel = [&](const char* name, double ap, double am, double tp, double tm) {
    e << YAML::Key << name << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "a_plus" << YAML::Value << ap;
    e << YAML::Key << "a_minus" << YAML::Value << am;
    e << YAML::Key << "tau_plus_ms" << YAML::Value << tp;
    e << YAML::Key << "tau_minus_ms" << YAML::Value << tm;
    e << YAML::EndMap;
  };

  e << YAML::BeginMap;
  e << YAML::Key << "rule" << YAML::Value << std::string(to_string(n.rule.rule));
  e << YAML::Key << "neurons" << YAML::Value << n.neurons;
  e << YAML::Key << "epochs" << YAML::Value << c.epochs;
  e << YAML::Key << "batch_size" << YAML::Value << c.batch_size;
  e << YAML::Key << "dt_ms" << YAML::Value << n.dt_ms;
  e << YAML::Key << "duration_ms" << YAML::Value << c.duration_ms;
  e << YAML::Key << "max_rate_hz" << YAML::Value << c.max_rate_hz;
  e << YAML::Key << "batch_reduction" << YAML::Value
    << (n.batch_reduction == BatchReduction::mean ? "mean" : "sum");
  e << YAML::Key << "workers" << YAML::Value << c.workers;

  e << YAML::Key << "seeds" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "init" << YAML::Value << n.seed;
  e << YAML::Key << "encoding" << YAML::Value << c.encoding_seed;
  e << YAML::Key << "split" << YAML::Value << c.split_seed;
  e << YAML::EndMap;

  e << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dir" << YAML::Value << c.data_dir.string();
  e << YAML::Key << "split_per_class" << YAML::Value << c.split_per_class;
  e << YAML::Key << "train_per_class" << YAML::Value << c.train_per_class;
  e << YAML::Key << "test_limit" << YAML::Value << c.test_limit;
  e << YAML::Key << "fit_set" << YAML::Value << (c.fit_set == FitSet::train ? "train" : "validation");
  e << YAML::Key << "fit_limit" << YAML::Value << c.fit_limit;
  e << YAML::EndMap;

  e << YAML::Key << "evaluation" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "scores" << YAML::Value << scores_name(c);
  e << YAML::Key << "every" << YAML::Value << c.eval_every;
  e << YAML::EndMap;

  e << YAML::Key << "init" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "weight_max" << YAML::Value << n.weight_init_max;
  e << YAML::Key << "delay_max_ms" << YAML::Value << n.delay_init_max_ms;
  e << YAML::Key << "delays" << YAML::Value << (n.delay_init == DelayInit::uniform ? "uniform" : "zero");
  e << YAML::EndMap;

  kernel("weight_kernel", n.rule.weight.a_plus, n.rule.weight.a_minus, n.rule.weight.tau_plus_ms,
         n.rule.weight.tau_minus_ms);
  kernel("delay_kernel", n.rule.delay.a_plus, n.rule.delay.a_minus, n.rule.delay.tau_plus_ms,
         n.rule.delay.tau_minus_ms);
  e << YAML::Key << "traces" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << std::string(trace_kind_name(n.rule.trace_kind));
  e << YAML::Key << "saturation_k" << YAML::Value << n.rule.trace_saturation_k;
  e << YAML::EndMap;
  e << YAML::Key << "learn_delays" << YAML::Value << n.rule.learn_delays;

  e << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "w_min" << YAML::Value << n.bounds.w_min;
  e << YAML::Key << "w_max" << YAML::Value << n.bounds.w_max;
  e << YAML::Key << "mu_plus" << YAML::Value << n.bounds.mu_plus;
  e << YAML::Key << "mu_minus" << YAML::Value << n.bounds.mu_minus;
  e << YAML::Key << "d_min" << YAML::Value << n.bounds.d_min;
  e << YAML::Key << "d_max" << YAML::Value << n.bounds.d_max;
  e << YAML::Key << "norm_target" << YAML::Value << n.bounds.norm_target;
  e << YAML::Key << "norm_order" << YAML::Value << n.bounds.norm_order;
  e << YAML::EndMap;

  e << YAML::Key << "connections" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "w_exc" << YAML::Value << n.w_exc;
  e << YAML::Key << "w_inh" << YAML::Value << n.w_inh;
  e << YAML::Key << "charge_exc_pc" << YAML::Value << n.charge_exc_pc;
  e << YAML::Key << "charge_inh_pc" << YAML::Value << n.charge_inh_pc;
  e << YAML::EndMap;

  neuron("excitatory", n.excitatory);
  neuron("inhibitory", n.inhibitory);
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

// ---- data ----

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.data_dir.empty()) throw ConfigError("no data directory configured");
  const auto files = MnistFiles::in(config.data_dir);
  Dataset d;
  d.train_pool = load_idx(files.train_images, files.train_labels);
  d.test_pool = load_idx(files.test_images, files.test_labels);

  const Split split = split_train_val(d.train_pool, config.split_seed, config.split_per_class);
  d.train = config.train_per_class == 0 ? split.train
                                        : balanced_subset(d.train_pool, split.train, config.train_per_class);
  d.fit = config.fit_set == FitSet::train ? d.train : split.validation;
  if (config.fit_limit > 0 && config.fit_limit < d.fit.size()) d.fit.resize(config.fit_limit);

  const std::size_t tests = config.test_limit == 0 ? d.test_pool.size() : std::min(config.test_limit, d.test_pool.size());
  d.test.resize(tests);
  for (std::size_t i = 0; i < tests; ++i) d.test[i] = i;
  return d;
}

// ---- metrics ----

bool MetricsRecord::same_results(const MetricsRecord& o) const {
  return epoch == o.epoch && same_scores(rate, o.rate) && same_scores(responsiveness, o.responsiveness) &&
         same_double(weight_var, o.weight_var) && same_double(delay_mean, o.delay_mean) &&
         same_double(delay_var, o.delay_var) && unassigned == o.unassigned && zero_norm_rows == o.zero_norm_rows;
}

FiveNumber five_number(std::span<const double> values) {
  std::vector<double> v;
  for (double x : values) {
    if (!std::isnan(x)) v.push_back(x);
  }
  if (v.empty()) {
    const double nan = std::nan("");
    return {nan, nan, nan, nan, nan};
  }
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

std::vector<std::string> metrics_columns() {
  std::vector<std::string> cols{"epoch", "acc_rate", "acc_resp"};
  for (const char* kind : {"rate", "resp"}) {
    for (std::size_t k = 0; k < kClasses; ++k) cols.push_back(std::string("class_acc_") + kind + "_" + std::to_string(k));
  }
  for (const char* c : {"weight_var", "delay_mean", "delay_var", "unassigned", "seconds", "zero_norm_rows"}) {
    cols.emplace_back(c);
  }
  return cols;
}

namespace {

nlohmann::json to_json(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

double from_json(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  auto scores = [&](const char* acc_key, const char* class_key, const std::optional<ScoreMetrics>& m) {
    if (!m) {
      j[acc_key] = nullptr;
      j[class_key] = nullptr;
      return;
    }
    j[acc_key] = to_json(m->accuracy);
    auto arr = nlohmann::json::array();
    for (double a : m->class_accuracy) arr.push_back(to_json(a));
    j[class_key] = arr;
  };
  scores("acc_rate", "class_acc_rate", r.rate);
  scores("acc_resp", "class_acc_resp", r.responsiveness);
  j["weight_var"] = to_json(r.weight_var);
  j["delay_mean"] = to_json(r.delay_mean);
  j["delay_var"] = to_json(r.delay_var);
  j["unassigned"] = r.unassigned;
  j["seconds"] = to_json(r.seconds);
  j["zero_norm_rows"] = r.zero_norm_rows;
  return j;
}

std::optional<ScoreMetrics> scores_from_json(const nlohmann::json& j, const char* acc_key, const char* class_key) {
  if (!j.contains(acc_key) || (j[acc_key].is_null() && (!j.contains(class_key) || j[class_key].is_null()))) {
    return std::nullopt;
  }
  ScoreMetrics m;
  m.accuracy = from_json(j[acc_key]);
  const auto& arr = j.at(class_key);
  if (!arr.is_array() || arr.size() != kClasses) throw std::runtime_error("metrics: bad per-class accuracy array");
  for (std::size_t k = 0; k < kClasses; ++k) m.class_accuracy[k] = from_json(arr[k]);
  return m;
}

}  // namespace

void write_metrics(std::ostream& out, std::span<const MetricsRecord> records, MetricsFormat format) {
  if (format == MetricsFormat::json_lines) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    return;
  }
  const auto cols = metrics_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << '\n';
  auto cell = [](double v) { return std::isnan(v) ? std::string("nan") : num(v); };
  for (const auto& r : records) {
    out << r.epoch;
    out << ',' << (r.rate ? cell(r.rate->accuracy) : "");
    out << ',' << (r.responsiveness ? cell(r.responsiveness->accuracy) : "");
    for (const auto* m : {&r.rate, &r.responsiveness}) {
      for (std::size_t k = 0; k < kClasses; ++k) out << ',' << (*m ? cell((*m)->class_accuracy[k]) : "");
    }
    out << ',' << cell(r.weight_var) << ',' << cell(r.delay_mean) << ',' << cell(r.delay_var) << ',' << r.unassigned
        << ',' << cell(r.seconds) << ',' << r.zero_norm_rows << '\n';
  }
}

void export_metrics(const std::filesystem::path& path, std::span<const MetricsRecord> records, MetricsFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_metrics(out, records, format);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<MetricsRecord> read_metrics_json_lines(std::istream& in) {
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    MetricsRecord r;
    r.epoch = j.at("epoch").get<std::size_t>();
    r.rate = scores_from_json(j, "acc_rate", "class_acc_rate");
    r.responsiveness = scores_from_json(j, "acc_resp", "class_acc_resp");
    r.weight_var = from_json(j.at("weight_var"));
    r.delay_mean = from_json(j.at("delay_mean"));
    r.delay_var = from_json(j.at("delay_var"));
    r.unassigned = j.at("unassigned").get<std::size_t>();
    r.seconds = from_json(j.at("seconds"));
    r.zero_norm_rows = j.value("zero_norm_rows", std::size_t{0});
    out.push_back(r);
  }
  return out;
}

// ---- evaluation and training ----

void fill_parameter_stats(MetricsRecord& record, const DiehlCookNetwork& network) {
  record.weight_var = variance_of(network.input_connection().weights().values());
  record.delay_mean = mean_of(network.input_connection().delays().values());
  record.delay_var = variance_of(network.input_connection().delays().values());
}

Evaluation evaluate(const DiehlCookNetwork& network, const ExperimentConfig& config, const Dataset& data) {
  Evaluation ev;
  const auto fit_rows = frozen_scores(network, config, data.train_pool, data.fit, kFitPresentation);
  const auto test_rows = frozen_scores(network, config, data.test_pool, data.test, kTestPresentation);
  const auto fit_labels = labels_of(data.train_pool, data.fit);
  const auto test_labels = labels_of(data.test_pool, data.test);

  if (config.score_rate) {
    ev.rate = fit(fit_rows.rate, fit_labels, kClasses, ScoreKind::rate);
    ev.record.rate = accuracy(predict(*ev.rate, test_rows.rate).labels, test_labels);
    ev.record.unassigned = ev.rate->unassigned();
  }
  if (config.score_responsiveness) {
    ev.responsiveness = fit(fit_rows.responsiveness, fit_labels, kClasses, ScoreKind::responsiveness);
    ev.record.responsiveness = accuracy(predict(*ev.responsiveness, test_rows.responsiveness).labels, test_labels);
    ev.record.unassigned = ev.responsiveness->unassigned();
  }
  fill_parameter_stats(ev.record, network);
  return ev;
}

TrainResult run_train(const ExperimentConfig& config, const Dataset& data, const TrainHooks& hooks) {
  config.validate();
  if (data.train.empty() && config.epochs > 0) throw ConfigError("training set is empty");
  const auto started = std::chrono::steady_clock::now();
  const PoissonEncoder encoder = config.encoder();

  TrainResult result;
  result.network = DiehlCookNetwork(config.network);
  auto& net = result.network;
  std::size_t zero_rows = 0;

  auto record_eval = [&](std::size_t epoch) {
    Evaluation ev = evaluate(net, config, data);
    ev.record.epoch = epoch;
    ev.record.zero_norm_rows = zero_rows;
    ev.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (ev.record.rate && ev.record.rate->accuracy > result.best_rate.accuracy) {
      result.best_rate = {ev.record.rate->accuracy, epoch};
    }
    if (ev.record.responsiveness && ev.record.responsiveness->accuracy > result.best_responsiveness.accuracy) {
      result.best_responsiveness = {ev.record.responsiveness->accuracy, epoch};
    }
    result.rate = std::move(ev.rate);
    result.responsiveness = std::move(ev.responsiveness);
    if (hooks.on_metrics) hooks.on_metrics(ev.record);
    result.metrics.push_back(ev.record);
  };

  record_eval(0);

  std::vector<std::size_t> order;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order = data.train;
    seeded_shuffle(order, derive_seed({config.split_seed, kShuffleStream, epoch}));
    net.set_training(true);

    const std::size_t batches = (order.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      auto present = [&](DiehlCookNetwork& n, std::size_t s) {
        const std::size_t idx = order[s];
        n.reset_dynamic_state();
        n.run_sample(encoder.encode(data.train_pool[idx].pixels, encoding_key(config.encoding_seed, epoch, idx)));
      };

      const std::size_t workers = std::min(config.workers, end - begin);
      if (workers <= 1) {
        for (std::size_t s = begin; s < end; ++s) present(net, s);
      } else {
        // Replicas share the batch-start parameters; their staged deltas are
        // merged back in worker order.
        std::vector<DiehlCookNetwork> replicas(workers, net);
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> threads;
        const std::size_t chunk = (end - begin + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
          const std::size_t lo = std::min(end, begin + w * chunk);
          const std::size_t hi = std::min(end, lo + chunk);
          threads.emplace_back([&, w, lo, hi] {
            try {
              for (std::size_t s = lo; s < hi; ++s) present(replicas[w], s);
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }
        for (const auto& r : replicas) net.merge_staged(r);
      }
      zero_rows = net.apply_batch().zero_norm_rows;
      if (hooks.on_batch) hooks.on_batch(epoch, b + 1, batches);
    }
    net.set_training(false);
    net.reset_dynamic_state();
    if (hooks.on_epoch) hooks.on_epoch(epoch, net);

    const bool cadence = config.eval_every > 0 && epoch % config.eval_every == 0;
    if (cadence || epoch == config.epochs) record_eval(epoch);
  }
  return result;
}

}  // namespace dsstdp
