#include "dsstdp/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dsstdp {

namespace {

constexpr double kNever = std::numeric_limits<double>::quiet_NaN();

void check_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string("plasticity: ") + what + " has " + std::to_string(got) +
                                " entries, expected " + std::to_string(want));
  }
}

TraceParams rule_trace(const RuleParams& p, double amplitude, double tau_ms) {
  switch (p.trace_kind) {
    case TraceKind::nearest:
      return TraceParams::nearest(amplitude, tau_ms);
    case TraceKind::saturating:
      return TraceParams::saturating(amplitude, tau_ms, p.trace_saturation_k);
    case TraceKind::cumulative:
      break;
  }
  return TraceParams::cumulative(amplitude, tau_ms);
}

}  // namespace

std::string_view to_string(LearningRule rule) {
  switch (rule) {
    case LearningRule::stdp:
      return "stdp";
    case LearningRule::ds_stdp:
      return "ds-stdp";
    case LearningRule::dr_stdp:
      return "dr-stdp";
  }
  return "?";
}

LearningRule parse_learning_rule(std::string_view name) {
  if (name == "stdp") return LearningRule::stdp;
  if (name == "ds-stdp" || name == "ds_stdp") return LearningRule::ds_stdp;
  if (name == "dr-stdp" || name == "dr_stdp") return LearningRule::dr_stdp;
  throw std::invalid_argument("unknown learning rule '" + std::string(name) + "'");
}

void KernelParams::validate() const {
  if (!(tau_plus_ms > 0.0) || !(tau_minus_ms > 0.0)) throw std::invalid_argument("kernel: time constants must be positive");
  if (a_minus > 0.0) throw std::invalid_argument("kernel: a_minus must be <= 0");
}

void DelayKernelParams::validate() const {
  if (!(tau_plus_ms > 0.0) || !(tau_minus_ms > 0.0)) {
    throw std::invalid_argument("delay kernel: time constants must be positive");
  }
  if (a_minus > 0.0) throw std::invalid_argument("delay kernel: a_minus must be <= 0");
}

void BoundsConfig::validate() const {
  if (!(w_min < w_max)) throw std::invalid_argument("bounds: need w_min < w_max");
  if (!(d_min >= 0.0) || !(d_min <= d_max)) throw std::invalid_argument("bounds: need 0 <= d_min <= d_max");
  if (!(mu_plus >= 0.0 && mu_plus <= 1.0) || !(mu_minus >= 0.0 && mu_minus <= 1.0)) {
    throw std::invalid_argument("bounds: power-law exponents must lie in [0, 1]");
  }
  if (!(norm_target > 0.0) || !(norm_order > 0.0)) {
    throw std::invalid_argument("bounds: normalization target and order must be positive");
  }
}

RuleParams RuleParams::defaults(LearningRule rule) {
  RuleParams p;
  p.rule = rule;
  if (rule == LearningRule::dr_stdp) {
    p.weight = {2.5e-4, -2.5e-6, 10.0, 10.0};
    p.delay = {6e-5, -6e-3, 10.0, 10.0};
  }
  p.learn_delays = rule != LearningRule::stdp;
  return p;
}

DelayedSamples sample_delayed(const DelayRingBuffer& history, std::size_t channel, const RealMatrix& delays,
                              double tau_ms) {
  check_length(delays.cols(), history.neurons(), "delay matrix columns");
  DelayedSamples out{RealMatrix(delays.rows(), delays.cols()), Matrix<unsigned char>(delays.rows(), delays.cols())};
  for (std::size_t j = 0; j < delays.rows(); ++j) {
    for (std::size_t i = 0; i < delays.cols(); ++i) {
      const double d = delays(j, i);
      out.trace(j, i) = history.trace_at_delay(channel, i, d, tau_ms);
      out.spikes(j, i) = history.spike_at_delay(i, d) ? 1 : 0;
    }
  }
  return out;
}

DeltaPair stdp_update(std::span<const double> pre_trace, std::span<const double> post_trace, const SpikeStep& pre,
                      const SpikeStep& post) {
  check_length(pre.size(), pre_trace.size(), "pre spikes");
  check_length(post.size(), post_trace.size(), "post spikes");
  DeltaPair out{RealMatrix(post.size(), pre.size()), RealMatrix(post.size(), pre.size())};
  for (std::size_t j = 0; j < post.size(); ++j) {
    for (std::size_t i = 0; i < pre.size(); ++i) {
      if (post[j]) out.plus(j, i) = pre_trace[i];
      if (pre[i]) out.minus(j, i) = post_trace[j];
    }
  }
  return out;
}

DeltaPair ds_stdp_weight_update(const DelayedSamples& pre, std::span<const double> post_trace, const SpikeStep& post) {
  const std::size_t rows = pre.trace.rows();
  const std::size_t cols = pre.trace.cols();
  check_length(post.size(), rows, "post spikes");
  check_length(post_trace.size(), rows, "post trace");
  DeltaPair out{RealMatrix(rows, cols), RealMatrix(rows, cols)};
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t i = 0; i < cols; ++i) {
      if (post[j]) out.plus(j, i) = pre.trace(j, i);
      if (pre.spikes(j, i)) out.minus(j, i) = post_trace[j];
    }
  }
  return out;
}

DeltaPair ds_stdp_delay_update(const DelayedSamples& pre, std::span<const double> post_trace, const SpikeStep& post) {
  const std::size_t rows = pre.trace.rows();
  const std::size_t cols = pre.trace.cols();
  check_length(post.size(), rows, "post spikes");
  check_length(post_trace.size(), rows, "post delay trace");
  DeltaPair out{RealMatrix(rows, cols), RealMatrix(rows, cols)};
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t i = 0; i < cols; ++i) {
      if (pre.spikes(j, i)) out.plus(j, i) = post_trace[j];
      if (post[j]) out.minus(j, i) = pre.trace(j, i);
    }
  }
  return out;
}

DrUpdate dr_pair_update(double t_delta, const KernelParams& weight, const DelayKernelParams& delay) {
  const double lag = std::abs(t_delta);
  if (t_delta >= 0.0) {
    return {weight.a_plus * std::exp(-lag / weight.tau_plus_ms), delay.a_minus * std::exp(-lag / delay.tau_minus_ms)};
  }
  return {weight.a_minus * std::exp(-lag / weight.tau_minus_ms), delay.a_plus * std::exp(-lag / delay.tau_plus_ms)};
}

DrDeltas dr_stdp_update(const LastSpikeState& last, const RealMatrix& delays, const KernelParams& weight,
                        const DelayKernelParams& delay) {
  check_length(last.post_ms.size(), delays.rows(), "post last-spike vector");
  check_length(last.pre_ms.size(), delays.cols(), "pre last-spike vector");
  DrDeltas out{RealMatrix(delays.rows(), delays.cols()), RealMatrix(delays.rows(), delays.cols()),
               RealMatrix(delays.rows(), delays.cols())};
  for (std::size_t j = 0; j < delays.rows(); ++j) {
    if (!last.post_ms[j]) continue;
    for (std::size_t i = 0; i < delays.cols(); ++i) {
      if (!last.pre_ms[i]) continue;
      const double t_delta = *last.post_ms[j] - *last.pre_ms[i] - delays(j, i);
      const auto u = dr_pair_update(t_delta, weight, delay);
      (t_delta >= 0.0 ? out.weight_plus : out.weight_minus)(j, i) = u.weight;
      out.delay(j, i) = u.delay;
    }
  }
  return out;
}

double power_law_bound(double plus, double minus, double value, double lo, double hi, double mu_plus,
                       double mu_minus) {
  return std::pow(hi - value, mu_plus) * plus + std::pow(value - lo, mu_minus) * minus;
}

void clamp_delays(RealMatrix& delays, double d_min, double d_max) {
  for (double& d : delays.values()) d = std::clamp(d, d_min, d_max);
}

std::size_t normalize_weights(RealMatrix& weights, double target, double order) {
  std::size_t zero_rows = 0;
  for (std::size_t j = 0; j < weights.rows(); ++j) {
    auto row = weights.row(j);
    double norm = 0.0;
    if (order == 1.0) {
      for (double w : row) norm += std::abs(w);
    } else {
      for (double w : row) norm += std::pow(std::abs(w), order);
      norm = std::pow(norm, 1.0 / order);
    }
    if (norm == 0.0) {
      ++zero_rows;
      continue;
    }
    const double scale = target / norm;
    for (double& w : row) w *= scale;
  }
  return zero_rows;
}

StagedUpdates::StagedUpdates(std::size_t post, std::size_t pre)
    : weight_plus(post, pre), weight_minus(post, pre), delay(post, pre) {}

void StagedUpdates::clear() {
  weight_plus.fill(0.0);
  weight_minus.fill(0.0);
  delay.fill(0.0);
  samples = 0;
}

void StagedUpdates::merge(const StagedUpdates& other) {
  if (!weight_plus.same_shape(other.weight_plus)) throw std::invalid_argument("staged updates: shape mismatch");
  auto add = [](RealMatrix& into, const RealMatrix& from) {
    auto dst = into.values();
    auto src = from.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  };
  add(weight_plus, other.weight_plus);
  add(weight_minus, other.weight_minus);
  add(delay, other.delay);
  samples += other.samples;
}

ApplyReport apply_staged(DelayedConnection& conn, const StagedUpdates& staged, const BoundsConfig& bounds,
                         const ApplyOptions& options) {
  ApplyReport report;
  double scale = 1.0;
  if (options.reduction == BatchReduction::mean) {
    if (staged.samples == 0) return report;
    scale = 1.0 / static_cast<double>(staged.samples);
  }

  RealMatrix w = conn.weights();
  auto wv = w.values();
  const auto plus = staged.weight_plus.values();
  const auto minus = staged.weight_minus.values();
  for (std::size_t k = 0; k < wv.size(); ++k) {
    const double p = plus[k] * scale;
    const double m = minus[k] * scale;
    const double dw = options.power_law
                          ? power_law_bound(p, m, wv[k], bounds.w_min, bounds.w_max, bounds.mu_plus, bounds.mu_minus)
                          : p + m;
    wv[k] = std::clamp(wv[k] + dw, bounds.w_min, bounds.w_max);
  }

  if (options.learn_delays) {
    RealMatrix d = conn.delays();
    auto dv = d.values();
    const auto dd = staged.delay.values();
    for (std::size_t k = 0; k < dv.size(); ++k) dv[k] += dd[k] * scale;
    clamp_delays(d, std::max(bounds.d_min, conn.d_min()), std::min(bounds.d_max, conn.d_max()));
    conn.set_delays(std::move(d));
  }

  if (options.normalize) {
    report.zero_norm_rows = normalize_weights(w, bounds.norm_target, bounds.norm_order);
    for (double& x : w.values()) x = std::clamp(x, bounds.w_min, bounds.w_max);
  }
  conn.set_weights(std::move(w));
  return report;
}

PlasticityEngine::PlasticityEngine(std::size_t pre, std::size_t post, RuleParams params)
    : params_(params), pre_(pre), post_(post), staged_(post, pre) {
  params_.weight.validate();
  params_.delay.validate();
  if (params_.rule == LearningRule::stdp) params_.learn_delays = false;
  post_trace_ = Trace(post, rule_trace(params_, params_.weight.a_minus, params_.weight.tau_minus_ms));
  post_delay_trace_ = Trace(post, rule_trace(params_, params_.delay.a_plus, params_.delay.tau_plus_ms));
  if (params_.rule == LearningRule::dr_stdp) {
    last_pre_.assign(pre, kNever);
    last_post_.assign(post, kNever);
    flushed_through_.assign(pre * post, 0);
  }
}

std::vector<TraceParams> PlasticityEngine::pre_trace_params() const {
  if (params_.rule == LearningRule::dr_stdp) return {};
  std::vector<TraceParams> out{rule_trace(params_, params_.weight.a_plus, params_.weight.tau_plus_ms)};
  if (params_.learns_delays()) out.push_back(rule_trace(params_, params_.delay.a_minus, params_.delay.tau_minus_ms));
  return out;
}

void PlasticityEngine::observe(const DelayedConnection& conn, const SpikeStep& post, std::size_t step) {
  check_length(conn.pre_size(), pre_, "connection pre size");
  check_length(conn.post_size(), post_, "connection post size");
  check_length(post.size(), post_, "post spikes");
  if (params_.rule == LearningRule::dr_stdp) {
    observe_dr(conn, post, step);
  } else {
    observe_trace_rule(conn, post);
  }
}

void PlasticityEngine::observe_trace_rule(const DelayedConnection& conn, const SpikeStep& post) {
  const double dt = conn.dt();
  post_trace_.step(post, dt);
  const bool delays = params_.learns_delays();
  if (delays) post_delay_trace_.step(post, dt);
  if (conn.trace_channels() < (delays ? 2u : 1u)) {
    throw std::logic_error("plasticity: connection lacks the pre-synaptic traces this rule needs");
  }

  // Post spike now, delayed pre trace: potentiates weight, shortens delay.
  const auto post_flags = post.flags();
  for (std::size_t j = 0; j < post_; ++j) {
    if (!post_flags[j]) continue;
    auto plus = staged_.weight_plus.row(j);
    for (std::size_t i = 0; i < pre_; ++i) plus[i] += conn.delayed_trace(0, j, i);
    if (delays) {
      auto dd = staged_.delay.row(j);
      for (std::size_t i = 0; i < pre_; ++i) dd[i] += conn.delayed_trace(1, j, i);
    }
  }

  // Delayed pre spike observed now, post trace: depresses weight, lengthens delay.
  const auto& history = conn.history();
  const auto xw = post_trace_.values();
  const auto xd = post_delay_trace_.values();
  for (std::size_t k = 0; k < history.capacity(); ++k) {
    for (auto i : history.active_at(k)) {
      const auto offsets = conn.spike_offsets_of_pre(i);
      for (std::size_t j = 0; j < post_; ++j) {
        if (offsets[j] != k) continue;
        staged_.weight_minus(j, i) += xw[j];
        if (delays) staged_.delay(j, i) += xd[j];
      }
    }
  }
}

void PlasticityEngine::flush_synapse(const DelayedConnection& conn, std::size_t post, std::size_t pre,
                                     std::size_t until_step) {
  auto& since = flushed_through_[post * pre_ + pre];
  if (until_step <= since) return;
  const double pending = static_cast<double>(until_step - since);
  since = until_step;
  const double t_post = last_post_[post];
  const double t_pre = last_pre_[pre];
  if (std::isnan(t_post) || std::isnan(t_pre)) return;
  const double t_delta = t_post - t_pre - conn.delays()(post, pre);
  const auto u = dr_pair_update(t_delta, params_.weight, params_.delay);
  (t_delta >= 0.0 ? staged_.weight_plus : staged_.weight_minus)(post, pre) += pending * u.weight;
  if (params_.learn_delays) staged_.delay(post, pre) += pending * u.delay;
}

void PlasticityEngine::observe_dr(const DelayedConnection& conn, const SpikeStep& post, std::size_t step) {
  const double t = static_cast<double>(step) * conn.dt();
  // Intervals before this step used the old last-spike times.
  for (auto i : conn.history().active_at(0)) {
    for (std::size_t j = 0; j < post_; ++j) flush_synapse(conn, j, i, step);
    last_pre_[i] = t;
  }
  const auto post_flags = post.flags();
  for (std::size_t j = 0; j < post_; ++j) {
    if (!post_flags[j]) continue;
    for (std::size_t i = 0; i < pre_; ++i) flush_synapse(conn, j, i, step);
    last_post_[j] = t;
  }
}

void PlasticityEngine::flush(const DelayedConnection& conn, std::size_t until_step) {
  if (params_.rule != LearningRule::dr_stdp) return;
  for (std::size_t j = 0; j < post_; ++j) {
    for (std::size_t i = 0; i < pre_; ++i) flush_synapse(conn, j, i, until_step);
  }
}

void PlasticityEngine::end_sample(const DelayedConnection& conn, std::size_t steps) {
  flush(conn, steps);
  ++staged_.samples;
}

void PlasticityEngine::reset_dynamic_state() {
  post_trace_.reset();
  post_delay_trace_.reset();
  std::fill(last_pre_.begin(), last_pre_.end(), kNever);
  std::fill(last_post_.begin(), last_post_.end(), kNever);
  std::fill(flushed_through_.begin(), flushed_through_.end(), std::size_t{0});
}

LastSpikeState PlasticityEngine::last_spikes() const {
  LastSpikeState s;
  auto convert = [](const std::vector<double>& v) {
    std::vector<std::optional<double>> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!std::isnan(v[k])) out[k] = v[k];
    }
    return out;
  };
  s.pre_ms = convert(last_pre_);
  s.post_ms = convert(last_post_);
  return s;
}

}  // namespace dsstdp
