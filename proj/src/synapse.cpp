#include "dsstdp/synapse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsstdp {

DelayedConnection::DelayedConnection(RealMatrix weights, RealMatrix delays, double charge_pc, double d_min,
                                     double d_max, double dt, std::vector<TraceParams> pre_traces)
    : weights_(std::move(weights)),
      charge_pc_(charge_pc),
      d_min_(d_min),
      d_max_(d_max),
      dt_(dt),
      history_(weights_.cols(), d_max, dt, pre_traces.size()) {
  if (!(d_min >= 0.0) || d_min > d_max) throw std::invalid_argument("connection: need 0 <= d_min <= d_max");
  if (history_.capacity() > 0xFFFF) throw std::invalid_argument("connection: delay history too deep");
  for (const auto& p : pre_traces) traces_.emplace_back(weights_.cols(), p);
  set_delays(std::move(delays));
}

void DelayedConnection::set_weights(RealMatrix w) {
  if (!w.same_shape(weights_)) throw std::invalid_argument("connection: weight matrix shape mismatch");
  weights_ = std::move(w);
}

void DelayedConnection::set_delays(RealMatrix d) {
  if (!d.same_shape(weights_)) throw std::invalid_argument("connection: delay matrix shape mismatch");
  for (double v : d.values()) {
    if (!(v >= d_min_ && v <= d_max_)) {
      throw std::out_of_range("connection: delay " + std::to_string(v) + " ms outside [d_min, d_max]");
    }
  }
  delays_ = std::move(d);
  refresh_delay_cache();
}

void DelayedConnection::refresh_delay_cache() {
  const std::size_t post = post_size();
  const std::size_t pre = pre_size();
  spike_offset_.assign(post * pre, 0);
  trace_offset_.assign(post * pre, 0);
  trace_decay_.assign(traces_.size(), std::vector<double>(post * pre, 1.0));
  for (std::size_t j = 0; j < post; ++j) {
    for (std::size_t i = 0; i < pre; ++i) {
      const double d = delays_(j, i);
      const std::size_t k = i * post + j;
      spike_offset_[k] = static_cast<std::uint16_t>(history_.spike_offset(d));
      const auto lookup = history_.trace_lookup(d);
      trace_offset_[k] = static_cast<std::uint16_t>(lookup.offset);
      if (lookup.residual_ms > 0.0) {
        for (std::size_t c = 0; c < traces_.size(); ++c) {
          trace_decay_[c][k] = std::exp(-lookup.residual_ms / traces_[c].params().tau_ms);
        }
      }
    }
  }
}

void DelayedConnection::advance(const SpikeStep& pre) {
  if (pre.size() != pre_size()) throw std::invalid_argument("connection: pre-synaptic spike length mismatch");
  std::vector<std::span<const double>> views;
  views.reserve(traces_.size());
  for (auto& t : traces_) {
    t.step(pre, dt_);
    views.push_back(t.values());
  }
  history_.push(pre, views);
}

void DelayedConnection::reset() {
  for (auto& t : traces_) t.reset();
  history_.clear();
}

std::vector<double> DelayedConnection::current() const {
  std::vector<double> out(post_size(), 0.0);
  current_into(out);
  return out;
}

void DelayedConnection::current_into(std::span<double> out) const {
  const std::size_t post = post_size();
  if (out.size() != post) throw std::invalid_argument("connection: output length mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  const double amplitude = charge_pc_ / dt_;
  for (std::size_t k = 0; k < history_.capacity(); ++k) {
    for (auto i : history_.active_at(k)) {
      const auto offsets = spike_offsets_of_pre(i);
      for (std::size_t j = 0; j < post; ++j) {
        if (offsets[j] == k) out[j] += weights_(j, i) * amplitude;
      }
    }
  }
}

StaticConnection::StaticConnection(RealMatrix weights, double charge_pc)
    : weights_(std::move(weights)), charge_pc_(charge_pc) {}

StaticConnection StaticConnection::scalar_diagonal(std::size_t n, double w, double charge_pc) {
  RealMatrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = w;
  return {std::move(m), charge_pc};
}

StaticConnection StaticConnection::hollow(std::size_t n, double w, double charge_pc) {
  RealMatrix m(n, n, -w);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 0.0;
  return {std::move(m), charge_pc};
}

std::vector<double> StaticConnection::current(const SpikeStep& pre, double dt) const {
  std::vector<double> out(weights_.rows(), 0.0);
  current_into(pre, dt, out);
  return out;
}

void StaticConnection::current_into(const SpikeStep& pre, double dt, std::span<double> out) const {
  if (pre.size() != weights_.cols()) throw std::invalid_argument("static connection: spike length mismatch");
  if (out.size() != weights_.rows()) throw std::invalid_argument("static connection: output length mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  const double amplitude = charge_pc_ / dt;
  const auto flags = pre.flags();
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (!flags[i]) continue;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += weights_(j, i) * amplitude;
  }
}

}  // namespace dsstdp
