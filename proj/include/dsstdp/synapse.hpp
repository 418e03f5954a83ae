#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dsstdp/matrix.hpp"
#include "dsstdp/signal.hpp"

namespace dsstdp {

/// Current-based delta synapses with a weight and a real-valued delay per
/// synapse. W and D are [post x pre]; D is in ms. Pre-synaptic spikes and
/// their traces are kept in a ring buffer deep enough for d_max.
class DelayedConnection {
 public:
  DelayedConnection() = default;
  DelayedConnection(RealMatrix weights, RealMatrix delays, double charge_pc, double d_min, double d_max, double dt,
                    std::vector<TraceParams> pre_traces = {});

  std::size_t pre_size() const { return weights_.cols(); }
  std::size_t post_size() const { return weights_.rows(); }
  double charge_pc() const { return charge_pc_; }
  double dt() const { return dt_; }
  double d_min() const { return d_min_; }
  double d_max() const { return d_max_; }

  const RealMatrix& weights() const { return weights_; }
  const RealMatrix& delays() const { return delays_; }
  void set_weights(RealMatrix w);
  /// Throws std::out_of_range when an entry falls outside [d_min, d_max].
  void set_delays(RealMatrix d);

  /// Steps the pre-synaptic traces and records the step in the history.
  void advance(const SpikeStep& pre);
  /// Clears traces and history. Parameters are untouched.
  void reset();

  /// I_j = sum_i W_ji * (Q/dt) * spike_i(t - D_ji), in nA.
  std::vector<double> current() const;
  void current_into(std::span<double> out) const;

  const DelayRingBuffer& history() const { return history_; }
  std::size_t trace_channels() const { return traces_.size(); }
  const Trace& pre_trace(std::size_t channel) const { return traces_.at(channel); }

  // Per-synapse lookups cached from D, stored pre-major: index i * post + j.
  std::uint16_t spike_offset(std::size_t post, std::size_t pre) const {
    return spike_offset_[pre * post_size() + post];
  }
  std::span<const std::uint16_t> spike_offsets_of_pre(std::size_t pre) const {
    return {spike_offset_.data() + pre * post_size(), post_size()};
  }
  /// Trace of `channel` for pre neuron i sampled through D_ji.
  double delayed_trace(std::size_t channel, std::size_t post, std::size_t pre) const {
    const std::size_t k = pre * post_size() + post;
    return history_.trace_at(channel, trace_offset_[k], pre) * trace_decay_[channel][k];
  }

 private:
  void refresh_delay_cache();

  RealMatrix weights_;
  RealMatrix delays_;
  double charge_pc_ = 0.0;
  double d_min_ = 0.0;
  double d_max_ = 0.0;
  double dt_ = 1.0;
  std::vector<Trace> traces_;
  DelayRingBuffer history_;
  std::vector<std::uint16_t> spike_offset_;
  std::vector<std::uint16_t> trace_offset_;
  std::vector<std::vector<double>> trace_decay_;
};

/// Fixed-weight connection without delays.
class StaticConnection {
 public:
  StaticConnection() = default;
  StaticConnection(RealMatrix weights, double charge_pc);

  /// w * I_N
  static StaticConnection scalar_diagonal(std::size_t n, double w, double charge_pc);
  /// w * (I_N - 1): zero diagonal, -w everywhere else.
  static StaticConnection hollow(std::size_t n, double w, double charge_pc);

  const RealMatrix& weights() const { return weights_; }
  double charge_pc() const { return charge_pc_; }

  std::vector<double> current(const SpikeStep& pre, double dt) const;
  void current_into(const SpikeStep& pre, double dt, std::span<double> out) const;

 private:
  RealMatrix weights_;
  double charge_pc_ = 0.0;
};

}  // namespace dsstdp
