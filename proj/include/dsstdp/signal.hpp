#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace dsstdp {

/// Binary spike flags for one simulation step, one entry per neuron. A spike
/// flagged at step n occupies the interval [n*dt, (n+1)*dt).
class SpikeStep {
 public:
  SpikeStep() = default;
  explicit SpikeStep(std::size_t neurons) : flags_(neurons, 0) {}

  static SpikeStep from_indices(std::size_t neurons, std::initializer_list<std::size_t> active);

  std::size_t size() const { return flags_.size(); }
  bool operator[](std::size_t i) const { return flags_[i] != 0; }
  void set(std::size_t i, bool spiking = true) { flags_[i] = spiking ? 1 : 0; }
  void clear();

  bool any() const;
  std::size_t count() const;
  /// Indices of spiking neurons, ascending.
  std::vector<std::uint32_t> active() const;

  std::span<const std::uint8_t> flags() const { return flags_; }

  bool operator==(const SpikeStep&) const = default;

 private:
  std::vector<std::uint8_t> flags_;
};

/// Steps x neurons boolean spike matrix with a fixed step length.
class SpikeRaster {
 public:
  SpikeRaster() = default;
  SpikeRaster(std::size_t steps, std::size_t neurons, double dt);

  std::size_t steps() const { return rows_.size(); }
  std::size_t neurons() const { return neurons_; }
  double dt() const { return dt_; }
  double duration() const { return dt_ * static_cast<double>(rows_.size()); }

  const SpikeStep& step(std::size_t n) const { return rows_[n]; }
  /// Replaces row n. The row must have `neurons()` entries.
  void set_step(std::size_t n, const SpikeStep& spikes);
  void set(std::size_t n, std::size_t neuron, bool spiking = true) { rows_[n].set(neuron, spiking); }
  bool at(std::size_t n, std::size_t neuron) const { return rows_[n][neuron]; }

  std::size_t count(std::size_t neuron) const;
  std::size_t total() const;

  bool operator==(const SpikeRaster&) const = default;

 private:
  std::size_t neurons_ = 0;
  double dt_ = 1.0;
  std::vector<SpikeStep> rows_;
};

enum class TraceKind { cumulative, saturating, nearest };

struct TraceParams {
  TraceKind kind = TraceKind::cumulative;
  double amplitude = 1.0;
  double tau_ms = 20.0;
  // Number of spikes to saturation; only read for TraceKind::saturating.
  double saturation_k = 1.0;

  static TraceParams cumulative(double amplitude, double tau_ms);
  static TraceParams saturating(double amplitude, double tau_ms, double k);
  static TraceParams nearest(double amplitude, double tau_ms);
};

/// Exponentially decaying spike trace, one value per neuron.
class Trace {
 public:
  Trace() = default;
  Trace(std::size_t neurons, TraceParams params);

  /// Decays every entry by exp(-dt/tau), then applies the spike jump to the
  /// spiking entries.
  void step(const SpikeStep& spikes, double dt);
  void reset();

  const TraceParams& params() const { return params_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  TraceParams params_;
  std::vector<double> values_;
  double cached_dt_ = -1.0;
  double cached_decay_ = 0.0;
};

/// Fixed-depth history of pre-synaptic spikes and trace values, indexed by
/// step offset from the most recent push (offset 0). Holds
/// ceil(d_max/dt) + 1 steps so that both the current step and a step d_max in
/// the past are retained.
class DelayRingBuffer {
 public:
  DelayRingBuffer() = default;
  DelayRingBuffer(std::size_t neurons, double d_max, double dt, std::size_t trace_channels = 0);

  static std::size_t capacity_for(double d_max, double dt);

  /// Appends one step. `traces` must hold one span per channel.
  void push(const SpikeStep& spikes, std::initializer_list<std::span<const double>> traces = {});
  void push(const SpikeStep& spikes, std::span<const std::span<const double>> traces);
  void clear();

  std::size_t neurons() const { return neurons_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t channels() const { return channels_; }
  double d_max() const { return d_max_; }
  double dt() const { return dt_; }

  /// Step offset holding the spike observed through delay d: ceil(d/dt).
  std::size_t spike_offset(double d) const;
  /// Step offset and residual time used to sample a trace through delay d.
  struct TraceLookup {
    std::size_t offset;
    double residual_ms;
  };
  TraceLookup trace_lookup(double d) const;

  bool spike_at(std::size_t offset, std::size_t neuron) const {
    return spikes_[slot(offset) * neurons_ + neuron] != 0;
  }
  double trace_at(std::size_t channel, std::size_t offset, std::size_t neuron) const {
    return traces_[(channel * capacity_ + slot(offset)) * neurons_ + neuron];
  }
  /// Spiking neuron indices (ascending) stored at `offset`.
  std::span<const std::uint32_t> active_at(std::size_t offset) const { return active_[slot(offset)]; }

  bool spike_at_delay(std::size_t neuron, double d) const;
  SpikeStep spikes_at_delay(double d) const;
  double trace_at_delay(std::size_t channel, std::size_t neuron, double d, double tau_ms) const;
  std::vector<double> trace_sample_at_delay(std::size_t channel, double d, double tau_ms) const;

 private:
  std::size_t slot(std::size_t offset) const {
    return (head_ + capacity_ - offset) % capacity_;
  }
  void check_delay(double d) const;

  std::size_t neurons_ = 0;
  std::size_t capacity_ = 0;
  std::size_t channels_ = 0;
  double d_max_ = 0.0;
  double dt_ = 1.0;
  std::size_t head_ = 0;
  std::vector<std::uint8_t> spikes_;
  std::vector<double> traces_;
  std::vector<std::vector<std::uint32_t>> active_;
};

}  // namespace dsstdp
