#include "dsstdp/signal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsstdp {

SpikeStep SpikeStep::from_indices(std::size_t neurons, std::initializer_list<std::size_t> active) {
  SpikeStep s(neurons);
  for (auto i : active) {
    s.set(i);
  }
  return s;
}

void SpikeStep::clear() { std::fill(flags_.begin(), flags_.end(), std::uint8_t{0}); }

bool SpikeStep::any() const {
  return std::any_of(flags_.begin(), flags_.end(), [](std::uint8_t f) { return f != 0; });
}

std::size_t SpikeStep::count() const {
  return static_cast<std::size_t>(std::count_if(flags_.begin(), flags_.end(), [](std::uint8_t f) { return f != 0; }));
}

std::vector<std::uint32_t> SpikeStep::active() const {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < flags_.size(); ++i) {
    if (flags_[i]) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

SpikeRaster::SpikeRaster(std::size_t steps, std::size_t neurons, double dt)
    : neurons_(neurons), dt_(dt), rows_(steps, SpikeStep(neurons)) {
  if (!(dt > 0.0)) throw std::invalid_argument("spike raster: dt must be positive");
}

void SpikeRaster::set_step(std::size_t n, const SpikeStep& spikes) {
  if (spikes.size() != neurons_) {
    throw std::invalid_argument("spike raster: row has " + std::to_string(spikes.size()) +
                                " neurons, expected " + std::to_string(neurons_));
  }
  rows_.at(n) = spikes;
}

std::size_t SpikeRaster::count(std::size_t neuron) const {
  std::size_t c = 0;
  for (const auto& r : rows_) c += r[neuron] ? 1 : 0;
  return c;
}

std::size_t SpikeRaster::total() const {
  std::size_t c = 0;
  for (const auto& r : rows_) c += r.count();
  return c;
}

TraceParams TraceParams::cumulative(double amplitude, double tau_ms) {
  return {TraceKind::cumulative, amplitude, tau_ms, 1.0};
}

TraceParams TraceParams::saturating(double amplitude, double tau_ms, double k) {
  return {TraceKind::saturating, amplitude, tau_ms, k};
}

TraceParams TraceParams::nearest(double amplitude, double tau_ms) {
  return {TraceKind::nearest, amplitude, tau_ms, 1.0};
}

Trace::Trace(std::size_t neurons, TraceParams params) : params_(params), values_(neurons, 0.0) {
  if (!(params_.tau_ms > 0.0)) throw std::invalid_argument("trace: tau must be positive");
  if (params_.kind == TraceKind::saturating && !(params_.saturation_k >= 1.0)) {
    throw std::invalid_argument("trace: saturation k must be >= 1");
  }
}

void Trace::step(const SpikeStep& spikes, double dt) {
  if (spikes.size() != values_.size()) throw std::invalid_argument("trace: spike vector length mismatch");
  if (dt != cached_dt_) {
    cached_dt_ = dt;
    cached_decay_ = std::exp(-dt / params_.tau_ms);
  }
  const double decay = cached_decay_;
  const double a = params_.amplitude;
  const auto flags = spikes.flags();
  switch (params_.kind) {
    case TraceKind::cumulative:
      for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i] *= decay;
        if (flags[i]) values_[i] += a;
      }
      break;
    case TraceKind::saturating: {
      // X <- X + A - X/k on a spike, applied to the decayed value.
      const double keep = 1.0 - 1.0 / params_.saturation_k;
      for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i] *= decay;
        if (flags[i]) values_[i] = values_[i] * keep + a;
      }
      break;
    }
    case TraceKind::nearest:
      for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i] = flags[i] ? a : values_[i] * decay;
      }
      break;
  }
}

void Trace::reset() { std::fill(values_.begin(), values_.end(), 0.0); }

DelayRingBuffer::DelayRingBuffer(std::size_t neurons, double d_max, double dt, std::size_t trace_channels)
    : neurons_(neurons),
      capacity_(capacity_for(d_max, dt)),
      channels_(trace_channels),
      d_max_(d_max),
      dt_(dt),
      spikes_(capacity_ * neurons, 0),
      traces_(trace_channels * capacity_ * neurons, 0.0),
      active_(capacity_) {}

std::size_t DelayRingBuffer::capacity_for(double d_max, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("delay buffer: dt must be positive");
  if (!(d_max >= 0.0)) throw std::invalid_argument("delay buffer: d_max must be non-negative");
  return static_cast<std::size_t>(std::ceil(d_max / dt)) + 1;
}

void DelayRingBuffer::push(const SpikeStep& spikes, std::initializer_list<std::span<const double>> traces) {
  push(spikes, std::span<const std::span<const double>>(traces.begin(), traces.size()));
}

void DelayRingBuffer::push(const SpikeStep& spikes, std::span<const std::span<const double>> traces) {
  if (spikes.size() != neurons_) throw std::invalid_argument("delay buffer: spike vector length mismatch");
  if (traces.size() != channels_) throw std::invalid_argument("delay buffer: wrong number of trace channels");
  head_ = (head_ + 1) % capacity_;
  const auto flags = spikes.flags();
  std::copy(flags.begin(), flags.end(), spikes_.begin() + static_cast<std::ptrdiff_t>(head_ * neurons_));
  auto& act = active_[head_];
  act.clear();
  for (std::size_t i = 0; i < neurons_; ++i) {
    if (flags[i]) act.push_back(static_cast<std::uint32_t>(i));
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    if (traces[c].size() != neurons_) throw std::invalid_argument("delay buffer: trace vector length mismatch");
    std::copy(traces[c].begin(), traces[c].end(),
              traces_.begin() + static_cast<std::ptrdiff_t>((c * capacity_ + head_) * neurons_));
  }
}

void DelayRingBuffer::clear() {
  std::fill(spikes_.begin(), spikes_.end(), std::uint8_t{0});
  std::fill(traces_.begin(), traces_.end(), 0.0);
  for (auto& a : active_) a.clear();
  head_ = 0;
}

void DelayRingBuffer::check_delay(double d) const {
  if (!(d >= 0.0) || d > d_max_) {
    throw std::out_of_range("delay buffer: delay " + std::to_string(d) + " ms outside [0, " +
                            std::to_string(d_max_) + "]");
  }
}

std::size_t DelayRingBuffer::spike_offset(double d) const {
  check_delay(d);
  const auto offset = static_cast<std::size_t>(std::ceil(d / dt_));
  if (offset >= capacity_) throw std::out_of_range("delay buffer: spike offset exceeds history");
  return offset;
}

DelayRingBuffer::TraceLookup DelayRingBuffer::trace_lookup(double d) const {
  check_delay(d);
  const double whole = std::floor(d / dt_);
  const auto offset = static_cast<std::size_t>(whole);
  if (offset >= capacity_) throw std::out_of_range("delay buffer: trace offset exceeds history");
  return {offset, d - whole * dt_};
}

bool DelayRingBuffer::spike_at_delay(std::size_t neuron, double d) const {
  return spike_at(spike_offset(d), neuron);
}

SpikeStep DelayRingBuffer::spikes_at_delay(double d) const {
  const auto offset = spike_offset(d);
  SpikeStep out(neurons_);
  for (auto i : active_at(offset)) out.set(i);
  return out;
}

double DelayRingBuffer::trace_at_delay(std::size_t channel, std::size_t neuron, double d, double tau_ms) const {
  const auto [offset, residual] = trace_lookup(d);
  const double stored = trace_at(channel, offset, neuron);
  return residual > 0.0 ? stored * std::exp(-residual / tau_ms) : stored;
}

std::vector<double> DelayRingBuffer::trace_sample_at_delay(std::size_t channel, double d, double tau_ms) const {
  if (channel >= channels_) throw std::out_of_range("delay buffer: no such trace channel");
  const auto [offset, residual] = trace_lookup(d);
  const double decay = residual > 0.0 ? std::exp(-residual / tau_ms) : 1.0;
  std::vector<double> out(neurons_);
  for (std::size_t i = 0; i < neurons_; ++i) out[i] = trace_at(channel, offset, i) * decay;
  return out;
}

}  // namespace dsstdp
