#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dsstdp/signal.hpp"

namespace dsstdp {

enum class NeuronKind { lif, alif };

/// Membrane and threshold parameters. Units: mV, ms, MOhm; currents in nA.
struct NeuronConfig {
  double rest_mv = -65.0;
  double reset_mv = -60.0;
  double tau_membrane_ms = 100.0;
  double resistance_mohm = 1.0;
  double threshold_mv = -52.0;
  double threshold_increment_mv = 0.05;  // ALIF only
  double tau_threshold_ms = 1e7;         // ALIF only
  double refractory_ms = 5.0;

  static NeuronConfig excitatory();
  static NeuronConfig inhibitory();

  /// Throws std::invalid_argument when a range constraint is violated.
  void validate(NeuronKind kind) const;
};

/// A group of LIF or ALIF neurons advanced with the exact solution of the
/// membrane equation under a current held constant over each step.
class NeuronPopulation {
 public:
  NeuronPopulation() = default;
  NeuronPopulation(std::size_t size, NeuronConfig config, NeuronKind kind);

  /// Advances one step of length dt. Throws std::invalid_argument if
  /// `current_na` does not have one entry per neuron.
  const SpikeStep& step(std::span<const double> current_na, double dt);

  /// Voltages to rest, refractory counters to zero. Thresholds are kept.
  void reset_dynamic_state();

  /// When frozen, ALIF thresholds neither decay nor increment.
  void freeze_adaptation(bool frozen) { adaptation_frozen_ = frozen; }
  bool adaptation_frozen() const { return adaptation_frozen_; }

  std::size_t size() const { return voltage_.size(); }
  NeuronKind kind() const { return kind_; }
  const NeuronConfig& config() const { return config_; }
  const SpikeStep& spikes() const { return spikes_; }

  std::span<const double> voltages() const { return voltage_; }
  std::span<const double> thresholds() const { return threshold_; }
  std::span<const double> refractory_remaining() const { return refractory_; }

  void set_voltages(std::span<const double> v);
  void set_thresholds(std::span<const double> theta);

 private:
  void refresh_decays(double dt);

  NeuronConfig config_;
  NeuronKind kind_ = NeuronKind::lif;
  std::vector<double> voltage_;
  std::vector<double> threshold_;
  std::vector<double> refractory_;
  SpikeStep spikes_;
  bool adaptation_frozen_ = false;

  double cached_dt_ = -1.0;
  double membrane_decay_ = 0.0;
  double threshold_decay_ = 0.0;
};

}  // namespace dsstdp
