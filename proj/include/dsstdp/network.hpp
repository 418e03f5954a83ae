#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dsstdp/neuron.hpp"
#include "dsstdp/plasticity.hpp"
#include "dsstdp/signal.hpp"
#include "dsstdp/synapse.hpp"

namespace dsstdp {

enum class DelayInit { uniform, zero };

struct NetworkConfig {
  std::size_t input_size = 784;
  std::size_t neurons = 100;
  double dt_ms = 1.0;

  RuleParams rule = RuleParams::defaults(LearningRule::ds_stdp);
  BoundsConfig bounds;
  BatchReduction batch_reduction = BatchReduction::mean;

  NeuronConfig excitatory = NeuronConfig::excitatory();
  NeuronConfig inhibitory = NeuronConfig::inhibitory();
  double w_exc = 22.5;
  double w_inh = 120.0;
  double charge_exc_pc = 100.0;
  double charge_inh_pc = 75.0;

  double weight_init_max = 0.3;
  double delay_init_max_ms = 10.0;
  /// Ignored for STDP, whose delays are always zero.
  DelayInit delay_init = DelayInit::uniform;

  std::uint64_t seed = 0;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

/// Input -> excitatory (ALIF) through learned weights and delays, with
/// excitatory -> inhibitory (LIF) one-to-one and inhibitory -> every other
/// excitatory neuron. Both static paths carry a one-step latency.
class DiehlCookNetwork {
 public:
  DiehlCookNetwork() = default;
  explicit DiehlCookNetwork(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  std::size_t neurons() const { return config_.neurons; }
  std::size_t input_size() const { return config_.input_size; }

  /// Advances one step and returns the excitatory spikes.
  const SpikeStep& step(const SpikeStep& input);
  /// Runs every step of `input`. In training mode the sample's plasticity is
  /// staged and its threshold change recorded; nothing is applied until
  /// `apply_batch()`.
  SpikeRaster run_sample(const SpikeRaster& input);

  /// Voltages, refractory counters, traces, delay history and last-spike
  /// times back to their initial values. W, D and thresholds are preserved.
  void reset_dynamic_state();

  void set_training(bool training);
  bool training() const { return training_; }

  /// Applies the staged batch: reduce, bound, clamp, normalize; thresholds
  /// advance by the reduced per-sample change.
  ApplyReport apply_batch();
  void discard_staged();
  /// Adds a replica's staged updates (same parameters) into this network's.
  void merge_staged(const DiehlCookNetwork& replica);
  std::size_t staged_samples() const { return engine_.staged().samples; }

  const DelayedConnection& input_connection() const { return input_; }
  const StaticConnection& excitatory_to_inhibitory() const { return exc_to_inh_; }
  const StaticConnection& inhibitory_to_excitatory() const { return inh_to_exc_; }
  const NeuronPopulation& excitatory() const { return exc_; }
  const NeuronPopulation& inhibitory() const { return inh_; }
  const PlasticityEngine& plasticity() const { return engine_; }
  const SpikeStep& last_inhibitory_spikes() const { return prev_inh_; }

  /// Replaces W, D and thresholds, e.g. from a checkpoint.
  void set_parameters(RealMatrix weights, RealMatrix delays, std::span<const double> thresholds);

 private:
  NetworkConfig config_;
  DelayedConnection input_;
  StaticConnection exc_to_inh_;
  StaticConnection inh_to_exc_;
  NeuronPopulation exc_;
  NeuronPopulation inh_;
  PlasticityEngine engine_;

  SpikeStep prev_exc_;
  SpikeStep prev_inh_;
  std::vector<double> exc_current_;
  std::vector<double> inh_current_;
  std::vector<double> scratch_;
  std::size_t step_ = 0;
  bool training_ = false;

  bool batch_open_ = false;
  std::vector<double> theta_batch_start_;
  std::vector<double> theta_delta_sum_;
};

}  // namespace dsstdp
