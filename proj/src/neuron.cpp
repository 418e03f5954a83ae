#include "dsstdp/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsstdp {

NeuronConfig NeuronConfig::excitatory() { return {}; }

NeuronConfig NeuronConfig::inhibitory() {
  NeuronConfig c;
  c.rest_mv = -60.0;
  c.reset_mv = -45.0;
  c.tau_membrane_ms = 75.0;
  c.resistance_mohm = 1.0;
  c.threshold_mv = -40.0;
  c.threshold_increment_mv = 0.0;
  c.tau_threshold_ms = 1e7;
  c.refractory_ms = 2.0;
  return c;
}

void NeuronConfig::validate(NeuronKind kind) const {
  if (!(tau_membrane_ms > 0.0)) throw std::invalid_argument("neuron: tau_membrane must be positive");
  if (!(refractory_ms >= 0.0)) throw std::invalid_argument("neuron: refractory period must be non-negative");
  if (!(resistance_mohm > 0.0)) throw std::invalid_argument("neuron: membrane resistance must be positive");
  if (kind == NeuronKind::alif) {
    if (!(tau_threshold_ms > 0.0)) throw std::invalid_argument("neuron: tau_threshold must be positive");
    if (!(threshold_increment_mv >= 0.0)) {
      throw std::invalid_argument("neuron: threshold increment must be non-negative");
    }
  }
}

NeuronPopulation::NeuronPopulation(std::size_t size, NeuronConfig config, NeuronKind kind)
    : config_(config),
      kind_(kind),
      voltage_(size, config.rest_mv),
      threshold_(size, config.threshold_mv),
      refractory_(size, 0.0),
      spikes_(size) {
  config_.validate(kind_);
}

void NeuronPopulation::refresh_decays(double dt) {
  if (dt == cached_dt_) return;
  if (!(dt > 0.0)) throw std::invalid_argument("neuron: dt must be positive");
  cached_dt_ = dt;
  membrane_decay_ = std::exp(-dt / config_.tau_membrane_ms);
  threshold_decay_ = std::exp(-dt / config_.tau_threshold_ms);
}

const SpikeStep& NeuronPopulation::step(std::span<const double> current_na, double dt) {
  if (current_na.size() != voltage_.size()) {
    throw std::invalid_argument("neuron: current has " + std::to_string(current_na.size()) +
                                " entries for a population of " + std::to_string(voltage_.size()));
  }
  refresh_decays(dt);
  const bool adapt = kind_ == NeuronKind::alif && !adaptation_frozen_;
  const double rest = config_.rest_mv;
  const double theta_inf = config_.threshold_mv;

  for (std::size_t n = 0; n < voltage_.size(); ++n) {
    if (adapt) threshold_[n] = theta_inf + (threshold_[n] - theta_inf) * threshold_decay_;

    if (refractory_[n] > 0.0) {
      voltage_[n] = config_.reset_mv;
      refractory_[n] = std::max(0.0, refractory_[n] - dt);
      spikes_.set(n, false);
      continue;
    }

    const double v_inf = rest + config_.resistance_mohm * current_na[n];
    voltage_[n] = v_inf + (voltage_[n] - v_inf) * membrane_decay_;

    const bool fired = voltage_[n] >= threshold_[n];
    spikes_.set(n, fired);
    if (fired) {
      voltage_[n] = config_.reset_mv;
      refractory_[n] = config_.refractory_ms;
      if (adapt) threshold_[n] += config_.threshold_increment_mv;
    }
  }
  return spikes_;
}

void NeuronPopulation::reset_dynamic_state() {
  std::fill(voltage_.begin(), voltage_.end(), config_.rest_mv);
  std::fill(refractory_.begin(), refractory_.end(), 0.0);
  spikes_.clear();
}

void NeuronPopulation::set_voltages(std::span<const double> v) {
  if (v.size() != voltage_.size()) throw std::invalid_argument("neuron: voltage vector length mismatch");
  std::copy(v.begin(), v.end(), voltage_.begin());
}

void NeuronPopulation::set_thresholds(std::span<const double> theta) {
  if (theta.size() != threshold_.size()) throw std::invalid_argument("neuron: threshold vector length mismatch");
  std::copy(theta.begin(), theta.end(), threshold_.begin());
}

}  // namespace dsstdp
