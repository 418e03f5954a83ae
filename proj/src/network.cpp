#include "dsstdp/network.hpp"

#include <stdexcept>
#include <string>

#include "dsstdp/rng.hpp"

namespace dsstdp {

namespace {

constexpr std::uint64_t kWeightStream = 0x5745494748540001ULL;
constexpr std::uint64_t kDelayStream = 0x44454C4159000002ULL;

RealMatrix uniform_matrix(std::size_t rows, std::size_t cols, double hi, std::uint64_t seed) {
  SplitMix64 gen(seed);
  RealMatrix m(rows, cols);
  for (double& v : m.values()) v = gen.uniform() * hi;
  return m;
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_size == 0) throw std::invalid_argument("network: input_size must be positive");
  if (neurons == 0) throw std::invalid_argument("network: neurons must be positive");
  if (!(dt_ms > 0.0)) throw std::invalid_argument("network: dt must be positive");
  bounds.validate();
  rule.weight.validate();
  rule.delay.validate();
  excitatory.validate(NeuronKind::alif);
  inhibitory.validate(NeuronKind::lif);
  if (!(weight_init_max >= bounds.w_min && weight_init_max <= bounds.w_max)) {
    throw std::invalid_argument("network: weight_init_max must lie within [w_min, w_max]");
  }
  if (!(delay_init_max_ms >= bounds.d_min && delay_init_max_ms <= bounds.d_max)) {
    throw std::invalid_argument("network: delay_init_max must lie within [d_min, d_max]");
  }
  if (!(w_exc >= 0.0) || !(w_inh >= 0.0)) throw std::invalid_argument("network: w_exc and w_inh must be non-negative");
  if (!(charge_exc_pc > 0.0) || !(charge_inh_pc > 0.0)) throw std::invalid_argument("network: charges must be positive");
}

DiehlCookNetwork::DiehlCookNetwork(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.rule.rule == LearningRule::stdp) config_.rule.learn_delays = false;
  const std::size_t n = config_.neurons;
  const std::size_t in = config_.input_size;

  engine_ = PlasticityEngine(in, n, config_.rule);

  RealMatrix weights = uniform_matrix(n, in, config_.weight_init_max, derive_seed({config_.seed, kWeightStream}));
  RealMatrix delays(n, in, 0.0);
  if (config_.rule.rule != LearningRule::stdp && config_.delay_init == DelayInit::uniform) {
    delays = uniform_matrix(n, in, config_.delay_init_max_ms, derive_seed({config_.seed, kDelayStream}));
  }
  input_ = DelayedConnection(std::move(weights), std::move(delays), config_.charge_exc_pc, config_.bounds.d_min,
                             config_.bounds.d_max, config_.dt_ms, engine_.pre_trace_params());

  exc_to_inh_ = StaticConnection::scalar_diagonal(n, config_.w_exc, config_.charge_exc_pc);
  inh_to_exc_ = StaticConnection::hollow(n, config_.w_inh, config_.charge_inh_pc);
  exc_ = NeuronPopulation(n, config_.excitatory, NeuronKind::alif);
  inh_ = NeuronPopulation(n, config_.inhibitory, NeuronKind::lif);
  exc_.freeze_adaptation(true);

  prev_exc_ = SpikeStep(n);
  prev_inh_ = SpikeStep(n);
  exc_current_.assign(n, 0.0);
  inh_current_.assign(n, 0.0);
  scratch_.assign(n, 0.0);
}

const SpikeStep& DiehlCookNetwork::step(const SpikeStep& input) {
  const double dt = config_.dt_ms;
  input_.advance(input);

  input_.current_into(exc_current_);
  if (prev_inh_.any()) {
    inh_to_exc_.current_into(prev_inh_, dt, scratch_);
    for (std::size_t j = 0; j < scratch_.size(); ++j) exc_current_[j] += scratch_[j];
  }
  const SpikeStep& exc_spikes = exc_.step(exc_current_, dt);

  exc_to_inh_.current_into(prev_exc_, dt, inh_current_);
  prev_inh_ = inh_.step(inh_current_, dt);
  prev_exc_ = exc_spikes;

  if (training_) engine_.observe(input_, exc_spikes, step_);
  ++step_;
  return exc_spikes;
}

SpikeRaster DiehlCookNetwork::run_sample(const SpikeRaster& input) {
  if (input.neurons() != config_.input_size) {
    throw std::invalid_argument("network: raster has " + std::to_string(input.neurons()) + " inputs, expected " +
                                std::to_string(config_.input_size));
  }
  if (input.dt() != config_.dt_ms) throw std::invalid_argument("network: raster step length differs from dt");

  if (training_) {
    if (!batch_open_) {
      const auto theta = exc_.thresholds();
      theta_batch_start_.assign(theta.begin(), theta.end());
      theta_delta_sum_.assign(theta.size(), 0.0);
      batch_open_ = true;
    }
    exc_.set_thresholds(theta_batch_start_);
  }

  SpikeRaster out(input.steps(), config_.neurons, config_.dt_ms);
  for (std::size_t n = 0; n < input.steps(); ++n) out.set_step(n, step(input.step(n)));

  if (training_) {
    engine_.end_sample(input_, step_);
    const auto theta = exc_.thresholds();
    for (std::size_t j = 0; j < theta.size(); ++j) theta_delta_sum_[j] += theta[j] - theta_batch_start_[j];
  }
  return out;
}

void DiehlCookNetwork::reset_dynamic_state() {
  input_.reset();
  exc_.reset_dynamic_state();
  inh_.reset_dynamic_state();
  engine_.reset_dynamic_state();
  prev_exc_.clear();
  prev_inh_.clear();
  step_ = 0;
}

void DiehlCookNetwork::set_training(bool training) {
  training_ = training;
  exc_.freeze_adaptation(!training);
}

ApplyReport DiehlCookNetwork::apply_batch() {
  auto& staged = engine_.staged();
  ApplyReport report;
  if (staged.samples > 0) {
    const ApplyOptions options{config_.batch_reduction, true, config_.rule.learns_delays(), true};
    report = apply_staged(input_, staged, config_.bounds, options);
    if (batch_open_) {
      const double scale =
          config_.batch_reduction == BatchReduction::mean ? 1.0 / static_cast<double>(staged.samples) : 1.0;
      std::vector<double> theta = theta_batch_start_;
      for (std::size_t j = 0; j < theta.size(); ++j) theta[j] += theta_delta_sum_[j] * scale;
      exc_.set_thresholds(theta);
    }
  }
  discard_staged();
  return report;
}

void DiehlCookNetwork::discard_staged() {
  engine_.staged().clear();
  batch_open_ = false;
  theta_delta_sum_.assign(theta_delta_sum_.size(), 0.0);
}

void DiehlCookNetwork::merge_staged(const DiehlCookNetwork& replica) {
  engine_.staged().merge(replica.engine_.staged());
  if (!replica.batch_open_) return;
  if (!batch_open_) {
    theta_batch_start_ = replica.theta_batch_start_;
    theta_delta_sum_.assign(theta_batch_start_.size(), 0.0);
    batch_open_ = true;
  }
  for (std::size_t j = 0; j < theta_delta_sum_.size(); ++j) theta_delta_sum_[j] += replica.theta_delta_sum_[j];
}

void DiehlCookNetwork::set_parameters(RealMatrix weights, RealMatrix delays, std::span<const double> thresholds) {
  if (weights.rows() != config_.neurons || weights.cols() != config_.input_size) {
    throw std::invalid_argument("network: weight matrix shape does not match the network");
  }
  input_.set_weights(std::move(weights));
  input_.set_delays(std::move(delays));
  exc_.set_thresholds(thresholds);
}

}  // namespace dsstdp
