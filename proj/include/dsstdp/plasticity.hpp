#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dsstdp/matrix.hpp"
#include "dsstdp/signal.hpp"
#include "dsstdp/synapse.hpp"

namespace dsstdp {

enum class LearningRule { stdp, ds_stdp, dr_stdp };

std::string_view to_string(LearningRule rule);
/// Accepts "stdp", "ds-stdp", "dr-stdp". Throws std::invalid_argument.
LearningRule parse_learning_rule(std::string_view name);

/// Exponential weight kernels. a_minus <= 0.
struct KernelParams {
  double a_plus = 5e-4;
  double a_minus = -5e-6;
  double tau_plus_ms = 20.0;
  double tau_minus_ms = 20.0;

  void validate() const;
};

/// Exponential delay kernels. a_plus is carried by the post-synaptic trace,
/// a_minus (<= 0) by the delayed pre-synaptic trace.
struct DelayKernelParams {
  double a_plus = 1.2e-4;
  double a_minus = -1.2e-2;
  double tau_plus_ms = 20.0;
  double tau_minus_ms = 20.0;

  void validate() const;
};

struct BoundsConfig {
  double w_min = 0.0;
  double w_max = 1.0;
  double mu_plus = 1.0;
  double mu_minus = 1.0;
  double d_min = 0.0;
  double d_max = 10.0;
  double norm_target = 78.4;
  double norm_order = 1.0;

  void validate() const;
};

struct RuleParams {
  LearningRule rule = LearningRule::ds_stdp;
  KernelParams weight;
  DelayKernelParams delay;
  TraceKind trace_kind = TraceKind::cumulative;
  double trace_saturation_k = 1.0;
  /// Delay learning switch for the delay rules. Always off for STDP.
  bool learn_delays = true;

  static RuleParams defaults(LearningRule rule);
  bool learns_delays() const { return learn_delays && rule != LearningRule::stdp; }
};

/// Time of the most recent spike per neuron, empty when none has occurred.
struct LastSpikeState {
  std::vector<std::optional<double>> pre_ms;
  std::vector<std::optional<double>> post_ms;
};

/// Potentiative and depressive parts of an update, [post x pre].
struct DeltaPair {
  RealMatrix plus;
  RealMatrix minus;
};

/// Per-synapse view of a delayed pre-synaptic population, [post x pre].
struct DelayedSamples {
  RealMatrix trace;
  Matrix<unsigned char> spikes;
};

DelayedSamples sample_delayed(const DelayRingBuffer& history, std::size_t channel, const RealMatrix& delays,
                              double tau_ms);

/// Trace STDP without delays. plus_ji = S_post_j * X_pre_i, minus_ji = S_pre_i * X_post_j.
DeltaPair stdp_update(std::span<const double> pre_trace, std::span<const double> post_trace, const SpikeStep& pre,
                      const SpikeStep& post);

/// Delay-shifted weight rule: pre spikes and traces are read through D_ji.
DeltaPair ds_stdp_weight_update(const DelayedSamples& pre, std::span<const double> post_trace, const SpikeStep& post);

/// Delay-shifted delay rule. `pre` holds the delayed A'_minus trace and
/// `post_trace` the A'_plus trace. plus_ji = S_pre_i(t - D_ji) * X'_post_j,
/// minus_ji = S_post_j * X'_pre_i(t - D_ji).
DeltaPair ds_stdp_delay_update(const DelayedSamples& pre, std::span<const double> post_trace, const SpikeStep& post);

struct DrUpdate {
  double weight = 0.0;
  double delay = 0.0;
};

/// Single-synapse DR update from t_delta = t*_post - t*_pre - d.
DrUpdate dr_pair_update(double t_delta, const KernelParams& weight, const DelayKernelParams& delay);

struct DrDeltas {
  RealMatrix weight_plus;
  RealMatrix weight_minus;
  RealMatrix delay;
};

/// Ungated DR step update for every synapse. Synapses whose pre or post
/// neuron has never spiked get zero.
DrDeltas dr_stdp_update(const LastSpikeState& last, const RealMatrix& delays, const KernelParams& weight,
                        const DelayKernelParams& delay);

/// (hi - value)^mu_plus * plus + (value - lo)^mu_minus * minus
double power_law_bound(double plus, double minus, double value, double lo, double hi, double mu_plus,
                       double mu_minus);

void clamp_delays(RealMatrix& delays, double d_min, double d_max);

/// Scales each row to p-norm `target`. Rows with zero norm are left as they
/// are; their count is returned.
std::size_t normalize_weights(RealMatrix& weights, double target, double order);

/// Summed rule deltas for one connection awaiting application.
struct StagedUpdates {
  RealMatrix weight_plus;
  RealMatrix weight_minus;
  RealMatrix delay;
  std::size_t samples = 0;

  StagedUpdates() = default;
  StagedUpdates(std::size_t post, std::size_t pre);
  void clear();
  void merge(const StagedUpdates& other);
};

enum class BatchReduction { mean, sum };

struct ApplyOptions {
  BatchReduction reduction = BatchReduction::mean;
  bool power_law = true;
  bool learn_delays = true;
  bool normalize = true;
};

struct ApplyReport {
  std::size_t zero_norm_rows = 0;
};

/// Reduce over samples, bound weight deltas, add, clamp, normalize.
ApplyReport apply_staged(DelayedConnection& conn, const StagedUpdates& staged, const BoundsConfig& bounds,
                         const ApplyOptions& options);

/// Runs one learning rule against a DelayedConnection step by step and stages
/// the resulting deltas. Parameters of the connection are treated as fixed
/// until the caller applies the staged updates.
class PlasticityEngine {
 public:
  PlasticityEngine() = default;
  PlasticityEngine(std::size_t pre, std::size_t post, RuleParams params);

  const RuleParams& params() const { return params_; }

  /// Trace channels the connection must record for this rule: the weight
  /// trace first, then the delay trace when delays are learned.
  std::vector<TraceParams> pre_trace_params() const;

  /// Call after `conn.advance()` for step `step` with the post-synaptic
  /// spikes of the same step.
  void observe(const DelayedConnection& conn, const SpikeStep& post, std::size_t step);
  /// Brings every DR synapse up to date through step `until_step` (exclusive).
  /// No-op for the trace rules.
  void flush(const DelayedConnection& conn, std::size_t until_step);
  /// Flushes and counts one finished sample of `steps` steps.
  void end_sample(const DelayedConnection& conn, std::size_t steps);

  /// Post traces and last-spike times to zero/never. Staged deltas are kept.
  void reset_dynamic_state();

  StagedUpdates& staged() { return staged_; }
  const StagedUpdates& staged() const { return staged_; }

  std::span<const double> post_trace() const { return post_trace_.values(); }
  std::span<const double> post_delay_trace() const { return post_delay_trace_.values(); }
  LastSpikeState last_spikes() const;

 private:
  void observe_trace_rule(const DelayedConnection& conn, const SpikeStep& post);
  void observe_dr(const DelayedConnection& conn, const SpikeStep& post, std::size_t step);
  void flush_synapse(const DelayedConnection& conn, std::size_t post, std::size_t pre, std::size_t until_step);

  RuleParams params_;
  std::size_t pre_ = 0;
  std::size_t post_ = 0;
  Trace post_trace_;
  Trace post_delay_trace_;
  StagedUpdates staged_;

  // DR bookkeeping; NaN marks "never spiked".
  std::vector<double> last_pre_;
  std::vector<double> last_post_;
  std::vector<std::size_t> flushed_through_;  // [post x pre]
};

}  // namespace dsstdp
