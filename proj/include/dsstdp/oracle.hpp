#pragma once

// Closed-form and brute-force references for delay-learning updates on tiny
// spike scenarios. Nothing here calls into the simulation engine.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace dsstdp::oracle {

/// a_plus pairs with the post-synaptic kernel, a_minus (<= 0) with the
/// delayed pre-synaptic kernel.
struct DelayKernels {
  double a_plus = 1.2e-4;
  double a_minus = -1.2e-2;
  double tau_plus_ms = 20.0;
  double tau_minus_ms = 20.0;
};

enum class PairCase {
  post_before_pre,     // t_post < t_pre <= t_pre + d
  post_during_transit, // t_pre <= t_post < t_pre + d
  pre_observed_first,  // t_pre + d < t_post
  coincident,          // t_post == t_pre + d
};

std::string_view to_string(PairCase c);

struct PairUpdate {
  PairCase pair_case;
  /// First delay update under the delay-shifted rule and when it lands.
  double ds_value;
  double ds_time_ms;
  /// First delay update under the last-spike-difference rule and when it lands.
  double dr_value;
  double dr_time_ms;
};

/// One pre spike generated at t_pre, one post spike at t_post, delay d.
PairUpdate initial_pair_update(double t_pre, double t_post, double d, const DelayKernels& k);

struct TripletScenario {
  double t_pre_ms = 0.0;
  double t_post1_ms = 2.0;
  double t_post2_ms = 5.0;
  double d0_ms = 8.0;
  double dt_ms = 1.0;
  DelayKernels kernels;
};

struct TripletSums {
  /// Sum of both post-gated kernel terms at the observation time, using the
  /// delay in force then.
  double ds_closed_form;
  /// The same two terms evaluated with the initial delay for both.
  double dr_naive;
  /// The two updates applied at t_post1 and t_post2 when the delay is
  /// updated every step in between.
  double dr_step_accumulated;
  /// Every per-step update from t_post1 through the original observation time.
  double dr_total;
  double observation_ms;
};

/// Two post spikes (possibly coincident) between the pre spike's generation
/// and its observation at t_pre + d0.
TripletSums triplet_sums(const TripletScenario& s);

struct HebbintResult {
  double final_delay_ms;
  std::size_t updates;
  std::size_t longest_run;
  /// Steps s at which the bin check fired.
  std::vector<std::size_t> trigger_steps;
};

/// Discrete delay integral for one pre spike at s = 0:
/// d <- d + x[s] whenever s == ceil(d / dt), for s = 0 .. x.size()-1.
HebbintResult discrete_hebbint(double d0_ms, std::span<const double> x, double dt_ms);

}  // namespace dsstdp::oracle
