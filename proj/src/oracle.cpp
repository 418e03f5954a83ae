#include "dsstdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsstdp::oracle {

std::string_view to_string(PairCase c) {
  switch (c) {
    case PairCase::post_before_pre: return "post_before_pre";
    case PairCase::post_during_transit: return "post_during_transit";
    case PairCase::pre_observed_first: return "pre_observed_first";
    case PairCase::coincident: return "coincident";
  }
  return "unknown";
}

PairUpdate initial_pair_update(double t_pre, double t_post, double d, const DelayKernels& k) {
  if (d < 0.0) throw std::invalid_argument("pair update: negative delay");
  const double t_obs = t_pre + d;
  PairUpdate u{};
  if (t_post == t_obs) {
    // Both gates open in the same step: the pre-gated term sees the post
    // trace and the post-gated term sees the delayed pre trace, each at full
    // amplitude.
    u.pair_case = PairCase::coincident;
    u.ds_value = k.a_plus + k.a_minus;
    u.ds_time_ms = t_post;
    u.dr_value = k.a_minus;
    u.dr_time_ms = t_post;
    return u;
  }
  const double gap = std::abs(t_post - t_obs);
  if (t_post < t_pre) {
    u.pair_case = PairCase::post_before_pre;
    u.ds_value = k.a_plus * std::exp(-gap / k.tau_plus_ms);
    u.ds_time_ms = t_obs;
    u.dr_value = u.ds_value;
    u.dr_time_ms = t_pre;
  } else if (t_post < t_obs) {
    u.pair_case = PairCase::post_during_transit;
    u.ds_value = k.a_plus * std::exp(-gap / k.tau_plus_ms);
    u.ds_time_ms = t_obs;
    u.dr_value = u.ds_value;
    u.dr_time_ms = t_post;
  } else {
    u.pair_case = PairCase::pre_observed_first;
    u.ds_value = k.a_minus * std::exp(-gap / k.tau_minus_ms);
    u.ds_time_ms = t_post;
    u.dr_value = u.ds_value;
    u.dr_time_ms = t_post;
  }
  return u;
}

TripletSums triplet_sums(const TripletScenario& s) {
  const auto& k = s.kernels;
  if (!(s.t_pre_ms < s.t_post1_ms && s.t_post1_ms <= s.t_post2_ms && s.t_post2_ms < s.t_pre_ms + s.d0_ms)) {
    throw std::invalid_argument("triplet: need t_pre < t_post1 <= t_post2 < t_pre + d0");
  }
  auto kernel = [&](double t_post, double d) {
    return k.a_plus * std::exp((t_post - s.t_pre_ms - d) / k.tau_plus_ms);
  };

  TripletSums out{};
  out.observation_ms = s.t_pre_ms + s.d0_ms;
  // Nothing moves the delay before the pre spike is observed.
  out.ds_closed_form = kernel(s.t_post1_ms, s.d0_ms) + kernel(s.t_post2_ms, s.d0_ms);
  out.dr_naive = out.ds_closed_form;

  // Walk the grid from the first post spike, updating the delay each step
  // with the kernel of the latest post spike.
  const auto first = static_cast<long>(std::llround(s.t_post1_ms / s.dt_ms));
  const auto second = static_cast<long>(std::llround(s.t_post2_ms / s.dt_ms));
  const auto last = static_cast<long>(std::llround(out.observation_ms / s.dt_ms));
  double d = s.d0_ms;
  for (long n = first; n < last; ++n) {
    const double latest_post = n >= second ? s.t_post2_ms : s.t_post1_ms;
    // Coincident post spikes each contribute at their shared step.
    const int repeats = (n == first && n == second) ? 2 : 1;
    for (int r = 0; r < repeats; ++r) {
      const double delta = kernel(latest_post, d);
      if (n == first || n == second) out.dr_step_accumulated += delta;
      out.dr_total += delta;
      d += delta;
    }
  }
  return out;
}

HebbintResult discrete_hebbint(double d0_ms, std::span<const double> x, double dt_ms) {
  if (!(dt_ms > 0.0)) throw std::invalid_argument("hebbint: dt must be positive");
  HebbintResult r{d0_ms, 0, 0, {}};
  std::size_t run = 0;
  for (std::size_t s = 0; s < x.size(); ++s) {
    const double bin = std::ceil(r.final_delay_ms / dt_ms);
    if (bin == static_cast<double>(s)) {
      r.final_delay_ms += x[s];
      r.trigger_steps.push_back(s);
      ++r.updates;
      ++run;
      r.longest_run = std::max(r.longest_run, run);
    } else {
      run = 0;
    }
  }
  return r;
}

}  // namespace dsstdp::oracle
