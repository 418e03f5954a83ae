#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dsstdp/oracle.hpp"

using namespace dsstdp::oracle;

TEST_CASE("pair update: post spike before the pre spike") {
  const DelayKernels k;
  const auto u = initial_pair_update(4.0, 3.0, 5.0, k);
  CHECK(u.pair_case == PairCase::post_before_pre);
  CHECK(u.ds_value == doctest::Approx(1.2e-4 * std::exp((3.0 - 4.0 - 5.0) / 20.0)).epsilon(1e-15));
  CHECK(u.dr_value == u.ds_value);
  CHECK(u.ds_time_ms == 9.0);
  CHECK(u.dr_time_ms == 4.0);
}

TEST_CASE("pair update: post spike while the pre spike is in transit") {
  const DelayKernels k;
  const auto u = initial_pair_update(0.0, 3.0, 5.0, k);
  CHECK(u.pair_case == PairCase::post_during_transit);
  CHECK(u.ds_value == doctest::Approx(1.2e-4 * std::exp(-2.0 / 20.0)).epsilon(1e-15));
  CHECK(u.dr_value == u.ds_value);
  CHECK(u.ds_time_ms == 5.0);
  CHECK(u.dr_time_ms == 3.0);
}

TEST_CASE("pair update: pre spike observed first") {
  const DelayKernels k;
  const auto u = initial_pair_update(0.0, 7.0, 2.0, k);
  CHECK(u.pair_case == PairCase::pre_observed_first);
  CHECK(u.ds_value == doctest::Approx(-1.2e-2 * std::exp((2.0 - 7.0) / 20.0)).epsilon(1e-15));
  CHECK(u.dr_value == u.ds_value);
  CHECK(u.ds_time_ms == 7.0);
  CHECK(u.dr_time_ms == 7.0);
}

TEST_CASE("pair update: post coincides with the observed pre spike") {
  const DelayKernels k;
  const auto u = initial_pair_update(1.0, 6.0, 5.0, k);
  CHECK(u.pair_case == PairCase::coincident);
  CHECK(u.ds_value == doctest::Approx(1.2e-4 - 1.2e-2).epsilon(1e-15));
  CHECK(u.dr_value == -1.2e-2);
  CHECK(u.ds_time_ms == 6.0);
  CHECK(u.dr_time_ms == 6.0);
  CHECK(to_string(u.pair_case) == "coincident");
}

TEST_CASE("pair grid: shared values and the timing gap") {
  const DelayKernels k;
  for (int pre = 0; pre <= 10; ++pre) {
    for (int post = 0; post <= 25; ++post) {
      for (double d : {0.0, 1.0, 2.5, 5.0, 10.0}) {
        const auto u = initial_pair_update(pre, post, d, k);
        const double gap = post - (pre + d);
        if (gap == 0.0) {
          CHECK(u.pair_case == PairCase::coincident);
          continue;
        }
        CHECK(u.ds_value == u.dr_value);
        CHECK(u.ds_time_ms >= u.dr_time_ms);
        if (gap < 0.0) {
          CHECK(u.ds_value > 0.0);
          CHECK(u.ds_time_ms == pre + d);
        } else {
          CHECK(u.ds_value < 0.0);
          CHECK(u.ds_time_ms == u.dr_time_ms);
        }
        if (u.pair_case == PairCase::post_before_pre) CHECK(u.ds_time_ms - u.dr_time_ms == d);
        CHECK(std::abs(u.ds_value) <= 1.2e-2);
      }
    }
  }
}

TEST_CASE("triplet sums on the default scenario") {
  const TripletScenario s;
  const auto r = triplet_sums(s);
  CHECK(r.observation_ms == 8.0);
  const double closed = 1.2e-4 * (std::exp(-6.0 / 20.0) + std::exp(-3.0 / 20.0));
  CHECK(r.ds_closed_form == doctest::Approx(closed).epsilon(1e-14));
  CHECK(r.ds_closed_form == doctest::Approx(1.9218314365281307e-4).epsilon(1e-14));
  CHECK(r.dr_naive == r.ds_closed_form);
  // Delay drift between the two updates shrinks the second kernel term.
  CHECK(r.dr_step_accumulated == doctest::Approx(1.921817663913101e-4).epsilon(1e-13));
  CHECK(r.dr_step_accumulated < r.ds_closed_form);
  CHECK(r.dr_total == doctest::Approx(5.765425136319023e-4).epsilon(1e-13));
}

TEST_CASE("triplet with coincident post spikes doubles the single pair") {
  TripletScenario s;
  s.t_post1_ms = 3.0;
  s.t_post2_ms = 3.0;
  const auto r = triplet_sums(s);
  const auto single = initial_pair_update(s.t_pre_ms, 3.0, s.d0_ms, s.kernels);
  CHECK(r.ds_closed_form == doctest::Approx(2.0 * single.ds_value).epsilon(1e-15));
}

TEST_CASE("triplet drift vanishes with the amplitude") {
  TripletScenario s;
  double previous = 1.0;
  for (double scale : {1.0, 1e-2, 1e-4, 1e-6}) {
    s.kernels.a_plus = 1.2e-4 * scale;
    s.kernels.a_minus = -1.2e-2 * scale;
    const auto r = triplet_sums(s);
    const double rel = std::abs(r.dr_step_accumulated - r.ds_closed_form) / r.ds_closed_form;
    CHECK(rel < previous);
    previous = rel;
  }
  CHECK(previous < 1e-10);
}

TEST_CASE("triplet rejects out-of-window post spikes") {
  TripletScenario s;
  s.t_post2_ms = 9.0;
  CHECK_THROWS_AS(triplet_sums(s), std::invalid_argument);
  s = TripletScenario{};
  s.t_post1_ms = 0.0;
  CHECK_THROWS_AS(triplet_sums(s), std::invalid_argument);
}

TEST_CASE("hebbint under the half-step bound never retriggers more than twice") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> d0(0.0, 10.0);
  std::uniform_real_distribution<double> x(0.0, 0.5);
  std::size_t worst = 0;
  for (int run = 0; run < 2000; ++run) {
    std::vector<double> xs(30);
    for (double& v : xs) v = x(gen);
    const auto r = discrete_hebbint(d0(gen), xs, 1.0);
    worst = std::max(worst, r.longest_run);
    CHECK(r.updates == r.longest_run);  // a single run per pre spike
  }
  CHECK(worst <= 2);
  CHECK(worst == 2);

  // Right at the bound from an integer delay.
  const std::vector<double> half(20, 0.5);
  CHECK(discrete_hebbint(3.0, half, 1.0).longest_run == 2);
}

TEST_CASE("hebbint counterexample above the bound") {
  const std::vector<double> x(20, 0.6);
  const auto r = discrete_hebbint(0.9, x, 1.0);
  CHECK(r.longest_run >= 3);
  CHECK(r.trigger_steps.front() == 1);
  CHECK(r.trigger_steps[1] == 2);
  CHECK(r.trigger_steps[2] == 3);
}

TEST_CASE("hebbint with no retrigger keeps a single update") {
  const std::vector<double> none(20, 0.0);
  const auto r = discrete_hebbint(4.2, none, 1.0);
  CHECK(r.updates == 1);
  CHECK(r.trigger_steps == std::vector<std::size_t>{5});
  CHECK(r.final_delay_ms == 4.2);
  CHECK_THROWS_AS(discrete_hebbint(1.0, none, 0.0), std::invalid_argument);
}
