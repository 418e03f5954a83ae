#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dsstdp/synapse.hpp"

using namespace dsstdp;

namespace {

RealMatrix random_matrix(std::size_t r, std::size_t c, double hi, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, hi);
  RealMatrix m(r, c);
  for (double& v : m.values()) v = u(gen);
  return m;
}

SpikeStep random_spikes(std::size_t n, double p, std::mt19937_64& gen) {
  std::bernoulli_distribution b(p);
  SpikeStep s(n);
  for (std::size_t i = 0; i < n; ++i) s.set(i, b(gen));
  return s;
}

}  // namespace

TEST_CASE("silent history gives zero current") {
  DelayedConnection c(RealMatrix(2, 3, 0.5), RealMatrix(2, 3, 1.0), 100.0, 0.0, 10.0, 1.0);
  c.advance(SpikeStep(3));
  for (double i : c.current()) CHECK(i == 0.0);
}

TEST_CASE("aligned spike delivers Q/dt times the weight") {
  RealMatrix w(1, 1, 1.0);
  DelayedConnection c(w, RealMatrix(1, 1, 0.0), 100.0, 0.0, 10.0, 1.0);
  c.advance(SpikeStep::from_indices(1, {0}));
  CHECK(c.current()[0] == 100.0);
  c.advance(SpikeStep(1));
  CHECK(c.current()[0] == 0.0);  // one step only

  c.set_weights(RealMatrix(1, 1, 0.3));
  c.reset();
  c.advance(SpikeStep::from_indices(1, {0}));
  CHECK(c.current()[0] == doctest::Approx(30.0).epsilon(1e-15));
}

TEST_CASE("delayed spike arrives in the ceiling bin") {
  RealMatrix d(2, 1);
  d(0, 0) = 2.2;
  d(1, 0) = 3.0;
  DelayedConnection c(RealMatrix(2, 1, 1.0), d, 100.0, 0.0, 10.0, 1.0);
  c.advance(SpikeStep::from_indices(1, {0}));
  std::vector<std::vector<double>> seen;
  for (int n = 0; n < 5; ++n) {
    seen.push_back(c.current());
    c.advance(SpikeStep(1));
  }
  for (int n = 0; n < 5; ++n) {
    CHECK(seen[n][0] == (n == 3 ? 100.0 : 0.0));
    CHECK(seen[n][1] == (n == 3 ? 100.0 : 0.0));
  }
}

TEST_CASE("delays outside the range are rejected") {
  DelayedConnection c(RealMatrix(1, 1, 1.0), RealMatrix(1, 1, 0.0), 100.0, 0.0, 10.0, 1.0);
  CHECK_THROWS_AS(c.set_delays(RealMatrix(1, 1, 10.5)), std::out_of_range);
  CHECK_THROWS_AS(c.set_delays(RealMatrix(1, 1, -0.5)), std::out_of_range);
  CHECK_NOTHROW(c.set_delays(RealMatrix(1, 1, 10.0)));
}

TEST_CASE("static diagonal and hollow wiring") {
  const auto diag = StaticConnection::scalar_diagonal(4, 22.5, 100.0);
  const auto i = diag.current(SpikeStep::from_indices(4, {2}), 1.0);
  CHECK(i == std::vector<double>{0.0, 0.0, 2250.0, 0.0});

  const auto hollow = StaticConnection::hollow(4, 120.0, 75.0);
  const auto h = hollow.current(SpikeStep::from_indices(4, {1}), 1.0);
  CHECK(h == std::vector<double>{-9000.0, 0.0, -9000.0, -9000.0});

  for (double x : hollow.current(SpikeStep(4), 1.0)) CHECK(x == 0.0);
}

TEST_CASE("zero delays match the static path bit for bit") {
  std::mt19937_64 gen(21);
  const auto w = random_matrix(7, 13, 1.0, gen);
  DelayedConnection delayed(w, RealMatrix(7, 13, 0.0), 100.0, 0.0, 10.0, 1.0);
  const StaticConnection fixed(w, 100.0);
  for (int n = 0; n < 200; ++n) {
    const auto s = random_spikes(13, 0.3, gen);
    delayed.advance(s);
    CHECK(delayed.current() == fixed.current(s, 1.0));
  }
}

TEST_CASE("current is linear in W") {
  std::mt19937_64 gen(4);
  const auto w = random_matrix(5, 9, 1.0, gen);
  const auto d = random_matrix(5, 9, 10.0, gen);
  for (double scale : {0.5, 2.0, 4.0, 0.3, 7.0}) {
    RealMatrix ws = w;
    for (double& v : ws.values()) v *= scale;
    DelayedConnection a(w, d, 100.0, 0.0, 10.0, 1.0);
    DelayedConnection b(ws, d, 100.0, 0.0, 10.0, 1.0);
    std::mt19937_64 spikes(99);
    for (int n = 0; n < 100; ++n) {
      const auto s = random_spikes(9, 0.4, spikes);
      a.advance(s);
      b.advance(s);
      const auto ia = a.current();
      const auto ib = b.current();
      for (std::size_t j = 0; j < ia.size(); ++j) {
        if (scale == 0.5 || scale == 2.0 || scale == 4.0) {
          CHECK(ib[j] == ia[j] * scale);
        } else {
          CHECK(ib[j] == doctest::Approx(ia[j] * scale).epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("delayed current matches a brute-force history lookup") {
  std::mt19937_64 gen(8);
  const auto w = random_matrix(6, 11, 1.0, gen);
  const auto d = random_matrix(6, 11, 10.0, gen);
  DelayedConnection c(w, d, 100.0, 0.0, 10.0, 1.0);
  std::vector<SpikeStep> past;
  for (int n = 0; n < 150; ++n) {
    const auto s = random_spikes(11, 0.25, gen);
    past.push_back(s);
    c.advance(s);
    const auto got = c.current();
    for (std::size_t j = 0; j < 6; ++j) {
      double expected = 0.0;
      for (std::size_t i = 0; i < 11; ++i) {
        const int back = static_cast<int>(std::ceil(d(j, i)));
        if (n - back >= 0 && past[n - back][i]) expected += w(j, i) * 100.0;
      }
      CHECK(got[j] == doctest::Approx(expected).epsilon(1e-13));
    }
  }
}

TEST_CASE("delayed traces are sampled with fractional decay") {
  RealMatrix d(1, 1, 2.5);
  DelayedConnection c(RealMatrix(1, 1, 1.0), d, 100.0, 0.0, 10.0, 1.0, {TraceParams::cumulative(1.0, 20.0)});
  c.advance(SpikeStep::from_indices(1, {0}));
  c.advance(SpikeStep(1));
  c.advance(SpikeStep(1));
  // The trace value two steps back is 1.0 (the spike step itself).
  CHECK(c.delayed_trace(0, 0, 0) == doctest::Approx(std::exp(-0.5 / 20.0)).epsilon(1e-15));
}
