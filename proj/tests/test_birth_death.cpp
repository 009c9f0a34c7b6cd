#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mfbd/birth_death.hpp"
#include "mfbd/numerics.hpp"
#include "mfbd/scenarios.hpp"

using namespace mfbd;

namespace {

double choose(double n, double k) { return std::exp(std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1)); }

// Textbook pmfs, written independently of the rate products.
double poisson_pmf(double a, int j) { return std::exp(j * std::log(a) - a - std::lgamma(j + 1.0)); }
double negbin_pmf(double beta, double c, int j) {
  return std::exp(std::lgamma(beta + j) - std::lgamma(beta) - std::lgamma(j + 1.0) + beta * std::log1p(-c) + j * std::log(c));
}
double binomial_pmf(int n, double p, int j) { return choose(n, j) * std::pow(p, j) * std::pow(1 - p, n - j); }
double hyper_pmf(int n, int g, int h, int j) { return choose(g, j) * choose(h, n - j) / choose(g + h, n); }

std::vector<ScenarioParams> sample_params() {
  return {ScenarioParams::poisson(1.0, 1.0), ScenarioParams::poisson(2.5, 0.7), ScenarioParams::pascal(2.0, 1.0, 4.0),
          ScenarioParams::pascal(0.7, 0.3, 0.9), ScenarioParams::binomial(4, 0.3), ScenarioParams::binomial(1, 0.8),
          ScenarioParams::hypergeometric(3, 5, 6), ScenarioParams::hypergeometric(4, 4, 9)};
}

}  // namespace

TEST_CASE("stationary pmf matches the textbook laws") {
  for (int j = 0; j < 15; ++j) {
    CHECK(stationary_pmf(ScenarioParams::poisson(2.5, 0.7), j) == doctest::Approx(poisson_pmf(2.5 / 0.7, j)).epsilon(1e-12));
    CHECK(stationary_pmf(ScenarioParams::pascal(0.7, 0.3, 0.9), j) ==
          doctest::Approx(negbin_pmf(0.7, 0.3 / 0.9, j)).epsilon(1e-12));
  }
  for (int j = 0; j <= 4; ++j) {
    CHECK(stationary_pmf(ScenarioParams::binomial(4, 0.3), j) == doctest::Approx(binomial_pmf(4, 0.3, j)).epsilon(1e-12));
    CHECK(stationary_pmf(ScenarioParams::hypergeometric(4, 4, 9), j) == doctest::Approx(hyper_pmf(4, 4, 9, j)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(stationary_pmf(ScenarioParams::binomial(4, 0.3), 5), DomainError);
  CHECK_THROWS_AS(stationary_pmf(ScenarioParams::poisson(1, 1), -1), DomainError);
}

TEST_CASE("property: detailed balance and unit mass") {
  for (const auto& p : sample_params()) {
    CAPTURE(p.describe());
    for (int j = 0; j < 12 && p.contains(j + 1); ++j) {
      const double lhs = stationary_pmf(p, j) * p.birth_rate(j);
      const double rhs = stationary_pmf(p, j + 1) * p.death_rate(j + 1);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
    CHECK(sum_over_support(p, [](int) { return 1.0; }).value == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(p.death_rate(0) == 0.0);
    if (const auto top = p.max_state()) CHECK(p.birth_rate(*top) == 0.0);
  }
}

TEST_CASE("property: tail ratio bound dominates every later ratio") {
  for (const auto& p : sample_params()) {
    if (p.max_state()) continue;
    for (double tilt : {0.0, 0.5, 1.0}) {
      if (!(tilt < mgf_abscissa(p) * p.value_scale())) continue;
      for (int j = 0; j < 10; ++j) {
        const double bound = tail_ratio_bound(p, j, tilt);
        for (int i = j; i < j + 40; ++i) {
          const double r = stationary_pmf(p, i + 1) * std::exp(tilt) / stationary_pmf(p, i);
          CHECK(r <= bound * (1 + 1e-12));
        }
      }
    }
  }
}

TEST_CASE("pmf-sum MGF against closed forms") {
  const double e = std::exp(1.0);
  CHECK(mgf_x_pmf_sum(ScenarioParams::poisson(1.0, 1.0), 1.0) == doctest::Approx(std::exp(e - 1.0)).epsilon(1e-13));
  CHECK(mgf_x_pmf_sum(ScenarioParams::binomial(4, 0.3), 1.0) == doctest::Approx(std::pow(0.3 * e + 0.7, 4)).epsilon(1e-13));
  // Pascal beyond the abscissa diverges.
  CHECK_THROWS_AS(mgf_x_pmf_sum(ScenarioParams::pascal(2.0, 1.0, 4.0), 1.0), DomainError);
}

TEST_CASE("rng substreams are deterministic and distinct") {
  Rng a = Rng::substream(7, StreamPurpose::kCascade, 3, 2);
  Rng b = Rng::substream(7, StreamPurpose::kCascade, 3, 2);
  Rng c = Rng::substream(7, StreamPurpose::kVariance, 3, 2);
  Rng d = Rng::substream(7, StreamPurpose::kCascade, 3, 1);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 8; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    differs_c = differs_c || x != c.uniform();
    differs_d = differs_d || x != d.uniform();
  }
  CHECK(differs_c);
  CHECK(differs_d);
}

TEST_CASE("paths move by unit steps inside the state space") {
  for (const auto& p : sample_params()) {
    Rng rng(11);
    const Trajectory tr = simulate_path(p, 20.0, rng);
    int prev = tr.initial_state;
    double last = 0.0;
    for (std::size_t k = 0; k < tr.jump_times.size(); ++k) {
      CHECK(tr.jump_times[k] > last);
      CHECK(tr.jump_times[k] <= 20.0);
      CHECK(std::abs(tr.post_jump_states[k] - prev) == 1);
      CHECK(p.contains(tr.post_jump_states[k]));
      prev = tr.post_jump_states[k];
      last = tr.jump_times[k];
    }
    CHECK(tr.state_at(20.0) == prev);
    CHECK(eval_path(tr, 0.0) == doctest::Approx(p.value(tr.initial_state)));
    CHECK_THROWS_AS(eval_path(tr, 21.0), DomainError);
  }
}

TEST_CASE("two-state chain transition probability") {
  // Binomial N = 1: P(X_t = 1 | X_0 = 0) = p (1 - e^{-t}).
  const double p = 0.3, t = 0.7;
  const auto params = ScenarioParams::binomial(1, p);
  int hits = 0;
  const int n = 40000;
  for (int r = 0; r < n; ++r) {
    Rng rng = Rng::substream(5, StreamPurpose::kGeneric, r);
    hits += simulate_path_from(params, 0, t, rng).state_at(t);
  }
  const double expected = p * (1.0 - std::exp(-t));
  const double se = std::sqrt(expected * (1 - expected) / n);
  CHECK(std::abs(hits / double(n) - expected) < 4 * se);
}

TEST_CASE("property: time marginal stays stationary (chi-square)") {
  for (const auto& p : {ScenarioParams::poisson(1.0, 1.0), ScenarioParams::hypergeometric(3, 5, 6)}) {
    const int n = 20000;
    std::vector<double> counts(8, 0.0);
    for (int r = 0; r < n; ++r) {
      Rng rng = Rng::substream(9, StreamPurpose::kGeneric, r);
      const int j = simulate_path(p, 1.5, rng).state_at(1.5);
      counts[std::min(j, 7)] += 1.0;
    }
    double stat = 0.0;
    int bins = 0;
    for (int j = 0; j < 7; ++j) {
      const double pj = p.contains(j) ? stationary_pmf(p, j) : 0.0;
      if (pj * n < 5) continue;
      stat += (counts[j] - n * pj) * (counts[j] - n * pj) / (n * pj);
      ++bins;
    }
    CHECK(numerics::chi_square_sf(stat, bins - 1) > 0.001);
  }
}

TEST_CASE("sq diagnostic verdicts follow the domain rules") {
  CHECK(sq_diagnostic(ScenarioParams::poisson(1, 1), 5.0).verdict == SqVerdict::kFinite);
  CHECK(sq_diagnostic(ScenarioParams::binomial(4, 0.3), 8.0).verdict == SqVerdict::kFinite);
  CHECK(sq_diagnostic(ScenarioParams::hypergeometric(3, 5, 6), 8.0).verdict == SqVerdict::kFinite);
  const auto pascal = ScenarioParams::pascal(2.0, 1.0, 4.0);
  const double edge = std::log(4.0);
  CHECK(sq_diagnostic(pascal, edge - 0.05).verdict == SqVerdict::kFinite);
  const SqReport div = sq_diagnostic(pascal, edge + 0.05);
  CHECK(div.verdict == SqVerdict::kDivergent);
  CHECK(div.ratio_limit > 1.0);
  // Partial sums keep growing.
  CHECK(div.partial_sums.back().second > 10 * div.partial_sums[div.partial_sums.size() / 2].second);
}

TEST_CASE("sq diagnostic matches a brute-force sum") {
  const auto p = ScenarioParams::poisson(1.0, 1.0);
  const double q = 1.3;
  double brute = 0.0;
  for (int k = 0; k < 80; ++k) {
    brute += potential_coefficient(p, k) * (std::exp(q * k) * (p.birth_rate(k) + p.death_rate(k)) + k);
  }
  CHECK(sq_diagnostic(p, q).value == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("increment moments shrink geometrically with the window") {
  const auto p = ScenarioParams::binomial(2, 0.3);
  const IncrementSeries s = increment_moment_series(p, 1.0, 8.0, 4, 400, 21);
  REQUIRE(s.ratios.size() == 4);
  for (double r : s.ratios) CHECK(r < 0.5);
  for (std::size_t k = 1; k < s.partial_sums.size(); ++k) CHECK(s.partial_sums[k] >= s.partial_sums[k - 1]);
  // Small windows: c(q, t) is about t E[(rate) |g(j+-1) - g(j)|].
  const MonteCarloValue small = max_increment_moment(p, 1.0, 1e-4, 400, 3);
  CHECK(small.value > 0.0);
  CHECK(small.value < 1e-3);
}
