#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mfbd/error.hpp"
#include "mfbd/params.hpp"
#include "mfbd/rng.hpp"

namespace mfbd {

double log_stationary_pmf(const ScenarioParams& params, int j);
/// Stationary probability of index state j. Throws DomainError outside the
/// state space.
double stationary_pmf(const ScenarioParams& params, int j);

/// pi_0 = 1, pi_k = (lambda_0 ... lambda_{k-1}) / (mu_1 ... mu_k).
double potential_coefficient(const ScenarioParams& params, int k);

/// Supremum over i >= j of p_{i+1} e^{tilt (i+1)} / (p_i e^{tilt i}); for
/// finite chains returns 0 once j reaches the top state.
double tail_ratio_bound(const ScenarioParams& params, int j, double tilt);

struct SupportSum {
  double value = 0.0;
  /// Last index included.
  int last_index = 0;
  /// Certified bound on the omitted tilted mass sum_{j > last} p_j e^{tilt j}.
  double tail_bound = 0.0;
};

/// Sums f(j) p_j over the state space. On infinite support the walk stops
/// once the omitted mass of p_j e^{tilt j} is certified below rel_tol times
/// the accumulated tilted mass. f must not outgrow e^{tilt j}.
template <class F>
SupportSum sum_over_support(const ScenarioParams& params, F&& f, double tilt = 0.0,
                            double rel_tol = 1e-15, int min_index = 0) {
  SupportSum out;
  const auto top = params.max_state();
  if (top) {
    for (int j = 0; j <= *top; ++j) out.value += f(j) * stationary_pmf(params, j);
    out.last_index = *top;
    return out;
  }
  constexpr int kMaxIndex = 1 << 20;
  double tilted_mass = 0.0;
  for (int j = 0; j < kMaxIndex; ++j) {
    const double lp = log_stationary_pmf(params, j);
    const double p = std::exp(lp);
    out.value += f(j) * p;
    const double tilted = std::exp(lp + tilt * j);
    tilted_mass += tilted;
    const double rho = tail_ratio_bound(params, j, tilt);
    if (j >= min_index && rho < 1.0) {
      const double tail = tilted * rho / (1.0 - rho);
      if (tail <= rel_tol * tilted_mass) {
        out.last_index = j;
        out.tail_bound = tail;
        return out;
      }
    }
  }
  throw DomainError("sum_over_support: tilted series does not converge");
}

/// E exp(zeta X) with X = value_scale * j, by direct summation of the pmf.
/// Throws DomainError when the series diverges (Pascal beyond its abscissa).
double mgf_x_pmf_sum(const ScenarioParams& params, double zeta);

/// Stationary law tabulated up to a certified truncation index.
class StationaryLaw {
 public:
  explicit StationaryLaw(const ScenarioParams& params, double tail_tol = 1e-15);

  int sample(Rng& rng) const;
  int truncation_index() const { return static_cast<int>(pmf_.size()) - 1; }
  std::span<const double> pmf() const { return pmf_; }

 private:
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

/// Inverse-CDF draw from the stationary law.
int sample_stationary(const ScenarioParams& params, Rng& rng);

/// One exact sample path on [0, horizon]: piecewise constant, right continuous.
struct Trajectory {
  int initial_state = 0;
  std::vector<double> jump_times;
  std::vector<int> post_jump_states;
  double horizon = 0.0;
  double value_scale = 1.0;

  int state_at(double t) const;
};

/// value_scale * state at time t; t must lie in [0, horizon].
double eval_path(const Trajectory& traj, double t);

/// Event-driven stepper over the jumps of one chain. Holds the pending jump
/// so several chains can be merged on a common clock.
class PathStepper {
 public:
  PathStepper(const ScenarioParams& params, int initial_state, Rng& rng);

  int state() const { return state_; }
  double next_time() const { return next_time_; }
  int next_state() const { return next_state_; }
  /// Commits the pending jump and draws the following one.
  void advance(Rng& rng);

 private:
  void draw(Rng& rng);
  void ensure_cached(int j);

  ScenarioParams params_;
  int state_;
  double now_ = 0.0;
  double next_time_ = 0.0;
  int next_state_ = 0;
  std::vector<double> total_rate_;
  std::vector<double> up_probability_;
};

/// Stationary start, then exact jumps up to the horizon.
Trajectory simulate_path(const ScenarioParams& params, double horizon, Rng& rng);
Trajectory simulate_path_from(const ScenarioParams& params, int initial_state, double horizon,
                              Rng& rng);

enum class SqVerdict { kFinite, kDivergent };

struct SqReport {
  SqVerdict verdict = SqVerdict::kFinite;
  /// Limit of consecutive term ratios (0 for Poisson, e^q lambda/mu for
  /// Pascal); NaN for finite chains.
  double ratio_limit = NAN;
  /// (K, sum_{k <= K}) at K = 0, 1, 3, 7, ... and at the last index summed.
  std::vector<std::pair<int, double>> partial_sums;
  double value = 0.0;
  double tail_bound = 0.0;
  int truncation_index = 0;
};

/// Summability of S_q = sum_k pi_k (e^{qk}(lambda_k + mu_k) + k^delta).
SqReport sq_diagnostic(const ScenarioParams& params, double q, double delta_exponent = 1.0);

struct MonteCarloValue {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Estimate of c(q, t) = E sup_{s <= t} |Lambda^q(0) - Lambda^q(s)| with
/// Lambda = exp(X - c_x). Stratified over X(0) with exact stationary weights;
/// within a stratum the first jump is conditioned to fall in [0, t], which
/// keeps the estimator informative as t -> 0.
MonteCarloValue max_increment_moment(const ScenarioParams& params, double q, double t,
                                     int replicates, std::uint64_t seed);

/// Plain estimator on shared paths: one stationary path per replicate over
/// the widest window, sup taken over every nested window of the same path.
/// windows must be sorted in decreasing order.
std::vector<MonteCarloValue> max_increment_profile(const ScenarioParams& params, double q,
                                                   std::span<const double> windows,
                                                   int replicates, std::uint64_t seed);

struct IncrementSeries {
  std::vector<double> estimates;  // c(q, b^-n), n = 0..n_max
  std::vector<double> stderrs;
  std::vector<double> partial_sums;
  std::vector<double> ratios;  // estimates[n+1] / estimates[n]
};

IncrementSeries increment_moment_series(const ScenarioParams& params, double q, double b,
                                        int n_max, int replicates, std::uint64_t seed);

}  // namespace mfbd
