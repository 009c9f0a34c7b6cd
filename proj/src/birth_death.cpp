#include "mfbd/birth_death.hpp"

#include <algorithm>
#include <sstream>

#include "mfbd/numerics.hpp"

namespace mfbd {

namespace {

void require_state(const ScenarioParams& params, int j) {
  if (!params.contains(j)) {
    std::ostringstream os;
    os << "state " << j << " outside the state space of " << params.describe();
    throw DomainError(os.str());
  }
}

double pascal_abscissa(const PascalLaw& l) { return std::log(l.mu / l.lambda) / (l.mu - l.lambda); }

}  // namespace

double log_stationary_pmf(const ScenarioParams& params, int j) {
  require_state(params, j);
  return std::visit(
      Overloaded{
          [j](const PoissonLaw& l) {
            const double a = l.lambda / l.mu;
            return -a + j * std::log(a) - std::lgamma(j + 1.0);
          },
          [j](const PascalLaw& l) {
            const double c = l.lambda / l.mu;
            return l.beta * std::log1p(-c) + std::lgamma(l.beta + j) - std::lgamma(l.beta) -
                   std::lgamma(j + 1.0) + j * std::log(c);
          },
          [j](const BinomialLaw& l) {
            return numerics::log_choose(l.n, j) + j * std::log(l.p) + (l.n - j) * std::log1p(-l.p);
          },
          [j](const HypergeometricLaw& l) {
            return numerics::log_choose(l.g, j) + numerics::log_choose(l.h, l.n - j) -
                   numerics::log_choose(l.g + l.h, l.n);
          },
      },
      params.law());
}

double stationary_pmf(const ScenarioParams& params, int j) {
  return std::exp(log_stationary_pmf(params, j));
}

double potential_coefficient(const ScenarioParams& params, int k) {
  require_state(params, k);
  double pi = 1.0;
  for (int i = 0; i < k; ++i) pi *= params.birth_rate(i) / params.death_rate(i + 1);
  return pi;
}

double tail_ratio_bound(const ScenarioParams& params, int j, double tilt) {
  const double et = std::exp(tilt);
  return std::visit(Overloaded{
                        [&](const PoissonLaw& l) { return l.lambda / l.mu * et / (j + 1.0); },
                        [&](const PascalLaw& l) {
                          const double c = l.lambda / l.mu;
                          return std::max(c * et * (l.beta + j) / (j + 1.0), c * et);
                        },
                        [&](const BinomialLaw& l) {
                          if (j >= l.n) return 0.0;
                          return (l.n - j) / (j + 1.0) * l.p / (1.0 - l.p) * et;
                        },
                        [&](const HypergeometricLaw& l) {
                          if (j >= l.n) return 0.0;
                          return params.birth_rate(j) / params.death_rate(j + 1) * et;
                        },
                    },
                    params.law());
}

double mgf_x_pmf_sum(const ScenarioParams& params, double zeta) {
  if (const auto* l = std::get_if<PascalLaw>(&params.law())) {
    const double bound = pascal_abscissa(*l);
    if (!(zeta < bound)) {
      std::ostringstream os;
      os << "pascal MGF diverges: zeta = " << zeta << " >= log(mu/lambda)/(mu-lambda) = " << bound;
      throw DomainError(os.str());
    }
  }
  const double s = params.value_scale();
  return sum_over_support(params, [&](int j) { return std::exp(zeta * s * j); }, zeta * s).value;
}

StationaryLaw::StationaryLaw(const ScenarioParams& params, double tail_tol) {
  const SupportSum support = sum_over_support(params, [](int) { return 1.0; }, 0.0, tail_tol);
  pmf_.resize(support.last_index + 1);
  cdf_.resize(pmf_.size());
  double acc = 0.0;
  for (int j = 0; j <= support.last_index; ++j) {
    pmf_[j] = stationary_pmf(params, j);
    acc += pmf_[j];
    cdf_[j] = acc;
  }
}

int StationaryLaw::sample(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return truncation_index();
  return static_cast<int>(it - cdf_.begin());
}

int sample_stationary(const ScenarioParams& params, Rng& rng) {
  return StationaryLaw(params).sample(rng);
}

int Trajectory::state_at(double t) const {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return initial_state;
  return post_jump_states[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

double eval_path(const Trajectory& traj, double t) {
  if (!(t >= 0.0 && t <= traj.horizon)) {
    std::ostringstream os;
    os << "eval_path: t = " << t << " outside [0, " << traj.horizon << "]";
    throw DomainError(os.str());
  }
  return traj.value_scale * traj.state_at(t);
}

PathStepper::PathStepper(const ScenarioParams& params, int initial_state, Rng& rng)
    : params_(params), state_(initial_state) {
  require_state(params, initial_state);
  draw(rng);
}

void PathStepper::ensure_cached(int j) {
  while (static_cast<int>(total_rate_.size()) <= j) {
    const int i = static_cast<int>(total_rate_.size());
    const double up = params_.birth_rate(i);
    const double down = params_.death_rate(i);
    total_rate_.push_back(up + down);
    up_probability_.push_back(up / (up + down));
  }
}

void PathStepper::draw(Rng& rng) {
  ensure_cached(state_);
  next_time_ = now_ + rng.exponential(total_rate_[state_]);
  next_state_ = rng.uniform() < up_probability_[state_] ? state_ + 1 : state_ - 1;
}

void PathStepper::advance(Rng& rng) {
  now_ = next_time_;
  state_ = next_state_;
  draw(rng);
}

Trajectory simulate_path_from(const ScenarioParams& params, int initial_state, double horizon,
                              Rng& rng) {
  if (!(horizon > 0.0)) throw DomainError("simulate_path: horizon must be positive");
  Trajectory traj;
  traj.initial_state = initial_state;
  traj.horizon = horizon;
  traj.value_scale = params.value_scale();
  PathStepper stepper(params, initial_state, rng);
  while (stepper.next_time() <= horizon) {
    traj.jump_times.push_back(stepper.next_time());
    traj.post_jump_states.push_back(stepper.next_state());
    stepper.advance(rng);
  }
  return traj;
}

Trajectory simulate_path(const ScenarioParams& params, double horizon, Rng& rng) {
  const int initial = sample_stationary(params, rng);
  return simulate_path_from(params, initial, horizon, rng);
}

SqReport sq_diagnostic(const ScenarioParams& params, double q, double delta_exponent) {
  SqReport report;
  auto log_term = [&](int k) {
    const double lpi = std::log(potential_coefficient(params, k));
    const double rates = params.birth_rate(k) + params.death_rate(k);
    const double a = lpi + q * k + std::log(rates);
    if (k == 0) return a;
    const double b = lpi + delta_exponent * std::log(static_cast<double>(k));
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  };
  auto record = [&](int k, double sum) {
    const bool power_of_two_minus_one = ((k + 1) & k) == 0;
    if (power_of_two_minus_one) report.partial_sums.emplace_back(k, sum);
  };

  if (const auto top = params.max_state()) {
    double sum = 0.0;
    for (int k = 0; k <= *top; ++k) {
      sum += std::exp(log_term(k));
      record(k, sum);
    }
    report.partial_sums.emplace_back(*top, sum);
    report.value = sum;
    report.truncation_index = *top;
    return report;
  }

  if (const auto* l = std::get_if<PascalLaw>(&params.law())) {
    report.ratio_limit = l->lambda / l->mu * std::exp(q);
  } else {
    report.ratio_limit = 0.0;
  }

  // Running log-domain sum; pi_k is evaluated through lgamma to stay finite
  // at large k.
  auto log_pi = [&](int k) {
    return log_stationary_pmf(params, k) - log_stationary_pmf(params, 0);
  };
  auto log_term_stable = [&](int k) {
    const double lpi = log_pi(k);
    const double a = lpi + q * k + std::log(params.birth_rate(k) + params.death_rate(k));
    if (k == 0) return a;
    const double b = lpi + delta_exponent * std::log(static_cast<double>(k));
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  };

  if (report.ratio_limit >= 1.0) {
    report.verdict = SqVerdict::kDivergent;
    double sum = 0.0;
    constexpr int kShown = 255;
    for (int k = 0; k <= kShown; ++k) {
      sum += std::exp(log_term_stable(k));
      record(k, sum);
    }
    report.value = sum;
    report.truncation_index = kShown;
    report.tail_bound = INFINITY;
    return report;
  }

  double sum = 0.0;
  double prev = log_term_stable(0);
  sum += std::exp(prev);
  record(0, sum);
  for (int k = 1; k < (1 << 20); ++k) {
    const double cur = log_term_stable(k);
    sum += std::exp(cur);
    record(k, sum);
    // Term ratios are eventually monotone towards ratio_limit; bound the tail
    // with the larger of the current ratio and its limit.
    const double rho = std::max(std::exp(cur - prev), report.ratio_limit);
    prev = cur;
    if (k >= 8 && rho < 1.0) {
      const double tail = std::exp(cur) * rho / (1.0 - rho);
      if (tail <= 1e-15 * sum) {
        report.partial_sums.emplace_back(k, sum);
        report.value = sum;
        report.tail_bound = tail;
        report.truncation_index = k;
        return report;
      }
    }
  }
  throw DomainError("sq_diagnostic: partial sums failed to settle");
}

namespace {

double log_centering(const ScenarioParams& params) { return std::log(mgf_x_pmf_sum(params, 1.0)); }

struct Strata {
  std::vector<double> weight;  // p_j
  std::vector<int> count;
};

/// Replicates per initial state: proportional to p_j max(1, g(j)), at least
/// kMinPerStratum, over the support where p_j g(j) carries the mass.
Strata allocate_strata(const ScenarioParams& params, const std::vector<double>& g,
                       int replicates) {
  constexpr int kMinPerStratum = 16;
  Strata s;
  const int n = static_cast<int>(g.size());
  s.weight.resize(n);
  std::vector<double> score(n);
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    s.weight[j] = stationary_pmf(params, j);
    score[j] = s.weight[j] * std::max(1.0, g[j]);
    total += score[j];
  }
  s.count.resize(n);
  for (int j = 0; j < n; ++j) {
    s.count[j] = std::max(kMinPerStratum, static_cast<int>(std::lround(replicates * score[j] / total)));
  }
  return s;
}

int stratum_top(const ScenarioParams& params, double tilt) {
  const SupportSum support = sum_over_support(params, [](int) { return 1.0; }, tilt, 1e-13);
  int top = support.last_index + 4;
  if (const auto m = params.max_state()) top = std::min(top, *m);
  return top;
}

}  // namespace

MonteCarloValue max_increment_moment(const ScenarioParams& params, double q, double t,
                                     int replicates, std::uint64_t seed) {
  if (!(q > 0.0) || !(t > 0.0)) throw DomainError("max_increment_moment: requires q > 0 and t > 0");
  const double c = log_centering(params);
  const double s = params.value_scale();
  auto gq = [&](int k) { return std::exp(q * (s * k - c)); };

  const int top = stratum_top(params, q * s);
  std::vector<double> g(top + 1);
  for (int j = 0; j <= top; ++j) g[j] = gq(j);
  const Strata strata = allocate_strata(params, g, replicates);

  double value = 0.0;
  double variance = 0.0;
  for (int j = 0; j <= top; ++j) {
    const double rate = params.birth_rate(j) + params.death_rate(j);
    const double p_jump = -std::expm1(-rate * t);
    if (p_jump <= 0.0) continue;
    Rng rng = Rng::substream(seed, StreamPurpose::kIncrementMoment, static_cast<std::uint64_t>(j));
    const double up = params.birth_rate(j) / rate;
    const int n = strata.count[j];
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < n; ++r) {
      // First jump conditioned on [0, t] by inverting the truncated CDF.
      const double tau = -std::log1p(-rng.uniform() * p_jump) / rate;
      const int first = rng.uniform() < up ? j + 1 : j - 1;
      double sup = std::abs(gq(first) - g[j]);
      const double remaining = t - tau;
      if (remaining > 0.0) {
        PathStepper stepper(params, first, rng);
        while (stepper.next_time() <= remaining) {
          sup = std::max(sup, std::abs(gq(stepper.next_state()) - g[j]));
          stepper.advance(rng);
        }
      }
      sum += sup;
      sum2 += sup * sup;
    }
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1)) : 0.0;
    const double w = strata.weight[j] * p_jump;
    value += w * mean;
    variance += w * w * var / n;
  }
  return {value, std::sqrt(variance)};
}

std::vector<MonteCarloValue> max_increment_profile(const ScenarioParams& params, double q,
                                                   std::span<const double> windows,
                                                   int replicates, std::uint64_t seed) {
  if (windows.empty()) return {};
  for (std::size_t i = 1; i < windows.size(); ++i) {
    if (!(windows[i] <= windows[i - 1])) {
      throw DomainError("max_increment_profile: windows must be decreasing");
    }
  }
  const double c = log_centering(params);
  const double s = params.value_scale();
  const StationaryLaw law(params);
  std::vector<double> sum(windows.size(), 0.0), sum2(windows.size(), 0.0);
  for (int r = 0; r < replicates; ++r) {
    Rng rng = Rng::substream(seed, StreamPurpose::kIncrementMoment, static_cast<std::uint64_t>(r), 1);
    const Trajectory path = simulate_path_from(params, law.sample(rng), windows.front(), rng);
    const double g0 = std::exp(q * (s * path.initial_state - c));
    for (std::size_t w = 0; w < windows.size(); ++w) {
      double sup = 0.0;
      for (std::size_t k = 0; k < path.jump_times.size() && path.jump_times[k] <= windows[w]; ++k) {
        sup = std::max(sup, std::abs(std::exp(q * (s * path.post_jump_states[k] - c)) - g0));
      }
      sum[w] += sup;
      sum2[w] += sup * sup;
    }
  }
  std::vector<MonteCarloValue> out(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const double mean = sum[w] / replicates;
    const double var = replicates > 1 ? std::max(0.0, (sum2[w] - replicates * mean * mean) / (replicates - 1)) : 0.0;
    out[w] = {mean, std::sqrt(var / replicates)};
  }
  return out;
}

IncrementSeries increment_moment_series(const ScenarioParams& params, double q, double b,
                                        int n_max, int replicates, std::uint64_t seed) {
  if (!(b > 1.0)) throw DomainError("increment_moment_series: b must exceed 1");
  IncrementSeries out;
  double partial = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    const MonteCarloValue est =
        max_increment_moment(params, q, std::pow(b, -n), replicates, seed + static_cast<std::uint64_t>(n));
    out.estimates.push_back(est.value);
    out.stderrs.push_back(est.stderr_);
    partial += est.value;
    out.partial_sums.push_back(partial);
    if (n > 0) out.ratios.push_back(est.value / out.estimates[n - 1]);
  }
  return out;
}

}  // namespace mfbd
