#include "mfbd/orthopoly.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfbd/birth_death.hpp"
#include "mfbd/error.hpp"
#include "mfbd/numerics.hpp"

namespace mfbd {

namespace {

constexpr int kMaxInfiniteDegree = 40;

Family family_of(const ScenarioParams& params) {
  switch (params.kind()) {
    case ScenarioKind::kPoisson: return Family::kCharlier;
    case ScenarioKind::kPascal: return Family::kMeixner;
    case ScenarioKind::kBinomial: return Family::kKrawtchouk;
    case ScenarioKind::kHypergeometric: return Family::kHahn;
  }
  return Family::kCharlier;
}

/// Walks j = 0, 1, ... accumulating through visit(j, p_j) until the weight
/// tail with the given tilt is below 1e-15 of the tilted mass and visit has
/// reported a negligible increment three times in a row.
template <class Visit>
int walk_support(const ScenarioParams& params, double tilt, Visit&& visit) {
  if (const auto top = params.max_state()) {
    for (int j = 0; j <= *top; ++j) visit(j, stationary_pmf(params, j));
    return *top;
  }
  double tilted_mass = 0.0;
  int quiet = 0;
  for (int j = 0; j < (1 << 20); ++j) {
    const double lp = log_stationary_pmf(params, j);
    const bool negligible = visit(j, std::exp(lp));
    quiet = negligible ? quiet + 1 : 0;
    const double tilted = std::exp(lp + tilt * j);
    tilted_mass += tilted;
    const double rho = tail_ratio_bound(params, j, tilt);
    if (quiet >= 3 && rho < 1.0 && tilted * rho / (1.0 - rho) <= 1e-15 * tilted_mass) return j;
  }
  throw DomainError("orthopoly: weighted sum failed to converge");
}

}  // namespace

PolynomialFamily::PolynomialFamily(const ScenarioParams& params)
    : params_(params), family_(family_of(params)) {}

std::optional<int> PolynomialFamily::max_degree() const { return params_.max_state(); }

void PolynomialFamily::require_degree(int n) const {
  const auto top = max_degree();
  if (n < 0 || (top && n > *top)) {
    std::ostringstream os;
    os << "degree " << n << " outside the family of " << params_.describe();
    throw DomainError(os.str());
  }
}

RecurrenceCoefficients PolynomialFamily::recurrence(int n) const {
  return std::visit(
      Overloaded{
          [n](const PoissonLaw& l) {
            const double a = l.lambda / l.mu;
            return RecurrenceCoefficients{-a, n + a, -static_cast<double>(n)};
          },
          [n](const PascalLaw& l) {
            const double c = l.lambda / l.mu;
            const double d = c - 1.0;
            return RecurrenceCoefficients{c * (n + l.beta) / d, -(n + c * (n + l.beta)) / d, n / d};
          },
          [n](const BinomialLaw& l) {
            const double up = l.p * (l.n - n);
            const double down = n * (1.0 - l.p);
            return RecurrenceCoefficients{-up, up + down, -down};
          },
          [n](const HypergeometricLaw& l) {
            // Standard Hahn coefficients at alpha = -g-1, beta = -h-1.
            const double alpha = -l.g - 1.0;
            const double beta = -l.h - 1.0;
            const double s = alpha + beta;
            const double big_n = l.n;
            double an = 0.0;
            if (n < l.n) {
              an = (n + s + 1.0) * (n + alpha + 1.0) * (big_n - n) / ((2.0 * n + s + 1.0) * (2.0 * n + s + 2.0));
            }
            const double cn = n == 0 ? 0.0
                                     : n * (n + s + big_n + 1.0) * (n + beta) /
                                           ((2.0 * n + s) * (2.0 * n + s + 1.0));
            return RecurrenceCoefficients{-an, an + cn, -cn};
          },
      },
      params_.law());
}

double PolynomialFamily::norm_constant(int n) const {
  require_degree(n);
  return std::visit(
      Overloaded{
          [n](const PoissonLaw& l) {
            return std::exp(std::lgamma(n + 1.0) - n * std::log(l.lambda / l.mu));
          },
          [n](const PascalLaw& l) {
            const double c = l.lambda / l.mu;
            return std::exp(std::lgamma(n + 1.0) - n * std::log(c) - std::lgamma(l.beta + n) + std::lgamma(l.beta));
          },
          [n](const BinomialLaw& l) {
            return std::exp(n * std::log((1.0 - l.p) / l.p) - numerics::log_choose(l.n, n));
          },
          [n](const HypergeometricLaw& l) {
            const long double alpha = -l.g - 1.0L;
            const long double beta = -l.h - 1.0L;
            const int big_n = l.n;
            auto poch = [](long double x, int k) {
              long double r = 1.0L;
              for (int i = 0; i < k; ++i) r *= x + i;
              return r;
            };
            long double fact_n = 1.0L, fact_big = 1.0L;
            for (int i = 2; i <= n; ++i) fact_n *= i;
            for (int i = 2; i <= big_n; ++i) fact_big *= i;
            const long double sign = (n % 2 == 0) ? 1.0L : -1.0L;
            const long double num = sign * poch(n + alpha + beta + 1.0L, big_n + 1) * poch(beta + 1.0L, n) * fact_n;
            const long double den =
                (2.0L * n + alpha + beta + 1.0L) * poch(alpha + 1.0L, n) * poch(-static_cast<long double>(big_n), n) * fact_big;
            const long double total = poch(alpha + beta + 2.0L, big_n) / fact_big;
            return static_cast<double>(num / den / total);
          },
      },
      params_.law());
}

double PolynomialFamily::eigenrate(int n) const {
  require_degree(n);
  return std::visit(Overloaded{
                        [n](const PoissonLaw& l) { return n * l.mu; },
                        [n](const PascalLaw& l) { return n * (l.mu - l.lambda); },
                        [n](const BinomialLaw&) { return static_cast<double>(n); },
                        [n](const HypergeometricLaw& l) { return static_cast<double>(n) * (l.g + l.h + 1 - n); },
                    },
                    params_.law());
}

std::vector<double> PolynomialFamily::eval_upto(int n, double x) const {
  require_degree(n);
  std::vector<double> p(n + 1);
  p[0] = 1.0;
  double prev = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto r = recurrence(k);
    p[k + 1] = ((x - r.b) * p[k] - r.c * prev) / r.a;
    prev = p[k];
  }
  return p;
}

std::vector<double> PolynomialFamily::eval_orthonormal_upto(int n, double x) const {
  require_degree(n);
  // d_{k+1}^2 / d_k^2 = c_{k+1} / a_k for any three-term family.
  std::vector<double> p(n + 1);
  p[0] = 1.0;
  double prev = 0.0;
  double ratio_prev = 0.0;  // d_{k-1} / d_k
  for (int k = 0; k < n; ++k) {
    const auto r = recurrence(k);
    const auto next = recurrence(k + 1);
    const double up = std::sqrt(next.c / r.a);  // d_{k+1} / d_k
    p[k + 1] = ((x - r.b) * p[k] - r.c * ratio_prev * prev) / (r.a * up);
    prev = p[k];
    ratio_prev = 1.0 / up;
  }
  return p;
}

double PolynomialFamily::eval(int n, double x) const { return eval_upto(n, x).back(); }

double eval_poly(const PolynomialFamily& family, int n, double x) { return family.eval(n, x); }

double norm_constant(const PolynomialFamily& family, int n) { return family.norm_constant(n); }

ResidualReport orthogonality_residual(const PolynomialFamily& family, int n, int m) {
  const int top = std::max(n, m);
  const double scale = std::max(1.0, std::sqrt(family.norm_constant(n) * family.norm_constant(m)));
  double sum = 0.0;
  const int last = walk_support(family.params(), 0.0, [&](int j, double w) {
    const auto p = family.eval_upto(top, j);
    const double inc = p[n] * p[m] * w;
    sum += inc;
    return std::abs(inc) < 1e-13 * scale;
  });
  const double target = n == m ? family.norm_constant(n) : 0.0;
  return {std::abs(sum - target), last};
}

double recurrence_residual(const PolynomialFamily& family, int n, double x) {
  const auto p = family.eval_upto(n + 1, x);
  const auto r = family.recurrence(n);
  const double lower = n > 0 ? p[n - 1] : 0.0;
  const double lhs = x * p[n];
  const double rhs = r.a * p[n + 1] + r.b * p[n] + r.c * lower;
  const double scale = std::abs(lhs) + std::abs(r.a * p[n + 1]) + std::abs(r.b * p[n]) + std::abs(r.c * lower);
  return scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
}

double Expansion::parseval_partial(int k) const {
  double s = 0.0;
  for (int i = 0; i <= k && i < static_cast<int>(coeffs.size()); ++i) s += coeffs[i] * coeffs[i];
  return s;
}

Expansion expansion_coeffs(const PolynomialFamily& family, const MotherSpec& spec, int max_degree) {
  if (const auto top = family.max_degree()) max_degree = std::min(max_degree, *top);
  if (max_degree < 0) throw DomainError("expansion_coeffs: negative degree");
  const ScenarioParams& params = family.params();
  const double s = params.value_scale();
  if (!(2.0 < mgf_abscissa(params))) {
    throw DomainError("expansion_coeffs: G is not square integrable (E Lambda^2 infinite)");
  }
  Expansion out;
  out.coeffs.assign(max_degree + 1, 0.0);
  const double scale = std::sqrt(mgf_lambda(params, 2.0));
  out.truncation_index = walk_support(params, 2.0 * s, [&](int j, double w) {
    const double g = std::exp(s * j - spec.c_x);
    const auto p = family.eval_orthonormal_upto(max_degree, j);
    double largest = 0.0;
    for (int k = 0; k <= max_degree; ++k) {
      const double inc = w * g * p[k];
      out.coeffs[k] += inc;
      largest = std::max(largest, std::abs(inc));
    }
    out.second_moment += w * g * g;
    return largest < 1e-13 * scale;
  });
  // High degrees lose all accuracy on infinite supports (cancellation and the
  // truncated walk). Bessel's inequality exposes that: stop at the first
  // coefficient exceeding the Parseval mass still unexplained.
  double explained = out.coeffs[0] * out.coeffs[0];
  for (int k = 1; k <= max_degree; ++k) {
    const double a2 = out.coeffs[k] * out.coeffs[k];
    if (a2 > std::max(0.0, out.second_moment - explained) + 1e-13 * out.second_moment) {
      out.coeffs.resize(k);
      break;
    }
    explained += a2;
  }
  return out;
}

double reconstruct(const Expansion& expansion, const PolynomialFamily& family, double x) {
  const int k = static_cast<int>(expansion.coeffs.size()) - 1;
  const auto p = family.eval_orthonormal_upto(k, x);
  double s = 0.0;
  for (int i = 0; i <= k; ++i) s += expansion.coeffs[i] * p[i];
  return s;
}

CovarianceValue covariance_series(const PolynomialFamily& family, const Expansion& expansion, double tau) {
  if (!(tau >= 0.0)) throw DomainError("covariance_series: tau must be nonnegative");
  const int k_max = static_cast<int>(expansion.coeffs.size()) - 1;
  double value = 0.0;
  double explained = expansion.coeffs.empty() ? 0.0 : expansion.coeffs[0] * expansion.coeffs[0];
  for (int k = 1; k <= k_max; ++k) {
    const double a2 = expansion.coeffs[k] * expansion.coeffs[k];
    value += a2 * std::exp(-family.eigenrate(k) * tau);
    explained += a2;
  }
  double tail = 0.0;
  const auto top = family.max_degree();
  if (!top || k_max < *top) {
    const double theta_next = top ? family.eigenrate(k_max + 1) : family.eigenrate(1) * (k_max + 1);
    tail = std::max(0.0, expansion.second_moment - explained) * std::exp(-theta_next * tau);
  }
  return {value, tail, k_max};
}

CovarianceValue covariance_series(const PolynomialFamily& family, const MotherSpec& spec, double tau,
                                  int max_degree) {
  return covariance_series(family, expansion_coeffs(family, spec, max_degree), tau);
}

double integrated_covariance(const PolynomialFamily& family, const Expansion& expansion, double t) {
  if (!(t >= 0.0)) throw DomainError("integrated_covariance: t must be nonnegative");
  double total = 0.0;
  for (int k = 1; k < static_cast<int>(expansion.coeffs.size()); ++k) {
    const double theta = family.eigenrate(k);
    const double x = theta * t;
    // int_0^t (t - s) e^{-theta s} ds = (x - 1 + e^{-x}) / theta^2
    const double core = x < 1e-4 ? t * t * (0.5 - x / 6.0 + x * x / 24.0) : (x - 1.0 + std::exp(-x)) / (theta * theta);
    total += expansion.coeffs[k] * expansion.coeffs[k] * core;
  }
  return 2.0 * total;
}

int certified_degree(const PolynomialFamily& family, const MotherSpec& spec, double rel_tol) {
  int cap = kMaxInfiniteDegree;
  if (const auto top = family.max_degree()) cap = *top;
  const Expansion e = expansion_coeffs(family, spec, cap);
  const double var = e.variance();
  double explained = e.coeffs[0] * e.coeffs[0];
  const int resolved = static_cast<int>(e.coeffs.size()) - 1;
  for (int k = 1; k <= resolved; ++k) {
    explained += e.coeffs[k] * e.coeffs[k];
    if (e.second_moment - explained <= rel_tol * var) return k;
  }
  return resolved;
}

EnvelopeReport correlation_envelope_check(const PolynomialFamily& family, const MotherSpec& spec,
                                          std::span<const double> tau_grid) {
  const int degree = certified_degree(family, spec);
  const Expansion e = expansion_coeffs(family, spec, degree);
  const double var = e.variance();
  EnvelopeReport report;
  report.delta = family.eigenrate(1);
  report.constant = e.coeffs.size() > 1 ? e.coeffs[1] * e.coeffs[1] / var : 0.0;
  report.all_hold = true;
  for (double tau : tau_grid) {
    const CovarianceValue cov = covariance_series(family, e, tau);
    const double rho = cov.value / var;
    const double decay = std::exp(-report.delta * tau);
    EnvelopeRow row{tau, rho, report.constant * decay, decay, false};
    const double slack = 1e-12;
    row.holds = row.lower <= rho + slack && rho + cov.tail_bound / var <= row.upper + slack;
    report.all_hold = report.all_hold && row.holds;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace mfbd
