#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mfbd/params.hpp"
#include "mfbd/scenarios.hpp"

namespace mfbd {

enum class Family { kCharlier, kMeixner, kKrawtchouk, kHahn };

/// x P_n(x) = a P_{n+1}(x) + b P_n(x) + c P_{n-1}(x).
struct RecurrenceCoefficients {
  double a;
  double b;
  double c;
};

/// Discrete orthogonal polynomials in the index state j, orthogonal under the
/// scenario's stationary law and normalised by P_n(0) = 1:
/// Charlier (Poisson), Meixner (Pascal), Krawtchouk (binomial) and Hahn with
/// parameters alpha = -g-1, beta = -h-1 (hypergeometric).
///
/// Degree n is an eigenfunction of the chain's generator with rate theta_n:
/// n mu, n (mu - lambda), n and n (g + h + 1 - n) respectively.
class PolynomialFamily {
 public:
  explicit PolynomialFamily(const ScenarioParams& params);

  Family family() const { return family_; }
  const ScenarioParams& params() const { return params_; }
  /// N for Krawtchouk and Hahn; nullopt for the infinite families.
  std::optional<int> max_degree() const;

  RecurrenceCoefficients recurrence(int n) const;
  /// Closed-form squared norm d_n^2 = sum_j P_n(j)^2 p_j.
  double norm_constant(int n) const;
  double eigenrate(int n) const;

  double eval(int n, double x) const;
  /// P_0(x), ..., P_n(x).
  std::vector<double> eval_upto(int n, double x) const;
  /// P_k(x) / d_k for k = 0..n, via the rescaled recurrence.
  std::vector<double> eval_orthonormal_upto(int n, double x) const;

 private:
  void require_degree(int n) const;

  ScenarioParams params_;
  Family family_;
};

double eval_poly(const PolynomialFamily& family, int n, double x);
double norm_constant(const PolynomialFamily& family, int n);

struct ResidualReport {
  double residual;
  int truncation_index;
};

/// |sum_j P_n(j) P_m(j) p_j - delta_nm d_n^2|.
ResidualReport orthogonality_residual(const PolynomialFamily& family, int n, int m);

/// Relative residual of the three-term recurrence at (n, x).
double recurrence_residual(const PolynomialFamily& family, int n, double x);

/// Expansion of G(j) = exp(value(j) - c_x) in the family.
///
/// Stored convention: coeffs[k] = <G, P_k> / d_k, so that
///   G = sum_k coeffs[k] P_k / d_k,   sum_k coeffs[k]^2 = sum_j G(j)^2 p_j,
/// and the stationary covariance of Lambda is sum_{k>=1} coeffs[k]^2 e^{-theta_k tau}.
struct Expansion {
  std::vector<double> coeffs;
  /// sum_j G(j)^2 p_j = E Lambda^2.
  double second_moment = 0.0;
  int truncation_index = 0;

  double parseval_partial(int k) const;
  double variance() const { return second_moment - 1.0; }
};

/// Degrees whose coefficient is numerically unresolved are dropped, so
/// coeffs may hold fewer than max_degree + 1 entries.
Expansion expansion_coeffs(const PolynomialFamily& family, const MotherSpec& spec, int max_degree);

/// sum_{k <= K} coeffs[k] P_k(x) / d_k.
double reconstruct(const Expansion& expansion, const PolynomialFamily& family, double x);

struct CovarianceValue {
  double value;
  /// Bound on the omitted degrees, from the unexplained Parseval mass.
  double tail_bound;
  int degrees;
};

CovarianceValue covariance_series(const PolynomialFamily& family, const Expansion& expansion, double tau);
CovarianceValue covariance_series(const PolynomialFamily& family, const MotherSpec& spec, double tau,
                                  int max_degree);

/// 2 int_0^t (t - s) R_Lambda(s) ds = Var int_0^t Lambda(s) ds, term by term.
double integrated_covariance(const PolynomialFamily& family, const Expansion& expansion, double t);

struct EnvelopeRow {
  double tau;
  double rho;
  double lower;
  double upper;
  bool holds;
};

struct EnvelopeReport {
  /// Exponential rate of the envelope (theta_1).
  double delta;
  /// a_1^2 / Var Lambda, the constant of the lower envelope.
  double constant;
  std::vector<EnvelopeRow> rows;
  bool all_hold;
};

/// Checks constant e^{-delta tau} <= rho(tau) <= e^{-delta tau} on the grid.
EnvelopeReport correlation_envelope_check(const PolynomialFamily& family, const MotherSpec& spec,
                                          std::span<const double> tau_grid);

/// Smallest degree whose unexplained Parseval mass falls below rel_tol * Var
/// Lambda, capped at 40 (or N for finite families).
int certified_degree(const PolynomialFamily& family, const MotherSpec& spec, double rel_tol = 1e-12);

}  // namespace mfbd
