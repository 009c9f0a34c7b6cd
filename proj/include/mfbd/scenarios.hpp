#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mfbd/params.hpp"

namespace mfbd {

/// Mother process Lambda(t) = exp{X(t) - c_x}, rescaled by powers of b.
struct MotherSpec {
  ScenarioParams params;
  double c_x;
  double b;
};

/// c_x = log E e^{X}, computed from the pmf so that E Lambda = 1.
double c_x(const ScenarioParams& params);
MotherSpec make_mother_spec(const ScenarioParams& params, double b);

/// Supremum of the MGF domain of X (infinite except for Pascal, where it is
/// log(mu/lambda)/(mu - lambda)).
double mgf_abscissa(const ScenarioParams& params);

double log_mgf_x(const ScenarioParams& params, double zeta);
/// Closed-form E e^{zeta X}; X carries the Pascal lattice spacing.
double mgf_x(const ScenarioParams& params, double zeta);

/// Terminating 2F1(-n, b; c; z), summed from its defining power series.
double hypergeometric_2f1_terminating(int n, double b, double c, double z);
/// Hypergeometric MGF through C(h,N)/C(g+h,N) 2F1(-N, -g; h - N + 1; e^zeta).
double mgf_x_hypergeometric_series(const HypergeometricLaw& law, double zeta);

double log_mgf_lambda(const ScenarioParams& params, double q);
/// E Lambda^q = e^{-q c_x} M(q).
double mgf_lambda(const ScenarioParams& params, double q);

/// K(q) = q - log_b E Lambda^q.
double k_of_q(const MotherSpec& spec, double q);
/// T(q) = K(q) - 1.
double t_of_q(const MotherSpec& spec, double q);

/// Per-scenario closed forms of the centering constant and K(q), written out
/// directly instead of summing the pmf. Cross-checks only.
double c_x_closed_form(const ScenarioParams& params);
double k_of_q_closed_form(const MotherSpec& spec, double q);

/// L2 threshold M_Lambda(2) = 1 + Var Lambda.
double b_min(const ScenarioParams& params);

struct Interval {
  double lo;
  double hi;
  bool contains(double x) const { return x > lo && x < hi; }
};
/// Open q range on which the moment scaling holds.
Interval q_admissible(const ScenarioParams& params);

double mean_x(const ScenarioParams& params);
double variance_x(const ScenarioParams& params);
/// Decay rate of the first spectral term (theta_1).
double relaxation_rate(const ScenarioParams& params);

struct LegendrePoint {
  double alpha;
  double value;
  double q_star;
  /// Minimum sits on the end of the q grid: the true infimum may be lower.
  bool unbounded;
};

struct RenyiCurve {
  std::vector<double> q_grid;
  std::vector<double> t_values;
  std::vector<double> k_values;
  std::vector<LegendrePoint> legendre;
  /// Exact T for golden-section refinement; empty for sampled curves.
  std::function<double(double)> t_exact;
};

RenyiCurve make_renyi_curve(const MotherSpec& spec, std::vector<double> q_grid);
RenyiCurve make_sampled_curve(std::vector<double> q_grid, std::vector<double> t_values);

/// T*(alpha) = min_q (q alpha - T(q)) over the curve's q grid, refined by
/// golden section around the grid minimiser when t_exact is available.
std::vector<LegendrePoint> legendre_transform(const RenyiCurve& curve,
                                              std::span<const double> alpha_grid);

/// 2 int_0^t (t - s)(exp{Var X e^{-theta_1 s}} - 1) ds.
double var_lower_bound(const ScenarioParams& params, double t);

double she_leveque_zeta(double q);
double kolmogorov_zeta(double q, const std::function<double(double)>& tau);

}  // namespace mfbd
