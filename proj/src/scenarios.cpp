#include "mfbd/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mfbd/birth_death.hpp"
#include "mfbd/error.hpp"
#include "mfbd/numerics.hpp"

namespace mfbd {

namespace {

void require_in_domain(const ScenarioParams& params, double zeta) {
  const double bound = mgf_abscissa(params);
  if (!(zeta < bound)) {
    std::ostringstream os;
    os.precision(17);
    os << params.name() << " MGF diverges at zeta = " << zeta
       << "; requires zeta < log(mu/lambda)/(mu-lambda) = " << bound;
    throw DomainError(os.str());
  }
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

double c_x(const ScenarioParams& params) {
  require_in_domain(params, 1.0);
  return std::log(mgf_x_pmf_sum(params, 1.0));
}

MotherSpec make_mother_spec(const ScenarioParams& params, double b) {
  if (!(b > 1.0)) throw DomainError("scale base b must exceed 1");
  return MotherSpec{params, c_x(params), b};
}

double mgf_abscissa(const ScenarioParams& params) {
  if (const auto* l = std::get_if<PascalLaw>(&params.law())) {
    return std::log(l->mu / l->lambda) / (l->mu - l->lambda);
  }
  return std::numeric_limits<double>::infinity();
}

double log_mgf_x(const ScenarioParams& params, double zeta) {
  require_in_domain(params, zeta);
  return std::visit(
      Overloaded{
          [&](const PoissonLaw& l) { return l.lambda / l.mu * std::expm1(zeta); },
          [&](const PascalLaw& l) {
            const double c = l.lambda / l.mu;
            return l.beta * (std::log1p(-c) - std::log1p(-c * std::exp(zeta * (l.mu - l.lambda))));
          },
          [&](const BinomialLaw& l) { return l.n * std::log1p(l.p * std::expm1(zeta)); },
          [&](const HypergeometricLaw& l) {
            std::vector<double> terms(l.n + 1);
            for (int j = 0; j <= l.n; ++j) terms[j] = log_stationary_pmf(params, j) + zeta * j;
            return log_sum_exp(terms);
          },
      },
      params.law());
}

double mgf_x(const ScenarioParams& params, double zeta) { return std::exp(log_mgf_x(params, zeta)); }

double hypergeometric_2f1_terminating(int n, double b, double c, double z) {
  // (-n)_k vanishes for k > n.
  double term = 1.0;
  double sum = 1.0;
  for (int k = 0; k < n; ++k) {
    term *= (-n + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
    sum += term;
  }
  return sum;
}

double mgf_x_hypergeometric_series(const HypergeometricLaw& l, double zeta) {
  const double lead = std::exp(numerics::log_choose(l.h, l.n) - numerics::log_choose(l.g + l.h, l.n));
  return lead * hypergeometric_2f1_terminating(l.n, -l.g, l.h - l.n + 1.0, std::exp(zeta));
}

double log_mgf_lambda(const ScenarioParams& params, double q) {
  return log_mgf_x(params, q) - q * c_x(params);
}

double mgf_lambda(const ScenarioParams& params, double q) { return std::exp(log_mgf_lambda(params, q)); }

double k_of_q(const MotherSpec& spec, double q) {
  return q - (log_mgf_x(spec.params, q) - q * spec.c_x) / std::log(spec.b);
}

double t_of_q(const MotherSpec& spec, double q) { return k_of_q(spec, q) - 1.0; }

double c_x_closed_form(const ScenarioParams& params) {
  const double e = std::numbers::e;
  return std::visit(
      Overloaded{
          [&](const PoissonLaw& l) { return l.lambda / l.mu * (e - 1.0); },
          [&](const PascalLaw& l) {
            const double c = l.lambda / l.mu;
            const double denom = 1.0 - c * std::exp(l.mu - l.lambda);
            if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
            return l.beta * std::log((1.0 - c) / denom);
          },
          [&](const BinomialLaw& l) { return l.n * std::log(l.p * (e - 1.0) + 1.0); },
          [&](const HypergeometricLaw& l) {
            const double log_lead = numerics::log_choose(l.h, l.n) - numerics::log_choose(l.g + l.h, l.n);
            return log_lead + std::log(hypergeometric_2f1_terminating(l.n, -l.g, l.h - l.n + 1.0, e));
          },
      },
      params.law());
}

double k_of_q_closed_form(const MotherSpec& spec, double q) {
  const double lb = std::log(spec.b);
  const double cx = c_x_closed_form(spec.params);
  // K(q) = q (1 + c_x / log b) - log E exp(q X) / log b.
  const double log_mgf = std::visit(
      Overloaded{
          [&](const PoissonLaw& l) { return l.lambda / l.mu * std::expm1(q); },
          [&](const PascalLaw& l) {
            const double c = l.lambda / l.mu;
            return l.beta * std::log((1.0 - c) / (1.0 - c * std::exp(q * (l.mu - l.lambda))));
          },
          [&](const BinomialLaw& l) { return l.n * std::log1p(l.p * std::expm1(q)); },
          [&](const HypergeometricLaw& l) {
            const double log_lead = numerics::log_choose(l.h, l.n) - numerics::log_choose(l.g + l.h, l.n);
            return log_lead + std::log(hypergeometric_2f1_terminating(l.n, -l.g, l.h - l.n + 1.0, std::exp(q)));
          },
      },
      spec.params.law());
  return q * (1.0 + cx / lb) - log_mgf / lb;
}

double b_min(const ScenarioParams& params) {
  if (!(2.0 < mgf_abscissa(params))) {
    std::ostringstream os;
    os.precision(17);
    os << "L2 threshold undefined: E Lambda^2 is infinite since 2 >= log(mu/lambda)/(mu-lambda) = "
       << mgf_abscissa(params);
    throw DomainError(os.str());
  }
  return mgf_lambda(params, 2.0);
}

Interval q_admissible(const ScenarioParams& params) {
  if (const auto* l = std::get_if<PascalLaw>(&params.law())) {
    const double r = std::log(l->mu / l->lambda);
    return {0.0, std::min(r, r / (l->mu - l->lambda))};
  }
  return {0.0, std::numeric_limits<double>::infinity()};
}

double mean_x(const ScenarioParams& params) {
  return std::visit(Overloaded{
                        [](const PoissonLaw& l) { return l.lambda / l.mu; },
                        [](const PascalLaw& l) {
                          const double c = l.lambda / l.mu;
                          return (l.mu - l.lambda) * l.beta * c / (1.0 - c);
                        },
                        [](const BinomialLaw& l) { return l.n * l.p; },
                        [](const HypergeometricLaw& l) {
                          return static_cast<double>(l.n) * l.g / (l.g + l.h);
                        },
                    },
                    params.law());
}

double variance_x(const ScenarioParams& params) {
  return std::visit(Overloaded{
                        [](const PoissonLaw& l) { return l.lambda / l.mu; },
                        [](const PascalLaw& l) {
                          const double c = l.lambda / l.mu;
                          const double s = l.mu - l.lambda;
                          return s * s * l.beta * c / ((1.0 - c) * (1.0 - c));
                        },
                        [](const BinomialLaw& l) { return l.n * l.p * (1.0 - l.p); },
                        [](const HypergeometricLaw& l) {
                          const double total = l.g + l.h;
                          const double frac = l.g / total;
                          return l.n * frac * (1.0 - frac) * (total - l.n) / (total - 1.0);
                        },
                    },
                    params.law());
}

double relaxation_rate(const ScenarioParams& params) {
  return std::visit(Overloaded{
                        [](const PoissonLaw& l) { return l.mu; },
                        [](const PascalLaw& l) { return l.mu - l.lambda; },
                        [](const BinomialLaw&) { return 1.0; },
                        [](const HypergeometricLaw& l) { return static_cast<double>(l.g + l.h); },
                    },
                    params.law());
}

RenyiCurve make_renyi_curve(const MotherSpec& spec, std::vector<double> q_grid) {
  RenyiCurve curve;
  curve.q_grid = std::move(q_grid);
  for (double q : curve.q_grid) {
    const double k = k_of_q(spec, q);
    curve.k_values.push_back(k);
    curve.t_values.push_back(k - 1.0);
  }
  curve.t_exact = [spec](double q) { return t_of_q(spec, q); };
  return curve;
}

RenyiCurve make_sampled_curve(std::vector<double> q_grid, std::vector<double> t_values) {
  if (q_grid.size() != t_values.size()) throw DomainError("sampled curve: size mismatch");
  RenyiCurve curve;
  curve.q_grid = std::move(q_grid);
  curve.t_values = std::move(t_values);
  for (double t : curve.t_values) curve.k_values.push_back(t + 1.0);
  return curve;
}

std::vector<LegendrePoint> legendre_transform(const RenyiCurve& curve,
                                              std::span<const double> alpha_grid) {
  const auto& q = curve.q_grid;
  if (q.empty()) throw DomainError("legendre_transform: empty q grid");
  std::vector<LegendrePoint> out;
  out.reserve(alpha_grid.size());
  for (double alpha : alpha_grid) {
    std::size_t best = 0;
    double best_value = q[0] * alpha - curve.t_values[0];
    for (std::size_t i = 1; i < q.size(); ++i) {
      const double v = q[i] * alpha - curve.t_values[i];
      if (v < best_value) {
        best_value = v;
        best = i;
      }
    }
    // Flat minima (affine T at its slope) reach interior points: bounded.
    const double tie = 1e-12 * (1.0 + std::abs(best_value));
    for (std::size_t i = 1; i + 1 < q.size() && (best == 0 || best + 1 == q.size()); ++i) {
      if (q[i] * alpha - curve.t_values[i] <= best_value + tie) best = i;
    }
    LegendrePoint p{alpha, best_value, q[best], best == 0 || best + 1 == q.size()};
    if (!p.unbounded && curve.t_exact) {
      const auto& t = curve.t_exact;
      const auto r = numerics::golden_section_min([&](double x) { return x * alpha - t(x); }, q[best - 1],
                                                  q[best + 1], 1e-12);
      if (r.value < p.value) {
        p.value = r.value;
        p.q_star = r.x;
      }
    }
    out.push_back(p);
  }
  return out;
}

double var_lower_bound(const ScenarioParams& params, double t) {
  if (!(t >= 0.0)) throw DomainError("var_lower_bound: t must be nonnegative");
  if (t == 0.0) return 0.0;
  const double vx = variance_x(params);
  const double theta = relaxation_rate(params);
  return 2.0 * numerics::adaptive_simpson(
                   [&](double s) { return (t - s) * std::expm1(vx * std::exp(-theta * s)); }, 0.0, t, 1e-8);
}

double she_leveque_zeta(double q) { return q / 9.0 + 2.0 * (1.0 - std::pow(2.0 / 3.0, q / 3.0)); }

double kolmogorov_zeta(double q, const std::function<double(double)>& tau) { return q / 3.0 + tau(q / 3.0); }

}  // namespace mfbd
