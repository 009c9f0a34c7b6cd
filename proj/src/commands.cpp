#include "mfbd/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "mfbd/birth_death.hpp"
#include "mfbd/cascade.hpp"
#include "mfbd/error.hpp"
#include "mfbd/orthopoly.hpp"
#include "mfbd/scenarios.hpp"

#ifndef MFBD_VERSION
#define MFBD_VERSION "0.0.0"
#endif
#ifndef MFBD_GIT_HASH
#define MFBD_GIT_HASH "unknown"
#endif

namespace mfbd {

namespace {

using OrderedJson = nlohmann::ordered_json;

class CsvWriter {
 public:
  CsvWriter(const ExperimentConfig& config, const std::vector<std::string>& columns) {
    out_ << "# " << config_to_json(config) << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  CsvWriter& cell(double x) { return raw(format_number(x)); }
  CsvWriter& cell(int x) { return raw(std::to_string(x)); }
  CsvWriter& raw(const std::string& s) {
    out_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  bool first_ = true;
};

OrderedJson metadata(const ExperimentConfig& config, double runtime_seconds) {
  OrderedJson j;
  j["config"] = OrderedJson::parse(config_to_json(config));
  j["seed"] = config.seed;
  j["version"] = MFBD_VERSION;
  j["git"] = MFBD_GIT_HASH;
  j["workers"] = config.workers;
  j["runtime_seconds"] = runtime_seconds;
  return j;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ValidationCheck tolerance_check(std::string name, double residual, double tol, std::string note = {}) {
  return {std::move(name), residual <= tol ? "pass" : "fail", residual, tol, std::move(note)};
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Simple deterministic point set for recurrence checks.
std::vector<double> probe_points(const ScenarioParams& params, std::uint64_t seed, int count) {
  Rng rng = Rng::substream(seed, StreamPurpose::kGeneric, 0);
  const double hi = params.max_state() ? static_cast<double>(*params.max_state()) : 20.0;
  std::vector<double> pts(count);
  for (double& x : pts) x = rng.uniform() * hi;
  return pts;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string version_string() { return std::string(MFBD_VERSION) + " (" + MFBD_GIT_HASH + ")"; }

std::vector<ValidationCheck> run_identity_checks(const ExperimentConfig& config) {
  const ScenarioParams& p = config.scenario;
  std::vector<ValidationCheck> out;
  auto domain = [&](std::string name, const std::exception& e) {
    out.push_back({std::move(name), "domain", 0.0, 0.0, e.what()});
  };

  for (double zeta : {-1.0, 0.5, 1.0, 2.0}) {
    const std::string name = "mgf_closed_form_vs_pmf_sum(zeta=" + format_number(zeta) + ")";
    if (!(zeta < mgf_abscissa(p))) {
      out.push_back({name, "domain", 0.0, 0.0, "outside the MGF domain"});
      continue;
    }
    out.push_back(tolerance_check(name, rel_diff(mgf_x(p, zeta), mgf_x_pmf_sum(p, zeta)), 1e-10));
  }
  if (const auto* h = std::get_if<HypergeometricLaw>(&p.law())) {
    out.push_back(tolerance_check("hypergeometric_mgf_vs_2f1", rel_diff(mgf_x_hypergeometric_series(*h, 0.7), mgf_x(p, 0.7)),
                                  1e-10));
  }

  std::optional<MotherSpec> spec;
  try {
    spec = make_mother_spec(p, config.b ? *config.b : 2.0);
  } catch (const DomainError& e) {
    domain("mother_process_exists", e);
  }
  if (spec) {
    out.push_back(tolerance_check("mgf_lambda(0)=1", std::abs(mgf_lambda(p, 0.0) - 1.0), 1e-12));
    out.push_back(tolerance_check("mgf_lambda(1)=1", std::abs(mgf_lambda(p, 1.0) - 1.0), 1e-12));
    out.push_back(tolerance_check("T(0)=-1", std::abs(t_of_q(*spec, 0.0) + 1.0), 1e-12));
    out.push_back(tolerance_check("T(1)=0", std::abs(t_of_q(*spec, 1.0)), 1e-12));
  }

  std::optional<double> threshold;
  try {
    threshold = b_min(p);
  } catch (const DomainError& e) {
    domain("b_min", e);
  }
  if (threshold) {
    if (const auto* l = std::get_if<PoissonLaw>(&p.law())) {
      const double e1 = std::expm1(1.0);
      out.push_back(tolerance_check("b_min_closed_form", rel_diff(*threshold, std::exp(l->lambda / l->mu * e1 * e1)), 1e-12));
    } else if (const auto* l = std::get_if<BinomialLaw>(&p.law())) {
      const double shown = std::pow(l->p * std::expm1(2.0) + 1.0, l->n) / std::pow(l->p * std::expm1(1.0) + 1.0, 2 * l->n);
      out.push_back(tolerance_check("b_min_closed_form", rel_diff(*threshold, shown), 1e-12));
    } else {
      out.push_back({"b_min", "pass", 0.0, 0.0, "b_min = " + format_number(*threshold)});
    }
    try {
      const double b = config.resolved_b();
      const bool ok = b > *threshold;
      std::string status = ok ? "pass" : (config.allow_degenerate ? "domain" : "fail");
      out.push_back({"b_exceeds_b_min", status, b - *threshold, 0.0,
                     "b = " + format_number(b) + ", b_min = " + format_number(*threshold)});
    } catch (const DomainError& e) {
      domain("b_exceeds_b_min", e);
    }
  }

  const PolynomialFamily family(p);
  const int top = family.max_degree() ? std::min(10, *family.max_degree()) : 10;
  double worst = 0.0;
  for (int n = 0; n <= top; ++n) {
    for (int m = 0; m <= n; ++m) {
      const double scale = std::sqrt(family.norm_constant(n) * family.norm_constant(m));
      worst = std::max(worst, orthogonality_residual(family, n, m).residual / scale);
    }
  }
  out.push_back(tolerance_check("orthogonality", worst, 1e-9));
  worst = 0.0;
  const int rec_top = family.max_degree() ? std::max(0, std::min(10, *family.max_degree() - 1)) : 10;
  for (double x : probe_points(p, config.seed, 100)) {
    for (int n = 0; n <= rec_top; ++n) worst = std::max(worst, recurrence_residual(family, n, x));
  }
  out.push_back(tolerance_check("recurrence", worst, 1e-10));

  if (spec && threshold) {
    const int degree = certified_degree(family, *spec);
    const Expansion e = expansion_coeffs(family, *spec, degree);
    out.push_back(tolerance_check("parseval", rel_diff(e.parseval_partial(degree), e.second_moment), 1e-10));
    out.push_back(tolerance_check("covariance_series(0)=Var", std::abs(covariance_series(family, e, 0.0).value - (*threshold - 1.0)),
                                  1e-8));
    const EnvelopeReport env = correlation_envelope_check(family, *spec, config.tau_grid);
    out.push_back({"correlation_envelope", env.all_hold ? "pass" : "fail", 0.0, 0.0,
                   "delta = " + format_number(env.delta) + ", constant = " + format_number(env.constant)});
  } else {
    out.push_back({"spectral_expansion", "domain", 0.0, 0.0, "E Lambda^2 is infinite or undefined"});
  }
  return out;
}

CommandResult cmd_validate(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<ValidationCheck> checks = run_identity_checks(config);
  CommandResult r;
  r.name = "validate";
  OrderedJson j = metadata(config, 0.0);
  OrderedJson rows = OrderedJson::array();
  std::ostringstream summary;
  bool failed = false;
  for (const auto& c : checks) {
    failed = failed || c.status == "fail";
    rows.push_back({{"check", c.name}, {"status", c.status}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"note", c.note}});
    std::string label = c.status;
    std::transform(label.begin(), label.end(), label.begin(), ::toupper);
    summary << label << ' ' << c.name << " residual=" << format_number(c.residual);
    if (!c.note.empty()) summary << " (" << c.note << ')';
    summary << '\n';
  }
  j["checks"] = rows;
  j["passed"] = !failed;
  j["runtime_seconds"] = seconds_since(start);
  r.json = j.dump(2) + "\n";
  r.summary = summary.str();
  r.exit_code = failed ? exit_code::kValidation : exit_code::kSuccess;
  return r;
}

CommandResult cmd_renyi(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const CascadeConfig cascade = config.cascade();
  const LevelRange levels = config.levels();
  const ScalingStudy study = run_scaling_study(cascade, config.q_grid, levels, {});
  const std::string used = std::to_string(levels.lo) + "-" + std::to_string(levels.hi);

  CsvWriter csv(config, {"q", "t_hat", "t_hat_stderr", "t_analytic", "levels_used"});
  std::ostringstream summary;
  for (const ScalingEstimate& e : study.renyi) {
    csv.cell(e.q).cell(e.slope).cell(e.slope_stderr).cell(e.analytic_value).raw(used);
    csv.end_row();
    summary << "q=" << format_number(e.q) << " T_hat=" << format_number(e.slope) << " +- "
            << format_number(e.slope_stderr) << " T=" << format_number(e.analytic_value) << '\n';
  }
  OrderedJson j = metadata(config, seconds_since(start));
  j["b"] = cascade.spec.b;
  j["b_min"] = b_min(config.scenario);
  j["levels_used"] = {levels.lo, levels.hi};
  j["mean_total_mass"] = study.mean_total_mass;
  j["mean_total_mass_stderr"] = study.mean_total_mass_stderr;
  j["warnings"] = cascade.warnings();
  CommandResult r{"renyi", csv.str(), j.dump(2) + "\n", summary.str(), exit_code::kSuccess};
  return r;
}

CommandResult cmd_spectrum(const ExperimentConfig& config) {
  const MotherSpec spec = make_mother_spec(config.scenario, config.resolved_b());
  const Interval admissible = q_admissible(config.scenario);
  double lo = *std::min_element(config.q_grid.begin(), config.q_grid.end());
  double hi = *std::max_element(config.q_grid.begin(), config.q_grid.end());
  if (std::isfinite(admissible.lo)) lo = std::max(lo, admissible.lo + 1e-6);
  if (std::isfinite(admissible.hi)) hi = std::min(hi, admissible.hi - 1e-6);
  if (!(hi > lo)) throw DomainError("spectrum: q grid has no admissible interior");

  constexpr int kDense = 401;
  std::vector<double> dense(kDense);
  for (int i = 0; i < kDense; ++i) dense[i] = lo + (hi - lo) * i / (kDense - 1);
  const RenyiCurve curve = make_renyi_curve(spec, dense);
  auto slope = [&](double q) {
    const double h = 1e-5;
    return (t_of_q(spec, q + h) - t_of_q(spec, q - h)) / (2.0 * h);
  };
  const double a_hi = slope(lo + 1e-4);
  const double a_lo = slope(hi - 1e-4);
  constexpr int kAlphas = 41;
  std::vector<double> alphas;
  for (int i = 1; i <= kAlphas; ++i) alphas.push_back(a_lo + (a_hi - a_lo) * i / (kAlphas + 1));
  std::sort(alphas.begin(), alphas.end());

  CsvWriter csv(config, {"alpha", "t_star", "q_star", "unbounded", "row"});
  for (const LegendrePoint& pt : legendre_transform(curve, alphas)) {
    csv.cell(pt.alpha).cell(pt.value).cell(pt.q_star).cell(pt.unbounded ? 1 : 0).raw("grid");
    csv.end_row();
  }
  std::ostringstream summary;
  if (lo < 1.0 && hi > 1.0) {
    // T*(T'(1)) = T'(1) - T(1) = T'(1).
    const double alpha1 = slope(1.0);
    const double a1[] = {alpha1};
    const LegendrePoint pt = legendre_transform(curve, a1).front();
    csv.cell(pt.alpha).cell(pt.value).cell(pt.q_star).cell(pt.unbounded ? 1 : 0).raw("consistency");
    csv.end_row();
    summary << "T*(T'(1)) = " << format_number(pt.value) << ", T'(1) = " << format_number(alpha1) << '\n';
  }
  OrderedJson j = metadata(config, 0.0);
  j.erase("runtime_seconds");
  return {"spectrum", csv.str(), j.dump(2) + "\n", summary.str(), exit_code::kSuccess};
}

CommandResult cmd_covariance(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const MotherSpec spec = make_mother_spec(config.scenario, config.b ? *config.b : 2.0);
  const PolynomialFamily family(config.scenario);
  const Expansion e = expansion_coeffs(family, spec, certified_degree(family, spec));
  const double var = e.variance();
  const EnvelopeReport env = correlation_envelope_check(family, spec, config.tau_grid);
  const auto empirical = empirical_mother_covariance(spec, config.tau_grid, config.covariance_samples, config.seed);

  CsvWriter csv(config, {"tau", "empirical_cov", "stderr", "series", "lower_envelope", "upper_envelope"});
  std::ostringstream summary;
  for (std::size_t i = 0; i < config.tau_grid.size(); ++i) {
    const double tau = config.tau_grid[i];
    const double series = covariance_series(family, e, tau).value;
    csv.cell(tau).cell(empirical[i].value).cell(empirical[i].stderr_).cell(series).cell(var * env.rows[i].lower).cell(var * env.rows[i].upper);
    csv.end_row();
    summary << "tau=" << format_number(tau) << " empirical=" << format_number(empirical[i].value) << " +- "
            << format_number(empirical[i].stderr_) << " series=" << format_number(series) << '\n';
  }
  OrderedJson j = metadata(config, seconds_since(start));
  j["relaxation_rate"] = env.delta;
  j["envelope_constant"] = env.constant;
  j["envelope_holds"] = env.all_hold;
  return {"covariance", csv.str(), j.dump(2) + "\n", summary.str(), exit_code::kSuccess};
}

CommandResult cmd_reference_curves(const ExperimentConfig& config) {
  std::optional<MotherSpec> spec;
  try {
    spec = make_mother_spec(config.scenario, config.resolved_b());
  } catch (const DomainError&) {
  }
  CsvWriter csv(config, {"q", "zeta_she_leveque", "zeta_kolmogorov"});
  for (double q : config.q_grid) {
    double kolmogorov = std::nan("");
    if (spec) {
      try {
        kolmogorov = kolmogorov_zeta(q, [&](double x) { return t_of_q(*spec, x); });
      } catch (const DomainError&) {
      }
    }
    csv.cell(q).cell(she_leveque_zeta(q)).cell(kolmogorov);
    csv.end_row();
  }
  OrderedJson j = metadata(config, 0.0);
  j.erase("runtime_seconds");
  return {"reference_curves", csv.str(), j.dump(2) + "\n", "", exit_code::kSuccess};
}

CommandResult cmd_poly_table(const ExperimentConfig& config) {
  const PolynomialFamily family(config.scenario);
  const int top = family.max_degree() ? std::min(10, *family.max_degree()) : 10;
  const int x_top = family.max_degree() ? std::min(20, *family.max_degree()) : 20;
  CsvWriter csv(config, {"degree", "x", "value", "norm_constant", "eigenrate"});
  for (int x = 0; x <= x_top; ++x) {
    const std::vector<double> values = family.eval_upto(top, x);
    for (int n = 0; n <= top; ++n) {
      csv.cell(n).cell(x).cell(values[n]).cell(family.norm_constant(n)).cell(family.eigenrate(n));
      csv.end_row();
    }
  }
  OrderedJson j = metadata(config, 0.0);
  j.erase("runtime_seconds");
  return {"poly_table", csv.str(), j.dump(2) + "\n", "", exit_code::kSuccess};
}

}  // namespace mfbd
