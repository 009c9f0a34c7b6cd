#pragma once

#include <string>
#include <vector>

#include "mfbd/config.hpp"

namespace mfbd {

/// Output of one subcommand. Files are written by the caller as
/// <name>.csv and <name>.json; every CSV starts with "# <config JSON>".
struct CommandResult {
  std::string name;
  std::string csv;
  std::string json;
  /// Human-readable lines for stdout.
  std::string summary;
  int exit_code = 0;
};

struct ValidationCheck {
  std::string name;
  /// "pass", "fail" or "domain" (an expected domain outcome, not a failure).
  std::string status;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string note;
};

/// Analytic identity suite for the configured scenario.
std::vector<ValidationCheck> run_identity_checks(const ExperimentConfig& config);

CommandResult cmd_validate(const ExperimentConfig& config);
/// Columns q, t_hat, t_hat_stderr, t_analytic, levels_used.
CommandResult cmd_renyi(const ExperimentConfig& config);
/// Columns alpha, t_star, q_star, unbounded, row.
CommandResult cmd_spectrum(const ExperimentConfig& config);
/// Columns tau, empirical_cov, stderr, series, lower_envelope, upper_envelope.
CommandResult cmd_covariance(const ExperimentConfig& config);
/// Columns q, zeta_she_leveque, zeta_kolmogorov.
CommandResult cmd_reference_curves(const ExperimentConfig& config);
/// Columns degree, x, value, norm_constant, eigenrate.
CommandResult cmd_poly_table(const ExperimentConfig& config);

/// Locale-independent shortest round-trip formatting used in every CSV.
std::string format_number(double x);

std::string version_string();

}  // namespace mfbd
