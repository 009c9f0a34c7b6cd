#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfbd/cascade.hpp"
#include "mfbd/params.hpp"

namespace mfbd {

inline constexpr int kSchemaVersion = 1;

/// Everything an experiment needs. Parsed from JSON; unknown keys are errors.
///
///   {
///     "schema_version": 1,
///     "scenario": {"name": "poisson", "lambda": 1, "mu": 1},
///     "b": 32,                       // or "b_over_b_min": 4
///     "depth": 4, "dyadic_level": 14, "replicates": 200, "seed": 12345,
///     "q_grid": [...], "tau_grid": [...], "level_range": [2, 12],
///     "covariance_samples": 20000, "allow_degenerate": false,
///     "workers": 4, "output": "out"
///   }
struct ExperimentConfig {
  ScenarioParams scenario = ScenarioParams::poisson(1.0, 1.0);
  std::optional<double> b;
  std::optional<double> b_over_b_min;
  int depth = 8;
  int dyadic_level = 14;
  int replicates = 200;
  std::uint64_t seed = 0;
  std::vector<double> q_grid{0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
  std::vector<double> tau_grid{0.0, 0.25, 1.0, 2.0};
  std::optional<LevelRange> level_range;
  int covariance_samples = 20000;
  bool allow_degenerate = false;
  /// Not part of the reproducibility key.
  int workers = 1;
  std::string output = ".";

  /// Resolved scale base; throws DomainError when b_over_b_min is used and
  /// the threshold is undefined.
  double resolved_b() const;
  CascadeConfig cascade() const;
  LevelRange levels() const;
};

/// Parses a JSON document. A leading "# " comment line (as written at the top
/// of every CSV output) is accepted, so an output file can be fed back in.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON of the reproducibility key: everything except workers and
/// output. Key order is fixed.
std::string config_to_json(const ExperimentConfig& config);

int default_workers();

}  // namespace mfbd
