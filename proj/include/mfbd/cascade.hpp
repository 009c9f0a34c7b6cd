#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfbd/birth_death.hpp"
#include "mfbd/rng.hpp"
#include "mfbd/scenarios.hpp"

namespace mfbd {

struct CascadeConfig {
  MotherSpec spec;
  int depth = 8;           // levels 0..depth
  int dyadic_level = 14;   // finest cells have width 2^-dyadic_level
  int replicates = 200;
  std::uint64_t seed = 0;
  bool allow_degenerate = false;
  /// Expected jump count per realization above which realize() refuses.
  double max_events = 5e8;
  int workers = 1;

  /// Throws DomainError on invalid fields and on b <= b_min without
  /// allow_degenerate.
  void validate() const;
  /// Non-fatal notes, e.g. 2^m < b^n.
  std::vector<std::string> warnings() const;
  /// E[number of jumps on [0, 1]] summed over all levels.
  double expected_events() const;
};

struct RealizeOptions {
  bool keep_timeline = false;
  /// Fixes the level-0 starting state instead of drawing it.
  std::optional<int> level0_initial_state;
  /// Times in [0, 1] at which A_n(t) is recorded exactly.
  std::vector<double> query_times;
  StreamPurpose purpose = StreamPurpose::kCascade;
};

struct CascadeRealization {
  int dyadic_level = 0;
  /// mu_n(I_k), k = 0..2^m - 1.
  std::vector<double> cell_masses;
  /// Only with keep_timeline: segment start times (first is 0) and the value
  /// of log Lambda_n on each segment.
  std::vector<double> merged_events;
  std::vector<double> log_lambda_segments;
  /// A_n(t) at RealizeOptions::query_times.
  std::vector<double> cumulative_at_queries;
  std::int64_t event_count = 0;

  double total_mass() const;
  /// Masses aggregated by pairwise summation to level m' <= m.
  std::vector<double> masses_at(int level) const;
};

/// One realization of Lambda_n on [0, 1]. Level i is an independent
/// stationary path on [0, b^i] with its jump times divided by b^i.
CascadeRealization realize(const CascadeConfig& config, std::uint64_t replicate_index,
                           const RealizeOptions& options = {});

/// log sum_k mu(I_k)^q at level m', computed in log space.
double log_partition_sum(std::span<const double> masses_at_level, double q);
/// sum_k mu(I_k^{(m')})^q; q >= 0.
double partition_sum(const CascadeRealization& realization, int level, double q);

struct ScalingEstimate {
  double q = 0.0;
  /// Levels m' (for T) or log2 resolutions (for K).
  std::vector<int> scales_used;
  /// log2 of the replicate mean at each scale.
  std::vector<double> log_statistics;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double analytic_value = 0.0;
};

struct LevelRange {
  int lo;
  int hi;
};

/// Default regression window: levels 2..m-2.
LevelRange default_level_range(const CascadeConfig& config);

struct ScalingStudy {
  std::vector<ScalingEstimate> renyi;  // T-hat per q
  std::vector<ScalingEstimate> kq;     // K-hat per q (empty if not requested)
  /// Mean and stderr of A_n(1) across replicates.
  double mean_total_mass = 0.0;
  double mean_total_mass_stderr = 0.0;
  /// Base points per resolution for the K-hat lattice.
  std::vector<int> base_points;
};

/// Runs config.replicates realizations once and derives both estimators.
/// delta_levels holds l with delta = 2^-l; empty skips K-hat.
ScalingStudy run_scaling_study(const CascadeConfig& config, std::span<const double> q_grid,
                               LevelRange levels, std::span<const int> delta_levels);

std::vector<ScalingEstimate> estimate_renyi(const CascadeConfig& config, std::span<const double> q_grid,
                                            LevelRange levels);
ScalingEstimate estimate_kq(const CascadeConfig& config, double q, std::span<const int> delta_levels);

/// Runs body(i) for i in [0, count) over the given number of threads.
void parallel_for(int count, int workers, const std::function<void(int)>& body);

struct CovarianceEstimate {
  double tau;
  double value;
  double stderr_;
};

/// Cov(Lambda(0), Lambda(tau)) by single-level simulation. Stratified over
/// X(0) with exact stationary weights and E Lambda = 1 used as known; the
/// budget is split by a pilot-based Neyman allocation.
std::vector<CovarianceEstimate> empirical_mother_covariance(const MotherSpec& spec,
                                                            std::span<const double> tau_grid,
                                                            int replicates, std::uint64_t seed);

/// Plain estimator from stationary starts; unusable for heavy-tailed Lambda.
std::vector<CovarianceEstimate> plain_mother_covariance(const MotherSpec& spec,
                                                        std::span<const double> tau_grid, int replicates,
                                                        std::uint64_t seed);

/// Var A_n(t) = 2 int_0^t (t - s) [prod_i (1 + R(b^i s)) - 1] ds, with R
/// from the orthogonal expansion.
double cascade_variance_exact(const CascadeConfig& config, double t);

struct VarianceRow {
  double t;
  double estimate;
  double stderr_;
  double lower_bound;
  double exact;
  bool holds;
};

struct VarianceReport {
  std::vector<VarianceRow> rows;
  bool all_hold = true;
};

/// Monte Carlo Var A_n(t), stratified over the level-0 starting state,
/// against var_lower_bound(t) - 3 stderr.
VarianceReport variance_inequality_check(const CascadeConfig& config, std::span<const double> t_grid);

}  // namespace mfbd
