#include "mfbd/cascade.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "mfbd/error.hpp"
#include "mfbd/numerics.hpp"
#include "mfbd/orthopoly.hpp"

namespace mfbd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kJackknifeGroups = 20;

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// Exact time integral of exp(log_lambda) over cells, kept as sum * e^scale
/// per cell so that neither large nor small log values lose precision.
class CellAccumulator {
 public:
  explicit CellAccumulator(int level)
      : cells_(std::size_t{1} << level), width_(1.0 / static_cast<double>(cells_)),
        sum_(cells_, 0.0), scale_(cells_, kNegInf) {}

  void add_segment(double t0, double t1, double log_value) {
    if (!(t1 > t0)) return;
    std::size_t k0 = cell_of(t0);
    const std::size_t k1 = cell_of(t1);
    if (k0 == k1) {
      add(k0, log_value, t1 - t0);
      return;
    }
    add(k0, log_value, (k0 + 1) * width_ - t0);
    for (std::size_t k = k0 + 1; k < k1 && k < cells_; ++k) add(k, log_value, width_);
    if (k1 < cells_) add(k1, log_value, t1 - k1 * width_);
  }

  std::vector<double> masses() const {
    std::vector<double> out(cells_);
    for (std::size_t k = 0; k < cells_; ++k) out[k] = sum_[k] * std::exp(scale_[k]);
    return out;
  }

 private:
  std::size_t cell_of(double t) const {
    return std::min(cells_, static_cast<std::size_t>(t * static_cast<double>(cells_)));
  }

  void add(std::size_t k, double log_value, double length) {
    if (length <= 0.0) return;
    if (log_value > scale_[k]) {
      sum_[k] = scale_[k] == kNegInf ? 0.0 : sum_[k] * std::exp(scale_[k] - log_value);
      scale_[k] = log_value;
    }
    sum_[k] += length * std::exp(log_value - scale_[k]);
  }

  std::size_t cells_;
  double width_;
  std::vector<double> sum_;
  std::vector<double> scale_;
};

std::vector<double> halve(const std::vector<double>& masses) {
  std::vector<double> out(masses.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = masses[2 * k] + masses[2 * k + 1];
  return out;
}

double analytic_or_nan(const std::function<double()>& f) {
  try {
    return f();
  } catch (const DomainError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

/// Per-replicate log statistics, indexed [q][scale].
struct ReplicateStats {
  std::vector<std::vector<double>> log_partition;
  std::vector<std::vector<double>> log_increment;
  double total_mass = 0.0;
};

/// log2 of the replicate mean at each scale, from per-group log sums; a
/// negative group index keeps every group.
std::vector<double> log2_means(const std::vector<std::vector<double>>& group_lse,
                               const std::vector<int>& group_size, int skip) {
  const std::size_t scales = group_lse.empty() ? 0 : group_lse[0].size();
  std::vector<double> out(scales);
  int count = 0;
  for (std::size_t g = 0; g < group_lse.size(); ++g) {
    if (static_cast<int>(g) != skip) count += group_size[g];
  }
  for (std::size_t s = 0; s < scales; ++s) {
    double lse = kNegInf;
    for (std::size_t g = 0; g < group_lse.size(); ++g) {
      if (static_cast<int>(g) != skip) lse = log_sum_exp(lse, group_lse[g][s]);
    }
    out[s] = (lse - std::log(static_cast<double>(count))) / std::log(2.0);
  }
  return out;
}

/// Regression of log2 means on x with a delete-one-group jackknife stderr.
ScalingEstimate fit_scaling(const std::vector<std::vector<double>>& per_replicate, std::vector<int> scales,
                            const std::vector<double>& x, double q) {
  const int replicates = static_cast<int>(per_replicate.size());
  const int groups = std::min(kJackknifeGroups, replicates);
  std::vector<std::vector<double>> group_lse(groups, std::vector<double>(scales.size(), kNegInf));
  std::vector<int> group_size(groups, 0);
  for (int r = 0; r < replicates; ++r) {
    const int g = static_cast<int>(static_cast<long long>(r) * groups / replicates);
    ++group_size[g];
    for (std::size_t s = 0; s < scales.size(); ++s) {
      group_lse[g][s] = log_sum_exp(group_lse[g][s], per_replicate[r][s]);
    }
  }
  ScalingEstimate est;
  est.q = q;
  est.scales_used = std::move(scales);
  est.log_statistics = log2_means(group_lse, group_size, -1);
  const numerics::LinearFit fit = numerics::ols(x, est.log_statistics);
  est.slope = fit.slope;
  est.intercept = fit.intercept;
  if (groups >= 2) {
    std::vector<double> slopes(groups);
    for (int g = 0; g < groups; ++g) slopes[g] = numerics::ols(x, log2_means(group_lse, group_size, g)).slope;
    const double mean = std::accumulate(slopes.begin(), slopes.end(), 0.0) / groups;
    double ss = 0.0;
    for (double s : slopes) ss += (s - mean) * (s - mean);
    est.slope_stderr = std::sqrt(ss * (groups - 1) / groups);
  }
  return est;
}

void require_q(double q) {
  if (!(q >= 0.0) || !std::isfinite(q)) {
    throw DomainError("scaling estimation refuses q < 0: negative moments of cell masses are unstable");
  }
}

/// Neyman split of the budget left after pilot samples: n_j proportional to
/// weight_j * sd_j.
std::vector<int> neyman_extra(const std::vector<double>& weight, const std::vector<double>& sd, int budget) {
  std::vector<int> extra(weight.size(), 0);
  double total = 0.0;
  for (std::size_t j = 0; j < weight.size(); ++j) total += weight[j] * sd[j];
  if (budget <= 0 || total <= 0.0) return extra;
  for (std::size_t j = 0; j < weight.size(); ++j) {
    extra[j] = static_cast<int>(std::lround(budget * weight[j] * sd[j] / total));
  }
  return extra;
}

/// States 0..J carrying all but a negligible share of E[G^2].
int strata_top(const ScenarioParams& params, double rel_tol) {
  const double s = params.value_scale();
  return sum_over_support(params, [](int) { return 1.0; }, 2.0 * s, rel_tol).last_index;
}

struct Moments {
  double sum = 0.0;
  double sum2 = 0.0;
  int n = 0;

  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  double var() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum2 - n * m * m) / (n - 1));
  }
};

}  // namespace

void CascadeConfig::validate() const {
  if (depth < 0) throw DomainError("depth must be nonnegative");
  if (dyadic_level < 1 || dyadic_level > 28) throw DomainError("dyadic_level must lie in [1, 28]");
  if (replicates < 1) throw DomainError("replicates must be positive");
  if (workers < 1) throw DomainError("workers must be positive");
  if (!(spec.b > 1.0)) throw DomainError("b must exceed 1");
  if (!(max_events > 0.0)) throw DomainError("max_events must be positive");
  if (allow_degenerate) return;
  const double threshold = b_min(spec.params);
  if (!(spec.b > threshold)) {
    std::ostringstream os;
    os.precision(10);
    os << "b = " << spec.b << " does not exceed the L2 threshold b_min = " << threshold
       << "; set allow_degenerate to run anyway";
    throw DomainError(os.str());
  }
}

std::vector<std::string> CascadeConfig::warnings() const {
  std::vector<std::string> out;
  const double resolution = std::ldexp(1.0, dyadic_level);
  const double deepest = std::pow(spec.b, depth);
  if (resolution < deepest) {
    std::ostringstream os;
    os << "2^m = " << resolution << " is below b^n = " << deepest
       << ": the finest cells do not resolve the deepest level";
    out.push_back(os.str());
  }
  return out;
}

double CascadeConfig::expected_events() const {
  const ScenarioParams& p = spec.params;
  const double flux =
      sum_over_support(p, [&](int j) { return p.birth_rate(j) + p.death_rate(j); }, 0.0, 1e-12).value;
  double horizon = 0.0;
  for (int i = 0; i <= depth; ++i) horizon += std::pow(spec.b, i);
  return flux * horizon;
}

double CascadeRealization::total_mass() const {
  double s = 0.0;
  for (double m : masses_at(0)) s += m;
  return s;
}

std::vector<double> CascadeRealization::masses_at(int level) const {
  if (level < 0 || level > dyadic_level) throw DomainError("masses_at: level outside [0, m]");
  std::vector<double> masses = cell_masses;
  for (int l = dyadic_level; l > level; --l) masses = halve(masses);
  return masses;
}

CascadeRealization realize(const CascadeConfig& config, std::uint64_t replicate_index,
                           const RealizeOptions& options) {
  const ScenarioParams& params = config.spec.params;
  const int levels = config.depth + 1;
  const double s = params.value_scale();
  const double offset = levels * config.spec.c_x;
  const StationaryLaw law(params);

  std::vector<Rng> rngs;
  std::vector<PathStepper> steppers;
  std::vector<double> time_scale(levels);
  std::vector<double> next(levels);
  rngs.reserve(levels);
  steppers.reserve(levels);
  long long state_sum = 0;
  for (int i = 0; i < levels; ++i) {
    rngs.push_back(Rng::substream(config.seed, options.purpose, replicate_index, static_cast<std::uint64_t>(i)));
    const int start = (i == 0 && options.level0_initial_state) ? *options.level0_initial_state : law.sample(rngs[i]);
    steppers.emplace_back(params, start, rngs[i]);
    state_sum += start;
    time_scale[i] = std::pow(config.spec.b, i);
    next[i] = steppers[i].next_time() / time_scale[i];
  }

  std::vector<double> queries = options.query_times;
  for (double t : queries) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("realize: query times must lie in [0, 1]");
  }
  std::vector<std::size_t> order(queries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return queries[a] < queries[b]; });

  CascadeRealization out;
  out.dyadic_level = config.dyadic_level;
  out.cumulative_at_queries.assign(queries.size(), 0.0);
  CellAccumulator cells(config.dyadic_level);
  double cumulative = 0.0;
  std::size_t qi = 0;
  const auto limit = static_cast<std::int64_t>(config.max_events);

  double t = 0.0;
  for (;;) {
    int arg = 0;
    for (int i = 1; i < levels; ++i) {
      if (next[i] < next[arg]) arg = i;
    }
    const double t_next = std::min(next[arg], 1.0);
    const double log_value = s * static_cast<double>(state_sum) - offset;
    cells.add_segment(t, t_next, log_value);
    if (options.keep_timeline) {
      out.merged_events.push_back(t);
      out.log_lambda_segments.push_back(log_value);
    }
    if (!queries.empty()) {
      const double value = std::exp(log_value);
      while (qi < order.size() && queries[order[qi]] <= t_next) {
        out.cumulative_at_queries[order[qi]] = cumulative + value * (queries[order[qi]] - t);
        ++qi;
      }
      cumulative += value * (t_next - t);
    }
    if (next[arg] >= 1.0) break;
    state_sum += steppers[arg].next_state() - steppers[arg].state();
    steppers[arg].advance(rngs[arg]);
    next[arg] = steppers[arg].next_time() / time_scale[arg];
    t = t_next;
    if (++out.event_count > limit) {
      std::ostringstream os;
      os << "realization exceeded " << config.max_events << " events; reduce depth or b";
      throw ResourceError(os.str());
    }
  }
  out.cell_masses = cells.masses();
  return out;
}

double log_partition_sum(std::span<const double> masses_at_level, double q) {
  require_q(q);
  if (q == 0.0) return std::log(static_cast<double>(masses_at_level.size()));
  double hi = kNegInf;
  for (double m : masses_at_level) hi = std::max(hi, q * std::log(m));
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double m : masses_at_level) sum += std::exp(q * std::log(m) - hi);
  return hi + std::log(sum);
}

double partition_sum(const CascadeRealization& realization, int level, double q) {
  require_q(q);
  const std::vector<double> masses = realization.masses_at(level);
  if (q == 1.0) {
    double s = 0.0;
    for (double m : masses) s += m;
    return s;
  }
  return std::exp(log_partition_sum(masses, q));
}

LevelRange default_level_range(const CascadeConfig& config) { return {2, config.dyadic_level - 2}; }

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (count <= 0) return;
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> cursor{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  int failure_index = count;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = cursor.fetch_add(1); i < count; i = cursor.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (i < failure_index) {
            failure_index = i;
            failure = std::current_exception();
          }
          cursor.store(count);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

ScalingStudy run_scaling_study(const CascadeConfig& config, std::span<const double> q_grid, LevelRange levels,
                               std::span<const int> delta_levels) {
  config.validate();
  const int m = config.dyadic_level;
  if (levels.lo < 0 || levels.hi > m || levels.hi - levels.lo + 1 < 3) {
    throw DomainError("scaling regression needs at least 3 levels within [0, m]");
  }
  for (double q : q_grid) require_q(q);
  for (int l : delta_levels) {
    if (l < 1 || l > m) throw DomainError("delta levels must lie in [1, m]");
  }
  if (!delta_levels.empty() && delta_levels.size() < 3) throw DomainError("K regression needs at least 3 resolutions");
  if (config.expected_events() > config.max_events) {
    std::ostringstream os;
    os << "expected " << config.expected_events() << " events per realization exceeds the cap of "
       << config.max_events << "; reduce depth or b";
    throw ResourceError(os.str());
  }

  const std::size_t nq = q_grid.size();
  const int n_levels = levels.hi - levels.lo + 1;
  std::vector<int> spacing_cells(delta_levels.size());
  std::vector<int> base_points(delta_levels.size());
  for (std::size_t d = 0; d < delta_levels.size(); ++d) {
    const int delta_cells = 1 << (m - delta_levels[d]);
    spacing_cells[d] = std::max(delta_cells, 16);
    base_points[d] = ((1 << m) - delta_cells) / spacing_cells[d] + 1;
  }

  std::vector<ReplicateStats> stats(config.replicates);
  parallel_for(config.replicates, config.workers, [&](int r) {
    const CascadeRealization real = realize(config, static_cast<std::uint64_t>(r));
    ReplicateStats& st = stats[r];
    st.log_partition.assign(nq, std::vector<double>(n_levels));
    st.log_increment.assign(nq, std::vector<double>(delta_levels.size()));
    std::vector<std::vector<double>> by_level(m + 1);
    by_level[m] = real.cell_masses;
    for (int l = m - 1; l >= 0; --l) by_level[l] = halve(by_level[l + 1]);
    for (double v : by_level[0]) st.total_mass += v;
    for (std::size_t qi = 0; qi < nq; ++qi) {
      for (int l = levels.lo; l <= levels.hi; ++l) {
        st.log_partition[qi][l - levels.lo] = log_partition_sum(by_level[l], q_grid[qi]);
      }
      for (std::size_t d = 0; d < delta_levels.size(); ++d) {
        // Increments over [t, t + delta] are level-l cells because the base
        // lattice spacing is a multiple of delta.
        const std::vector<double>& cells = by_level[delta_levels[d]];
        const int stride = spacing_cells[d] >> (m - delta_levels[d]);
        std::vector<double> picked;
        picked.reserve(base_points[d]);
        for (int k = 0; k < base_points[d]; ++k) picked.push_back(cells[static_cast<std::size_t>(k) * stride]);
        st.log_increment[qi][d] = log_partition_sum(picked, q_grid[qi]) - std::log(static_cast<double>(base_points[d]));
      }
    }
  });

  ScalingStudy study;
  study.base_points = base_points;
  double sum = 0.0, sum2 = 0.0;
  for (const ReplicateStats& st : stats) {
    sum += st.total_mass;
    sum2 += st.total_mass * st.total_mass;
  }
  const double n = static_cast<double>(config.replicates);
  study.mean_total_mass = sum / n;
  study.mean_total_mass_stderr =
      config.replicates > 1 ? std::sqrt(std::max(0.0, (sum2 - n * study.mean_total_mass * study.mean_total_mass) / (n - 1)) / n)
                            : 0.0;

  std::vector<int> level_list(n_levels);
  std::vector<double> level_x(n_levels);
  for (int i = 0; i < n_levels; ++i) {
    level_list[i] = levels.lo + i;
    level_x[i] = -static_cast<double>(levels.lo + i);
  }
  std::vector<int> delta_list(delta_levels.begin(), delta_levels.end());
  std::vector<double> delta_x(delta_levels.size());
  for (std::size_t d = 0; d < delta_levels.size(); ++d) delta_x[d] = -static_cast<double>(delta_levels[d]);

  for (std::size_t qi = 0; qi < nq; ++qi) {
    const double q = q_grid[qi];
    std::vector<std::vector<double>> per_rep(config.replicates);
    for (int r = 0; r < config.replicates; ++r) per_rep[r] = stats[r].log_partition[qi];
    ScalingEstimate t_est = fit_scaling(per_rep, level_list, level_x, q);
    t_est.analytic_value = analytic_or_nan([&] { return t_of_q(config.spec, q); });
    study.renyi.push_back(std::move(t_est));
    if (!delta_levels.empty()) {
      for (int r = 0; r < config.replicates; ++r) per_rep[r] = stats[r].log_increment[qi];
      ScalingEstimate k_est = fit_scaling(per_rep, delta_list, delta_x, q);
      k_est.analytic_value = analytic_or_nan([&] { return k_of_q(config.spec, q); });
      study.kq.push_back(std::move(k_est));
    }
  }
  return study;
}

std::vector<ScalingEstimate> estimate_renyi(const CascadeConfig& config, std::span<const double> q_grid,
                                            LevelRange levels) {
  if (config.replicates < 30) throw DomainError("estimate_renyi needs at least 30 replicates");
  if (levels.lo < 2 || levels.hi > config.dyadic_level - 2) {
    throw DomainError("level range must lie within [2, m - 2]");
  }
  return run_scaling_study(config, q_grid, levels, {}).renyi;
}

ScalingEstimate estimate_kq(const CascadeConfig& config, double q, std::span<const int> delta_levels) {
  for (int l : delta_levels) {
    if (l < 2 || l > config.dyadic_level - 2) throw DomainError("delta grid must lie within [2^(2-m), 2^-2]");
  }
  const double qs[] = {q};
  return run_scaling_study(config, qs, default_level_range(config), delta_levels).kq.front();
}

std::vector<CovarianceEstimate> empirical_mother_covariance(const MotherSpec& spec, std::span<const double> tau_grid,
                                                            int replicates, std::uint64_t seed) {
  constexpr int kPilot = 32;
  const ScenarioParams& params = spec.params;
  const double s = params.value_scale();
  const int top = strata_top(params, 1e-13);
  std::vector<double> weight(top + 1);
  std::vector<double> g(top + 1);
  for (int j = 0; j <= top; ++j) {
    g[j] = std::exp(s * j - spec.c_x);
    weight[j] = stationary_pmf(params, j) * g[j];
  }
  auto draw = [&](int j, double tau, Rng& rng) {
    PathStepper stepper(params, j, rng);
    while (stepper.next_time() <= tau) stepper.advance(rng);
    return std::exp(s * stepper.state() - spec.c_x);
  };

  std::vector<CovarianceEstimate> out;
  for (std::size_t ti = 0; ti < tau_grid.size(); ++ti) {
    const double tau = tau_grid[ti];
    if (!(tau >= 0.0)) throw DomainError("covariance lag must be nonnegative");
    std::vector<Moments> mom(top + 1);
    std::vector<Rng> rngs;
    rngs.reserve(top + 1);
    for (int j = 0; j <= top; ++j) {
      rngs.push_back(Rng::substream(seed, StreamPurpose::kMotherCovariance, static_cast<std::uint64_t>(j), ti));
      for (int k = 0; k < kPilot; ++k) mom[j].add(draw(j, tau, rngs[j]));
    }
    std::vector<double> sd(top + 1);
    for (int j = 0; j <= top; ++j) sd[j] = std::sqrt(mom[j].var());
    const std::vector<int> extra = neyman_extra(weight, sd, replicates - kPilot * (top + 1));
    double value = 0.0, var = 0.0;
    for (int j = 0; j <= top; ++j) {
      for (int k = 0; k < extra[j]; ++k) mom[j].add(draw(j, tau, rngs[j]));
      value += weight[j] * mom[j].mean();
      var += weight[j] * weight[j] * mom[j].var() / mom[j].n;
    }
    out.push_back({tau, value - 1.0, std::sqrt(var)});
  }
  return out;
}

std::vector<CovarianceEstimate> plain_mother_covariance(const MotherSpec& spec, std::span<const double> tau_grid,
                                                        int replicates, std::uint64_t seed) {
  const ScenarioParams& params = spec.params;
  const double s = params.value_scale();
  const StationaryLaw law(params);
  std::vector<std::size_t> order(tau_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tau_grid[a] < tau_grid[b]; });
  std::vector<Moments> mom(tau_grid.size());
  for (int r = 0; r < replicates; ++r) {
    Rng rng = Rng::substream(seed, StreamPurpose::kMotherCovariance, static_cast<std::uint64_t>(r), 1u << 20);
    const int start = law.sample(rng);
    const double g0 = std::exp(s * start - spec.c_x);
    PathStepper stepper(params, start, rng);
    for (std::size_t idx : order) {
      if (!(tau_grid[idx] >= 0.0)) throw DomainError("covariance lag must be nonnegative");
      while (stepper.next_time() <= tau_grid[idx]) stepper.advance(rng);
      mom[idx].add(g0 * std::exp(s * stepper.state() - spec.c_x));
    }
  }
  std::vector<CovarianceEstimate> out;
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    out.push_back({tau_grid[i], mom[i].mean() - 1.0, std::sqrt(mom[i].var() / std::max(1, mom[i].n))});
  }
  return out;
}

double cascade_variance_exact(const CascadeConfig& config, double t) {
  if (!(t >= 0.0)) throw DomainError("t must be nonnegative");
  if (t == 0.0) return 0.0;
  const PolynomialFamily family(config.spec.params);
  const Expansion e = expansion_coeffs(family, config.spec, certified_degree(family, config.spec));
  if (config.depth == 0) return integrated_covariance(family, e, t);
  auto integrand = [&](double u) {
    double prod = 1.0;
    for (int i = 0; i <= config.depth; ++i) {
      prod *= 1.0 + covariance_series(family, e, std::pow(config.spec.b, i) * u).value;
    }
    return (t - u) * (prod - 1.0);
  };
  // Break points at the correlation times of each level.
  std::vector<double> cuts{0.0};
  const double theta = family.eigenrate(1);
  for (int i = config.depth; i >= 0; --i) {
    for (double f : {1.0, 8.0}) {
      const double c = f / (theta * std::pow(config.spec.b, i));
      if (c > cuts.back() && c < t) cuts.push_back(c);
    }
  }
  cuts.push_back(t);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    total += numerics::adaptive_simpson(integrand, cuts[k], cuts[k + 1], 1e-10);
  }
  return 2.0 * total;
}

VarianceReport variance_inequality_check(const CascadeConfig& config, std::span<const double> t_grid) {
  config.validate();
  constexpr int kPilot = 8;
  const ScenarioParams& params = config.spec.params;
  const int top = strata_top(params, 1e-12);
  std::vector<double> weight(top + 1);
  for (int j = 0; j <= top; ++j) weight[j] = stationary_pmf(params, j);
  const std::size_t nt = t_grid.size();
  RealizeOptions base;
  base.query_times.assign(t_grid.begin(), t_grid.end());
  base.purpose = StreamPurpose::kVariance;

  // samples[j] holds A(t)^2 rows in draw order, so the fold is independent of
  // worker scheduling.
  std::vector<std::vector<std::vector<double>>> samples(top + 1);
  auto run_batch = [&](const std::vector<std::pair<int, int>>& jobs) {
    std::vector<std::vector<double>> rows(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), config.workers, [&](int i) {
      RealizeOptions opt = base;
      opt.level0_initial_state = jobs[i].first;
      const std::uint64_t key = (static_cast<std::uint64_t>(jobs[i].first) << 32) | static_cast<std::uint32_t>(jobs[i].second);
      const CascadeRealization real = realize(config, key, opt);
      rows[i].resize(nt);
      for (std::size_t k = 0; k < nt; ++k) rows[i][k] = real.cumulative_at_queries[k] * real.cumulative_at_queries[k];
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) samples[jobs[i].first].push_back(std::move(rows[i]));
  };

  std::vector<std::pair<int, int>> jobs;
  for (int j = 0; j <= top; ++j) {
    for (int k = 0; k < kPilot; ++k) jobs.emplace_back(j, k);
  }
  run_batch(jobs);

  const std::size_t pivot = nt == 0 ? 0 : static_cast<std::size_t>(std::max_element(t_grid.begin(), t_grid.end()) - t_grid.begin());
  std::vector<double> sd(top + 1, 0.0);
  if (nt > 0) {
    for (int j = 0; j <= top; ++j) {
      Moments m;
      for (const auto& row : samples[j]) m.add(row[pivot]);
      sd[j] = std::sqrt(m.var());
    }
  }
  const std::vector<int> extra = neyman_extra(weight, sd, config.replicates - kPilot * (top + 1));
  jobs.clear();
  for (int j = 0; j <= top; ++j) {
    for (int k = 0; k < extra[j]; ++k) jobs.emplace_back(j, kPilot + k);
  }
  run_batch(jobs);

  VarianceReport report;
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = t_grid[k];
    double second = 0.0, var = 0.0;
    for (int j = 0; j <= top; ++j) {
      Moments m;
      for (const auto& row : samples[j]) m.add(row[k]);
      second += weight[j] * m.mean();
      var += weight[j] * weight[j] * m.var() / m.n;
    }
    VarianceRow row;
    row.t = t;
    row.estimate = second - t * t;
    row.stderr_ = std::sqrt(var);
    row.lower_bound = var_lower_bound(params, t);
    row.exact = cascade_variance_exact(config, t);
    row.holds = row.estimate >= row.lower_bound - 3.0 * row.stderr_ - 1e-12;
    report.all_hold = report.all_hold && row.holds;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace mfbd
