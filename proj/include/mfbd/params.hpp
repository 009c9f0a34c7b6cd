#pragma once

#include <optional>
#include <string>
#include <variant>

namespace mfbd {

/// Stationary law Poi(lambda/mu); rates lambda_n = lambda, mu_n = mu n.
struct PoissonLaw {
  double lambda;
  double mu;
};

/// Pascal law Pas(beta, lambda/mu) on the lattice (mu - lambda) N;
/// index-chain rates lambda_n = (n + beta) lambda, mu_n = mu n, 0 < lambda < mu.
struct PascalLaw {
  double beta;
  double lambda;
  double mu;
};

/// Bin(N, p); rates lambda_n = (N - n) p, mu_n = n (1 - p).
struct BinomialLaw {
  int n;
  double p;
};

/// Hyp(N, g, h); rates lambda_n = (N - n)(g - n), mu_n = n (h - N + n).
struct HypergeometricLaw {
  int n;
  int g;
  int h;
};

enum class ScenarioKind { kPoisson, kPascal, kBinomial, kHypergeometric };

/// Validated parameter set of one of the four birth-death scenarios.
class ScenarioParams {
 public:
  using Law = std::variant<PoissonLaw, PascalLaw, BinomialLaw, HypergeometricLaw>;

  static ScenarioParams poisson(double lambda, double mu);
  static ScenarioParams pascal(double beta, double lambda, double mu);
  static ScenarioParams binomial(int n, double p);
  static ScenarioParams hypergeometric(int n, int g, int h);

  ScenarioKind kind() const;
  const Law& law() const { return law_; }

  double birth_rate(int j) const;
  double death_rate(int j) const;
  /// Largest state for finite chains; nullopt for {0, 1, 2, ...}.
  std::optional<int> max_state() const;
  bool contains(int j) const;
  /// Multiplier from the index state j to the value X = value_scale * j.
  double value_scale() const;
  double value(int j) const { return value_scale() * j; }

  std::string name() const;
  std::string describe() const;

 private:
  explicit ScenarioParams(Law law) : law_(law) {}
  Law law_;
};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace mfbd
