#include "mfbd/params.hpp"

#include <cmath>
#include <charconv>
#include <sstream>

#include "mfbd/error.hpp"

namespace mfbd {

namespace {
bool positive(double x) { return std::isfinite(x) && x > 0.0; }
}  // namespace

ScenarioParams ScenarioParams::poisson(double lambda, double mu) {
  if (!positive(lambda) || !positive(mu)) {
    throw DomainError("poisson: lambda and mu must be positive");
  }
  return ScenarioParams(PoissonLaw{lambda, mu});
}

ScenarioParams ScenarioParams::pascal(double beta, double lambda, double mu) {
  if (!positive(beta) || !positive(lambda) || !positive(mu) || !(lambda < mu)) {
    throw DomainError("pascal: requires beta > 0 and 0 < lambda < mu");
  }
  return ScenarioParams(PascalLaw{beta, lambda, mu});
}

ScenarioParams ScenarioParams::binomial(int n, double p) {
  if (n < 1 || !(p > 0.0 && p < 1.0)) {
    throw DomainError("binomial: requires N >= 1 and 0 < p < 1");
  }
  return ScenarioParams(BinomialLaw{n, p});
}

ScenarioParams ScenarioParams::hypergeometric(int n, int g, int h) {
  if (n < 1 || g < n || h < n) {
    throw DomainError("hypergeometric: requires N >= 1, g >= N and h >= N");
  }
  return ScenarioParams(HypergeometricLaw{n, g, h});
}

ScenarioKind ScenarioParams::kind() const {
  return std::visit(Overloaded{
                        [](const PoissonLaw&) { return ScenarioKind::kPoisson; },
                        [](const PascalLaw&) { return ScenarioKind::kPascal; },
                        [](const BinomialLaw&) { return ScenarioKind::kBinomial; },
                        [](const HypergeometricLaw&) { return ScenarioKind::kHypergeometric; },
                    },
                    law_);
}

double ScenarioParams::birth_rate(int j) const {
  return std::visit(Overloaded{
                        [](const PoissonLaw& l) { return l.lambda; },
                        [j](const PascalLaw& l) { return (j + l.beta) * l.lambda; },
                        [j](const BinomialLaw& l) { return (l.n - j) * l.p; },
                        [j](const HypergeometricLaw& l) {
                          return static_cast<double>(l.n - j) * static_cast<double>(l.g - j);
                        },
                    },
                    law_);
}

double ScenarioParams::death_rate(int j) const {
  return std::visit(Overloaded{
                        [j](const PoissonLaw& l) { return l.mu * j; },
                        [j](const PascalLaw& l) { return l.mu * j; },
                        [j](const BinomialLaw& l) { return j * (1.0 - l.p); },
                        [j](const HypergeometricLaw& l) {
                          return static_cast<double>(j) * static_cast<double>(l.h - l.n + j);
                        },
                    },
                    law_);
}

std::optional<int> ScenarioParams::max_state() const {
  return std::visit(Overloaded{
                        [](const PoissonLaw&) -> std::optional<int> { return std::nullopt; },
                        [](const PascalLaw&) -> std::optional<int> { return std::nullopt; },
                        [](const BinomialLaw& l) -> std::optional<int> { return l.n; },
                        [](const HypergeometricLaw& l) -> std::optional<int> { return l.n; },
                    },
                    law_);
}

bool ScenarioParams::contains(int j) const {
  if (j < 0) return false;
  const auto top = max_state();
  return !top || j <= *top;
}

double ScenarioParams::value_scale() const {
  if (const auto* l = std::get_if<PascalLaw>(&law_)) return l->mu - l->lambda;
  return 1.0;
}

std::string ScenarioParams::name() const {
  switch (kind()) {
    case ScenarioKind::kPoisson: return "poisson";
    case ScenarioKind::kPascal: return "pascal";
    case ScenarioKind::kBinomial: return "binomial";
    case ScenarioKind::kHypergeometric: return "hypergeometric";
  }
  return "unknown";
}

namespace {

// Shortest round-trip form, so 0.3 prints as 0.3.
std::string shortest(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string ScenarioParams::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const PoissonLaw& l) { os << "Poisson{lambda=" << shortest(l.lambda) << ", mu=" << shortest(l.mu) << "}"; },
                 [&](const PascalLaw& l) {
                   os << "Pascal{beta=" << shortest(l.beta) << ", lambda=" << shortest(l.lambda) << ", mu=" << shortest(l.mu) << "}";
                 },
                 [&](const BinomialLaw& l) { os << "Binomial{N=" << l.n << ", p=" << shortest(l.p) << "}"; },
                 [&](const HypergeometricLaw& l) {
                   os << "Hypergeometric{N=" << l.n << ", g=" << l.g << ", h=" << l.h << "}";
                 },
             },
             law_);
  return os.str();
}

}  // namespace mfbd
