#pragma once

// Exponents of the weighted norms and the inequalities that tie them together.

#include <optional>
#include <string>
#include <vector>

namespace lab {

struct ExponentSet {
  double gamma_star = 0.1;  // R = lambda_*^{-gamma_star}
  double Theta = 0.001;
  double gamma = 0.4;
  double delta = 0.1;
  double nu = 0.998;
  double a = 1.5;
  double nu1 = 0.998, nu2 = 0.998, nu3 = 1.002, nu4 = 0.998;
  double a1 = 2.9, a2 = 2.01;
  double m = 0.75;
  double sigma0 = 0.05;
  double sigma = 0.5;
  double delta1 = 0.2, delta2 = 0.2;
};

// "delta << 1" is read as delta <= kDeltaMax, "sigma0 small" as sigma0 <= kSigma0Max
inline constexpr double kDeltaMax = 0.1;
inline constexpr double kSigma0Max = 0.1;

struct ConstraintResult {
  std::string name;    // e.g. "outer.theta_lt_nu3_minus_1"
  std::string group;   // radius, heat, outer, outer1, inner, inner1, ranges
  std::string expr;    // human-readable inequality
  double lhs = 0, rhs = 0;
  double margin = 0;   // > 0 when satisfied (equalities: 0 when satisfied, negative otherwise)
  bool ok = false;
};

struct FeasibilityReport {
  std::vector<ConstraintResult> items;
  bool feasible() const;
  std::vector<std::string> violated() const;
  double min_margin() const;
  std::string to_json() const;
};

FeasibilityReport validate_exponents(const ExponentSet& e);

// Grid box for the search; nu1 = nu2 = nu4 = nu, nu3 and m are placed inside their implied intervals.
struct SearchBox {
  std::vector<double> gamma_star, Theta, one_minus_nu, delta, a1, a2_minus_2, gamma;
  static SearchBox standard();
};

// Feasible point with the largest minimum margin, if any.
std::optional<ExponentSet> find_feasible(const SearchBox& box = SearchBox::standard());

}  // namespace lab
