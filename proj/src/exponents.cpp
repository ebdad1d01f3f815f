#include "lab/exponents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>

namespace lab {

namespace {

struct Builder {
  std::vector<ConstraintResult> out;
  // lhs < rhs
  void lt(const std::string& name, const std::string& group, const std::string& expr, double lhs, double rhs) {
    out.push_back({name, group, expr, lhs, rhs, rhs - lhs, lhs < rhs});
  }
  void le(const std::string& name, const std::string& group, const std::string& expr, double lhs, double rhs) {
    out.push_back({name, group, expr, lhs, rhs, rhs - lhs, lhs <= rhs});
  }
  void eq(const std::string& name, const std::string& group, const std::string& expr, double lhs, double rhs) {
    double d = std::abs(lhs - rhs);
    out.push_back({name, group, expr, lhs, rhs, -d, d <= 1e-12});
  }
};

}  // namespace

bool FeasibilityReport::feasible() const {
  return std::all_of(items.begin(), items.end(), [](const ConstraintResult& c) { return c.ok; });
}

std::vector<std::string> FeasibilityReport::violated() const {
  std::vector<std::string> v;
  for (auto& c : items)
    if (!c.ok) v.push_back(c.name);
  return v;
}

double FeasibilityReport::min_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (auto& c : items)
    if (c.group != "inner1" || c.name.find("equal") == std::string::npos) m = std::min(m, c.margin);
  return m;
}

std::string FeasibilityReport::to_json() const {
  nlohmann::json j;
  j["feasible"] = feasible();
  j["constraints"] = nlohmann::json::array();
  for (auto& c : items)
    j["constraints"].push_back(
        {{"name", c.name}, {"group", c.group}, {"expr", c.expr}, {"lhs", c.lhs}, {"rhs", c.rhs},
         {"margin", c.margin}, {"ok", c.ok}});
  return j.dump(2);
}

FeasibilityReport validate_exponents(const ExponentSet& e) {
  Builder b;
  const double g = e.gamma_star, Th = e.Theta;
  // radius and heat-operator assumptions
  b.lt("radius.gamma_star_pos", "radius", "0 < gamma_*", 0, g);
  b.lt("radius.gamma_star_lt_half", "radius", "gamma_* < 1/2", g, 0.5);
  b.lt("heat.theta_pos", "heat", "0 < Theta", 0, Th);
  b.lt("heat.theta_lt_gamma_star", "heat", "Theta < gamma_*", Th, g);
  b.lt("heat.gamma_pos", "heat", "0 < gamma", 0, e.gamma);
  b.lt("heat.gamma_lt_half", "heat", "gamma < 1/2", e.gamma, 0.5);
  b.lt("heat.m_gt_half", "heat", "1/2 < m", 0.5, e.m);
  b.lt("heat.m_lt_1", "heat", "m < 1", e.m, 1);
  b.lt("heat.nu_gt_m", "heat", "m < nu", e.m, e.nu);
  b.lt("heat.sigma0_pos", "heat", "0 < sigma0", 0, e.sigma0);
  b.le("heat.sigma0_small", "heat", "sigma0 <= 0.1", e.sigma0, kSigma0Max);
  // outer problem
  b.lt("outer.theta_lt_half_minus_gamma_star", "outer", "Theta < 1/2 - gamma_*", Th, 0.5 - g);
  b.lt("outer.theta_lt_nu1_term", "outer", "Theta < nu1 - 1 + gamma_*(a1-1)", Th, e.nu1 - 1 + g * (e.a1 - 1));
  b.lt("outer.theta_lt_nu2_term", "outer", "Theta < nu2 - 1 + gamma_*(a2-1)", Th, e.nu2 - 1 + g * (e.a2 - 1));
  b.lt("outer.theta_lt_nu3_minus_1", "outer", "Theta < nu3 - 1", Th, e.nu3 - 1);
  b.lt("outer.theta_lt_nu4_term", "outer", "Theta < nu4 - 1 + gamma_*", Th, e.nu4 - 1 + g);
  b.lt("outer.theta_lt_nu1_delta_term", "outer", "Theta < nu1 - delta gamma_*(5-a1) - gamma_*", Th,
       e.nu1 - e.delta * g * (5 - e.a1) - g);
  b.lt("outer.theta_lt_nu2_minus_gamma_star", "outer", "Theta < nu2 - gamma_*", Th, e.nu2 - g);
  b.lt("outer.theta_lt_nu3_minus_3gamma_star", "outer", "Theta < nu3 - 3 gamma_*", Th, e.nu3 - 3 * g);
  b.lt("outer.theta_lt_nu4_minus_gamma_star", "outer", "Theta < nu4 - gamma_*", Th, e.nu4 - g);
  b.lt("outer.delta_pos", "outer", "0 < delta", 0, e.delta);
  b.le("outer.delta_small", "outer", "delta <= 0.1", e.delta, kDeltaMax);
  b.lt("outer1.nu_gt_half", "outer1", "1/2 < nu", 0.5, e.nu);
  // inner problem
  b.lt("inner.nu1_lt_1", "inner", "nu1 < 1", e.nu1, 1);
  b.lt("inner.nu2_lt_bound", "inner", "nu2 < 1 - gamma_*(a2-2)", e.nu2, 1 - g * (e.a2 - 2));
  b.lt("inner.nu3_lt_theta_bound", "inner", "nu3 < 1 + Theta + 2 gamma_* gamma", e.nu3, 1 + Th + 2 * g * e.gamma);
  b.lt("inner.nu3_lt_nu1_bound", "inner", "nu3 < nu1 + delta gamma_*(a1-2)/2", e.nu3,
       e.nu1 + 0.5 * e.delta * g * (e.a1 - 2));
  b.lt("inner.nu4_lt_1", "inner", "nu4 < 1", e.nu4, 1);
  b.eq("inner1.nu_equals_nu1", "inner1", "nu = nu1", e.nu, e.nu1);
  b.eq("inner1.nu_equals_nu2", "inner1", "nu = nu2", e.nu, e.nu2);
  b.eq("inner1.nu_equals_nu4", "inner1", "nu = nu4", e.nu, e.nu4);
  b.lt("inner1.a_gt_1", "inner1", "1 < a", 1, e.a);
  b.lt("inner1.a_lt_2", "inner1", "a < 2", e.a, 2);
  // ranges of the weighted norms and parameter spaces
  for (auto [n, v] : {std::pair{"nu1", e.nu1}, {"nu2", e.nu2}, {"nu3", e.nu3}, {"nu4", e.nu4}})
    b.lt(std::string("ranges.") + n + "_pos", "ranges", std::string("0 < ") + n, 0, v);
  b.lt("ranges.a1_gt_2", "ranges", "2 < a1", 2, e.a1);
  b.lt("ranges.a1_lt_3", "ranges", "a1 < 3", e.a1, 3);
  b.lt("ranges.a2_gt_2", "ranges", "2 < a2", 2, e.a2);
  b.lt("ranges.a2_lt_3", "ranges", "a2 < 3", e.a2, 3);
  b.lt("ranges.sigma_pos", "ranges", "0 < sigma", 0, e.sigma);
  b.lt("ranges.sigma_lt_1", "ranges", "sigma < 1", e.sigma, 1);
  b.lt("ranges.delta1_pos", "ranges", "0 < delta1", 0, e.delta1);
  b.lt("ranges.delta1_lt_1", "ranges", "delta1 < 1", e.delta1, 1);
  b.lt("ranges.delta2_pos", "ranges", "0 < delta2", 0, e.delta2);
  b.lt("ranges.delta2_lt_1", "ranges", "delta2 < 1", e.delta2, 1);
  return {std::move(b.out)};
}

SearchBox SearchBox::standard() {
  SearchBox s;
  auto logspace = [](double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a * std::pow(b / a, double(i) / (n - 1));
    return v;
  };
  for (int i = 1; i <= 9; ++i) s.gamma_star.push_back(0.05 * i);
  s.Theta = logspace(1e-4, 0.2, 12);
  s.one_minus_nu = logspace(1e-4, 0.45, 12);
  s.delta = {0.025, 0.05, 0.075, 0.1};
  s.a1 = {2.1, 2.3, 2.5, 2.7, 2.9};
  s.a2_minus_2 = logspace(1e-3, 0.9, 6);
  s.gamma = {0.1, 0.25, 0.45};
  return s;
}

std::optional<ExponentSet> find_feasible(const SearchBox& box) {
  std::optional<ExponentSet> best;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (double g : box.gamma_star)
    for (double th : box.Theta)
      for (double omn : box.one_minus_nu)
        for (double d : box.delta)
          for (double a1 : box.a1)
            for (double a2m : box.a2_minus_2)
              for (double ga : box.gamma) {
                ExponentSet e;
                e.gamma_star = g;
                e.Theta = th;
                e.gamma = ga;
                e.delta = d;
                e.nu = e.nu1 = e.nu2 = e.nu4 = 1 - omn;
                e.a1 = a1;
                e.a2 = 2 + a2m;
                e.a = 1.5;
                double lo = std::max(1 + th, th + 3 * g);
                double hi = std::min(1 + th + 2 * g * ga, e.nu + 0.5 * d * g * (a1 - 2));
                if (lo >= hi) continue;  // no room for nu3
                e.nu3 = 0.5 * (lo + hi);
                e.m = 0.5 * (0.5 + std::min(e.nu, 1.0));
                e.delta1 = e.delta2 = std::min(2 * g, 0.9);
                auto rep = validate_exponents(e);
                if (!rep.feasible()) continue;
                double mm = rep.min_margin();
                if (mm > best_margin) {
                  best_margin = mm;
                  best = e;
                }
              }
  return best;
}

}  // namespace lab
