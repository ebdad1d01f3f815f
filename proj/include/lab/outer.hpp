#pragma once

// Heat equation on a rectangle with Dirichlet data, the weights rho_1..rho_3 of the outer right-hand
// side with their sup-norm, the sharp solution norm, the background heat field Z*, and pointwise
// assembly of the outer right-hand side with a per-term breakdown.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lab/corrections.hpp"

namespace lab {

// Rectangle [0, Lx] x [0, Ly] with (nx + 1) x (ny + 1) nodes, boundary nodes included.
struct DomainGrid {
  int nx = 64, ny = 64;
  double Lx = 1, Ly = 1;
  Vec2 q{0.5, 0.5};        // singular point
  double delta_cut = 0.1;  // q must sit further than 2 delta_cut from the boundary

  static DomainGrid unit_square(int n);
  double hx() const { return Lx / nx; }
  double hy() const { return Ly / ny; }
  size_t size() const { return size_t(nx + 1) * (ny + 1); }
  size_t id(int i, int j) const { return size_t(i) * (ny + 1) + j; }
  Vec2 node(int i, int j) const { return {i * hx(), j * hy()}; }
  bool on_boundary(int i, int j) const { return i == 0 || j == 0 || i == nx || j == ny; }
  void validate() const;
};

using ScalarST = std::function<double(const Vec2&, double)>;

struct HeatOptions {
  double t0 = 0, t1 = 1;
  int n_steps = 100;
  std::vector<double> times;  // overrides (t0, t1, n_steps) when non-empty
  int store_every = 1;
};

struct HeatSolution {
  DomainGrid grid;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> frames;  // all nodes, index grid.id(i, j)
};

// Backward Euler with the five-point Laplacian; psi = g on the boundary, psi(., t0) = init.
HeatSolution solve_heat_dirichlet(const DomainGrid& grid, const ScalarST& f, const ScalarST& g,
                                  const std::function<double(const Vec2&)>& init, const HeatOptions& opt);

// ---- weights and norms -----------------------------------------------------------

struct OuterWeights {
  double T = 1e-2, gamma_star = 0.1, Theta = 0.05, sigma0 = 0.05;
  Vec2 q{0.5, 0.5};
  double lambda(double t) const;
  double R(double t) const;
  double rho1(const Vec2& x, double t) const;  // lambda^Theta (lambda R)^{-1} on r <= 3 lambda R
  double rho2(const Vec2& x, double t) const;  // T^{-sigma0} lambda^{1-sigma0} / r^2 on r >= lambda R
  double rho3() const;                         // T^{-sigma0}
  double total(const Vec2& x, double t) const { return 1 + rho1(x, t) + rho2(x, t) + rho3(); }
};

struct SpaceTimeSample {
  Vec2 x;
  double t;
};

// sup |f| / (1 + rho_1 + rho_2 + rho_3) over the samples
double weighted_rhs_norm(const std::function<Vec3(const Vec2&, double)>& f, const OuterWeights& w,
                         const std::vector<SpaceTimeSample>& samples);
// grid nodes times the given times
std::vector<SpaceTimeSample> grid_samples(const DomainGrid& g, const std::vector<double>& times, int stride = 1);

struct SharpNormOptions {
  double T = 1e-2, gamma_star = 0.1;
  int holder_pairs = 20000;
  uint64_t seed = 1;
};

struct SharpNorm {
  // sup psi, sup grad psi, psi - psi(T), grad psi - grad psi(T), hessian, Hoelder quotient
  std::array<double, 6> terms{};
  double total() const;
  std::string to_json() const;
};

// The components (one or three) are measured together with Euclidean norms. The last stored frame
// stands in for t = T; frames at or beyond T are excluded from the time-weighted terms.
SharpNorm solution_norm_sharp(const std::vector<HeatSolution>& psi, double Theta, double gamma,
                              const SharpNormOptions& opt);

// ---- background --------------------------------------------------------------------

struct BackgroundZ {
  double div_at_q = 0;
  std::array<HeatSolution, 3> Z;
};
// Heat evolution of Z0 with zero boundary data; requires div z0(q) < 0 for the planar part z0.
BackgroundZ solve_background_Z(const std::function<Vec3(const Vec2&)>& Z0, const DomainGrid& grid,
                               const HeatOptions& opt, double div_tol = 1e-8);

// ---- outer right-hand side -------------------------------------------------------------

// eta(s) = 1 for s <= 1, 0 for s >= 2, quintic C^2 bridge in between
struct CutoffValues {
  double eta, d1, d2;
};
CutoffValues cutoff_eta(double s);

struct TimeField3 {
  std::function<Vec3(const Vec2&, double)> value;
  std::function<Mat32(const Vec2&, double)> jacobian;  // fourth-order differences when empty
  static TimeField3 zero();
  Mat32 jac(const Vec2& x, double t, double h) const;
};

struct OuterIngredients {
  const ParameterTrack* track = nullptr;
  double gamma_star = 0.1;  // R(t) = lambda_*(t)^{-gamma_*}
  TimeField3 phi;           // inner solution in y = (x - xi)/lambda
  TimeField3 psi;           // outer field Psi* in x
  std::function<Vec2(const Vec2&, double)> v;
  bool corrections = true;  // include Phi^0, Phi^alpha, Phi^beta
  HistoryOptions history;
};

struct OuterRhs {
  static constexpr int kTerms = 11;
  OuterRhs() { terms.fill(Vec3::Zero()); }
  std::array<Vec3, kTerms> terms;
  Vec3 total = Vec3::Zero();
  static const std::array<const char*, kTerms>& names();
};

OuterRhs assemble_outer_rhs(const OuterIngredients& in, const Vec2& x, double t);

struct OuterRhsReport {
  std::array<double, OuterRhs::kTerms> term_norms{};
  double total_norm = 0;
  std::string to_json() const;
};
OuterRhsReport outer_rhs_report(const OuterIngredients& in, const OuterWeights& w,
                                const std::vector<SpaceTimeSample>& samples);

// Three heat solutions on one grid read back as a vector field: bilinear in space, linear in time,
// zero off the rectangle. Gradients are nodal centered differences (one-sided on the edges).
struct GridField3 {
  DomainGrid g;
  std::vector<double> t;
  std::vector<std::array<Eigen::VectorXd, 3>> val, dx, dy;

  static GridField3 from(const std::array<HeatSolution, 3>& s);
  static GridField3 zero_like(const GridField3& o);
  Vec3 value(const Vec2& x, double tt) const;
  Mat32 jacobian(const Vec2& x, double tt) const;
  double sup() const;
  double sup_diff(const GridField3& o) const;

 private:
  Vec3 sample(const std::vector<std::array<Eigen::VectorXd, 3>>& arr, const Vec2& x, double tt) const;
};

// CSV: t, x1, x2, psi
void write_heat_csv(const HeatSolution& s, const std::string& path);

}  // namespace lab
