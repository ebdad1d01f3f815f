#pragma once

// Mode-wise solvers for lambda^2 phi_t = L_W[phi] + h on the expanding ball B_{M R(t)}, the Fourier
// split of tangent fields, and the weighted sup-norms used to certify solutions.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lab/profile.hpp"

namespace lab {

// ---- Fourier modes of tangent fields --------------------------------------------

// h = sum_k Re(h_k e^{ik theta}) E1 + Im(h_k e^{ik theta}) E2, k = -N/2 .. N/2-1 for N angular nodes.
// Contract error if h . W exceeds tangency_tol anywhere.
using ModeMap = std::map<int, RadialMode>;
ModeMap fourier_decompose(const PolarGridField& h, double tangency_tol = 1e-8);
PolarGridField reconstruct(const ModeMap& modes, const PolarGrid& grid);
// a single mode on a polar grid with the mode's radial nodes (geometric)
PolarGridField lift_mode(const RadialMode& f, int n_theta);

// ---- time and radius --------------------------------------------------------------

struct InnerTrack {
  std::function<double(double)> lambda, R, dR;
  static InnerTrack constant(double lambda, double R);
  // lambda = lambda_*, R = lambda_*^{-gamma_*}
  static InnerTrack blowup(double T, double gamma_star);
};

// tau(t_i) = int_{t_0}^{t_i} lambda^{-2} ds
std::vector<double> time_rescale(const std::vector<double>& t, const std::function<double(double)>& lambda,
                                 double tol = 1e-12);

// ---- solvers --------------------------------------------------------------------------

using RadialForcing = std::function<cplx(double rho, double t)>;

struct InnerSolveOptions {
  double t0 = 0, t1 = 1;
  int n_steps = 200;
  std::vector<double> times;  // overrides (t0, t1, n_steps) when non-empty
  int n_rho = 200;            // nodes in log rho, the last one on the Dirichlet circle
  double rho_min = 1e-3;      // innermost node at t0; nodes move with R(t)
  double radius_mult = 4;     // Dirichlet at radius_mult R(t)
  int store_every = 1;
  double ortho_tol = 1e-8;    // relative tolerance of the orthogonality preconditions
};

struct ModeSolution {
  int k = 0;
  std::vector<double> t, tau;
  std::vector<RadialMode> phi;       // stored steps, on the physical nodes at that time
  double boundary_max = 0;           // max |phi| on the Dirichlet circle over all steps
  std::vector<cplx> c0, G;           // mode 0 projected: c01 + i c02 and the remainder G[h] per stored step
  std::vector<double> ortho_defect;  // modes +-1: relative continuum defect of int h . Z per step
};

// Backward Euler in tau on a log-rho grid scaled by R(t); the drift from the moving grid is kept.
ModeSolution solve_mode(int k, const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt);

// Mode 0 with the correction (c01 + i c02) w_rho^2 rho w_rho; c is fixed each step so that the discrete
// moment int phi rho w_rho stays zero. Set opt.radius_mult = 2 for the problem on D_{2R}.
ModeSolution solve_mode0_projected(const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt);

// Mode -1 through phi = Z_{-1} f: the flux of f0 with div(Z^2 grad f0) = h Z drives the conservative
// f-equation. Contract error if int h . Z_{-1,j} is not zero to opt.ortho_tol.
ModeSolution solve_mode_m1(const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt);

// Mode 1 for an orthogonal forcing (div G form is the caller's business); same contract as mode -1.
ModeSolution solve_mode1_div(const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt);

// sup over stored steps and rho <= report_mult R(t) of lambda_*^{-nu} (1+rho)^b |phi|
double mode_sup_weighted(const ModeSolution& s, const InnerTrack& tr,
                         const std::function<double(double)>& lambda_star, double nu, double b,
                         double report_mult = 2);

// ---- mode -1 fundamental solution ----------------------------------------------------

struct DriftBound {
  double lhs = 0;  // int_0^inf |S^eps_rho| ds from the closed form of -d_rho G^eps
  double rhs = 0;  // (1 + rho^4) / (2 pi rho^5)
  // (1+rho^2)^2 e^{-rho^2/2eps^2} / (2 pi rho^5): what dropping r^4/(1+r^2)^2 <= 1 gives; at most 2 rhs.
  // lhs <= rhs can fail for moderate rho and eps, lhs <= envelope always holds.
  double envelope = 0;
};
DriftBound fundamental_drift_bound(double rho, double eps);
// d^2/drho^2 log Z_{-1}^2
double log_zm1_sq_dd(double rho);

// ---- weighted norms ----------------------------------------------------------------------

enum class NormKind { NuA, Star, In, Star2, Star3 };

struct WeightedNormSpec {
  NormKind kind = NormKind::NuA;
  double nu = 0, a = 0, delta = 0;
};

struct NormTrack {
  std::function<double(double)> lambda_star, R;
  double domain_mult = 2;  // solution norms are taken on |y| < domain_mult R(t)
};

struct FieldSeries {
  std::vector<double> t;
  std::vector<PolarGridField> frames;
};

// Discrete sup of the weighted ratio; the solution norms include (1+|y|)|grad| and (1+|y|)^2|hess| by
// finite differences on the polar grid.
double weighted_norm(const FieldSeries& f, const WeightedNormSpec& spec, const NormTrack& tr);
FieldSeries lift_series(const ModeSolution& s, int n_theta);

NormKind parse_norm_kind(const std::string& s);
std::string norm_kind_name(NormKind k);

// CSV: t, rho, re_phi, im_phi
void write_mode_csv(const ModeSolution& s, const std::string& path);
std::string certification_json(int mode, NormKind kind, double value, double refinement_ratio);

}  // namespace lab
