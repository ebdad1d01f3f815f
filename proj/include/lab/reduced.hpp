#pragma once

// Reduced equations for the modulation parameters: orthogonality integrals against the
// kernels, the nonlocal equation for lambda, and leading-order tilt angles.

#include <functional>
#include <vector>

#include "lab/exponents.hpp"
#include "lab/profile.hpp"
#include "lab/track.hpp"

namespace lab {

// ---- orthogonality integrals --------------------------------------------

// int_{B_{2R}} h . Z_{k,j} dy for h sampled on a polar grid (y coordinates).
// Resolution error if the grid stops short of 2R.
double orthogonality_integral(const PolarGridField& h, int k, int j, double R);

// int chi |Z_{k,j}|^2 with chi = w_rho^2 on B_{2R}
double chi_kernel_norm(int k, int j, double R);

// sum_j chi Z_{k,j} / int chi|Z_{k,j}|^2 * int h . Z_{k,j}, sampled on the grid of h
PolarGridField hbar_projection(const PolarGridField& h, int k, double R);

// closed forms of the rotation-remainder integrals (h = Q^{-1} Pi R_{-1})
double rm1_projection_mode0_j1(double R, const ParamState& s);
double rm1_projection_mode0_j2(double R, const ParamState& s);
double rm1_projection_mode1_j1(double R, const ParamState& s);
double rm1_projection_mode1_j2(double R, const ParamState& s);
double rm1_projection_modem1_j1(double R, const ParamState& s);
double rm1_projection_modem1_j2(double R, const ParamState& s);

// ---- right-hand side a0* --------------------------------------------------

struct ReducedRHS {
  cplx a0_star;   // div psi* + i curl psi* at q
  double omega0;  // a0_star = -|a0_star| e^{i omega0}, omega0 in (-pi/2, pi/2)
};

// Fourth-order differences with step h. Assumption error when Re a0* >= 0.
ReducedRHS reduced_rhs_a0(const std::function<Vec2(const Vec2&)>& psi_star, const Vec2& q, double h = 1e-3);

// ---- nonlocal equation for lambda ------------------------------------------

struct IntegroOptions {
  double ratio = 0.85;          // T - t_{i+1} = ratio (T - t_i), starting from t_0 = -T
  double t_end_rel = 1e-9;      // last node at T - t <= t_end_rel T
  double kappa_match_rel = 1e-2;  // kappa fixed at t = T(1 - kappa_match_rel)
  int max_iter = 60;
  double tol = 1e-13;           // relative change of lambda between sweeps
};

struct IntegroSolution {
  std::vector<double> t, lambda, dlambda;
  std::vector<double> t_mid, residual_mid;  // off-node residual of the equation, at geometric midpoints
  double kappa = 0;
  double max_residual = 0;  // max |residual| / |a0*| over midpoints with t >= 0
  int iterations = 0;
};

// Solves int_{-T}^{t - lambda(t)^2} lambda'(s)/(t-s) ds = -|a0*| with lambda(T) = 0 by collocation
// at the nodes of a geometric grid; lambda' is piecewise linear, with the tail -k/log^2(T-t) past
// the last node.
IntegroSolution solve_lambda_integro(cplx a0_star, double T, const IntegroOptions& opt = {});

// LHS of the equation at time t for a given track of lambda, lambda' (piecewise linear on the nodes)
double integro_lhs(const IntegroSolution& sol, double T, double t);

// Upsilon(t) = int_{-T}^t lambda'(s)/(T-s) ds - lambda'(t) log(T-t) for lambda' = -kappa/log^2(T-t)
double upsilon(double kappa, double T, double t);
// full left-hand side with the lambda^2 cutoff for the same ansatz (lambda(T) = 0)
double integro_lhs_ansatz(double kappa, double T, double t);

// ---- tilt angles --------------------------------------------------------------

struct AlphaBetaTrack {
  double c_alpha = 0, delta1 = 0, c_beta = 0, delta2 = 0;
  double dropped_rel = 0;  // max of log R / R^2 over the window (the term left out of the balance)
  std::vector<double> t, alpha, beta;
};

// Balances 8 pi lambda^2 (-R^2) beta' = c1 lambda and 8 pi lambda^2 R^2 alpha' = c2 lambda (lambda = lambda_*,
// R = lambda_*^{-gamma_*}) against c (T-t)^delta by a log-log fit of the rate on T - t in [win_lo, win_hi] T.
// Nothing forces delta > 0; callers check.
AlphaBetaTrack leading_alpha_beta(double c1, double c2, double T, const ExponentSet& e, double win_lo = 1e-4,
                                  double win_hi = 1e-1, int n = 41);

// Integrals of the moments of w_rho^2 used by the reduced equations
double moment_rho_wrho2();        // int_0^inf rho w_rho^2 = 2
double moment_cosw_rho_wrho2();   // int_0^inf cos w w_rho^2 rho = 0

}  // namespace lab
