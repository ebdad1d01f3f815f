#pragma once

// Correction fields, error terms of the approximate solution U = Q W((x-xi)/lambda),
// remainders after correction, and the K / Gamma operators of the reduced equations.

#include <functional>
#include <utility>

#include "lab/profile.hpp"
#include "lab/track.hpp"

namespace lab {

// ---- heat factor --------------------------------------------------------

// K(zeta) = 2 (1 - e^{-zeta/4}) / zeta and its first two derivatives; series branch near 0.
struct KValues {
  double K, dK, d2K;
};
KValues heat_K(double zeta);
// k(z,t) = 2 (1 - e^{-z^2/4t}) / z^2 = K(z^2/t)/t
double heat_factor(double z, double t);
// z k_z and z k_z - z^2 k_zz, both expressed through K
double heat_factor_zkz(double z, double t);
double heat_factor_combo(double z, double t);

// ---- Gamma functions ----------------------------------------------------

struct GammaPair {
  double g1, g2;
};
enum class QuadScheme { GaussKronrod, DoubleExponential };
GammaPair gamma_functions(double tau, QuadScheme scheme = QuadScheme::GaussKronrod);

// ---- rotation bookkeeping ----------------------------------------------

struct AJMatrices {
  Mat3 A_ab, J1, A_b, J2;
};
AJMatrices aj_matrices(double alpha, double beta);
// Q^{-1} dQ/dt for Q = Q(omega, alpha, beta)
Mat3 q_inverse_q_dot(const ParamState& s);
Mat3 q_dot(const ParamState& s);

// ---- approximate solution ----------------------------------------------

Vec3 approx_U(const ParamState& s, const Vec2& x);
// dU/dt from the chain rule with the exact derivatives of Q and W
Vec3 approx_U_t(const ParamState& s, const Vec2& x);
// d_{x_j} U, columns j = 1,2
Mat32 approx_U_grad(const ParamState& s, const Vec2& x);

// ---- corrections --------------------------------------------------------

struct HistoryOptions {
  double rel_tol = 1e-6;
  int max_halvings = 8;
  int min_native_samples = 2;
};

// int_{-T}^{t} pdot(s) g(t - s) ds by composite trapezoid on the native samples plus a grading
// toward s = t on the scale `feature`; panels are halved with Romberg extrapolation until the
// change drops below rel_tol.
cplx history_integral(const ParameterTrack& tr, double t, const std::function<double(double)>& g, double feature,
                      const HistoryOptions& opt = {});

Vec3 phi0_correction(const ParameterTrack& tr, double r, double theta, double t, const HistoryOptions& opt = {});
std::pair<Vec3, Vec3> phi_alpha_beta(const RotationAngles& a);

// ---- error terms ---------------------------------------------------------

struct ErrorTerms {
  Vec3 E0, E1, Em1;  // Em1 = Em1_1 + Em1_2
  Vec3 Em1_1, Em1_2;
  // omega' Q (A_{alpha,beta} - J1) W: part of omega' d_omega U not carried by E0
  Vec3 E0_tilt;
  // slow-decay approximation of E0, (2r/(r^2+lambda^2)) (pdot e^{i theta}, 0)
  Vec3 E0_slow;
};
ErrorTerms evaluate_errors(const ParameterTrack& tr, const Vec2& x, double t);
ErrorTerms evaluate_errors(const ParamState& s, const Vec2& x);

struct Remainders {
  Vec3 R0, R1;          // tilde R_0, tilde R_1 as 3-vectors (complex part, 0)
  Vec3 Rm1, Rm1_1, Rm1_2;
};
Remainders evaluate_remainders(const ParameterTrack& tr, const Vec2& x, double t, const HistoryOptions& opt = {});
// Only the mode -1 remainder (no history integrals).
Vec3 remainder_m1_1(const ParamState& s, const Vec2& x);
Vec3 remainder_m1_2(const ParamState& s, const Vec2& x);

struct KTerms {
  Vec3 K01, K02, K1;
  Vec3 K0() const { return K01 + K02; }
};
KTerms evaluate_K(const ParameterTrack& tr, const Vec2& y, double t, const HistoryOptions& opt = {});

// ---- tilde L_U -------------------------------------------------------------

// A smooth R^3-valued field on R^2 with an optional analytic Jacobian.
struct SmoothField {
  std::function<Vec3(const Vec2&)> value;
  std::function<Mat32(const Vec2&)> jacobian;  // may be empty: fourth-order differences then
  double fd_step = 1e-4;
  Mat32 jac(const Vec2& x) const;
};

struct TildeLParts {
  Vec3 L0, L1, L2;
  Vec3 polar;       // -(2/lambda) w_rho [(Phi_r.U) QE1 - (1/r)(Phi_theta.U) QE2]
  Vec3 definition;  // |grad U|^2 Pi Phi - 2 d_j(Phi.U) d_j U
  Vec3 sum() const { return L0 + L1 + L2; }
};
TildeLParts tildeL_decomposed(const SmoothField& Phi, const ParamState& s, const Vec2& x);
// Closed form for Phi = (phi(r) e^{i theta}, 0) around xi, when alpha = beta = 0.
Vec3 tildeL_radial(cplx phi, cplx dphi, const ParamState& s, const Vec2& x);

// ---- nonlinear remainder ----------------------------------------------------

Vec3 evaluate_N_U(const SmoothField& zeta, const ParamState& s, const Vec2& x);

}  // namespace lab
