#pragma once

// Free-space non-stationary Stokes: the Oseen tensor in closed form, the space-time representation
// of the velocity driven by div F, the pressure, weighted decay certificates, and the forcing norm.
// The spectral Leray projection for the periodic simulator lives in spectral.hpp.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "lab/common.hpp"

namespace lab {

// S_ij(x, t) = (A - B) delta_ij + (2B - A) x_i x_j / |x|^2 with A = e^{-|x|^2/4t} / (4 pi t) the heat
// kernel and B = (1 - e^{-|x|^2/4t}) / (2 pi |x|^2).
Mat2 oseen_tensor(const Vec2& x, double t);
struct OseenGrad {
  Mat2 S;
  std::array<Mat2, 2> dS;  // dS[k](i, j) = d_k S_ij
};
OseenGrad oseen_tensor_grad(const Vec2& x, double t);

struct ForcingTensor {
  std::function<Mat2(const Vec2&, double)> F;
  // grad[k](j, l) = d_k F_jl; fourth-order differences on the scale lambda_* + |x - q| when empty
  std::function<std::array<Mat2, 2>(const Vec2&, double)> grad;
  Vec2 q = Vec2::Zero();
  double T = 0;  // lambda_*(t) = lambda_star(t, T) sets the concentration scale
  double nu = 0.9, a = 1.5;

  double lambda(double t) const;
  std::array<Mat2, 2> gradient(const Vec2& x, double t) const;
  // (div F)_j = d_k F_jk
  Vec2 divergence(const Vec2& x, double t) const;

  static ForcingTensor zero(double T);
  // lambda_*^{nu-2} / (1 + |y|^{a+1}) M with y = (x - q)/lambda_*, analytic gradient
  static ForcingTensor weight_profile(double T, double nu, double a, const Mat2& M, Vec2 q = Vec2::Zero());
};

struct InitialVelocity {
  std::function<Vec2(const Vec2&)> v0;  // empty means v0 = 0
  Vec2 center = Vec2::Zero();
  double scale = 1;
};

struct ConvolutionOptions {
  int level = 0;              // every level doubles the radial, angular and temporal node counts
  int panels_per_decade = 4;  // radial panels in log r, 4 Gauss-Legendre nodes each
  int n_theta = 24;
  int near_panels_per_decade = 2;  // tau in (0, (T-t)^2]
  int far_panels_per_decade = 1;   // tau in ((T-t)^2, t]
  double tau_floor = 1e-8;         // relative lower cut of the near window
  bool with_gradient = true;
  bool with_pressure = false;
  int threads = 0;  // 0: LAB_THREADS or hardware concurrency
};

struct VelocitySample {
  Vec2 x;
  double t = 0;
  Vec2 v = Vec2::Zero();
  Mat2 grad = Mat2::Zero();  // grad(i, l) = d_l v_i
  double P = 0;
};

struct SpaceTimePoint {
  Vec2 x;
  double t;
};

// v_i(x,t) = int S_ij(x-z,t) v0_j(z) dz + int_0^t int S_ij(x-z,t-s) (div F)_j(z,s) dz ds, the second term
// being the integrated-by-parts form of -int int d_{z_k} S_ij F_jk. The time integral is split at
// s = t - (T-t)^2 with a coarser rule on the far history.
std::vector<VelocitySample> convolve_velocity(const ForcingTensor& F, const std::vector<SpaceTimePoint>& targets,
                                              const InitialVelocity& v0 = {}, const ConvolutionOptions& opt = {});

// P_1(x,t) = int (1/2pi) (x-z)_j / |x-z|^2 (div F)_j(z,t) dz
double pressure_field(const ForcingTensor& F, const Vec2& x, double t, const ConvolutionOptions& opt = {});

// sup lambda^{2-nu}(1+|y|^{a+1})|F| + sup lambda^{3-nu}(1+|y|^{a+2})|grad F| over the samples (Frobenius norms)
double forcing_norm(const ForcingTensor& F, double nu, double a, const std::vector<SpaceTimePoint>& samples);

struct DecayCertificate {
  double nu = 0, a = 0;
  double forcing_norm = 0;
  double sup_v = 0, sup_grad = 0;                    // at the finer level, divided by the forcing norm
  double refinement_v = 0, refinement_grad = 0;      // fine / coarse
  std::string to_json() const;
};
// sup lambda^{1-nu}(1+|y|)|v| and sup lambda^{2-nu}(1+|y|)|grad v| at opt.level and opt.level + 1
DecayCertificate certify_decay(const ForcingTensor& F, const std::vector<SpaceTimePoint>& targets,
                               const std::vector<SpaceTimePoint>& norm_samples, ConvolutionOptions opt = {});

// CSV: t, x1, x2, v1, v2, P
void write_velocity_csv(const std::vector<VelocitySample>& v, const std::string& path);

int thread_count(int requested);

}  // namespace lab
