#pragma once

// Degree-one corotational harmonic map W, its tangent frame, the rotation group
// acting on it, the six kernel fields, and the linearized operators on polar grids.

#include <functional>
#include <limits>
#include <vector>

#include "lab/common.hpp"

namespace lab {

struct PolarPoint {
  double rho = 0;
  double theta = 0;  // normalized to [0, 2pi) by make()
  static PolarPoint make(double rho, double theta);
  static PolarPoint from_cartesian(const Vec2& y);
};

struct RotationAngles {
  double omega = 0;
  double alpha = 0;
  double beta = 0;
};

struct ProfileValues {
  double w, w_rho, sin_w, cos_w;
};

ProfileValues eval_polar_profile(double rho);
Vec3 eval_bulk_profile(const PolarPoint& y);
Vec3 eval_bulk_profile(const Vec2& y);

struct Frame {
  Vec3 e1, e2;
};
// At rho = 0 the closed form is used as is: E1 = (-cos t, -sin t, 0), E2 = (-sin t, cos t, 0).
Frame eval_frame(const PolarPoint& y);

Mat3 rotation_matrix(const RotationAngles& a);
Mat3 rotation_z(double omega);
Mat3 rotation_x(double alpha);
Mat3 rotation_y(double beta);

Vec3 eval_kernel(int k, int j, const PolarPoint& y);
// Radial kernel of the mode-k operator: Z_0 = rho/(1+rho^2), Z_1 = 1/(1+rho^2), Z_-1 = 2rho^2/(1+rho^2).
double mode_kernel(int k, double rho);

// |grad W|^2 = 8/(1+rho^2)^2
inline double grad_w_sq(double rho) {
  double d = 1 + rho * rho;
  return 8.0 / (d * d);
}

// ---- polar grids --------------------------------------------------------

enum class Spacing { Geometric, Uniform };

struct GridSpec {
  double rho_min = 1e-3;
  double rho_max = 10.0;
  int n_rho = 257;
  int n_theta = 64;
  Spacing spacing = Spacing::Geometric;
};

class PolarGrid {
 public:
  PolarGrid() = default;
  explicit PolarGrid(const GridSpec& spec);
  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& rho() const { return rho_; }
  const std::vector<double>& theta() const { return theta_; }
  int n_rho() const { return static_cast<int>(rho_.size()); }
  int n_theta() const { return static_cast<int>(theta_.size()); }
  size_t index(int i, int j) const { return static_cast<size_t>(i) * theta_.size() + j; }
  // step in the computational variable (log rho for geometric spacing, rho otherwise)
  double h() const { return h_; }
  double dtheta() const { return 2 * kPi / theta_.size(); }

 private:
  GridSpec spec_;
  std::vector<double> rho_, theta_;
  double h_ = 0;
};

struct PolarGridField {
  PolarGrid grid;
  std::vector<Vec3> values;
  Vec3& at(int i, int j) { return values[grid.index(i, j)]; }
  const Vec3& at(int i, int j) const { return values[grid.index(i, j)]; }
};

PolarGridField sample_field(const PolarGrid& grid, const std::function<Vec3(const PolarPoint&)>& f);

struct RadialMode {
  int k = 0;
  Spacing spacing = Spacing::Geometric;
  std::vector<double> rho;
  std::vector<cplx> values;
};

RadialMode sample_mode(int k, const std::vector<double>& rho, Spacing spacing, const std::function<cplx(double)>& f);
std::vector<double> make_radial_nodes(double rho_min, double rho_max, int n, Spacing spacing);

// Second-order radial derivatives on a geometric or uniform grid, one-sided at the ends.
template <class T>
void radial_derivatives(const std::vector<double>& rho, Spacing spacing, const std::vector<T>& f, std::vector<T>& d1,
                        std::vector<T>& d2);

// L_W phi = Delta phi + |grad W|^2 phi + 2 (grad W . grad phi) W, by finite differences.
// Throws Contract if phi is not tangent to W to within tangency_tol.
PolarGridField apply_linearized(const PolarGridField& phi, double tangency_tol = 1e-8);

// L_k f = f'' + f'/rho - (k^2 + 2k cos w + cos 2w) f / rho^2
RadialMode apply_mode_operator(int k, const RadialMode& f);
double mode_potential(int k, double rho);

Vec3 project_orthogonal(const Vec3& phi, const Vec3& u);
std::vector<Vec3> project_orthogonal(const std::vector<Vec3>& phi, const std::vector<Vec3>& u);

double correction_scalar(const Vec3& zeta);

// Energy of W over the disk rho <= rho_max (infinite means all of R^2), by adaptive quadrature.
double dirichlet_energy_profile(double rho_max = std::numeric_limits<double>::infinity());
// Energy of a sampled field restricted to rho_lo <= rho <= rho_hi, by grid quadrature.
double dirichlet_energy(const PolarGridField& u, double rho_lo = 0,
                        double rho_hi = std::numeric_limits<double>::infinity());

}  // namespace lab
