#pragma once

// Transported harmonic-map heat flow coupled to incompressible Navier-Stokes through the Ericksen
// stress, on a periodic box with pseudo-spectral derivatives. Blow-up tracking, energy concentration
// and checkpoints live here as well.

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lab/spectral.hpp"

namespace lab {

struct Bubble {
  Vec2 q{0.5, 0.5};
  double kappa = 1;  // lambda(0) = kappa lambda_*(0)
  double omega = 0;
};

using Director = std::array<Field, 3>;
using Velocity = std::array<Field, 2>;

struct SimConfig {
  int n = 128;
  double L = 1;
  double T = 0.05;  // nominal blow-up time; only lambda_*(0) = T/|log T| is used
  double eps0 = 1e-3;
  double viscosity = 1;
  std::vector<Bubble> bubbles{Bubble{}};
  double core_radius = 0.45;  // bubble tails are blended to the far field on [blend_start, 1] core_radius
  double blend_start = 0.6;
  // Outer co-rotational shell of scale shell_mu around every bubble: the angle profile becomes
  // pi - 2 atan(r/lambda) - 2 atan(r/mu), with far field -e3. Zero disables it.
  double shell_mu = 0;
  // planar background -A (x - q) e^{-|x-q|^2 / 2 width^2} around every bubble, projected onto U-perp
  double background_amplitude = 0, background_width = 0.15;
  double v0_amplitude = 0;  // cellular divergence-free initial velocity
  double dt_max = 1e-3;
  double heat_cfl = 0.2;       // dt |grad u|^2_max
  double transport_cfl = 0.5;  // dt |v|_max / h
  double renorm_limit = 0.1;
  double dealias = 2.0 / 3.0;
  // additive forcing of the director and velocity equations (manufactured solutions)
  std::function<Vec3(const Vec2&, double)> forcing_u;
  std::function<Vec2(const Vec2&, double)> forcing_v;

  double lambda0(const Bubble& b) const;
};

struct SimState {
  double t = 0;
  Director u;
  Velocity v;
  double renorm_deviation = 0;  // max ||u| - 1| before the last renormalization
};

struct Stress {
  Field f11, f12, f22;  // grad u (.) grad u - |grad u|^2 I / 2
};

class Simulator {
 public:
  explicit Simulator(SimConfig cfg);
  ~Simulator();
  const SimConfig& config() const { return cfg_; }
  const PeriodicGrid& grid() const { return *grid_; }

  // U plus the background, unit length at every node; checks the bubble separation
  SimState build_ansatz() const;
  double stable_dt(const SimState& s) const;
  // advances by dt, splitting into stable substeps
  void step(SimState& s, double dt) const;
  // one split step of at most dt_cap; returns the step taken
  double step_adaptive(SimState& s, double dt_cap) const;

 private:
  void split_step(SimState& s, double dt, const std::array<Field, 6>& grads) const;
  std::array<Field, 6> director_gradients(const Director& u) const;

  SimConfig cfg_;
  std::unique_ptr<PeriodicGrid> grid_;
};

Stress ericksen_stress(const PeriodicGrid& g, const Director& u);
// (div F)_i = d_j F_ij
Velocity stress_divergence(const PeriodicGrid& g, const Stress& F);
// ||Leray(div F)||_2 / ||div F||_2
double potential_residual(const PeriodicGrid& g, const Director& u);

// int |grad u|^2 over the box, spectral gradients
double grid_energy(const PeriodicGrid& g, const Director& u);
// int over the periodic ball B_delta(q) of |grad u|^2
double energy_concentration(const PeriodicGrid& g, const Director& u, double delta, const Vec2& q);

struct ScaleEstimate {
  Vec2 xi = Vec2::Zero();
  double lambda = 0;
  bool found = false;
};
// xi = argmin u3 within search_radius of guess; lambda = mean radius of the first u3 = 0 crossing
// along 16 rays (bilinear interpolation)
ScaleEstimate measure_scale(const PeriodicGrid& g, const Field& u3, const Vec2& guess, double search_radius);

struct Snapshot {
  double t = 0;
  double lambda = 0;
  Vec2 xi = Vec2::Zero();
  double energy = 0;
  double energy_ball = 0;  // int over B_{ball_factor lambda}(xi)
  double max_v = 0;
  double renorm_deviation = 0;
};

struct BlowupDiagnostics {
  std::vector<Snapshot> series;
  bool blowup_detected = false;
  std::string message;
  double lambda_lo = 0, lambda_hi = 0;  // fit window
  size_t window_points = 0;
  double T_hat = 0, kappa_hat = 0;
  double rate_variation = 0;  // max/min - 1 of lambda |log(T_hat-t)|^2 / (T_hat-t) on the window
  double v_c_hat = 0, v_nu_hat = 0;  // max|v| ~ c lambda^{nu-1}
  std::string to_json() const;
};

// Fits lambda = kappa (T_hat - t) / |log(T_hat - t)|^2 on the snapshots with lambda in [lo, hi].
BlowupDiagnostics track_blowup(const std::vector<Snapshot>& history, double lambda_lo, double lambda_hi);

struct BlowupRunOptions {
  double t_max = 1;
  double snapshot_dt = 1e-3;
  double snapshot_shrink = 0.02;  // also snapshot when lambda drops by this fraction
  double min_cells = 8, max_cells = 40;
  double ball_factor = 10;
  double search_radius = 0.15;
};

struct BlowupRun {
  std::vector<Snapshot> snapshots;
  BlowupDiagnostics diagnostics;
  SimState final_state;
  size_t steps = 0;
  double max_energy_increase = 0;  // largest relative increase between consecutive snapshots
  double max_velocity = 0;
  double final_energy_ball = 0;     // at the last snapshot with lambda >= min_cells h
  double final_lambda = 0;
  std::string to_json() const;
};

// runs until lambda drops below min_cells grid cells or t_max
BlowupRun run_blowup(const Simulator& sim, const BlowupRunOptions& opt);

// binary state plus a JSON manifest next to it (path + ".json")
void save_checkpoint(const Simulator& sim, const SimState& s, const std::string& path);
SimState load_checkpoint(const Simulator& sim, const std::string& path);
// CSV: x1, x2, u1, u2, u3, v1, v2
void write_fields_csv(const PeriodicGrid& g, const SimState& s, const std::string& path);

}  // namespace lab
