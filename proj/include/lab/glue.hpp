#pragma once

// Experimental Picard loop over the gluing system: mode-0 inner solve, outer heat solve with the
// assembled right-hand side, free-space Stokes velocity from the Ericksen stress, and the update of
// the scaling law from the reduced equation. Contraction is measured, not assumed.

#include <cstdint>
#include <string>
#include <vector>

#include "lab/common.hpp"
#include "lab/exponents.hpp"

namespace lab {

struct GlueConfig {
  double T = 1e-2;
  ExponentSet exponents;
  double eps0 = 1e-3;
  bool v_block = true;       // false: v = 0 throughout
  bool corrections = false;  // Phi^0, Phi^alpha, Phi^beta in the outer right-hand side
  int iterations = 3;
  double t_end_frac = 0.5;   // window t in [0, t_end_frac T]
  Vec2 q{0.5, 0.5};          // in the unit square
  double background_amplitude = 1;  // Z0 = -A (x - q) in the plane, heat-evolved to Z*
  int outer_n = 15;  // q must stay off the grid nodes
  int heat_steps = 8;
  int inner_n_rho = 48;
  int inner_steps = 8;
  int inner_angles = 16;
  int stokes_nodes = 5;      // velocity sampled on stokes_nodes^2 points at stokes_times times
  int stokes_times = 2;
  int holder_pairs = 2000;
  uint64_t seed = 1;
  double divergence_factor = 1e3;
};

struct GlueIterate {
  int k = 0;
  double phi_norm = 0, psi_norm = 0, v_norm = 0;
  double kappa = 0, omega0 = 0, a0_abs = 0;
  // sup differences to the previous iterate, relative to the current norms
  double d_phi = 0, d_psi = 0, d_v = 0, d_kappa = 0;
  double d_total = 0;
  double ratio = 0;  // d_total / previous d_total, 0 on the first iterate
};

struct GlueReport {
  std::vector<GlueIterate> history;
  std::string status;     // "max_iterations" or "diverged"
  bool contracted = false;  // some successive ratio below 1
  double min_ratio = 0;
  std::string to_json() const;
};

GlueReport run_gluing_iteration(const GlueConfig& cfg);

}  // namespace lab
