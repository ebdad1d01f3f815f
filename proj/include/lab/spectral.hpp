#pragma once

// Periodic n x n grid on [0, L)^2 with real-to-complex FFTs (FFTW, estimate-mode plans so runs are
// reproducible). Fields are row-major, index i * n + j with i along x1 and j along x2.

#include <memory>
#include <vector>

#include "lab/common.hpp"

namespace lab {

using Field = std::vector<double>;
using Spectrum = std::vector<cplx>;  // n * (n/2 + 1)

class PeriodicGrid {
 public:
  PeriodicGrid(int n, double L);
  ~PeriodicGrid();
  PeriodicGrid(const PeriodicGrid&) = delete;
  PeriodicGrid& operator=(const PeriodicGrid&) = delete;

  int n() const { return n_; }
  int nh() const { return n_ / 2 + 1; }
  double L() const { return L_; }
  double h() const { return L_ / n_; }
  size_t size() const { return size_t(n_) * n_; }
  size_t spec_size() const { return size_t(n_) * nh(); }
  double x(int i) const { return i * h(); }
  Vec2 node(size_t id) const { return {x(int(id / n_)), x(int(id % n_))}; }

  // wavenumbers; the odd-derivative versions vanish on the Nyquist line
  double kx(int i) const;
  double ky(int j) const;
  double kx_odd(int i) const { return i == n_ / 2 ? 0.0 : kx(i); }
  double ky_odd(int j) const { return j == n_ / 2 ? 0.0 : ky(j); }

  Spectrum forward(const Field& f) const;
  // normalized inverse
  Field inverse(const Spectrum& s) const;

  void gradient(const Field& f, Field& fx, Field& fy) const;
  Field laplacian(const Field& f) const;
  // d1 f1 + d2 f2
  Field divergence(const Field& f1, const Field& f2) const;
  // in-place Leray projection onto discretely divergence-free fields
  void leray(Field& f1, Field& f2) const;
  void leray(Spectrum& s1, Spectrum& s2) const;
  // zero the modes with |k_i| > cut * (n/2) along either axis
  void truncate(Spectrum& s, double cut) const;

 private:
  int n_;
  double L_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

double l2_norm(const Field& f, double h);

}  // namespace lab
