#include "lab/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>

namespace lab {

struct PeriodicGrid::Plans {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr, inv = nullptr;
  ~Plans() {
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }
};

PeriodicGrid::PeriodicGrid(int n, double L) : n_(n), L_(L), plans_(std::make_unique<Plans>()) {
  require(n >= 4 && n % 2 == 0, ErrorKind::Config, "periodic grid: n must be even and at least 4");
  require(L > 0, ErrorKind::Config, "periodic grid: L must be positive");
  plans_->real = fftw_alloc_real(size());
  plans_->spec = fftw_alloc_complex(spec_size());
  plans_->fwd = fftw_plan_dft_r2c_2d(n, n, plans_->real, plans_->spec, FFTW_ESTIMATE);
  plans_->inv = fftw_plan_dft_c2r_2d(n, n, plans_->spec, plans_->real, FFTW_ESTIMATE);
}

PeriodicGrid::~PeriodicGrid() = default;

double PeriodicGrid::kx(int i) const {
  int k = i <= n_ / 2 ? i : i - n_;
  return 2 * kPi * k / L_;
}

double PeriodicGrid::ky(int j) const { return 2 * kPi * j / L_; }

Spectrum PeriodicGrid::forward(const Field& f) const {
  require(f.size() == size(), ErrorKind::Contract, "periodic grid: field size mismatch");
  std::memcpy(plans_->real, f.data(), size() * sizeof(double));
  fftw_execute(plans_->fwd);
  Spectrum s(spec_size());
  std::memcpy(reinterpret_cast<void*>(s.data()), plans_->spec, spec_size() * sizeof(fftw_complex));
  return s;
}

Field PeriodicGrid::inverse(const Spectrum& s) const {
  std::memcpy(plans_->spec, reinterpret_cast<const void*>(s.data()), spec_size() * sizeof(fftw_complex));
  fftw_execute(plans_->inv);  // c2r destroys its input, which is our scratch copy
  Field f(plans_->real, plans_->real + size());
  const double norm = 1.0 / double(size());
  for (auto& v : f) v *= norm;
  return f;
}

void PeriodicGrid::gradient(const Field& f, Field& fx, Field& fy) const {
  Spectrum s = forward(f), sx(spec_size()), sy(spec_size());
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < nh(); ++j) {
      size_t id = size_t(i) * nh() + j;
      sx[id] = cplx(0, kx_odd(i)) * s[id];
      sy[id] = cplx(0, ky_odd(j)) * s[id];
    }
  fx = inverse(sx);
  fy = inverse(sy);
}

Field PeriodicGrid::laplacian(const Field& f) const {
  Spectrum s = forward(f);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < nh(); ++j) s[size_t(i) * nh() + j] *= -(kx(i) * kx(i) + ky(j) * ky(j));
  return inverse(s);
}

Field PeriodicGrid::divergence(const Field& f1, const Field& f2) const {
  Spectrum a = forward(f1), b = forward(f2);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < nh(); ++j) {
      size_t id = size_t(i) * nh() + j;
      a[id] = cplx(0, kx_odd(i)) * a[id] + cplx(0, ky_odd(j)) * b[id];
    }
  return inverse(a);
}

void PeriodicGrid::leray(Spectrum& a, Spectrum& b) const {
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < nh(); ++j) {
      const double k1 = kx_odd(i), k2 = ky_odd(j), k2s = k1 * k1 + k2 * k2;
      if (k2s == 0) continue;
      size_t id = size_t(i) * nh() + j;
      cplx dot = (k1 * a[id] + k2 * b[id]) / k2s;
      a[id] -= k1 * dot;
      b[id] -= k2 * dot;
    }
}

void PeriodicGrid::leray(Field& f1, Field& f2) const {
  Spectrum a = forward(f1), b = forward(f2);
  leray(a, b);
  f1 = inverse(a);
  f2 = inverse(b);
}

void PeriodicGrid::truncate(Spectrum& s, double cut) const {
  const double kmax = cut * (n_ / 2);
  for (int i = 0; i < n_; ++i) {
    const int ki = std::abs(i <= n_ / 2 ? i : i - n_);
    for (int j = 0; j < nh(); ++j)
      if (ki > kmax || j > kmax) s[size_t(i) * nh() + j] = 0;
  }
}

double l2_norm(const Field& f, double h) {
  double s = 0;
  for (double v : f) s += v * v;
  return std::sqrt(s) * h;
}

}  // namespace lab
