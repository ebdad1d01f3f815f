#pragma once

// Adaptive quadrature on top of Boost.Math. Two unrelated schemes are exposed so
// that results can be cross-checked against each other.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <string>

#include "lab/common.hpp"

namespace lab::quad {

struct Result {
  double value = 0;
  double error = 0;
};

// Gauss-Kronrod 61, adaptive. b may be +infinity.
template <class F>
Result gk(F f, double a, double b, double tol = 1e-13, unsigned depth = 15) {
  Result r;
  r.value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, depth, tol, &r.error);
  if (!std::isfinite(r.value)) fail(ErrorKind::Numerical, "gauss-kronrod produced a non-finite value");
  return r;
}

// Double-exponential rule; tanh-sinh on finite intervals, exp-sinh on [a, inf).
template <class F>
Result de(F f, double a, double b, double tol = 1e-13) {
  Result r;
  double l1 = 0;
  if (std::isinf(b)) {
    boost::math::quadrature::exp_sinh<double> q;
    r.value = q.integrate(f, a, b, tol, &r.error, &l1);
  } else {
    boost::math::quadrature::tanh_sinh<double> q;
    r.value = q.integrate(f, a, b, tol, &r.error, &l1);
  }
  if (!std::isfinite(r.value)) fail(ErrorKind::Numerical, "double-exponential quadrature produced a non-finite value");
  return r;
}

// Integral over [0, inf) with the split at 1 and the tail mapped through rho = 1/s,
// which keeps the algebraic decay of the profile integrands well conditioned.
template <class F>
Result half_line(F f, double tol = 1e-13) {
  Result a = gk(f, 0.0, 1.0, tol);
  Result b = gk([&](double s) { return s > 0 ? f(1.0 / s) / (s * s) : 0.0; }, 0.0, 1.0, tol);
  return {a.value + b.value, a.error + b.error};
}

}  // namespace lab::quad
