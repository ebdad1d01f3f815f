#include <doctest.h>

#include <cmath>
#include <random>

#include "lab/corrections.hpp"
#include "lab/quadrature.hpp"

using namespace lab;

namespace {

// smooth track with every parameter moving
ParamState moving_state(double t) {
  ParamState s;
  s.t = t;
  s.lambda = 0.3 + 0.1 * std::sin(t) + 0.05 * t;
  s.dlambda = 0.1 * std::cos(t) + 0.05;
  s.xi1 = 0.2 * t * t;
  s.dxi1 = 0.4 * t;
  s.xi2 = -0.1 * std::sin(2 * t);
  s.dxi2 = -0.2 * std::cos(2 * t);
  s.omega = 0.7 + 0.3 * t;
  s.domega = 0.3;
  s.alpha = 0.2 * std::cos(t);
  s.dalpha = -0.2 * std::sin(t);
  s.beta = -0.15 + 0.1 * t * t;
  s.dbeta = 0.2 * t;
  return s;
}

std::vector<double> grid(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

double maxabs(const Vec3& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("heat factor values and branches") {
  CHECK(heat_K(0).K == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(heat_K(4).K == doctest::Approx((1 - std::exp(-1.0)) / 2).epsilon(1e-14));
  CHECK(heat_K(400).K == doctest::Approx(0.005).epsilon(1e-12));
  // series and closed form agree across the switch
  for (auto f : {&KValues::K, &KValues::dK, &KValues::d2K})
    CHECK(heat_K(1 - 1e-13).*f == doctest::Approx(heat_K(1 + 1e-13).*f).epsilon(1e-11));
  // derivatives against centered differences
  for (double z : {0.3, 2.0, 7.5, 40.0}) {
    double h = 1e-5 * std::max(1.0, z);
    CHECK(heat_K(z).dK == doctest::Approx((heat_K(z + h).K - heat_K(z - h).K) / (2 * h)).epsilon(1e-7));
    CHECK(heat_K(z).d2K == doctest::Approx((heat_K(z + h).dK - heat_K(z - h).dK) / (2 * h)).epsilon(1e-6));
  }
  // range (0, 1/2]
  for (double z = 0; z < 1e4; z = z * 1.7 + 0.01) {
    CHECK(heat_K(z).K > 0);
    CHECK(heat_K(z).K <= 0.5);
  }
  CHECK(heat_factor(0.5, 0.1) == doctest::Approx(2 * (1 - std::exp(-0.25 / 0.4)) / 0.25));
  CHECK_THROWS_AS(heat_factor(1, 0), Error);
  CHECK_THROWS_AS(heat_factor(1, -1), Error);

  // z k_z and z k_z - z^2 k_zz by differences in z
  const double z = 0.7, t = 0.3, h = 1e-4;
  auto k = [&](double zz) { return heat_factor(zz, t); };
  double kz = (k(z + h) - k(z - h)) / (2 * h), kzz = (k(z + h) - 2 * k(z) + k(z - h)) / (h * h);
  CHECK(heat_factor_zkz(z, t) == doctest::Approx(z * kz).epsilon(1e-7));
  CHECK(heat_factor_combo(z, t) == doctest::Approx(z * kz - z * z * kzz).epsilon(1e-5));
}

TEST_CASE("Gamma functions") {
  auto g0 = gamma_functions(1e-4);
  CHECK(g0.g1 >= 0.98);
  CHECK(g0.g1 <= 1.02);
  CHECK(g0.g2 >= 0.98);
  CHECK(g0.g2 <= 1.02);
  // |Gamma - 1| <= C tau (1 + |log tau|): the normalized defect stays bounded as tau shrinks
  for (double tau : {1e-2, 1e-3, 1e-4, 1e-5}) {
    auto g = gamma_functions(tau);
    double nrm = tau * (1 + std::abs(std::log(tau)));
    CHECK(std::abs(g.g1 - 1) / nrm < 20);
    CHECK(std::abs(g.g2 - 1) / nrm < 20);
  }
  double mx = 0, mn = 1e300;
  for (double tau = 10; tau <= 1e4; tau *= 3) {
    auto g = gamma_functions(tau);
    double v = std::max(std::abs(g.g1), std::abs(g.g2)) * tau;
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  CHECK(mx < 10);
  auto a = gamma_functions(1.0, QuadScheme::GaussKronrod);
  auto b = gamma_functions(1.0, QuadScheme::DoubleExponential);
  CHECK(std::abs(a.g1 - b.g1) < 1e-8);
  CHECK(std::abs(a.g2 - b.g2) < 1e-8);
  CHECK_THROWS_AS(gamma_functions(0), Error);
}

TEST_CASE("rotation bookkeeping") {
  auto m = aj_matrices(0.3, -0.4);
  for (const Mat3* M : {&m.A_ab, &m.J1, &m.A_b, &m.J2}) CHECK((*M + M->transpose()).norm() < 1e-15);
  auto z = aj_matrices(1e-9, 1e-9);
  CHECK((z.A_ab - z.J1).norm() < 1e-8);
  CHECK((z.A_b - z.J2).norm() < 1e-8);

  ParamState s = moving_state(0.4);
  // Q^{-1} Q' applied to the two correction vectors, closed forms
  Mat3 M = q_inverse_q_dot(s);
  const double a = s.alpha, b = s.beta, ad = s.dalpha, bd = s.dbeta, wd = s.domega;
  Vec3 va = M * Vec3(0, a, 0);
  Vec3 ea(-wd * a * std::cos(a) * std::cos(b) - a * ad * std::sin(b), 0,
          ad * a * std::cos(b) - wd * a * std::cos(a) * std::sin(b));
  CHECK((va - ea).norm() < 1e-14);
  Vec3 vb = M * Vec3(-b, 0, 1);
  Vec3 eb(wd * std::sin(a) + bd,
          wd * (std::cos(a) * std::sin(b) - b * std::cos(a) * std::cos(b)) - ad * (b * std::sin(b) + std::cos(b)),
          wd * b * std::sin(a) + bd * b);
  CHECK((vb - eb).norm() < 1e-14);

  // q_dot against differences of Q
  const double h = 1e-6;
  auto Qt = [](double t) {
    auto st = moving_state(t);
    return rotation_matrix({st.omega, st.alpha, st.beta});
  };
  Mat3 fd = (Qt(0.4 + h) - Qt(0.4 - h)) / (2 * h);
  CHECK((fd - q_dot(s)).norm() < 1e-8);

  // the tilt matrix equals Q^{-1} J1 Q with Q built from alpha, beta only
  Mat3 Qab = rotation_matrix({0, 0.3, -0.4});
  CHECK((Qab.transpose() * m.J1 * Qab - m.A_ab).norm() < 1e-14);
}

TEST_CASE("approximate solution derivatives") {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const double h = 1e-5;
  for (int n = 0; n < 50; ++n) {
    double t = 0.5 + 0.4 * u(gen);
    Vec2 x(u(gen), u(gen));
    ParamState s = moving_state(t);
    Vec3 fd = (approx_U(moving_state(t + h), x) - approx_U(moving_state(t - h), x)) / (2 * h);
    CHECK(maxabs(fd - approx_U_t(s, x)) < 1e-7 * (1 + maxabs(fd)));
    Mat32 g = approx_U_grad(s, x);
    for (int j = 0; j < 2; ++j) {
      Vec2 e = Vec2::Zero();
      e[j] = h;
      Vec3 gx = (approx_U(s, x + e) - approx_U(s, x - e)) / (2 * h);
      CHECK(maxabs(gx - g.col(j)) < 1e-6 * (1 + maxabs(gx)));
    }
    CHECK(std::abs(approx_U(s, x).norm() - 1) < 1e-14);
  }
}

TEST_CASE("error terms sum to the time derivative of U") {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n = 0; n < 50; ++n) {
    double t = 0.5 + 0.4 * u(gen);
    Vec2 x(0.8 * u(gen), 0.8 * u(gen));
    ParamState s = moving_state(t);
    auto E = evaluate_errors(s, x);
    Vec3 Ut = approx_U_t(s, x);
    CHECK(maxabs(E.E0 + E.E1 + E.Em1 + E.E0_tilt - Ut) < 1e-12);
    CHECK(maxabs(E.Em1 - E.Em1_1 - E.Em1_2) < 1e-15);
  }
  // frozen scaling and rotation: E0 vanishes; frozen tilt: E_{-1} vanishes
  ParamState s = moving_state(0.3);
  s.dlambda = s.domega = 0;
  CHECK(maxabs(evaluate_errors(s, Vec2(0.2, 0.1)).E0) == 0);
  s = moving_state(0.3);
  s.dalpha = s.dbeta = 0;
  CHECK(maxabs(evaluate_errors(s, Vec2(0.2, 0.1)).Em1) == 0);
  // without tilt the slow part matches E0 far out
  s = moving_state(0.3);
  s.alpha = s.beta = 0;
  Vec2 far = s.xi() + Vec2(30, -40) * s.lambda;
  auto E = evaluate_errors(s, far);
  // they differ by the out-of-plane tilt of the frame, relative size sin w ~ 2/rho
  CHECK(maxabs(E.E0 - E.E0_slow) < 2.5 / 50 * maxabs(E.E0));
  CHECK(maxabs(E.E0_tilt) < 1e-15);
}

TEST_CASE("mode -1 remainders from the rotation corrections") {
  // Phi^alpha, Phi^beta are constant in x, so the remainder is -d_t Phi - E_{-1,j}
  const double h = 1e-5;
  auto phis = [](double t) {
    auto s = moving_state(t);
    return phi_alpha_beta({s.omega, s.alpha, s.beta});
  };
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n = 0; n < 30; ++n) {
    double t = 0.5 + 0.3 * u(gen);
    Vec2 x(u(gen), u(gen));
    ParamState s = moving_state(t);
    auto E = evaluate_errors(s, x);
    Vec3 dA = (phis(t + h).first - phis(t - h).first) / (2 * h);
    Vec3 dB = (phis(t + h).second - phis(t - h).second) / (2 * h);
    CHECK(maxabs(-dA - E.Em1_2 - remainder_m1_2(s, x)) < 1e-8);
    CHECK(maxabs(-dB - E.Em1_1 - remainder_m1_1(s, x)) < 1e-8);
  }
  ParamState s = moving_state(0.3);
  s.dalpha = s.dbeta = s.domega = 0;
  CHECK(maxabs(remainder_m1_1(s, Vec2(0.1, 0.3)) + remainder_m1_2(s, Vec2(0.1, 0.3))) < 1e-16);

  auto p = phi_alpha_beta({0.4, 0, 0.2});
  CHECK(p.first.norm() == 0);
  auto q = phi_alpha_beta({0, 0, 0});
  CHECK((q.second - Vec3(0, 0, 1)).norm() == 0);
  CHECK(phi_alpha_beta({0.4, -0.3, 0.2}).first.norm() == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("phi0 correction") {
  const double T = 0.5;
  auto times = grid(-T, 0.45, 200);
  // pdot = 0: constant lambda, omega
  auto still = ParameterTrack::from_function(T, times, [](double) {
    ParamState s;
    s.lambda = 0.1;
    return s;
  });
  CHECK(phi0_correction(still, 0.3, 1.0, 0.2).norm() == 0);
  // pdot = c constant with lambda frozen in the kernel: independent quadrature in the lag
  const cplx c(0.3, -0.2);
  auto lin = ParameterTrack::from_function(T, times, [c](double) {
    ParamState s;
    s.lambda = 0.1;
    s.dlambda = c.real();
    s.domega = c.imag() / 0.1;
    return s;
  });
  const double r = 0.25, t = 0.2, z = std::sqrt(r * r + 0.01);
  HistoryOptions opt;
  opt.rel_tol = 1e-10;
  opt.max_halvings = 10;
  Vec3 got = phi0_correction(lin, r, 0.0, t, opt);
  double I = quad::de([z](double tau) { return tau > 0 ? heat_factor(z, tau) : 2 / (z * z); }, 0.0, t + T, 1e-13).value;
  CHECK(got[0] == doctest::Approx(-c.real() * r * I).epsilon(1e-8));
  CHECK(got[1] == doctest::Approx(-c.imag() * r * I).epsilon(1e-8));
  CHECK(got[2] == 0);
  CHECK(phi0_correction(lin, 0, 0.0, t).norm() == 0);
  CHECK(phi0_correction(lin, 1e-9, 0.0, t).norm() < 1e-8);

  // too coarse a track
  auto sparse = ParameterTrack::from_function(T, {0.0, 0.3}, [](double) { return ParamState{}; });
  CHECK_THROWS_AS(phi0_correction(sparse, 0.1, 0, 0.2), Error);
  try {
    phi0_correction(sparse, 0.1, 0, 0.2);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Resolution);
  }
}

namespace {
ParameterTrack planar_track(double T) {
  auto times = grid(-T, 0.4, 400);
  return ParameterTrack::from_function(T, times, [](double t) {
    ParamState s;
    s.lambda = 0.2 + 0.1 * std::sin(2 * t);
    s.dlambda = 0.2 * std::cos(2 * t);
    s.omega = 0.5 * t;
    s.domega = 0.5;
    s.xi1 = 0.1 * t;
    s.dxi1 = 0.1;
    s.xi2 = 0.05 * t * t;
    s.dxi2 = 0.1 * t;
    return s;
  });
}
}  // namespace

TEST_CASE("phi0 defect identity") {
  // Phi_t - Laplace Phi + tilde E0 = tilde R0 + tilde R1, everything taken around the moving center
  const double T = 0.5;
  auto tr = planar_track(T);
  HistoryOptions opt;
  opt.rel_tol = 1e-12;
  opt.max_halvings = 10;
  auto Phi = [&](const Vec2& x, double t) {
    Vec2 d = x - tr.at(t).xi();
    return phi0_correction(tr, d.norm(), std::atan2(d.y(), d.x()), t, opt);
  };
  for (Vec2 x : {Vec2(0.3, 0.1), Vec2(-0.2, 0.25), Vec2(0.05, -0.4)}) {
    const double t = 0.25, ht = 1e-4, hx = 2e-3;
    Vec3 dt = (Phi(x, t + ht) - Phi(x, t - ht)) / (2 * ht);
    Vec3 lap = -4 * Phi(x, t);
    for (Vec2 e : {Vec2(hx, 0), Vec2(-hx, 0), Vec2(0, hx), Vec2(0, -hx)}) lap += Phi(x + e, t);
    lap /= hx * hx;
    auto E = evaluate_errors(tr.at(t), x);
    auto R = evaluate_remainders(tr, x, t, opt);
    Vec3 lhs = dt - lap + E.E0_slow;
    Vec3 rhs = R.R0 + R.R1;
    CAPTURE(lhs.transpose());
    CAPTURE(rhs.transpose());
    CHECK(maxabs(lhs - rhs) < 2e-4 * (1 + maxabs(E.E0_slow)));
  }
}

TEST_CASE("K operators") {
  const double T = 0.5;
  auto tr = planar_track(T);
  // pure dilation / rotation: K1 = 0
  auto still = ParameterTrack::from_function(T, grid(-T, 0.4, 300), [](double t) {
    ParamState s;
    s.lambda = 0.2 + 0.1 * t;
    s.dlambda = 0.1;
    return s;
  });
  auto K = evaluate_K(still, Vec2(0.7, 0.2), 0.2);
  CHECK(maxabs(K.K1) == 0);
  auto frozen = ParameterTrack::from_function(T, grid(-T, 0.4, 300), [](double) {
    ParamState s;
    s.lambda = 0.2;
    s.omega = 1.0;
    return s;
  });
  K = evaluate_K(frozen, Vec2(0.7, 0.2), 0.2);
  CHECK(maxabs(K.K01) == 0);
  CHECK(maxabs(K.K02) == 0);

  // the K split of  tilde L[Phi0] - E1 + Pi(tilde E0) - E0 - Pi(tilde R0)
  HistoryOptions opt;
  opt.rel_tol = 1e-12;
  opt.max_halvings = 10;
  const double t = 0.25;
  ParamState s = tr.at(t);
  SmoothField Phi;
  Phi.value = [&](const Vec2& x) {
    Vec2 d = x - s.xi();
    return phi0_correction(tr, d.norm(), std::atan2(d.y(), d.x()), t, opt);
  };
  Phi.fd_step = 1e-3;
  for (Vec2 y : {Vec2(0.8, 0.3), Vec2(-1.5, 2.0), Vec2(0.2, -0.1)}) {
    Vec2 x = s.xi() + s.lambda * y;
    Vec3 U = approx_U(s, x);
    auto proj = [&](const Vec3& v) { return Vec3(v - v.dot(U) * U); };
    auto E = evaluate_errors(s, x);
    auto R = evaluate_remainders(tr, x, t, opt);
    Vec3 L = tildeL_decomposed(Phi, s, x).definition;
    Vec3 lhs = L - E.E1 + proj(E.E0_slow) - E.E0 - proj(R.R0);
    auto Kt = evaluate_K(tr, y, t, opt);
    Vec3 rhs = Kt.K0() + Kt.K1;
    CAPTURE(lhs.transpose());
    CAPTURE(rhs.transpose());
    CHECK(maxabs(lhs - rhs) < 1e-6 * (1 + maxabs(rhs)));
  }
}

TEST_CASE("tilde L forms agree") {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n = 0; n < 20; ++n) {
    ParamState s = moving_state(0.3 + 0.2 * u(gen));
    if (n % 2 == 0) s.alpha = s.beta = 0;
    Vec3 a(u(gen), u(gen), u(gen)), b(u(gen), u(gen), u(gen)), c(u(gen), u(gen), u(gen));
    SmoothField Phi;
    Phi.value = [=](const Vec2& x) {
      return Vec3(a[0] * std::sin(x[0] + b[0] * x[1]), a[1] * x[0] * x[1] + b[1] * std::cos(x[1]),
                  a[2] * std::exp(0.3 * x[0]) + c[2] * x[1] * x[1]);
    };
    Vec2 x(0.6 * u(gen), 0.6 * u(gen));
    auto L = tildeL_decomposed(Phi, s, x);
    double sc = 1 + maxabs(L.definition);
    CHECK(maxabs(L.polar - L.definition) < 1e-8 * sc);
    CHECK(maxabs(L.sum() - L.definition) < 1e-8 * sc);
  }
  // radial closed form for (phi(r) e^{i theta}, 0)
  ParamState s = moving_state(0.2);
  s.alpha = s.beta = 0;
  auto f = [](double r) { return cplx(std::sin(r), 0.5 * r * r); };
  auto df = [](double r) { return cplx(std::cos(r), r); };
  SmoothField Phi;
  Phi.value = [&](const Vec2& x) {
    Vec2 d = x - s.xi();
    double r = d.norm();
    cplx v = f(r) * cplx(d.x(), d.y()) / r;
    return Vec3(v.real(), v.imag(), 0);
  };
  for (Vec2 d : {Vec2(0.3, 0.2), Vec2(-0.5, 0.1), Vec2(0.02, -0.7)}) {
    Vec2 x = s.xi() + d;
    Vec3 want = tildeL_decomposed(Phi, s, x).definition;
    CHECK(maxabs(tildeL_radial(f(d.norm()), df(d.norm()), s, x) - want) < 1e-8 * (1 + maxabs(want)));
  }
}

TEST_CASE("nonlinear remainder") {
  ParamState s = moving_state(0.3);
  Vec2 x(0.2, -0.1);
  auto field = [](double eps) {
    SmoothField z;
    z.value = [eps](const Vec2& y) { return Vec3(eps * std::sin(y[0]), eps * std::cos(y[1]), eps * y[0] * y[1]); };
    return z;
  };
  CHECK(maxabs(evaluate_N_U(field(0), s, x)) == 0);
  // quadratic in the size of zeta
  double n1 = evaluate_N_U(field(1e-3), s, x).norm(), n2 = evaluate_N_U(field(5e-4), s, x).norm();
  CHECK(n1 / n2 == doctest::Approx(4).epsilon(2e-2));
  // |zeta| = 1 exactly is admissible, larger is not
  SmoothField unit;
  unit.value = [](const Vec2& y) { return Vec3(std::cos(y[0]), std::sin(y[0]), 0); };
  CHECK(std::isfinite(evaluate_N_U(unit, s, x).norm()));
  CHECK_THROWS_AS(evaluate_N_U(field(2), s, Vec2(1.2, 1.0)), Error);
}
