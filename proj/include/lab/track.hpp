#pragma once

// Time series of the modulation parameters (lambda, xi, omega, alpha, beta).

#include <functional>
#include <string>
#include <vector>

#include "lab/common.hpp"

namespace lab {

struct ParamState {
  double t = 0;
  double lambda = 1, xi1 = 0, xi2 = 0, omega = 0, alpha = 0, beta = 0;
  double dlambda = 0, dxi1 = 0, dxi2 = 0, domega = 0, dalpha = 0, dbeta = 0;

  cplx p() const { return std::polar(lambda, omega); }
  // pdot = (lambda' + i lambda omega') e^{i omega}
  cplx pdot() const { return cplx(dlambda, lambda * domega) * std::polar(1.0, omega); }
  Vec2 xi() const { return {xi1, xi2}; }
  Vec2 dxi() const { return {dxi1, dxi2}; }
};

enum class HistoryExtension { Constant, Zero };

class ParameterTrack {
 public:
  using StateFn = std::function<ParamState(double)>;

  // Samples at strictly increasing times; derivatives by second-order differences.
  static ParameterTrack from_samples(double T, std::vector<double> t, std::vector<double> lambda,
                                     std::vector<double> xi1, std::vector<double> xi2, std::vector<double> omega,
                                     std::vector<double> alpha, std::vector<double> beta);
  // Analytic track (values and derivatives), sampled on `times` for the native grid.
  static ParameterTrack from_function(double T, const std::vector<double>& times, StateFn fn);

  double T() const { return T_; }
  const std::vector<ParamState>& samples() const { return samples_; }
  double t_begin() const { return samples_.front().t; }
  double t_end() const { return samples_.back().t; }

  // Cubic Hermite interpolation of samples, or the exact function when available.
  ParamState at(double t) const;
  // pdot on the history window [-T, t]; before the first sample it follows the extension policy.
  cplx pdot(double s) const;

  HistoryExtension extension = HistoryExtension::Constant;

 private:
  double T_ = 0;
  std::vector<ParamState> samples_;
  StateFn fn_;
};

// lambda_*(t) = |log T| (T-t)/|log(T-t)|^2
double lambda_star(double t, double T);
double lambda_star_dot(double t, double T);
double R_of(double t, double T, double gamma_star);

// The standard blow-up track lambda = lambda_*, xi = q, omega = omega0, alpha = beta = 0.
ParameterTrack blowup_track(double T, int n_samples, double omega0 = 0, Vec2 q = Vec2::Zero());

void write_track_csv(const ParameterTrack& tr, const std::string& path);
ParameterTrack read_track_csv(const std::string& path, double T);

}  // namespace lab
