#pragma once

// Controllability Gramian, Kalman rank test and the three steering controls.

#include "fracctl/fracsys.hpp"
#include "fracctl/quadrature.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fracctl {

/// Q_T below this reciprocal condition number is treated as singular.
inline constexpr double kSingularGramianRcond = 1e-10;

struct GramianResult {
  Matrix Q;
  double rcond = 0.0;     // lambda_min / lambda_max
  double quad_err = 0.0;  // relative change under panel doubling
  Vector eigenvalues;
};

/// Q_T = int_0^T K(s) K(s)^T ds with K(s) = E_{alpha,alpha}(A s^alpha) B, the
/// neutralized form of the Gramian integrand.
GramianResult gramian(const FracSystem& sys, double T, const QuadratureSettings& quad = {},
                      const SeriesPolicy& pol = {});

struct RankData {
  Matrix kalman;  // [B, AB, ..., A^{n-1} B]
  int rank = 0;
  Vector singular_values;
  std::vector<Matrix> K_blocks;  // m x n each, only when rank = n
};

RankData kalman_rank(const FracSystem& sys);

/// Numerical rank with the threshold n * sigma_max * eps * 64.
int numerical_rank(const Matrix& M);

/// Moore-Penrose pseudo-inverse by SVD with a cut-off of the same form.
Matrix pseudo_inverse(const Matrix& M);

struct SteeringProblem {
  FracSystem sys;
  Vector a;
  Vector b;
  double T = 1.0;
  TimeGrid grid;  // spans [0, T]
  SeriesPolicy series;
  QuadratureSettings quad;

  void validate() const;
  /// Uniform grid over [0, T] with the given number of steps.
  static TimeGrid grid_for(double T, int steps) { return TimeGrid{0.0, T, steps}; }
};

enum class Method { MinEnergy, Pinv, RankBased };
const char* to_string(Method method) noexcept;
std::optional<Method> method_from_string(const std::string& name);

struct SynthesisResult {
  Method method = Method::MinEnergy;
  ControlSignal control;
  Vector f_T;     // S_0(T) a - b
  double energy = 0.0;
  double alpha = 1.0;
  double T = 1.0;
  Matrix gramian;  // min-energy only
  double rcond = 0.0;
};

SynthesisResult synthesize_min_energy(const SteeringProblem& prob);
SynthesisResult synthesize_pinv(const SteeringProblem& prob);
/// phi defaults to default_phi on the problem grid; it is renormalized to
/// unit integral (trapezoid rule) before use.
SynthesisResult synthesize_rank_based(const SteeringProblem& prob, const GridFunction* phi = nullptr);
SynthesisResult synthesize(const SteeringProblem& prob, Method method);

/// c t^gamma (T - t)^gamma with gamma = alpha + 1 and unit integral on [0, T].
GridFunction default_phi(const TimeGrid& grid, double alpha);

/// int_0^T |(T-t)^{alpha-1} u(t)|^2 dt. Sampled controls are integrated
/// exactly as piecewise-linear functions; the result is +inf when the
/// integral diverges (u(T) != 0 with alpha <= 1/2).
double modified_energy(const ControlSignal& u, double alpha, double T, const QuadratureSettings& quad = {});

struct SteeringReport {
  Vector terminal_state;
  double terminal_abs = 0.0;
  double terminal_rel = 0.0;
  double energy_quadrature = 0.0;
  double energy_gramian = 0.0;  // NaN unless the method is MinEnergy
  double energy_mismatch = 0.0; // |quadrature - gramian|, NaN when not applicable
  double caputo_residual = 0.0;
};

/// Relative terminal error |x(T) - b|_inf / max(|a|, |b|, |S_0(T) a|), or the
/// absolute error when that scale is zero.
double terminal_relative_error(const Vector& xT, const Vector& a, const Vector& b, const Vector& S0a);

SteeringReport verify_steering(const SteeringProblem& prob, const SynthesisResult& result);

/// Minimal energy of the rotation system A = [[0, 1], [-1, 0]], B = (0, 1)^T at
/// alpha = 1/2 when cos_{1/2} inside the Gramian is replaced by the truncation
/// c_L (sin_{1/2} = e^{-t} is kept exactly). Only meant for the historical
/// m_L trend table; synthesize_min_energy is the exact path.
double cl_trend_energy(int L, double T, const Vector& a, const Vector& b);

/// JSON document: method, alpha, T, f_T, energy, gramian (row-major), rcond,
/// and the control sampled on the given grid.
void write_synthesis_json(std::ostream& os, const SynthesisResult& result, const TimeGrid& grid);
/// CSV t,u1..um with 17 significant digits.
void write_control_csv(std::ostream& os, const ControlSignal& u, const TimeGrid& grid);

}  // namespace fracctl
