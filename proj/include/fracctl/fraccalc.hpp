#pragma once

// Fractional integrals and derivatives on uniform grids, and the weakly
// singular convolution used by the trajectory and Gramian code.

#include "fracctl/mlkernel.hpp"

#include <functional>
#include <vector>

namespace fracctl {

/// Uniform grid t0 + i h, i = 0..steps, h = (t1 - t0) / steps.
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int steps = 2;

  void validate() const;
  double h() const { return (t1 - t0) / steps; }
  double node(int i) const { return i == steps ? t1 : t0 + i * h(); }
  int nodes() const { return steps + 1; }
};

/// Samples on a TimeGrid; one row per node, one column per component.
struct GridFunction {
  TimeGrid grid;
  Matrix values;

  static GridFunction sample(const TimeGrid& grid, const std::function<double(double)>& f);
  static GridFunction sample(const TimeGrid& grid, Eigen::Index dim, const std::function<Vector(double)>& f);

  void validate() const;
  Eigen::Index dim() const { return values.cols(); }
  /// Piecewise-linear interpolant; t must lie in [t0, t1].
  Vector at(double t) const;
  /// Single component as a column.
  Vector column(Eigen::Index c) const { return values.col(c); }
};

/// Left fractional integral I^alpha_{t0+} by product integration: f is taken
/// piecewise linear and the power weight is integrated exactly, so linear data
/// are integrated to rounding. alpha = 0 is the identity.
GridFunction frac_integral_left(const GridFunction& f, double alpha);

/// Right fractional integral I^alpha_{t1-}, the mirror image of the left one.
GridFunction frac_integral_right(const GridFunction& f, double alpha);

/// Riemann-Liouville derivative D^alpha_{t0+} f = d/dt I^{1-alpha} f for
/// 0 < alpha < 1, the outer derivative by second-order differences. When
/// f(t0) != 0 the true derivative blows up like (t - t0)^{-alpha}; the first
/// few nodes are then unreliable.
GridFunction rl_derivative_left(const GridFunction& f, double alpha);

struct CaputoOptions {
  /// Add starting weights that make the scheme exact for (t - t0)^sigma,
  /// sigma in {j + k alpha} up to 2 - alpha. Without them the first nodes carry an
  /// O(1) error whenever f has a (t - t0)^alpha component.
  bool corrected = true;
  int max_corrections = 4;
};

/// Caputo derivative ^C D^alpha_{t0+} for 0 < alpha < 1 by the L1 scheme
/// (optionally corrected). The value at t0 is reported as 0.
GridFunction caputo_derivative(const GridFunction& f, double alpha, const CaputoOptions& opts = {});

/// Exponents the corrected L1 scheme is made exact for.
std::vector<double> caputo_correction_exponents(double alpha, int max_corrections);

/// j-fold composition of rl_derivative_left; j = 0 returns f.
GridFunction rl_compose(const GridFunction& f, double alpha, int j);

/// First derivative by finite differences of order 2 or 4 (one-sided at the
/// ends).
GridFunction classical_derivative(const GridFunction& f, int order = 2);

/// Product-integration weights for a power kernel with unit spacing:
/// far[lag] and near[lag] multiply the samples at the far and near end of the
/// panel [lag-1, lag] in s = (t - tau) / h. Index 0 is unused.
struct LagWeights {
  std::vector<long double> far;
  std::vector<long double> near;
};
LagWeights power_lag_weights(long double beta, int max_lag);

/// Settings for convolving closed-form controls: composite Gauss-Legendre in
/// w = s^alpha with geometric grading toward s = 0.
struct ConvolutionSettings {
  int order = 16;
  double ratio = 0.25;
  int levels = 28;
  int bulk_panels = 2;
};

/// int_0^{t} (t - tau)^{alpha-1} K(t - tau) u(tau) dtau for sampled u
/// (piecewise linear). The kernel is given as its power series in s^alpha, so
/// every term is integrated exactly against the interpolant.
Vector singular_convolution(const AlphaPowerSeries& kernel, const GridFunction& u, double t_eval);

/// Same integral at every grid node at once (row i is the value at t_i).
Matrix singular_convolution_nodes(const AlphaPowerSeries& kernel, const GridFunction& u);

/// Same integral for a control that can be evaluated anywhere on [0, t].
Vector singular_convolution(const AlphaPowerSeries& kernel, const std::function<Vector(double)>& u,
                            double t_eval, const ConvolutionSettings& settings = {});

}  // namespace fracctl
