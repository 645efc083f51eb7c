#pragma once

// Mittag-Leffler functions and the matrix kernels built from them.
//
// All series here are plain Taylor sums, accumulated in long double. They are
// meant for moderate arguments (|z| up to ~20 for alpha near 1, less for small
// alpha); large-argument asymptotics are not provided. An evaluation whose
// terms cancel away more than ~8 digits fails with NonConvergence.

#include <Eigen/Dense>

#include <vector>

namespace fracctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

struct MLParams {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Truncation control shared by every series in the library.
struct SeriesPolicy {
  double rel_tol = 1e-14;
  int max_terms = 500;

  void validate() const;
};

/// 1/Gamma(x), exactly zero at the poles x = 0, -1, -2, ...
long double rgamma(long double x);

/// E_{alpha,beta}(z) = sum_k z^k / Gamma(k alpha + beta).
double ml_scalar(MLParams p, double z, const SeriesPolicy& pol = {});
long double ml_scalar_ld(MLParams p, long double z, const SeriesPolicy& pol = {});

/// E_{alpha,beta}(M) = sum_k M^k / Gamma(k alpha + beta). The caller folds any
/// t^alpha scaling into M.
Matrix ml_matrix(MLParams p, const Matrix& M, const SeriesPolicy& pol = {});

/// e_alpha^{At} = t^{alpha-1} E_{alpha,alpha}(A t^alpha), written S(t) in the
/// variation-of-constants formula.
Matrix alpha_exp(const Matrix& A, double alpha, double t, const SeriesPolicy& pol = {});

/// S_0(t) = E_alpha(A t^alpha); S_0(0) = I.
Matrix state_transition_s0(const Matrix& A, double alpha, double t, const SeriesPolicy& pol = {});

/// Fractional sine/cosine: the entries of S(t) for A = [[0,1],[-1,0]].
double frac_sin(double alpha, double t, const SeriesPolicy& pol = {});
double frac_cos(double alpha, double t, const SeriesPolicy& pol = {});

/// Truncated small-t expansion c_L(t) of cos_{1/2}, evaluated exactly as
/// printed (odd powers t^{2k-1}). Only meant for reproducing the historical
/// m_L table; frac_cos is the exact function.
double cl_truncation(int L, double t);

/// g(t) = t^{1-alpha} [E_{alpha,alpha}(A t^alpha)]^{-1}, the pointwise inverse
/// of alpha_exp: alpha_exp(A, alpha, t) * g(t) = I.
Matrix inverse_kernel_g(const Matrix& A, double alpha, double t, const SeriesPolicy& pol = {});

/// Reciprocal condition below which a Mittag-Leffler matrix counts as singular.
inline constexpr double kSingularKernelRcond = 1e-12;

/// Truncated series sum_k C_k x^k in the variable x = s^alpha, with
/// C_k = L A^k R / Gamma(k alpha + beta). This is E_{alpha,beta}(A s^alpha)
/// sandwiched between fixed factors, precomputed once so that it can be
/// evaluated cheaply at many s. Truncation is to working precision over
/// s in [0, s_max].
class AlphaPowerSeries {
 public:
  AlphaPowerSeries() = default;

  static AlphaPowerSeries mittag_leffler(const Matrix& A, double alpha, double beta, double s_max,
                                         const Matrix& left, const Matrix& right,
                                         const SeriesPolicy& pol = {});
  static AlphaPowerSeries mittag_leffler(const Matrix& A, double alpha, double beta, double s_max,
                                         const SeriesPolicy& pol = {});

  /// A single constant coefficient: K(s) = value.
  static AlphaPowerSeries constant(const Matrix& value, double alpha);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double s_max() const { return s_max_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  int terms() const { return static_cast<int>(coeffs_.size()); }
  const LMatrix& coefficient(int k) const { return coeffs_[static_cast<std::size_t>(k)]; }
  const std::vector<LMatrix>& coefficients() const { return coeffs_; }

  /// Value at s >= 0.
  Matrix at(double s) const;
  /// Value at x = s^alpha.
  Matrix at_power(long double x) const;
  /// K(x) v, without forming K(x).
  Vector apply_power(long double x, const Vector& v) const;

 private:
  double alpha_ = 1.0;
  double beta_ = 1.0;
  double s_max_ = 0.0;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<LMatrix> coeffs_;
};

}  // namespace fracctl
