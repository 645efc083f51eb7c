#include "fracctl/mlkernel.hpp"

#include "fracctl/errors.hpp"
#include "numeric_detail.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace fracctl {

namespace {

void check_params(MLParams p) {
  if (!(p.alpha > 0.0) || !(p.beta > 0.0) || !std::isfinite(p.alpha) || !std::isfinite(p.beta)) {
    std::ostringstream os;
    os << "Mittag-Leffler parameters must be positive (alpha=" << p.alpha << ", beta=" << p.beta << ")";
    fail(ErrorCode::InvalidParams, os.str());
  }
}

void check_order(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream os;
    os << "order alpha must lie in (0, 1], got " << alpha;
    fail(ErrorCode::InvalidParams, os.str());
  }
}

void check_square(const Matrix& A) {
  if (A.rows() != A.cols()) fail(ErrorCode::InvalidParams, "matrix must be square");
  if (!A.allFinite()) fail(ErrorCode::InvalidParams, "matrix has non-finite entries");
}

long double max_abs(const LMatrix& m) {
  return m.size() == 0 ? 0.0L : m.cwiseAbs().maxCoeff();
}

// z^k / Gamma(k alpha + beta), switching to logarithms once Gamma overflows.
long double series_term(long double zk, long double z, int k, long double arg) {
  if (arg < 1700.0L) return zk * rgamma(arg);
  if (z == 0.0L) return 0.0L;
  const long double mag = std::exp(k * std::log(std::fabs(z)) - std::lgamma(arg));
  return (z < 0.0L && (k % 2 == 1)) ? -mag : mag;
}

// Rounding in a sum whose largest term is `peak` is about peak * eps. Results
// that lose more than this fraction of their value to cancellation are
// rejected instead of returned.
constexpr long double kCancellationLimit = 1e-8L;

bool cancelled(long double peak, long double result) {
  return peak * 32.0L * std::numeric_limits<long double>::epsilon() > kCancellationLimit * result;
}

[[noreturn]] void fail_cancellation(const std::string& what, long double peak, long double result) {
  std::ostringstream os;
  os << what << ": the Taylor series cancels from terms of size " << static_cast<double>(peak) << " to "
     << static_cast<double>(result) << "; argument too large for series evaluation";
  fail(ErrorCode::NonConvergence, os.str());
}

}  // namespace

void SeriesPolicy::validate() const {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) fail(ErrorCode::InvalidParams, "series rel_tol must lie in (0, 1)");
  if (max_terms < 1) fail(ErrorCode::InvalidParams, "series max_terms must be >= 1");
}

long double rgamma(long double x) {
  if (x <= 0.0L && x == std::floor(x)) return 0.0L;
  if (x > 1700.0L) return std::exp(-std::lgamma(x));
  return 1.0L / std::tgamma(x);
}

long double ml_scalar_ld(MLParams p, long double z, const SeriesPolicy& pol) {
  check_params(p);
  pol.validate();
  if (!std::isfinite(static_cast<double>(z))) fail(ErrorCode::InvalidParams, "non-finite argument");

  // Compensated summation takes the place of pairwise grouping for z < 0.
  detail::CompensatedSum sum;
  long double zk = 1.0L;
  long double peak = 0.0L;
  int quiet = 0;
  for (int k = 0; k < pol.max_terms; ++k) {
    const long double term = series_term(zk, z, k, k * static_cast<long double>(p.alpha) + p.beta);
    sum.add(term);
    peak = std::max(peak, std::fabs(term));
    if (k > 0) {
      const long double partial = std::fabs(sum.value());
      const bool small = partial > 0.0L ? std::fabs(term) < pol.rel_tol * partial
                                        : std::fabs(term) < pol.rel_tol;
      quiet = small ? quiet + 1 : 0;
      if (quiet >= 2) {
        if (cancelled(peak, partial)) {
          std::ostringstream os;
          os << "E_{" << p.alpha << "," << p.beta << "}(" << static_cast<double>(z) << ")";
          fail_cancellation(os.str(), peak, partial);
        }
        return sum.value();
      }
    }
    zk *= z;
  }
  std::ostringstream os;
  os << "E_{" << p.alpha << "," << p.beta << "}(" << static_cast<double>(z) << ") did not converge in "
     << pol.max_terms << " terms";
  fail(ErrorCode::NonConvergence, os.str());
}

double ml_scalar(MLParams p, double z, const SeriesPolicy& pol) {
  return static_cast<double>(ml_scalar_ld(p, z, pol));
}

Matrix ml_matrix(MLParams p, const Matrix& M, const SeriesPolicy& pol) {
  check_params(p);
  pol.validate();
  check_square(M);
  const Eigen::Index n = M.rows();
  const LMatrix Ml = M.cast<long double>();
  LMatrix power = LMatrix::Identity(n, n);
  LMatrix sum = LMatrix::Zero(n, n);
  LMatrix carry = LMatrix::Zero(n, n);
  long double peak = 0.0L;
  int quiet = 0;
  for (int k = 0; k < pol.max_terms; ++k) {
    const long double rg = rgamma(k * static_cast<long double>(p.alpha) + p.beta);
    const LMatrix term = power * rg;
    if (k == 0) peak = max_abs(term);
    for (Eigen::Index i = 0; i < term.size(); ++i) {
      const long double x = term.data()[i];
      long double& s = sum.data()[i];
      const long double t = s + x;
      carry.data()[i] += std::fabs(s) >= std::fabs(x) ? (s - t) + x : (x - t) + s;
      s = t;
    }
    if (k > 0) {
      const long double total = max_abs(sum + carry);
      const long double size = max_abs(term);
      peak = std::max(peak, size);
      // Entrywise, so that small entries next to large ones are converged too;
      // the floor keeps entries that tend to zero from stalling the loop.
      const long double floor = total > 0.0L ? std::numeric_limits<long double>::epsilon() * total : pol.rel_tol;
      bool small = true;
      for (Eigen::Index i = 0; i < term.size() && small; ++i) {
        const long double x = std::fabs(term.data()[i]);
        small = x < pol.rel_tol * std::fabs(sum.data()[i] + carry.data()[i]) || x < floor;
      }
      quiet = small ? quiet + 1 : 0;
      if (quiet >= 2) {
        if (cancelled(peak, total)) {
          std::ostringstream os;
          os << "matrix E_{" << p.alpha << "," << p.beta << "}";
          fail_cancellation(os.str(), peak, total);
        }
        return (sum + carry).cast<double>();
      }
    }
    power = power * Ml;
  }
  std::ostringstream os;
  os << "matrix E_{" << p.alpha << "," << p.beta << "} did not converge in " << pol.max_terms << " terms";
  fail(ErrorCode::NonConvergence, os.str());
}

Matrix alpha_exp(const Matrix& A, double alpha, double t, const SeriesPolicy& pol) {
  check_square(A);
  check_order(alpha);
  if (alpha == 1.0) {
    if (t == 0.0) return Matrix::Identity(A.rows(), A.cols());
  } else if (!(t > 0.0)) {
    fail(ErrorCode::DomainError, "alpha_exp needs t > 0 for alpha < 1");
  }
  const double ta = alpha == 1.0 ? t : std::pow(t, alpha);
  const double scale = alpha == 1.0 ? 1.0 : std::pow(t, alpha - 1.0);
  return scale * ml_matrix({alpha, alpha}, A * ta, pol);
}

Matrix state_transition_s0(const Matrix& A, double alpha, double t, const SeriesPolicy& pol) {
  check_square(A);
  check_order(alpha);
  if (t < 0.0) fail(ErrorCode::DomainError, "state transition needs t >= 0");
  if (t == 0.0) return Matrix::Identity(A.rows(), A.cols());
  return ml_matrix({alpha, 1.0}, A * std::pow(t, alpha), pol);
}

double frac_sin(double alpha, double t, const SeriesPolicy& pol) {
  check_order(alpha);
  if (!(t > 0.0)) fail(ErrorCode::DomainError, "frac_sin needs t > 0");
  const long double t2a = std::pow(static_cast<long double>(t), 2.0L * alpha);
  const long double e = ml_scalar_ld({2.0 * alpha, 2.0 * alpha}, -t2a, pol);
  return static_cast<double>(std::pow(static_cast<long double>(t), 2.0L * alpha - 1.0L) * e);
}

double frac_cos(double alpha, double t, const SeriesPolicy& pol) {
  check_order(alpha);
  if (!(t > 0.0)) fail(ErrorCode::DomainError, "frac_cos needs t > 0");
  const long double t2a = std::pow(static_cast<long double>(t), 2.0L * alpha);
  const long double e = ml_scalar_ld({2.0 * alpha, alpha}, -t2a, pol);
  return static_cast<double>(std::pow(static_cast<long double>(t), static_cast<long double>(alpha) - 1.0L) * e);
}

double cl_truncation(int L, double t) {
  if (L < 1) fail(ErrorCode::InvalidParams, "c_L needs L >= 1");
  if (!(t > 0.0)) fail(ErrorCode::DomainError, "c_L needs t > 0");
  long double odd_product = 1.0L;
  long double sum = 0.0L;
  for (int k = 1; k <= L; ++k) {
    odd_product *= 2.0L * k - 1.0L;
    sum += std::pow(2.0L, k) * std::pow(static_cast<long double>(t), 2.0L * k - 1.0L) / odd_product;
  }
  const long double pi = 3.141592653589793238462643383279502884L;
  return static_cast<double>((1.0L - sum) / std::sqrt(pi * t));
}

Matrix inverse_kernel_g(const Matrix& A, double alpha, double t, const SeriesPolicy& pol) {
  check_square(A);
  check_order(alpha);
  if (!(t > 0.0)) fail(ErrorCode::DomainError, "inverse kernel g needs t > 0");
  const Matrix E = ml_matrix({alpha, alpha}, A * std::pow(t, alpha), pol);
  const Eigen::PartialPivLU<Matrix> lu(E);
  const double rc = lu.rcond();
  if (!(rc >= kSingularKernelRcond)) {
    std::ostringstream os;
    os << "E_{alpha,alpha}(A t^alpha) is singular at t=" << t << " (rcond " << rc << ")";
    fail(ErrorCode::SingularKernel, os.str());
  }
  return std::pow(t, 1.0 - alpha) * lu.inverse();
}

// ---------------------------------------------------------------------------

AlphaPowerSeries AlphaPowerSeries::mittag_leffler(const Matrix& A, double alpha, double beta, double s_max,
                                                  const Matrix& left, const Matrix& right,
                                                  const SeriesPolicy& pol) {
  check_params({alpha, beta});
  pol.validate();
  check_square(A);
  if (left.cols() != A.rows() || right.rows() != A.rows()) {
    fail(ErrorCode::InvalidParams, "series factors do not conform with A");
  }
  if (!(s_max >= 0.0) || !std::isfinite(s_max)) fail(ErrorCode::InvalidParams, "series range must be finite and >= 0");

  AlphaPowerSeries series;
  series.alpha_ = alpha;
  series.beta_ = beta;
  series.s_max_ = s_max;
  series.rows_ = left.rows();
  series.cols_ = right.cols();

  const long double x_max = s_max > 0.0 ? std::pow(static_cast<long double>(s_max), static_cast<long double>(alpha)) : 0.0L;
  const LMatrix Al = A.cast<long double>();
  const LMatrix Ll = left.cast<long double>();
  const long double left_norm = Ll.norm();
  LMatrix power_r = right.cast<long double>();  // A^k R
  long double xk = 1.0L;
  long double peak = 0.0L;
  int quiet = 0;
  for (int k = 0; k < pol.max_terms; ++k) {
    const long double rg = rgamma(k * static_cast<long double>(alpha) + beta);
    series.coeffs_.push_back(Ll * power_r * rg);
    const long double pn = power_r.norm();
    if (pn == 0.0L || (k > 0 && x_max == 0.0L)) return series;
    const long double bound = left_norm * pn * std::fabs(rg) * xk;
    peak = std::max(peak, bound);
    quiet = bound <= 1e-20L * peak ? quiet + 1 : 0;
    if (quiet >= 2) {
      const long double end = (series.at_power(x_max).cast<long double>()).norm();
      if (cancelled(peak, end)) {
        std::ostringstream os;
        os << "E_{" << alpha << "," << beta << "}(A s^alpha) on [0," << s_max << "]";
        fail_cancellation(os.str(), peak, end);
      }
      return series;
    }
    power_r = Al * power_r;
    xk *= x_max;
  }
  std::ostringstream os;
  os << "series for E_{" << alpha << "," << beta << "}(A s^alpha) on [0," << s_max << "] needs more than "
     << pol.max_terms << " terms";
  fail(ErrorCode::NonConvergence, os.str());
}

AlphaPowerSeries AlphaPowerSeries::mittag_leffler(const Matrix& A, double alpha, double beta, double s_max,
                                                  const SeriesPolicy& pol) {
  const Matrix I = Matrix::Identity(A.rows(), A.cols());
  return mittag_leffler(A, alpha, beta, s_max, I, I, pol);
}

AlphaPowerSeries AlphaPowerSeries::constant(const Matrix& value, double alpha) {
  AlphaPowerSeries series;
  series.alpha_ = alpha;
  series.beta_ = 1.0;
  series.s_max_ = std::numeric_limits<double>::infinity();
  series.rows_ = value.rows();
  series.cols_ = value.cols();
  series.coeffs_.push_back(value.cast<long double>());
  return series;
}

Matrix AlphaPowerSeries::at(double s) const {
  if (s < 0.0) fail(ErrorCode::DomainError, "power series evaluated at negative s");
  const long double x = s == 0.0 ? 0.0L : std::pow(static_cast<long double>(s), static_cast<long double>(alpha_));
  return at_power(x);
}

Matrix AlphaPowerSeries::at_power(long double x) const {
  if (coeffs_.empty()) return Matrix::Zero(rows_, cols_);
  LMatrix acc = coeffs_.back();
  for (int k = terms() - 2; k >= 0; --k) {
    acc *= x;
    acc += coeffs_[static_cast<std::size_t>(k)];
  }
  return acc.cast<double>();
}

Vector AlphaPowerSeries::apply_power(long double x, const Vector& v) const {
  if (coeffs_.empty()) return Vector::Zero(rows_);
  long double acc[16];
  std::vector<long double> heap;
  long double* out = acc;
  if (rows_ > 16) {
    heap.resize(static_cast<std::size_t>(rows_));
    out = heap.data();
  }
  detail::horner_apply(coeffs_, x, v, out);
  Vector r(rows_);
  for (Eigen::Index i = 0; i < rows_; ++i) r(i) = static_cast<double>(out[i]);
  return r;
}

}  // namespace fracctl
