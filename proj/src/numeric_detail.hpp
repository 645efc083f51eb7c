#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace fracctl::detail {

// Neumaier's variant of Kahan summation.
struct CompensatedSum {
  long double sum = 0.0L;
  long double carry = 0.0L;

  void add(long double x) {
    const long double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  long double value() const { return sum + carry; }
};

// b^p - a^p for 0 <= a <= b without losing digits when a is close to b.
inline long double pow_diff(long double b, long double a, long double p) {
  if (a <= 0.0L) return std::pow(b, p);
  return -std::pow(b, p) * std::expm1(p * std::log1p(-(b - a) / b));
}

// out = sum_k coeffs[k] v x^k by Horner. Plain loops: the matrices are tiny
// and Eigen's generic long double kernels cost more than the arithmetic.
template <class Coeffs, class In>
void horner_apply(const Coeffs& coeffs, long double x, const In& v, long double* out) {
  const auto& last = coeffs.back();
  const Eigen::Index rows = last.rows();
  const Eigen::Index cols = last.cols();
  for (Eigen::Index i = 0; i < rows; ++i) out[i] = 0.0L;
  for (auto k = coeffs.size(); k-- > 0;) {
    const long double* c = coeffs[k].data();
    for (Eigen::Index i = 0; i < rows; ++i) out[i] *= x;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const long double vj = v[j];
      for (Eigen::Index i = 0; i < rows; ++i) out[i] += c[i + j * rows] * vj;
    }
  }
}

}  // namespace fracctl::detail
