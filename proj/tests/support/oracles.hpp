#pragma once

// Reference implementations that share no code with the library: 50-digit
// series, a first-order Grunwald-Letnikov integrator and classical RK4.

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

#include <functional>
#include <vector>

namespace fracctl::oracle {

using mp50 = boost::multiprecision::cpp_dec_float_50;

/// E_{alpha,beta}(z) summed in 50 digits until the terms drop below 1e-45.
inline mp50 ml(mp50 alpha, mp50 beta, mp50 z) {
  mp50 sum = 0, zk = 1;
  const mp50 eps("1e-45");
  for (int k = 0; k < 5000; ++k) {
    const mp50 term = zk / boost::math::tgamma(alpha * k + beta);
    sum += term;
    if (k > 3 && abs(term) < eps * (1 + abs(sum))) break;
    zk *= z;
  }
  return sum;
}

inline double ml_d(double alpha, double beta, double z) { return static_cast<double>(ml(alpha, beta, z)); }

/// E_{alpha,beta}(M) by the matrix series in 50 digits.
inline Eigen::MatrixXd ml_matrix(double alpha, double beta, const Eigen::MatrixXd& M) {
  using MM = Eigen::Matrix<mp50, Eigen::Dynamic, Eigen::Dynamic>;
  const MM Mm = M.cast<mp50>();
  MM sum = MM::Zero(M.rows(), M.cols());
  MM power = MM::Identity(M.rows(), M.cols());
  const mp50 eps("1e-45");
  for (int k = 0; k < 5000; ++k) {
    const MM term = power / boost::math::tgamma(mp50(alpha) * k + mp50(beta));
    sum += term;
    mp50 tn = 0, sn = 0;
    for (Eigen::Index i = 0; i < term.size(); ++i) {
      tn = std::max(tn, mp50(abs(term.data()[i])));
      sn = std::max(sn, mp50(abs(sum.data()[i])));
    }
    if (k > 3 && tn < eps * (1 + sn)) break;
    power = power * Mm;
  }
  Eigen::MatrixXd out(M.rows(), M.cols());
  for (Eigen::Index i = 0; i < M.size(); ++i) out.data()[i] = static_cast<double>(sum.data()[i]);
  return out;
}

/// Grunwald-Letnikov scheme for ^C D^alpha x = A x + B u(t), x(0) = a:
/// sum_j w_j (x_{i-j} - a) = h^alpha (A x_i + B u(t_i)), implicit, O(h).
inline std::vector<Eigen::VectorXd> grunwald_letnikov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                                      double alpha, const Eigen::VectorXd& a,
                                                      const std::function<Eigen::VectorXd(double)>& u, double T,
                                                      int N) {
  const double h = T / N;
  std::vector<double> w(static_cast<std::size_t>(N) + 1);
  w[0] = 1.0;
  for (int j = 1; j <= N; ++j) w[j] = w[j - 1] * (1.0 - (alpha + 1.0) / j);
  const double ha = std::pow(h, alpha);
  const Eigen::Index n = A.rows();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(n, n) - ha * A);
  std::vector<Eigen::VectorXd> x(static_cast<std::size_t>(N) + 1, a);
  for (int i = 1; i <= N; ++i) {
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(n);
    for (int j = 1; j <= i; ++j) hist += w[j] * (x[i - j] - a);
    x[i] = a + lu.solve(ha * (A * a + B * u(i * h)) - hist);
  }
  return x;
}

/// Classical RK4 for x' = A x + B u(t).
inline Eigen::VectorXd rk4(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::VectorXd& a,
                           const std::function<Eigen::VectorXd(double)>& u, double T, int N) {
  const double h = T / N;
  Eigen::VectorXd x = a;
  auto f = [&](double t, const Eigen::VectorXd& y) -> Eigen::VectorXd { return A * y + B * u(t); };
  for (int i = 0; i < N; ++i) {
    const double t = i * h;
    const Eigen::VectorXd k1 = f(t, x);
    const Eigen::VectorXd k2 = f(t + h / 2, x + h / 2 * k1);
    const Eigen::VectorXd k3 = f(t + h / 2, x + h / 2 * k2);
    const Eigen::VectorXd k4 = f(t + h, x + h * k3);
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

/// Simpson's rule on [lo, hi] with N (even) panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int N) {
  const double h = (hi - lo) / N;
  double s = f(lo) + f(hi);
  for (int i = 1; i < N; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return s * h / 3;
}

}  // namespace fracctl::oracle
