#include "fracctl/fraccalc.hpp"

#include "fracctl/errors.hpp"
#include "fracctl/quadrature.hpp"
#include "numeric_detail.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fracctl {

namespace {

using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

void check_fractional_order(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    std::ostringstream os;
    os << "derivative order must lie in (0, 1), got " << alpha;
    fail(ErrorCode::InvalidOrder, os.str());
  }
}

GridFunction like(const GridFunction& f) {
  GridFunction out;
  out.grid = f.grid;
  out.values = Matrix::Zero(f.values.rows(), f.values.cols());
  return out;
}

GridFunction reversed(const GridFunction& f) {
  GridFunction out = f;
  out.values = f.values.colwise().reverse();
  return out;
}

// Moments int_{d1}^{d2} s^{beta-1} ds and int_{d1}^{d2} s^beta ds.
void power_moments(long double beta, long double d1, long double d2, long double& m0, long double& m1) {
  m0 = detail::pow_diff(d2, d1, beta) / beta;
  m1 = detail::pow_diff(d2, d1, beta + 1.0L) / (beta + 1.0L);
}

}  // namespace

void TimeGrid::validate() const {
  if (!(t1 > t0) || !std::isfinite(t0) || !std::isfinite(t1)) fail(ErrorCode::InvalidParams, "time grid needs t1 > t0");
  if (steps < 2) fail(ErrorCode::InvalidParams, "time grid needs at least 2 steps");
}

GridFunction GridFunction::sample(const TimeGrid& grid, const std::function<double(double)>& f) {
  grid.validate();
  GridFunction g;
  g.grid = grid;
  g.values.resize(grid.nodes(), 1);
  for (int i = 0; i < grid.nodes(); ++i) g.values(i, 0) = f(grid.node(i));
  return g;
}

GridFunction GridFunction::sample(const TimeGrid& grid, Eigen::Index dim, const std::function<Vector(double)>& f) {
  grid.validate();
  GridFunction g;
  g.grid = grid;
  g.values.resize(grid.nodes(), dim);
  for (int i = 0; i < grid.nodes(); ++i) {
    const Vector v = f(grid.node(i));
    if (v.size() != dim) fail(ErrorCode::InvalidParams, "sampled function returned the wrong dimension");
    g.values.row(i) = v.transpose();
  }
  return g;
}

void GridFunction::validate() const {
  grid.validate();
  if (values.rows() != grid.nodes()) fail(ErrorCode::InvalidParams, "grid function length does not match its grid");
  if (!values.allFinite()) fail(ErrorCode::InvalidParams, "grid function has non-finite values");
}

Vector GridFunction::at(double t) const {
  const double tol = 1e-12 * (grid.t1 - grid.t0);
  if (t < grid.t0 - tol || t > grid.t1 + tol) fail(ErrorCode::DomainError, "interpolation outside the grid");
  const double x = std::clamp((t - grid.t0) / grid.h(), 0.0, static_cast<double>(grid.steps));
  const int i = std::min(static_cast<int>(x), grid.steps - 1);
  const double frac = x - i;
  return ((1.0 - frac) * values.row(i) + frac * values.row(i + 1)).transpose();
}

LagWeights power_lag_weights(long double beta, int max_lag) {
  LagWeights w;
  w.far.assign(static_cast<std::size_t>(max_lag) + 1, 0.0L);
  w.near.assign(static_cast<std::size_t>(max_lag) + 1, 0.0L);
  for (int lag = 1; lag <= max_lag; ++lag) {
    long double m0 = 0.0L;
    long double m1 = 0.0L;
    power_moments(beta, lag - 1.0L, static_cast<long double>(lag), m0, m1);
    w.far[static_cast<std::size_t>(lag)] = m1 - (lag - 1.0L) * m0;
    w.near[static_cast<std::size_t>(lag)] = lag * m0 - m1;
  }
  return w;
}

GridFunction frac_integral_left(const GridFunction& f, double alpha) {
  f.validate();
  if (alpha < 0.0 || !std::isfinite(alpha)) fail(ErrorCode::InvalidOrder, "fractional integral order must be >= 0");
  if (alpha == 0.0) return f;

  const int N = f.grid.steps;
  const LagWeights w = power_lag_weights(alpha, N);
  const long double scale = std::pow(static_cast<long double>(f.grid.h()), static_cast<long double>(alpha)) *
                            rgamma(static_cast<long double>(alpha));
  GridFunction out = like(f);
  for (Eigen::Index c = 0; c < f.dim(); ++c) {
    for (int i = 1; i <= N; ++i) {
      detail::CompensatedSum acc;
      for (int j = 0; j < i; ++j) {
        const auto lag = static_cast<std::size_t>(i - j);
        acc.add(w.far[lag] * f.values(j, c) + w.near[lag] * f.values(j + 1, c));
      }
      out.values(i, c) = static_cast<double>(scale * acc.value());
    }
  }
  return out;
}

GridFunction frac_integral_right(const GridFunction& f, double alpha) {
  return reversed(frac_integral_left(reversed(f), alpha));
}

GridFunction classical_derivative(const GridFunction& f, int order) {
  f.validate();
  if (order != 2 && order != 4) fail(ErrorCode::InvalidParams, "difference order must be 2 or 4");
  const int N = f.grid.steps;
  if (order == 4 && N < 4) fail(ErrorCode::InvalidParams, "fourth-order differences need at least 4 steps");
  const double h = f.grid.h();
  GridFunction out = like(f);
  const Matrix& v = f.values;
  for (Eigen::Index c = 0; c < f.dim(); ++c) {
    if (order == 2) {
      out.values(0, c) = (-3.0 * v(0, c) + 4.0 * v(1, c) - v(2, c)) / (2.0 * h);
      for (int i = 1; i < N; ++i) out.values(i, c) = (v(i + 1, c) - v(i - 1, c)) / (2.0 * h);
      out.values(N, c) = (3.0 * v(N, c) - 4.0 * v(N - 1, c) + v(N - 2, c)) / (2.0 * h);
      continue;
    }
    const double d = 12.0 * h;
    out.values(0, c) = (-25.0 * v(0, c) + 48.0 * v(1, c) - 36.0 * v(2, c) + 16.0 * v(3, c) - 3.0 * v(4, c)) / d;
    out.values(1, c) = (-3.0 * v(0, c) - 10.0 * v(1, c) + 18.0 * v(2, c) - 6.0 * v(3, c) + v(4, c)) / d;
    for (int i = 2; i <= N - 2; ++i) {
      out.values(i, c) = (v(i - 2, c) - 8.0 * v(i - 1, c) + 8.0 * v(i + 1, c) - v(i + 2, c)) / d;
    }
    out.values(N - 1, c) = (3.0 * v(N, c) + 10.0 * v(N - 1, c) - 18.0 * v(N - 2, c) + 6.0 * v(N - 3, c) - v(N - 4, c)) / d;
    out.values(N, c) = (25.0 * v(N, c) - 48.0 * v(N - 1, c) + 36.0 * v(N - 2, c) - 16.0 * v(N - 3, c) + 3.0 * v(N - 4, c)) / d;
  }
  return out;
}

GridFunction rl_derivative_left(const GridFunction& f, double alpha) {
  check_fractional_order(alpha);
  return classical_derivative(frac_integral_left(f, 1.0 - alpha));
}

GridFunction rl_compose(const GridFunction& f, double alpha, int j) {
  if (j < 0) fail(ErrorCode::InvalidParams, "composition count must be >= 0");
  check_fractional_order(alpha);
  GridFunction out = f;
  for (int k = 0; k < j; ++k) out = rl_derivative_left(out, alpha);
  return out;
}

std::vector<double> caputo_correction_exponents(double alpha, int max_corrections) {
  std::vector<double> sigmas;
  for (int j = 0; j <= 1; ++j) {
    for (int k = 0; j + k * alpha <= 2.0 - alpha + 1e-9; ++k) {
      const double s = j + k * alpha;
      if (s <= 0.0) continue;
      const bool seen = std::any_of(sigmas.begin(), sigmas.end(), [&](double x) { return std::fabs(x - s) < 1e-9; });
      if (!seen) sigmas.push_back(s);
    }
  }
  std::sort(sigmas.begin(), sigmas.end());
  if (static_cast<int>(sigmas.size()) > max_corrections) sigmas.resize(static_cast<std::size_t>(std::max(0, max_corrections)));
  return sigmas;
}

GridFunction caputo_derivative(const GridFunction& f, double alpha, const CaputoOptions& opts) {
  f.validate();
  check_fractional_order(alpha);
  const int N = f.grid.steps;
  const long double a = alpha;
  const long double g2 = rgamma(2.0L - a);
  const long double hpow = std::pow(static_cast<long double>(f.grid.h()), -a);

  // b_k = (k+1)^{1-alpha} - k^{1-alpha}
  std::vector<long double> b(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) b[static_cast<std::size_t>(k)] = detail::pow_diff(k + 1.0L, static_cast<long double>(k), 1.0L - a);

  // Unit-spacing L1 operator applied to a sequence.
  auto l1_unit = [&](const std::vector<long double>& seq, std::vector<long double>& outv) {
    outv.assign(static_cast<std::size_t>(N) + 1, 0.0L);
    for (int n = 1; n <= N; ++n) {
      detail::CompensatedSum acc;
      for (int j = 0; j < n; ++j) {
        acc.add(b[static_cast<std::size_t>(n - 1 - j)] * (seq[static_cast<std::size_t>(j + 1)] - seq[static_cast<std::size_t>(j)]));
      }
      outv[static_cast<std::size_t>(n)] = g2 * acc.value();
    }
  };

  // Starting weights W(n, j), j = 1..M, from exactness on t^sigma.
  std::vector<double> sigmas;
  if (opts.corrected) sigmas = caputo_correction_exponents(alpha, std::min(opts.max_corrections, N));
  const auto M = static_cast<Eigen::Index>(sigmas.size());
  LMatrix weights;  // M x (N+1)
  if (M > 0) {
    LMatrix V(M, M);
    LMatrix rhs(M, N + 1);
    std::vector<long double> seq(static_cast<std::size_t>(N) + 1);
    std::vector<long double> l1;
    for (Eigen::Index r = 0; r < M; ++r) {
      const long double s = sigmas[static_cast<std::size_t>(r)];
      for (Eigen::Index j = 0; j < M; ++j) V(r, j) = std::pow(static_cast<long double>(j + 1), s);
      for (int k = 0; k <= N; ++k) seq[static_cast<std::size_t>(k)] = std::pow(static_cast<long double>(k), s);
      l1_unit(seq, l1);
      const long double exact_coeff = std::tgamma(s + 1.0L) * rgamma(s + 1.0L - a);
      rhs(r, 0) = 0.0L;
      for (int n = 1; n <= N; ++n) {
        rhs(r, n) = exact_coeff * std::pow(static_cast<long double>(n), s - a) - l1[static_cast<std::size_t>(n)];
      }
    }
    weights = V.fullPivLu().solve(rhs);
  }

  GridFunction out = like(f);
  std::vector<long double> seq(static_cast<std::size_t>(N) + 1);
  std::vector<long double> l1;
  for (Eigen::Index c = 0; c < f.dim(); ++c) {
    for (int k = 0; k <= N; ++k) seq[static_cast<std::size_t>(k)] = f.values(k, c);
    l1_unit(seq, l1);
    for (int n = 1; n <= N; ++n) {
      long double v = l1[static_cast<std::size_t>(n)];
      for (Eigen::Index j = 0; j < M; ++j) {
        v += weights(j, n) * (seq[static_cast<std::size_t>(j + 1)] - seq[0]);
      }
      out.values(n, c) = static_cast<double>(hpow * v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Vector singular_convolution(const AlphaPowerSeries& kernel, const GridFunction& u, double t_eval) {
  u.validate();
  if (u.dim() != kernel.cols()) fail(ErrorCode::InvalidParams, "control dimension does not match kernel");
  const TimeGrid& g = u.grid;
  const double tol = 1e-12 * (g.t1 - g.t0);
  if (!(t_eval > g.t0) || t_eval > g.t1 + tol) fail(ErrorCode::DomainError, "convolution point outside the grid");
  t_eval = std::min(t_eval, g.t1);

  const long double alpha = kernel.alpha();
  const int K = kernel.terms();
  const Eigen::Index rows = kernel.rows();
  LVector acc = LVector::Zero(rows);
  for (int j = 0; j < g.steps; ++j) {
    const double p = g.node(j);
    if (p >= t_eval) break;
    const double q = std::min(g.node(j + 1), t_eval);
    const Vector up = u.values.row(j).transpose();
    const Vector uq = q == g.node(j + 1) ? Vector(u.values.row(j + 1).transpose()) : u.at(q);
    const long double d1 = static_cast<long double>(t_eval) - q;
    const long double d2 = static_cast<long double>(t_eval) - p;
    const long double H = q - p;
    if (!(H > 0.0L)) continue;
    const LVector upl = up.cast<long double>();
    const LVector uql = uq.cast<long double>();
    for (int k = 0; k < K; ++k) {
      const long double beta = (k + 1) * alpha;
      long double m0 = 0.0L;
      long double m1 = 0.0L;
      power_moments(beta, d1, d2, m0, m1);
      const long double wp = (m1 - d1 * m0) / H;
      const long double wq = (d2 * m0 - m1) / H;
      acc.noalias() += kernel.coefficient(k) * (wp * upl + wq * uql);
    }
  }
  return acc.cast<double>();
}

Matrix singular_convolution_nodes(const AlphaPowerSeries& kernel, const GridFunction& u) {
  u.validate();
  if (u.dim() != kernel.cols()) fail(ErrorCode::InvalidParams, "control dimension does not match kernel");
  const int N = u.grid.steps;
  const Eigen::Index rows = kernel.rows();
  const Eigen::Index cols = kernel.cols();
  const long double h = u.grid.h();
  const long double alpha = kernel.alpha();

  // Lag matrices: W_far(lag) = sum_k C_k h^{beta_k} far_{beta_k}(lag), same for near.
  std::vector<LMatrix> w_far(static_cast<std::size_t>(N) + 1, LMatrix::Zero(rows, cols));
  std::vector<LMatrix> w_near(static_cast<std::size_t>(N) + 1, LMatrix::Zero(rows, cols));
  for (int k = 0; k < kernel.terms(); ++k) {
    const long double beta = (k + 1) * alpha;
    const LagWeights lw = power_lag_weights(beta, N);
    const long double hb = std::pow(h, beta);
    const LMatrix& C = kernel.coefficient(k);
    for (int lag = 1; lag <= N; ++lag) {
      const auto l = static_cast<std::size_t>(lag);
      w_far[l] += C * (hb * lw.far[l]);
      w_near[l] += C * (hb * lw.near[l]);
    }
  }

  const LMatrix ul = u.values.cast<long double>();
  Matrix out = Matrix::Zero(N + 1, rows);
  for (int i = 1; i <= N; ++i) {
    LVector acc = LVector::Zero(rows);
    for (int j = 0; j < i; ++j) {
      const auto lag = static_cast<std::size_t>(i - j);
      acc.noalias() += w_far[lag] * ul.row(j).transpose();
      acc.noalias() += w_near[lag] * ul.row(j + 1).transpose();
    }
    out.row(i) = acc.cast<double>().transpose();
  }
  return out;
}

namespace {

// Graded rule on [0, 1] in w together with s = w^{1/alpha}; the rule for
// [0, t^alpha] is a rescaling of it.
struct ReferenceRule {
  ConvolutionSettings settings;
  long double alpha = 0.0L;
  std::vector<long double> w, weight, s;
};

const ReferenceRule& reference_rule(const ConvolutionSettings& settings, long double alpha) {
  thread_local ReferenceRule cache;
  const ConvolutionSettings& c = cache.settings;
  if (cache.alpha == alpha && !cache.w.empty() && c.order == settings.order && c.ratio == settings.ratio &&
      c.levels == settings.levels && c.bulk_panels == settings.bulk_panels) {
    return cache;
  }
  const quad::Rule rule = quad::composite(
      quad::graded_toward_zero(1.0, settings.ratio, settings.levels, settings.bulk_panels), settings.order);
  cache.settings = settings;
  cache.alpha = alpha;
  cache.w.assign(rule.nodes.begin(), rule.nodes.end());
  cache.weight.assign(rule.weights.begin(), rule.weights.end());
  cache.s.resize(cache.w.size());
  for (std::size_t q = 0; q < cache.w.size(); ++q) {
    cache.s[q] = alpha == 1.0L ? cache.w[q] : std::pow(cache.w[q], 1.0L / alpha);
  }
  return cache;
}

}  // namespace

Vector singular_convolution(const AlphaPowerSeries& kernel, const std::function<Vector(double)>& u, double t_eval,
                            const ConvolutionSettings& settings) {
  if (!(t_eval >= 0.0)) fail(ErrorCode::DomainError, "convolution point must be >= 0");
  const Eigen::Index rows = kernel.rows();
  if (t_eval == 0.0) return Vector::Zero(rows);
  const long double alpha = kernel.alpha();
  const long double w_end = std::pow(static_cast<long double>(t_eval), alpha);
  const ReferenceRule& ref = reference_rule(settings, alpha);

  LVector acc = LVector::Zero(rows);
  LVector val(rows);
  for (std::size_t q = 0; q < ref.w.size(); ++q) {
    const long double w = w_end * ref.w[q];
    const Vector uq = u(t_eval - static_cast<double>(t_eval * ref.s[q]));
    if (uq.size() != kernel.cols()) fail(ErrorCode::InvalidParams, "control dimension does not match kernel");
    detail::horner_apply(kernel.coefficients(), w, uq, val.data());
    acc.noalias() += ref.weight[q] * val;
  }
  return (acc * (w_end / alpha)).cast<double>();
}

}  // namespace fracctl
