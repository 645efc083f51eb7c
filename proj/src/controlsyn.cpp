#include "fracctl/controlsyn.hpp"

#include "fracctl/errors.hpp"
#include "numeric_detail.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace fracctl {

namespace {

using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double max_abs(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

// One pass of the graded composite rule for the neutralized Gramian integrand.
Matrix gramian_pass(const AlphaPowerSeries& kernel, double alpha, double T, const QuadratureSettings& q) {
  const quad::Rule rule = quad::composite(quad::graded_toward_zero(T, q.ratio, q.levels, q.bulk_panels), q.order);
  const Eigen::Index n = kernel.rows();
  LMatrix acc = LMatrix::Zero(n, n);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const long double x = std::pow(static_cast<long double>(rule.nodes[i]), static_cast<long double>(alpha));
    const LMatrix K = kernel.at_power(x).cast<long double>();
    acc.noalias() += static_cast<long double>(rule.weights[i]) * (K * K.transpose());
  }
  const Matrix Q = acc.cast<double>();
  return 0.5 * (Q + Q.transpose());
}

// Energy of a piecewise-linear control, panel by panel in s = T - t.
double sampled_energy(const GridFunction& u, double alpha) {
  const TimeGrid& g = u.grid;
  const double T = g.t1;
  const long double beta = 2.0L * alpha - 1.0L;  // s^{beta-1} is the weight
  const quad::Rule& gl = quad::gauss_legendre(12);
  detail::CompensatedSum acc;
  for (int j = 0; j < g.steps; ++j) {
    const Vector u_far = u.values.row(j).transpose();    // at s = d2
    const Vector u_near = u.values.row(j + 1).transpose();  // at s = d1
    const long double d1 = j + 1 == g.steps ? 0.0L : static_cast<long double>(T) - g.node(j + 1);
    const long double d2 = static_cast<long double>(T) - g.node(j);
    const long double H = d2 - d1;
    if (d1 > 0.0L) {
      const long double mid = 0.5L * (d1 + d2);
      const long double half = 0.5L * H;
      for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
        const long double s = mid + half * gl.nodes[q];
        const long double lam = (s - d1) / H;
        const Vector us = ((1.0L - lam) * u_near.cast<long double>() + lam * u_far.cast<long double>()).cast<double>();
        acc.add(half * gl.weights[q] * std::pow(s, beta - 1.0L) * static_cast<long double>(us.squaredNorm()));
      }
      continue;
    }
    // Last panel touches s = 0: u(s) = p + q s, integrate the moments exactly.
    const LVector p = u_near.cast<long double>();
    const LVector q = (u_far - u_near).cast<long double>() / H;
    const long double pp = p.squaredNorm();
    if (pp > 0.0L) {
      if (beta <= 0.0L) return std::numeric_limits<double>::infinity();
      acc.add(pp * std::pow(H, beta) / beta);
    }
    acc.add(2.0L * p.dot(q) * std::pow(H, beta + 1.0L) / (beta + 1.0L));
    acc.add(q.squaredNorm() * std::pow(H, beta + 2.0L) / (beta + 2.0L));
  }
  return static_cast<double>(acc.value());
}

double weighted_energy_pass(const ControlSignal& u, double alpha, double T, const QuadratureSettings& q) {
  const quad::Rule rule = quad::composite(quad::graded_both_ends(T, q.ratio, q.levels, q.bulk_panels), q.order);
  detail::CompensatedSum acc;
  if (u.has_weighted_form()) {
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      acc.add(rule.weights[i] * u.weighted(rule.nodes[i], alpha).squaredNorm());
    }
    return static_cast<double>(acc.value());
  }
  // Plain u: integrate in the time-to-go s. When u(T) != 0 the weight
  // s^{2 alpha - 2} is removed by s = w^p, p = 1 / (2 alpha - 1).
  const bool substitute = alpha > 0.5 && alpha < 1.0 && !u.evaluate(T).isZero(0.0);
  const double p = substitute ? 1.0 / (2.0 * alpha - 1.0) : 1.0;
  const double W = substitute ? std::pow(T, 1.0 / p) : T;
  const quad::Rule wrule =
      substitute ? quad::composite(quad::graded_both_ends(W, q.ratio, q.levels, q.bulk_panels), q.order) : rule;
  for (std::size_t i = 0; i < wrule.nodes.size(); ++i) {
    const double w = wrule.nodes[i];
    const double s = substitute ? std::min(T, std::pow(w, p)) : w;
    const double uu = u.evaluate(std::max(0.0, T - s)).squaredNorm();
    acc.add(wrule.weights[i] * (substitute ? p * uu : std::pow(s, 2.0 * alpha - 2.0) * uu));
  }
  return static_cast<double>(acc.value());
}

// Trapezoid integral of a scalar grid function.
double trapezoid(const GridFunction& f) {
  detail::CompensatedSum acc;
  const int N = f.grid.steps;
  for (int i = 0; i <= N; ++i) acc.add((i == 0 || i == N ? 0.5 : 1.0) * f.values(i, 0));
  return static_cast<double>(acc.value() * f.grid.h());
}

SynthesisResult base_result(const SteeringProblem& prob, Method method, const Vector& f) {
  SynthesisResult r;
  r.method = method;
  r.f_T = f;
  r.alpha = prob.sys.alpha;
  r.T = prob.T;
  r.rcond = kNaN;
  return r;
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

nlohmann::json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

nlohmann::json to_json(const Vector& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(number_or_null(v(i)));
  return j;
}

nlohmann::json to_json(const Matrix& M) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) j.push_back(to_json(Vector(M.row(r).transpose())));
  return j;
}

}  // namespace

GramianResult gramian(const FracSystem& sys, double T, const QuadratureSettings& quad, const SeriesPolicy& pol) {
  sys.validate();
  quad.validate();
  if (!(T > 0.0) || !std::isfinite(T)) fail(ErrorCode::InvalidParams, "horizon T must be positive");
  const Matrix I = Matrix::Identity(sys.n(), sys.n());
  const auto kernel = AlphaPowerSeries::mittag_leffler(sys.A, sys.alpha, sys.alpha, T, I, sys.B, pol);

  QuadratureSettings q = quad;
  Matrix coarse = gramian_pass(kernel, sys.alpha, T, q);
  GramianResult res;
  bool converged = false;
  for (int d = 0; d < std::max(1, quad.max_doublings); ++d) {
    q = q.refined();
    const Matrix fine = gramian_pass(kernel, sys.alpha, T, q);
    const double scale = max_abs(fine);
    res.quad_err = scale > 0.0 ? max_abs(fine - coarse) / scale : 0.0;
    coarse = fine;
    if (res.quad_err <= quad.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "Gramian quadrature did not reach tol " << quad.tol << " (last change " << res.quad_err << ")";
    fail(ErrorCode::NonConvergence, os.str());
  }
  res.Q = coarse;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(res.Q, Eigen::EigenvaluesOnly);
  res.eigenvalues = eig.eigenvalues();
  const double lmax = res.eigenvalues.maxCoeff();
  const double lmin = res.eigenvalues.minCoeff();
  res.rcond = lmax > 0.0 ? std::max(0.0, lmin) / lmax : 0.0;
  return res;
}

Matrix pseudo_inverse(const Matrix& M) {
  const Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  const double cut = static_cast<double>(std::max(M.rows(), M.cols())) * smax *
                     std::numeric_limits<double>::epsilon() * 64.0;
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = s(i) > cut ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

int numerical_rank(const Matrix& M) {
  if (M.size() == 0) return 0;
  const Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& s = svd.singularValues();
  const double cut = static_cast<double>(M.rows()) * s(0) * std::numeric_limits<double>::epsilon() * 64.0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > cut ? 1 : 0;
  return r;
}

RankData kalman_rank(const FracSystem& sys) {
  sys.validate();
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  RankData rd;
  rd.kalman.resize(n, n * m);
  Matrix block = sys.B;
  for (Eigen::Index j = 0; j < n; ++j) {
    rd.kalman.middleCols(j * m, m) = block;
    block = sys.A * block;
  }
  rd.singular_values = Eigen::JacobiSVD<Matrix>(rd.kalman).singularValues();
  rd.rank = numerical_rank(rd.kalman);
  if (rd.rank == n) {
    const Matrix K = pseudo_inverse(rd.kalman);  // nm x n, minimum-norm right inverse
    for (Eigen::Index j = 0; j < n; ++j) rd.K_blocks.push_back(K.middleRows(j * m, m));
  }
  return rd;
}

void SteeringProblem::validate() const {
  sys.validate();
  series.validate();
  quad.validate();
  if (a.size() != sys.n() || b.size() != sys.n()) fail(ErrorCode::InvalidParams, "a and b must have n entries");
  if (!a.allFinite() || !b.allFinite()) fail(ErrorCode::InvalidParams, "a and b must be finite");
  if (!(T > 0.0) || !std::isfinite(T)) fail(ErrorCode::InvalidParams, "horizon T must be positive");
  grid.validate();
  if (grid.t0 != 0.0 || std::fabs(grid.t1 - T) > 1e-12 * T) fail(ErrorCode::InvalidParams, "grid must span [0, T]");
}

const char* to_string(Method method) noexcept {
  switch (method) {
    case Method::MinEnergy: return "min-energy";
    case Method::Pinv: return "pinv";
    case Method::RankBased: return "rank";
  }
  return "unknown";
}

std::optional<Method> method_from_string(const std::string& name) {
  if (name == "min-energy") return Method::MinEnergy;
  if (name == "pinv") return Method::Pinv;
  if (name == "rank") return Method::RankBased;
  return std::nullopt;
}

SynthesisResult synthesize_min_energy(const SteeringProblem& prob) {
  prob.validate();
  const FracSystem& sys = prob.sys;
  const Vector f = state_transition_s0(sys.A, sys.alpha, prob.T, prob.series) * prob.a - prob.b;
  SynthesisResult r = base_result(prob, Method::MinEnergy, f);
  if (f.isZero(0.0)) {
    r.control = ControlSignal::zero(sys.m(), prob.T);
    return r;
  }
  const GramianResult G = gramian(sys, prob.T, prob.quad, prob.series);
  r.gramian = G.Q;
  r.rcond = G.rcond;
  if (!(G.rcond >= kSingularGramianRcond)) {
    std::ostringstream os;
    os << "Gramian is singular (rcond " << G.rcond << "); the system is not controllable";
    fail(ErrorCode::SingularGramian, os.str());
  }
  Vector c;
  const Eigen::LLT<Matrix> llt(G.Q);
  if (llt.info() == Eigen::Success) {
    c = llt.solve(f);
  } else {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(G.Q);
    const Vector& l = eig.eigenvalues();
    Vector inv = Vector::Zero(l.size());
    for (Eigen::Index i = 0; i < l.size(); ++i) inv(i) = l(i) > kSingularGramianRcond * l.maxCoeff() ? 1.0 / l(i) : 0.0;
    c = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * f;
  }
  r.energy = c.dot(f);
  r.control = ControlSignal::min_energy(sys, prob.T, c, prob.series);
  return r;
}

SynthesisResult synthesize_pinv(const SteeringProblem& prob) {
  prob.validate();
  const FracSystem& sys = prob.sys;
  if (numerical_rank(sys.B) < sys.n()) fail(ErrorCode::RankDeficientB, "pinv control needs rank B = n");
  const Vector f = state_transition_s0(sys.A, sys.alpha, prob.T, prob.series) * prob.a - prob.b;
  SynthesisResult r = base_result(prob, Method::Pinv, f);
  if (f.isZero(0.0)) {
    r.control = ControlSignal::zero(sys.m(), prob.T);
    return r;
  }
  r.control = ControlSignal::pinv(sys, prob.T, pseudo_inverse(sys.B), -f, prob.series);
  r.energy = modified_energy(r.control, sys.alpha, prob.T, prob.quad);
  return r;
}

GridFunction default_phi(const TimeGrid& grid, double alpha) {
  grid.validate();
  const double T = grid.t1 - grid.t0;
  const long double g = alpha + 1.0L;
  // int_0^T t^g (T-t)^g dt = T^{2g+1} B(g+1, g+1)
  const long double beta_fn = std::exp(2.0L * std::lgamma(g + 1.0L) - std::lgamma(2.0L * g + 2.0L));
  const long double c = 1.0L / (std::pow(static_cast<long double>(T), 2.0L * g + 1.0L) * beta_fn);
  return GridFunction::sample(grid, [&](double t) {
    const long double s = t - grid.t0;
    return static_cast<double>(c * std::pow(s, g) * std::pow(std::max(0.0L, T - s), g));
  });
}

SynthesisResult synthesize_rank_based(const SteeringProblem& prob, const GridFunction* phi) {
  prob.validate();
  const FracSystem& sys = prob.sys;
  const RankData rd = kalman_rank(sys);
  if (rd.rank < sys.n()) {
    std::ostringstream os;
    os << "Kalman rank " << rd.rank << " < n = " << sys.n();
    fail(ErrorCode::RankDeficient, os.str());
  }
  const Vector f = state_transition_s0(sys.A, sys.alpha, prob.T, prob.series) * prob.a - prob.b;
  SynthesisResult r = base_result(prob, Method::RankBased, f);
  const TimeGrid& grid = prob.grid;
  if (f.isZero(0.0)) {
    GridFunction zero;
    zero.grid = grid;
    zero.values = Matrix::Zero(grid.nodes(), sys.m());
    r.control = ControlSignal::rank_based(zero);
    return r;
  }

  GridFunction weight = phi ? *phi : default_phi(grid, sys.alpha);
  weight.validate();
  if (weight.dim() != 1 || weight.grid.steps != grid.steps || weight.grid.t1 != grid.t1) {
    fail(ErrorCode::InvalidParams, "phi must be a scalar function on the problem grid");
  }
  const double mass = trapezoid(weight);
  if (!(std::fabs(mass) > 0.0)) fail(ErrorCode::InvalidParams, "phi has zero integral");
  weight.values /= mass;

  // psi(t) = g(T - t) v phi(t), with S(T - t) g(T - t) = I.
  const Vector v = -f;
  GridFunction psi;
  psi.grid = grid;
  psi.values = Matrix::Zero(grid.nodes(), sys.n());
  for (int i = 0; i <= grid.steps; ++i) {
    const double s = i == grid.steps ? 0.0 : prob.T - grid.node(i);
    Vector gi;
    if (s > 0.0) {
      gi = inverse_kernel_g(sys.A, sys.alpha, s, prob.series) * v;
    } else {
      gi = sys.alpha < 1.0 ? Vector::Zero(sys.n()) : v;
    }
    psi.values.row(i) = (weight.values(i, 0) * gi).transpose();
  }

  GridFunction u;
  u.grid = grid;
  u.values = Matrix::Zero(grid.nodes(), sys.m());
  GridFunction term = psi;
  for (std::size_t j = 0; j < rd.K_blocks.size(); ++j) {
    if (j > 0) term = sys.alpha < 1.0 ? rl_derivative_left(term, sys.alpha) : classical_derivative(term);
    u.values += term.values * rd.K_blocks[j].transpose();
  }
  r.control = ControlSignal::rank_based(u);
  r.energy = modified_energy(r.control, sys.alpha, prob.T, prob.quad);
  return r;
}

SynthesisResult synthesize(const SteeringProblem& prob, Method method) {
  switch (method) {
    case Method::MinEnergy: return synthesize_min_energy(prob);
    case Method::Pinv: return synthesize_pinv(prob);
    case Method::RankBased: return synthesize_rank_based(prob);
  }
  fail(ErrorCode::InvalidParams, "unknown synthesis method");
}

double modified_energy(const ControlSignal& u, double alpha, double T, const QuadratureSettings& quad) {
  quad.validate();
  if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidParams, "alpha must lie in (0, 1]");
  if (!(T > 0.0)) fail(ErrorCode::InvalidParams, "horizon T must be positive");
  if (u.is_sampled()) {
    const GridFunction& s = u.samples();
    if (s.grid.t0 != 0.0 || std::fabs(s.grid.t1 - T) > 1e-12 * T) fail(ErrorCode::InvalidParams, "control grid must span [0, T]");
    return sampled_energy(s, alpha);
  }
  if (!u.has_weighted_form() && alpha <= 0.5 && !u.evaluate(T).isZero(0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  QuadratureSettings q = quad;
  double coarse = weighted_energy_pass(u, alpha, T, q);
  double change = 0.0;
  for (int d = 0; d < std::max(1, quad.max_doublings); ++d) {
    q = q.refined();
    const double fine = weighted_energy_pass(u, alpha, T, q);
    change = fine != 0.0 ? std::fabs(fine - coarse) / std::fabs(fine) : std::fabs(fine - coarse);
    coarse = fine;
    if (change <= quad.tol) return fine;
  }
  std::ostringstream os;
  os << "modified energy quadrature did not reach tol " << quad.tol << " (last change " << change << ")";
  fail(ErrorCode::NonConvergence, os.str());
}

double terminal_relative_error(const Vector& xT, const Vector& a, const Vector& b, const Vector& S0a) {
  const double err = (xT - b).lpNorm<Eigen::Infinity>();
  const double scale = std::max({a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>(), S0a.lpNorm<Eigen::Infinity>()});
  return scale > 0.0 ? err / scale : err;
}

SteeringReport verify_steering(const SteeringProblem& prob, const SynthesisResult& result) {
  prob.validate();
  const FracSystem& sys = prob.sys;
  SteeringReport rep;
  SimulationOptions opts;
  opts.series = prob.series;
  const Trajectory traj = simulate(sys, prob.a, result.control, prob.grid, opts);
  rep.terminal_state = traj.terminal();
  const Vector S0a = state_transition_s0(sys.A, sys.alpha, prob.T, prob.series) * prob.a;
  rep.terminal_abs = (rep.terminal_state - prob.b).lpNorm<Eigen::Infinity>();
  rep.terminal_rel = terminal_relative_error(rep.terminal_state, prob.a, prob.b, S0a);
  rep.energy_quadrature = modified_energy(result.control, sys.alpha, prob.T, prob.quad);
  if (result.method == Method::MinEnergy) {
    rep.energy_gramian = result.energy;
    rep.energy_mismatch = std::fabs(rep.energy_quadrature - rep.energy_gramian);
  } else {
    rep.energy_gramian = kNaN;
    rep.energy_mismatch = kNaN;
  }
  rep.caputo_residual = caputo_residual(sys, traj, result.control);
  return rep;
}

double cl_trend_energy(int L, double T, const Vector& a, const Vector& b) {
  if (L < 1) fail(ErrorCode::InvalidParams, "c_L needs L >= 1");
  if (!(T > 0.0)) fail(ErrorCode::InvalidParams, "horizon T must be positive");
  if (a.size() != 2 || b.size() != 2) fail(ErrorCode::InvalidParams, "the rotation system has n = 2");
  // In w = sqrt(s) every entry is a polynomial times a Gaussian.
  const std::vector<quad::Panel> panels = [&] {
    std::vector<quad::Panel> p;
    const double W = std::sqrt(T);
    for (int k = 0; k < 16; ++k) p.push_back({W * k / 16.0, W * (k + 1) / 16.0});
    return p;
  }();
  const quad::Rule rule = quad::composite(panels, 48);
  Eigen::Matrix<long double, 2, 2> Q = Eigen::Matrix<long double, 2, 2>::Zero();
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const long double w = rule.nodes[i];
    const long double s = w * w;
    const long double cl = cl_truncation(L, static_cast<double>(s));
    const long double sn = std::exp(-s);
    const long double jac = 2.0L * w * s * rule.weights[i];  // s ds
    Q(0, 0) += jac * sn * sn;
    Q(0, 1) += jac * sn * cl;
    Q(1, 1) += jac * cl * cl;
  }
  Q(1, 0) = Q(0, 1);
  const Matrix A = (Matrix(2, 2) << 0.0, 1.0, -1.0, 0.0).finished();
  const Vector f = state_transition_s0(A, 0.5, T) * a - b;
  // Explicit 2x2 inverse: the entries span ~30 decades for large L, which
  // rank-revealing solvers would treat as singular.
  const long double det = Q(0, 0) * Q(1, 1) - Q(0, 1) * Q(0, 1);
  const long double f1 = f(0);
  const long double f2 = f(1);
  return static_cast<double>((f1 * f1 * Q(1, 1) - 2.0L * f1 * f2 * Q(0, 1) + f2 * f2 * Q(0, 0)) / det);
}

void write_synthesis_json(std::ostream& os, const SynthesisResult& result, const TimeGrid& grid) {
  nlohmann::json j;
  j["method"] = to_string(result.method);
  j["alpha"] = result.alpha;
  j["T"] = result.T;
  j["f_T"] = to_json(result.f_T);
  j["energy"] = number_or_null(result.energy);
  j["gramian"] = to_json(result.gramian);
  j["rcond"] = number_or_null(result.rcond);

  const ControlSignal& u = result.control;
  nlohmann::json ctrl;
  ctrl["kind"] = to_string(u.kind());
  ctrl["m"] = u.dim();
  if (u.kind() == ControlSignal::Kind::MinEnergy || u.kind() == ControlSignal::Kind::Pinv) {
    ctrl["coefficient"] = to_json(u.coefficient());
  }
  const GridFunction s = u.sample(grid);
  ctrl["N"] = s.grid.steps;
  nlohmann::json t = nlohmann::json::array();
  for (int i = 0; i < s.grid.nodes(); ++i) t.push_back(s.grid.node(i));
  ctrl["t"] = std::move(t);
  ctrl["u"] = to_json(s.values);
  j["control"] = std::move(ctrl);
  os << j.dump(2) << '\n';
}

void write_control_csv(std::ostream& os, const ControlSignal& u, const TimeGrid& grid) {
  const GridFunction s = u.sample(grid);
  os << "t";
  for (Eigen::Index j = 0; j < s.dim(); ++j) os << ",u" << j + 1;
  os << '\n';
  for (int i = 0; i < s.grid.nodes(); ++i) {
    os << format_number(s.grid.node(i));
    for (Eigen::Index j = 0; j < s.dim(); ++j) os << ',' << format_number(s.values(i, j));
    os << '\n';
  }
}

}  // namespace fracctl
