#include "fracctl/fracsys.hpp"

#include "fracctl/errors.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace fracctl {

namespace {

constexpr double kHorizonSlack = 1e-12;

void check_finite(const Matrix& M, const char* name) {
  if (!M.allFinite()) fail(ErrorCode::InvalidParams, std::string(name) + " has non-finite entries");
}

// Distance to the horizon, clamped at 0 against rounding at t = T.
double time_to_go(double T, double t) {
  if (t < -kHorizonSlack * std::max(1.0, T) || t > T * (1.0 + kHorizonSlack)) {
    std::ostringstream os;
    os << "control evaluated at t=" << t << " outside [0, " << T << "]";
    fail(ErrorCode::DomainError, os.str());
  }
  return std::max(0.0, T - t);
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void FracSystem::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream os;
    os << "system order alpha must lie in (0, 1], got " << alpha;
    fail(ErrorCode::InvalidParams, os.str());
  }
  if (A.rows() == 0 || A.rows() != A.cols()) fail(ErrorCode::InvalidParams, "A must be square and non-empty");
  if (B.rows() != A.rows() || B.cols() == 0) fail(ErrorCode::InvalidParams, "B must have n rows and m >= 1 columns");
  if (has_output() && C.cols() != A.rows()) fail(ErrorCode::InvalidParams, "C must have n columns");
  check_finite(A, "A");
  check_finite(B, "B");
  check_finite(C, "C");
}

const char* to_string(ControlSignal::Kind kind) noexcept {
  switch (kind) {
    case ControlSignal::Kind::Sampled: return "sampled";
    case ControlSignal::Kind::MinEnergy: return "min-energy";
    case ControlSignal::Kind::Pinv: return "pinv";
    case ControlSignal::Kind::RankBased: return "rank";
    case ControlSignal::Kind::Function: return "function";
  }
  return "unknown";
}

ControlSignal ControlSignal::sampled(GridFunction u) {
  u.validate();
  if (u.grid.t0 != 0.0) fail(ErrorCode::InvalidParams, "sampled controls must start at t = 0");
  ControlSignal s;
  s.kind_ = Kind::Sampled;
  s.dim_ = u.dim();
  s.T_ = u.grid.t1;
  s.data_ = SampledData{std::move(u)};
  return s;
}

ControlSignal ControlSignal::rank_based(GridFunction u) {
  ControlSignal s = sampled(std::move(u));
  s.kind_ = Kind::RankBased;
  return s;
}

ControlSignal ControlSignal::min_energy(const FracSystem& sys, double T, const Vector& c, const SeriesPolicy& pol) {
  sys.validate();
  if (!(T > 0.0)) fail(ErrorCode::InvalidParams, "horizon T must be positive");
  if (c.size() != sys.n()) fail(ErrorCode::InvalidParams, "min-energy coefficient must have n entries");
  ControlSignal s;
  s.kind_ = Kind::MinEnergy;
  s.dim_ = sys.m();
  s.T_ = T;
  const Matrix At = sys.A.transpose();
  const Matrix Bt = sys.B.transpose();
  const Matrix cm = c;
  s.data_ = MinEnergyData{AlphaPowerSeries::mittag_leffler(At, sys.alpha, sys.alpha, T, Bt, cm, pol), sys.alpha, c};
  return s;
}

ControlSignal ControlSignal::pinv(const FracSystem& sys, double T, const Matrix& B_pinv, const Vector& v,
                                  const SeriesPolicy& pol) {
  sys.validate();
  if (!(T > 0.0)) fail(ErrorCode::InvalidParams, "horizon T must be positive");
  if (B_pinv.rows() != sys.m() || B_pinv.cols() != sys.n() || v.size() != sys.n()) {
    fail(ErrorCode::InvalidParams, "pinv control factors do not conform with the system");
  }
  ControlSignal s;
  s.kind_ = Kind::Pinv;
  s.dim_ = sys.m();
  s.T_ = T;
  s.data_ = PinvData{AlphaPowerSeries::mittag_leffler(sys.A, sys.alpha, sys.alpha, T, pol), B_pinv, v, sys.alpha};
  return s;
}

ControlSignal ControlSignal::function(Eigen::Index dim, double T, std::function<Vector(double)> u,
                                      std::function<Vector(double)> weighted) {
  if (!(T > 0.0)) fail(ErrorCode::InvalidParams, "horizon T must be positive");
  if (dim < 1 || !u) fail(ErrorCode::InvalidParams, "function control needs a dimension and a callable");
  ControlSignal s;
  s.kind_ = Kind::Function;
  s.dim_ = dim;
  s.T_ = T;
  s.data_ = FunctionData{std::move(u), std::move(weighted)};
  return s;
}

ControlSignal ControlSignal::constant(const Vector& value, double T) {
  return function(value.size(), T, [value](double) { return value; });
}

ControlSignal ControlSignal::zero(Eigen::Index dim, double T) {
  const Vector z = Vector::Zero(dim);
  return function(dim, T, [z](double) { return z; }, [z](double) { return z; });
}

bool ControlSignal::has_weighted_form() const {
  if (kind_ == Kind::MinEnergy || kind_ == Kind::Pinv) return true;
  if (const auto* f = std::get_if<FunctionData>(&data_)) return static_cast<bool>(f->weighted);
  return false;
}

Vector ControlSignal::evaluate(double t) const {
  switch (kind_) {
    case Kind::Sampled:
    case Kind::RankBased:
      return std::get<SampledData>(data_).u.at(t);
    case Kind::MinEnergy: {
      const auto& d = std::get<MinEnergyData>(data_);
      const double s = time_to_go(T_, t);
      if (d.alpha < 1.0 && s == 0.0) return Vector::Zero(dim_);
      const long double x = std::pow(static_cast<long double>(s), static_cast<long double>(d.alpha));
      return -std::pow(s, 1.0 - d.alpha) * d.profile.apply_power(x, Vector::Ones(1));
    }
    case Kind::Pinv: {
      const auto& d = std::get<PinvData>(data_);
      const double s = time_to_go(T_, t);
      if (d.alpha < 1.0 && s == 0.0) return Vector::Zero(dim_);
      return std::pow(s, 1.0 - d.alpha) * weighted(t, d.alpha);
    }
    case Kind::Function: {
      time_to_go(T_, t);
      const Vector v = std::get<FunctionData>(data_).u(t);
      if (v.size() != dim_) fail(ErrorCode::InvalidParams, "function control returned the wrong dimension");
      return v;
    }
  }
  fail(ErrorCode::InvalidParams, "unknown control kind");
}

Vector ControlSignal::weighted(double t, double alpha) const {
  switch (kind_) {
    case Kind::MinEnergy: {
      const auto& d = std::get<MinEnergyData>(data_);
      const double s = time_to_go(T_, t);
      const long double x = s == 0.0 ? 0.0L : std::pow(static_cast<long double>(s), static_cast<long double>(d.alpha));
      return -d.profile.apply_power(x, Vector::Ones(1));
    }
    case Kind::Pinv: {
      const auto& d = std::get<PinvData>(data_);
      const double s = time_to_go(T_, t);
      const long double x = s == 0.0 ? 0.0L : std::pow(static_cast<long double>(s), static_cast<long double>(d.alpha));
      const Eigen::PartialPivLU<Matrix> lu(d.kernel.at_power(x));
      if (!(lu.rcond() >= kSingularKernelRcond)) {
        std::ostringstream os;
        os << "E_{alpha,alpha}(A s^alpha) is singular at s=" << s;
        fail(ErrorCode::SingularKernel, os.str());
      }
      return d.B_pinv * lu.solve(d.v) / T_;
    }
    case Kind::Function: {
      const auto& f = std::get<FunctionData>(data_);
      if (f.weighted) return f.weighted(t);
      break;
    }
    default:
      break;
  }
  const double s = time_to_go(T_, t);
  return std::pow(s, alpha - 1.0) * evaluate(t);
}

const GridFunction& ControlSignal::samples() const {
  if (const auto* d = std::get_if<SampledData>(&data_)) return d->u;
  fail(ErrorCode::InvalidParams, "control has no grid samples");
}

GridFunction ControlSignal::sample(const TimeGrid& grid) const {
  if (const auto* d = std::get_if<SampledData>(&data_)) {
    const TimeGrid& g = d->u.grid;
    if (g.t0 == grid.t0 && g.t1 == grid.t1 && g.steps == grid.steps) return d->u;
  }
  return GridFunction::sample(grid, dim_, [this](double t) { return evaluate(t); });
}

const Vector& ControlSignal::coefficient() const {
  if (const auto* d = std::get_if<MinEnergyData>(&data_)) return d->c;
  if (const auto* d = std::get_if<PinvData>(&data_)) return d->v;
  fail(ErrorCode::InvalidParams, "control has no coefficient vector");
}

// ---------------------------------------------------------------------------

Trajectory simulate(const FracSystem& sys, const Vector& a, const ControlSignal& u, const TimeGrid& grid,
                    const SimulationOptions& opts) {
  sys.validate();
  grid.validate();
  if (grid.t0 != 0.0) fail(ErrorCode::InvalidParams, "simulation grid must start at t = 0");
  if (a.size() != sys.n()) fail(ErrorCode::InvalidParams, "initial state must have n entries");
  if (!a.allFinite()) fail(ErrorCode::InvalidParams, "initial state has non-finite entries");
  if (u.dim() != sys.m()) fail(ErrorCode::InvalidParams, "control dimension does not match B");
  if (grid.t1 > u.horizon() * (1.0 + kHorizonSlack)) fail(ErrorCode::DomainError, "grid extends past the control horizon");

  const double alpha = sys.alpha;
  const Matrix I = Matrix::Identity(sys.n(), sys.n());
  const auto free = AlphaPowerSeries::mittag_leffler(sys.A, alpha, 1.0, grid.t1, I, Matrix(a), opts.series);
  const auto kernel = AlphaPowerSeries::mittag_leffler(sys.A, alpha, alpha, grid.t1, I, sys.B, opts.series);

  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(grid.nodes(), sys.n());
  traj.states.row(0) = a.transpose();

  Matrix forced;
  if (u.is_sampled()) {
    const GridFunction& s = u.samples();
    const TimeGrid& g = s.grid;
    if (g.t1 == grid.t1 && g.steps == grid.steps) {
      forced = singular_convolution_nodes(kernel, s);
    } else {
      forced = Matrix::Zero(grid.nodes(), sys.n());
      for (int i = 1; i <= grid.steps; ++i) forced.row(i) = singular_convolution(kernel, s, grid.node(i)).transpose();
    }
  } else {
    forced = Matrix::Zero(grid.nodes(), sys.n());
    const std::function<Vector(double)> f = [&u](double t) { return u.evaluate(t); };
    for (int i = 1; i <= grid.steps; ++i) {
      forced.row(i) = singular_convolution(kernel, f, grid.node(i), opts.convolution).transpose();
    }
  }

  for (int i = 1; i <= grid.steps; ++i) {
    const double t = grid.node(i);
    const long double x = std::pow(static_cast<long double>(t), static_cast<long double>(alpha));
    traj.states.row(i) = free.apply_power(x, Vector::Ones(1)).transpose() + forced.row(i);
  }
  if (sys.has_output()) traj.outputs = traj.states * sys.C.transpose();
  return traj;
}

double caputo_residual(const FracSystem& sys, const Trajectory& traj, const ControlSignal& u,
                       const CaputoOptions& opts) {
  sys.validate();
  if (traj.states.cols() != sys.n()) fail(ErrorCode::InvalidParams, "trajectory dimension does not match the system");
  GridFunction x;
  x.grid = traj.grid;
  x.values = traj.states;
  const GridFunction dx = sys.alpha == 1.0 ? classical_derivative(x, traj.grid.steps >= 4 ? 4 : 2)
                                           : caputo_derivative(x, sys.alpha, opts);

  double worst = 0.0;
  for (int i = 1; i < traj.grid.steps; ++i) {
    const Vector rhs = sys.A * traj.state(i) + sys.B * u.evaluate(traj.grid.node(i));
    const double r = (dx.values.row(i).transpose() - rhs).lpNorm<Eigen::Infinity>();
    worst = std::max(worst, r);
  }
  return worst;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t";
  for (Eigen::Index j = 0; j < traj.states.cols(); ++j) os << ",x" << j + 1;
  for (Eigen::Index j = 0; j < traj.outputs.cols(); ++j) os << ",y" << j + 1;
  os << '\n';
  for (int i = 0; i < traj.grid.nodes(); ++i) {
    os << format_number(traj.grid.node(i));
    for (Eigen::Index j = 0; j < traj.states.cols(); ++j) os << ',' << format_number(traj.states(i, j));
    for (Eigen::Index j = 0; j < traj.outputs.cols(); ++j) os << ',' << format_number(traj.outputs(i, j));
    os << '\n';
  }
}

}  // namespace fracctl
