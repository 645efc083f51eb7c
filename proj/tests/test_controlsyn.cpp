#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fracctl/controlsyn.hpp"
#include "fracctl/errors.hpp"
#include "support/battery.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

using namespace fracctl;

namespace {

constexpr double pi = std::numbers::pi;

FracSystem nilpotent(double alpha) {
  FracSystem s;
  s.A = (Matrix(2, 2) << 0, 1, 0, 0).finished();
  s.B = (Matrix(2, 1) << 0, 1).finished();
  s.alpha = alpha;
  return s;
}

FracSystem rotation() {
  FracSystem s;
  s.A = (Matrix(2, 2) << 0, 1, -1, 0).finished();
  s.B = (Matrix(2, 1) << 0, 1).finished();
  s.alpha = 0.5;
  return s;
}

FracSystem scalar(double alpha, double lambda = 0.0) {
  FracSystem s;
  s.A = Matrix::Constant(1, 1, lambda);
  s.B = Matrix::Ones(1, 1);
  s.alpha = alpha;
  return s;
}

Vector v1(double a) { return Vector::Constant(1, a); }
Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

SteeringProblem problem(const FracSystem& sys, Vector a, Vector b, double T, int N = 256) {
  SteeringProblem p;
  p.sys = sys;
  p.a = std::move(a);
  p.b = std::move(b);
  p.T = T;
  p.grid = SteeringProblem::grid_for(T, N);
  return p;
}

double rel(double x, double ref) { return std::fabs(x - ref) / std::fabs(ref); }

template <class F>
std::optional<ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("Gramian of the nilpotent example") {
  for (double T : {1.0, 2.0, 10.0}) {
    const GramianResult G = gramian(nilpotent(0.5), T);
    const double off = 2 * std::pow(T, 1.5) / (3 * std::sqrt(pi));
    CHECK(rel(G.Q(0, 0), T * T / 2) <= 1e-8);
    CHECK(rel(G.Q(0, 1), off) <= 1e-8);
    CHECK(rel(G.Q(1, 0), off) <= 1e-8);
    CHECK(rel(G.Q(1, 1), T / pi) <= 1e-8);
    CHECK(G.quad_err <= 1e-10);
    CHECK(G.rcond > kSingularGramianRcond);
  }
}

TEST_CASE("Gramian closed forms: scalar, B = 0, alpha = 1") {
  for (double a : {0.3, 0.5, 0.9}) {
    const GramianResult G = gramian(scalar(a), 3.0);
    CHECK(rel(G.Q(0, 0), 3.0 / std::pow(std::tgamma(a), 2)) <= 1e-12);
  }
  FracSystem z = nilpotent(0.7);
  z.B.setZero();
  const GramianResult G0 = gramian(z, 2.0);
  CHECK(G0.Q.cwiseAbs().maxCoeff() == 0.0);
  CHECK(G0.rcond == 0.0);

  for (double T : {1.0, 4.0}) {
    const GramianResult G1 = gramian(nilpotent(1.0), T);
    const Matrix ref = (Matrix(2, 2) << T * T * T / 3, T * T / 2, T * T / 2, T).finished();
    CHECK((G1.Q - ref).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff());
  }
  CHECK(code_of([] { gramian(scalar(0.5), 0.0); }) == ErrorCode::InvalidParams);
}

TEST_CASE("Gramian against the matrix exponential at alpha = 1") {
  FracSystem s;
  s.A = (Matrix(2, 2) << -0.4, 1.1, -0.7, 0.2).finished();
  s.B = (Matrix(2, 1) << 0.5, -1.0).finished();
  s.alpha = 1.0;
  const double T = 2.5;
  // Simpson on the smooth integrand e^{As} B B^T e^{A^T s}.
  const int N = 2000;
  Matrix ref = Matrix::Zero(2, 2);
  for (int i = 0; i <= N; ++i) {
    const double t = T * i / N;
    const Matrix E = (s.A * t).exp();
    const double w = (i == 0 || i == N) ? 1 : (i % 2 ? 4 : 2);
    ref += w * E * s.B * s.B.transpose() * E.transpose();
  }
  ref *= T / (3.0 * N);
  const GramianResult G = gramian(s, T);
  CHECK((G.Q - ref).cwiseAbs().maxCoeff() <= 1e-10 * ref.norm());
}

TEST_CASE("Gramian is symmetric and nonnegative on the battery") {
  for (const auto& c : testing::controllable_battery()) {
    const GramianResult G = gramian(c.sys, c.T);
    const double scale = G.Q.cwiseAbs().maxCoeff();
    CHECK((G.Q - G.Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    CHECK(G.eigenvalues.minCoeff() >= -1e-10 * G.Q.norm());
  }
  for (const auto& c : testing::uncontrollable_battery()) {
    const GramianResult G = gramian(c.sys, c.T);
    CHECK((G.Q - G.Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, G.Q.cwiseAbs().maxCoeff()));
    CHECK(G.eigenvalues.minCoeff() >= -1e-10 * std::max(1.0, G.Q.norm()));
  }
}

TEST_CASE("Kalman rank") {
  CHECK(kalman_rank(nilpotent(0.5)).rank == 2);
  CHECK(kalman_rank(rotation()).rank == 2);
  FracSystem z;
  z.A = Matrix::Identity(3, 3);
  z.B = Matrix::Zero(3, 1);
  z.alpha = 0.5;
  const RankData r0 = kalman_rank(z);
  CHECK(r0.rank == 0);
  CHECK(r0.K_blocks.empty());
  CHECK(r0.kalman.rows() == 3);
  CHECK(r0.kalman.cols() == 3);

  for (const auto& c : testing::controllable_battery()) {
    const RankData rd = kalman_rank(c.sys);
    REQUIRE(rd.rank == c.sys.n());
    REQUIRE(static_cast<Eigen::Index>(rd.K_blocks.size()) == c.sys.n());
    Matrix sum = Matrix::Zero(c.sys.n(), c.sys.n());
    Matrix P = c.sys.B;
    for (const Matrix& K : rd.K_blocks) {
      CHECK(K.rows() == c.sys.m());
      sum += P * K;
      P = c.sys.A * P;
    }
    CHECK((sum - Matrix::Identity(c.sys.n(), c.sys.n())).cwiseAbs().maxCoeff() <= 1e-10);
  }
  for (const auto& c : testing::uncontrollable_battery()) CHECK(kalman_rank(c.sys).rank < c.sys.n());
}

TEST_CASE("pseudo-inverse and numerical rank") {
  const Matrix M = (Matrix(2, 3) << 1, 2, 3, 2, 4, 6).finished();
  CHECK(numerical_rank(M) == 1);
  const Matrix P = pseudo_inverse(M);
  CHECK((M * P * M - M).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((P * M * P - P).cwiseAbs().maxCoeff() <= 1e-13);
  const Matrix W = (Matrix(2, 3) << 1, 0, 2, 0, 1, -1).finished();
  CHECK((W * pseudo_inverse(W) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("min-energy control of the nilpotent example") {
  for (double T : {1.0, 2.0, 10.0}) {
    const SynthesisResult r = synthesize_min_energy(problem(nilpotent(0.5), v2(1, 0), v2(0, 0), T));
    CHECK(r.method == Method::MinEnergy);
    CHECK(r.control.kind() == ControlSignal::Kind::MinEnergy);
    CHECK(rel(r.energy, 18 / (T * T)) <= 1e-6);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double t = T * i / 99.0;
      const double ref = -18 * (T - t) / (T * T) + 12 * std::sqrt(T - t) / std::pow(T, 1.5);
      worst = std::max(worst, std::fabs(r.control.evaluate(t)(0) - ref));
    }
    CHECK(worst <= 1e-6);
    CHECK(r.control.evaluate(T)(0) == 0.0);
    CHECK(rel(modified_energy(r.control, 0.5, T), 18 / (T * T)) <= 1e-6);
  }
}

TEST_CASE("scalar example: min-energy and pinv coincide") {
  for (double a : {0.3, 0.5, 0.9}) {
    for (double T : {1.0, 5.0}) {
      const SteeringProblem p = problem(scalar(a), v1(0.0), v1(1.0), T);
      const SynthesisResult me = synthesize_min_energy(p);
      const SynthesisResult pv = synthesize_pinv(p);
      const double ga = std::tgamma(a);
      CHECK(rel(me.energy, ga * ga / T) <= 1e-6);
      CHECK(rel(pv.energy, ga * ga / T) <= 1e-6);
      double worst = 0.0;
      double gap = 0.0;
      for (int i = 0; i <= 100; ++i) {
        const double t = T * i / 100.0;
        const double ref = ga * std::pow(T - t, 1 - a) / T;
        worst = std::max(worst, std::fabs(me.control.evaluate(t)(0) - ref));
        gap = std::max(gap, std::fabs(me.control.evaluate(t)(0) - pv.control.evaluate(t)(0)));
      }
      CHECK(worst <= 1e-6);
      CHECK(gap <= 1e-12);
    }
  }
  // Non-zero a: energy Gamma(alpha)^2 (b - a)^2 / T.
  const SynthesisResult r = synthesize_min_energy(problem(scalar(0.6), v1(2.0), v1(-1.0), 3.0));
  CHECK(rel(r.energy, std::pow(std::tgamma(0.6), 2) * 9.0 / 3.0) <= 1e-8);
}

TEST_CASE("energy equals the Gramian quadratic form") {
  const SteeringProblem p = problem(rotation(), v2(0.3, -0.8), v2(1.0, 0.5), 3.0);
  const SynthesisResult r = synthesize_min_energy(p);
  const Vector f = state_transition_s0(p.sys.A, 0.5, 3.0) * p.a - p.b;
  CHECK((r.f_T - f).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(rel(r.energy, f.dot(r.gramian.ldlt().solve(f))) <= 1e-10);
  CHECK(r.energy >= 0.0);
  CHECK(std::fabs(modified_energy(r.control, 0.5, 3.0) - r.energy) <= 1e-6 * (1 + r.energy));
}

TEST_CASE("optimal control vanishes at the horizon") {
  for (double a : {0.3, 0.6, 0.9}) {
    FracSystem s = rotation();
    s.alpha = a;
    const SynthesisResult r = synthesize_min_energy(problem(s, v2(1, 0.5), v2(0, 0), 2.0));
    CHECK(r.control.evaluate(2.0).cwiseAbs().maxCoeff() == 0.0);
    // |u(T - s)| / s^{1 - alpha} tends to a finite limit; the next term is
    // O(s^alpha). Powers of two keep T - s exact.
    const double s1 = std::ldexp(1.0, -30);
    const double s2 = std::ldexp(1.0, -40);
    const double r1 = r.control.evaluate(2.0 - s1).norm() / std::pow(s1, 1 - a);
    const double r2 = r.control.evaluate(2.0 - s2).norm() / std::pow(s2, 1 - a);
    CHECK(std::fabs(r1 - r2) <= 10 * std::pow(s1, a) * r2);
  }
}

TEST_CASE("a = b with A = 0 short-circuits to the zero control") {
  FracSystem s;
  s.A = Matrix::Zero(2, 2);
  s.B = Matrix::Identity(2, 2);
  s.alpha = 0.5;
  const SteeringProblem p = problem(s, v2(0.7, -0.2), v2(0.7, -0.2), 2.0, 64);
  for (Method m : {Method::MinEnergy, Method::Pinv, Method::RankBased}) {
    const SynthesisResult r = synthesize(p, m);
    CHECK(r.method == m);
    CHECK(r.energy == 0.0);
    CHECK(r.f_T.cwiseAbs().maxCoeff() == 0.0);
    for (double t : {0.0, 0.5, 1.3, 2.0}) CHECK(r.control.evaluate(t).cwiseAbs().maxCoeff() == 0.0);
    const SteeringReport rep = verify_steering(p, r);
    CHECK(rep.terminal_abs == 0.0);
    CHECK(rep.terminal_rel == 0.0);
    CHECK(rep.energy_quadrature == 0.0);
    CHECK(rep.caputo_residual == 0.0);
    if (m == Method::MinEnergy) CHECK(rep.energy_mismatch == 0.0);
  }
}

TEST_CASE("pinv control steers scalar systems") {
  for (double lambda : {-0.8, 0.4}) {
    const SteeringProblem p = problem(scalar(0.6, lambda), v1(0.0), v1(1.5), 2.0, 2048);
    const SynthesisResult r = synthesize_pinv(p);
    CHECK(r.control.kind() == ControlSignal::Kind::Pinv);
    const SteeringReport rep = verify_steering(p, r);
    CHECK(rep.terminal_abs <= 1e-4);
    CHECK(std::isnan(rep.energy_mismatch));
  }
  // b = S0(T) a gives the zero control.
  const FracSystem s = scalar(0.5, -0.3);
  const Vector a = v1(0.9);
  const Vector b = state_transition_s0(s.A, 0.5, 1.5) * a;
  const SynthesisResult z = synthesize_pinv(problem(s, a, b, 1.5));
  CHECK(z.energy == 0.0);
  CHECK(z.control.evaluate(0.4)(0) == 0.0);
}

TEST_CASE("pinv on a square invertible B") {
  FracSystem s;
  s.A = (Matrix(2, 2) << -0.3, 0.5, -0.4, 0.1).finished();
  s.B = (Matrix(2, 2) << 1.0, 0.2, -0.3, 0.8).finished();
  s.alpha = 0.7;
  const SteeringProblem p = problem(s, v2(1, -1), v2(-0.5, 0.25), 2.0, 2048);
  const SteeringReport rep = verify_steering(p, synthesize_pinv(p));
  CHECK(rep.terminal_rel <= 1e-4);
}

TEST_CASE("synthesis errors") {
  FracSystem z = nilpotent(0.5);
  z.B.setZero();
  const SteeringProblem pz = problem(z, v2(1, 0), v2(0, 0), 1.0);
  CHECK(code_of([&] { synthesize_min_energy(pz); }) == ErrorCode::SingularGramian);
  CHECK(code_of([&] { synthesize_rank_based(pz); }) == ErrorCode::RankDeficient);
  CHECK(code_of([&] { synthesize_pinv(problem(nilpotent(0.5), v2(1, 0), v2(0, 0), 1.0)); }) ==
        ErrorCode::RankDeficientB);
  SteeringProblem bad = problem(nilpotent(0.5), v2(1, 0), v1(0), 1.0);
  CHECK(code_of([&] { synthesize_min_energy(bad); }) == ErrorCode::InvalidParams);
  bad = problem(nilpotent(0.5), v2(1, 0), v2(0, 0), 1.0);
  bad.grid = SteeringProblem::grid_for(2.0, 16);
  CHECK(code_of([&] { synthesize_min_energy(bad); }) == ErrorCode::InvalidParams);
  CHECK(method_from_string("min-energy") == Method::MinEnergy);
  CHECK(method_from_string("pinv") == Method::Pinv);
  CHECK(method_from_string("rank") == Method::RankBased);
  CHECK_FALSE(method_from_string("lqr").has_value());
  CHECK(std::string(to_string(Method::RankBased)) == "rank");
}

TEST_CASE("modified energy") {
  CHECK(modified_energy(ControlSignal::zero(2, 3.0), 0.4, 3.0) == 0.0);
  // Constant u = 1: int (T-t)^{2 alpha - 2} dt = T^{2 alpha - 1} / (2 alpha - 1).
  for (double a : {0.6, 0.8, 1.0}) {
    const double T = 2.0;
    const double ref = std::pow(T, 2 * a - 1) / (2 * a - 1);
    CHECK(rel(modified_energy(ControlSignal::constant(v1(1.0), T), a, T), ref) <= 1e-8);
  }
  // A sampled constant is integrated exactly; at alpha <= 1/2 it diverges.
  const TimeGrid grid{0, 2, 32};
  const ControlSignal s = ControlSignal::sampled(GridFunction::sample(grid, [](double) { return 1.0; }));
  CHECK(rel(modified_energy(s, 0.75, 2.0), std::pow(2.0, 0.5) / 0.5) <= 1e-12);
  CHECK(std::isinf(modified_energy(s, 0.5, 2.0)));
  // Sampled linear u = T - t at alpha = 1/2: int (T-t) dt = T^2 / 2.
  const ControlSignal lin = ControlSignal::sampled(GridFunction::sample(grid, [](double t) { return 2.0 - t; }));
  CHECK(rel(modified_energy(lin, 0.5, 2.0), 2.0) <= 1e-12);
  // Scalar optimum at alpha = 1/2, a = 0, b = 1, T = 1 has energy pi.
  const SynthesisResult r = synthesize_min_energy(problem(scalar(0.5), v1(0), v1(1), 1.0));
  CHECK(rel(modified_energy(r.control, 0.5, 1.0), pi) <= 1e-8);
  CHECK(rel(synthesize_min_energy(problem(nilpotent(0.5), v2(1, 0), v2(0, 0), 2.0)).energy, 4.5) <= 1e-6);
}

TEST_CASE("verify_steering on the nilpotent example") {
  const SteeringProblem p = problem(nilpotent(0.5), v2(1, 0), v2(0, 0), 10.0, 2048);
  const SynthesisResult r = synthesize_min_energy(p);
  const SteeringReport rep = verify_steering(p, r);
  CHECK(rep.terminal_rel <= 1e-4);
  CHECK(rep.energy_mismatch <= 1e-6 * rep.energy_gramian);
  CHECK(rep.caputo_residual <= 5e-3);
  CHECK(rep.terminal_state.size() == 2);
}

TEST_CASE("verify_steering on the rotation example") {
  const SteeringProblem p = problem(rotation(), v2(0, 1), v2(0, 0), 10.0, 4096);
  const SynthesisResult r = synthesize_min_energy(p);
  const SteeringReport rep = verify_steering(p, r);
  CHECK(rep.terminal_abs <= 1e-3);
  // Exact minimal energy; the value is independent of the c_L truncations.
  CHECK(std::fabs(r.energy - 0.1432642) <= 1e-6);
}

TEST_CASE("alpha = 1 reduction against the classical minimum-energy control") {
  const double T = 3.0;
  const SteeringProblem p = problem(nilpotent(1.0), v2(1, -0.5), v2(-0.2, 0.4), T, 1024);
  const SynthesisResult r = synthesize_min_energy(p);
  const Matrix A = p.sys.A;
  const Matrix W = (Matrix(2, 2) << T * T * T / 3, T * T / 2, T * T / 2, T).finished();
  const Vector f = (A * T).exp() * p.a - p.b;
  const Vector c = W.ldlt().solve(f);
  CHECK(std::fabs(r.energy - c.dot(f)) <= 1e-8 * c.dot(f));
  double worst = 0.0;
  for (int i = 0; i <= 50; ++i) {
    const double t = T * i / 50.0;
    const double ref = -(p.sys.B.transpose() * (A.transpose() * (T - t)).exp() * c)(0);
    worst = std::max(worst, std::fabs(r.control.evaluate(t)(0) - ref));
  }
  CHECK(worst <= 1e-8);
  CHECK(verify_steering(p, r).terminal_abs <= 1e-8);
}

TEST_CASE("rank-based control") {
  SUBCASE("nilpotent example reaches the target and improves with N") {
    double prev = 0.0;
    for (int N : {1024, 2048}) {
      const SteeringProblem p = problem(nilpotent(0.5), v2(1, 0), v2(0, 0), 2.0, N);
      const SynthesisResult r = synthesize_rank_based(p);
      CHECK(r.control.kind() == ControlSignal::Kind::RankBased);
      const double err = verify_steering(p, r).terminal_rel;
      if (N == 2048) {
        CHECK(err <= 1e-2);
        CHECK(err < prev);
      }
      prev = err;
    }
  }
  SUBCASE("n = 1 with constant phi equals the pinv control on the grid") {
    const SteeringProblem p = problem(scalar(0.7, -0.5), v1(0.3), v1(1.2), 2.0, 128);
    GridFunction phi = GridFunction::sample(p.grid, [](double) { return 0.5; });
    const SynthesisResult rb = synthesize_rank_based(p, &phi);
    const SynthesisResult pv = synthesize_pinv(p);
    for (int i = 0; i <= p.grid.steps; ++i) {
      const double t = p.grid.node(i);
      CHECK(std::fabs(rb.control.samples().values(i, 0) - pv.control.evaluate(t)(0)) <= 1e-12);
    }
  }
  SUBCASE("phi is renormalized") {
    const SteeringProblem p = problem(nilpotent(0.6), v2(1, 0), v2(0, 0), 1.0, 128);
    GridFunction phi = default_phi(p.grid, 0.6);
    const SynthesisResult a = synthesize_rank_based(p, &phi);
    phi.values *= 7.0;
    const SynthesisResult b = synthesize_rank_based(p, &phi);
    CHECK((a.control.samples().values - b.control.samples().values).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("b = S0(T) a gives the zero control") {
    const FracSystem s = rotation();
    const Vector a = v2(0.2, 0.9);
    const SynthesisResult r = synthesize_rank_based(problem(s, a, state_transition_s0(s.A, 0.5, 1.0) * a, 1.0, 64));
    CHECK(r.control.samples().values.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("default phi has unit integral and vanishes at both ends") {
  for (double a : {0.3, 0.5, 1.0}) {
    const TimeGrid grid{0, 4, 4096};
    const GridFunction phi = default_phi(grid, a);
    double sum = 0.0;
    for (int i = 0; i < grid.steps; ++i) sum += 0.5 * grid.h() * (phi.values(i, 0) + phi.values(i + 1, 0));
    CHECK(std::fabs(sum - 1.0) <= 1e-6);
    CHECK(phi.values(0, 0) == 0.0);
    CHECK(phi.values(grid.steps, 0) == 0.0);
  }
}

TEST_CASE("c_L trend energies") {
  const Vector a = v2(0, 1);
  const Vector b = v2(0, 0);
  const double exact = synthesize_min_energy(problem(rotation(), a, b, 10.0)).energy;
  CHECK(std::fabs(cl_trend_energy(1, 10.0, a, b) - 0.14485) <= 5e-5);
  CHECK(std::fabs(cl_trend_energy(11, 10.0, a, b) - exact) <= 1e-6);
  CHECK(std::fabs(cl_trend_energy(12, 10.0, a, b) - exact) <= 1e-6);
  CHECK(code_of([&] { cl_trend_energy(0, 10.0, a, b); }) == ErrorCode::InvalidParams);
}

TEST_CASE("synthesis export") {
  const SteeringProblem p = problem(nilpotent(0.5), v2(1, 0), v2(0, 0), 2.0, 8);
  const SynthesisResult r = synthesize_min_energy(p);
  std::ostringstream js;
  write_synthesis_json(js, r, p.grid);
  const nlohmann::json j = nlohmann::json::parse(js.str());
  CHECK(j["method"] == "min-energy");
  CHECK(j["alpha"] == 0.5);
  CHECK(j["T"] == 2.0);
  CHECK(j["f_T"].size() == 2);
  CHECK(j["gramian"].size() == 2);
  CHECK(j["energy"].get<double>() == r.energy);
  CHECK(j["control"]["kind"] == "min-energy");
  CHECK(j["control"]["coefficient"].size() == 2);
  CHECK(j["control"]["t"].size() == 9);
  CHECK(j["control"]["u"][8][0] == 0.0);

  std::ostringstream again;
  write_synthesis_json(again, synthesize_min_energy(p), p.grid);
  CHECK(again.str() == js.str());

  std::ostringstream csv;
  write_control_csv(csv, r.control, p.grid);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,u1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 9);
}
