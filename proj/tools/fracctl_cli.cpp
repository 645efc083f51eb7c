// fracctl: command-line front end over the C API.
//
// Exit codes: 0 success, 2 input error, 3 numeric failure.

#include "fracctl/fracctl.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitMismatch = 1;  // reproduce: a checked row is outside its tolerance

struct Failure {
  fracctl_status status;
  std::string message;
};

void check(fracctl_status st) {
  if (st != FRACCTL_OK) throw Failure{st, fracctl_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Problem = std::unique_ptr<fracctl_problem, Deleter<fracctl_problem, fracctl_problem_free>>;
using Control = std::unique_ptr<fracctl_control, Deleter<fracctl_control, fracctl_control_free>>;
using Traj = std::unique_ptr<fracctl_trajectory, Deleter<fracctl_trajectory, fracctl_trajectory_free>>;
using Synthesis = std::unique_ptr<fracctl_synthesis, Deleter<fracctl_synthesis, fracctl_synthesis_free>>;

std::string num(double x, int digits = 17) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string vec(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

Problem load(const std::string& path) {
  fracctl_problem* p = nullptr;
  check(fracctl_problem_load(path.c_str(), &p));
  return Problem(p);
}

Problem parse(const std::string& text) {
  fracctl_problem* p = nullptr;
  check(fracctl_problem_parse(text.c_str(), nullptr, &p));
  return Problem(p);
}

fracctl_problem_info info_of(const fracctl_problem* p) {
  fracctl_problem_info info{};
  check(fracctl_problem_get_info(p, &info));
  return info;
}

double rel_err(double got, double want) { return want != 0.0 ? std::fabs(got - want) / std::fabs(want) : std::fabs(got); }

// --- ml --------------------------------------------------------------------

struct MlArgs {
  double alpha = 1.0;
  double beta = 1.0;
  std::vector<double> z;
  std::vector<double> t;
  bool sin = false;
  bool cos = false;
  int cl = 0;
  std::string A;
  bool s0 = false;
  bool g = false;
};

std::vector<double> parse_matrix(const std::string& text, int& n) {
  // rows separated by ';', entries by ',' or whitespace
  std::vector<double> vals;
  int rows = 0;
  std::stringstream rs(text);
  std::string row;
  while (std::getline(rs, row, ';')) {
    for (char& c : row) c = c == ',' ? ' ' : c;
    std::stringstream es(row);
    double x = 0.0;
    while (es >> x) vals.push_back(x);
    if (!es.eof()) throw Failure{FRACCTL_E_INVALID_INPUT, "malformed matrix '" + text + "'"};
    ++rows;
  }
  n = rows;
  if (rows == 0 || static_cast<int>(vals.size()) != rows * rows) {
    throw Failure{FRACCTL_E_INVALID_INPUT, "matrix must be square, rows separated by ';'"};
  }
  return vals;
}

void run_ml(const MlArgs& a) {
  if (!a.A.empty()) {
    if (a.t.empty()) throw Failure{FRACCTL_E_INVALID_INPUT, "matrix evaluation needs --t"};
    int n = 0;
    const std::vector<double> A = parse_matrix(a.A, n);
    std::vector<double> out(static_cast<std::size_t>(n * n));
    for (double t : a.t) {
      if (a.s0) {
        check(fracctl_state_transition(A.data(), n, a.alpha, t, out.data()));
      } else if (a.g) {
        check(fracctl_inverse_kernel(A.data(), n, a.alpha, t, out.data()));
      } else {
        check(fracctl_alpha_exp(A.data(), n, a.alpha, t, out.data()));
      }
      if (a.t.size() > 1) std::printf("t = %s\n", num(t, 15).c_str());
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) std::printf(j ? " %s" : "%s", num(out[static_cast<std::size_t>(i * n + j)], 15).c_str());
        std::printf("\n");
      }
    }
    return;
  }
  if (a.sin || a.cos || a.cl > 0) {
    if (a.t.empty()) throw Failure{FRACCTL_E_INVALID_INPUT, "--sin, --cos and --cl need --t"};
    for (double t : a.t) {
      double v = 0.0;
      if (a.sin) {
        check(fracctl_frac_sin(a.alpha, t, &v));
      } else if (a.cos) {
        check(fracctl_frac_cos(a.alpha, t, &v));
      } else {
        check(fracctl_cl_truncation(a.cl, t, &v));
      }
      std::printf("%s\n", num(v, 15).c_str());
    }
    return;
  }
  if (a.z.empty()) throw Failure{FRACCTL_E_INVALID_INPUT, "ml needs --z, --t with --sin/--cos/--cl, or --A with --t"};
  for (double z : a.z) {
    double v = 0.0;
    check(fracctl_ml(a.alpha, a.beta, z, 0.0, 0, &v));
    std::printf("%s\n", num(v, 15).c_str());
  }
}

// --- simulate ----------------------------------------------------------------

void run_simulate(const std::string& path, const std::string& out) {
  const Problem prob = load(path);
  const fracctl_problem_info info = info_of(prob.get());
  if (!info.has_control) throw Failure{FRACCTL_E_INVALID_INPUT, "problem file has no control block"};
  fracctl_control* c = nullptr;
  check(fracctl_control_from_problem(prob.get(), &c));
  const Control u(c);
  fracctl_trajectory* t = nullptr;
  check(fracctl_simulate(prob.get(), u.get(), &t));
  const Traj traj(t);

  std::vector<double> xT(static_cast<std::size_t>(info.n));
  std::vector<double> a(xT.size()), b(xT.size()), s0a(xT.size());
  check(fracctl_trajectory_state(traj.get(), -1, xT.data()));
  check(fracctl_problem_get_states(prob.get(), a.data(), b.data(), s0a.data()));
  double residual = 0.0;
  check(fracctl_trajectory_residual(prob.get(), traj.get(), u.get(), &residual));

  double err = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < xT.size(); ++i) {
    err = std::max(err, std::fabs(xT[i] - b[i]));
    scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i]), std::fabs(s0a[i])});
  }
  std::printf("alpha            %s\n", num(info.alpha).c_str());
  std::printf("T                %s\n", num(info.T).c_str());
  std::printf("N                %d\n", info.steps);
  std::printf("terminal state   %s\n", vec(xT).c_str());
  std::printf("target b         %s\n", vec(b).c_str());
  std::printf("terminal error   abs %s  rel %s\n", num(err).c_str(), num(scale > 0.0 ? err / scale : err).c_str());
  std::printf("caputo residual  %s\n", num(residual).c_str());
  if (!out.empty()) {
    check(fracctl_trajectory_write_csv(traj.get(), out.c_str()));
    std::printf("trajectory       %s\n", out.c_str());
  }
}

// --- gramian -----------------------------------------------------------------

void run_gramian(const std::string& path, const std::string& json_out) {
  const Problem prob = load(path);
  const fracctl_problem_info info = info_of(prob.get());
  const auto n = static_cast<std::size_t>(info.n);
  std::vector<double> Q(n * n);
  fracctl_gramian_info g{};
  check(fracctl_gramian(prob.get(), Q.data(), &g));
  const double threshold = fracctl_gramian_threshold();
  const bool by_rank = g.kalman_rank == info.n;
  const bool by_gramian = g.rcond >= threshold;

  std::printf("Q_T (T = %s, alpha = %s)\n", num(info.T).c_str(), num(info.alpha).c_str());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(Q.begin() + static_cast<long>(i * n), Q.begin() + static_cast<long>((i + 1) * n));
    std::printf("  %s\n", vec(row).c_str());
  }
  std::printf("rcond            %s (singular below %s)\n", num(g.rcond).c_str(), num(threshold, 3).c_str());
  std::printf("eigenvalues      min %s  max %s\n", num(g.min_eig).c_str(), num(g.max_eig).c_str());
  std::printf("quadrature err   %s\n", num(g.quad_err).c_str());
  std::printf("kalman rank      %d of %d\n", g.kalman_rank, info.n);
  if (by_rank && by_gramian) {
    std::printf("controllable: rank %d, Q nonsingular\n", g.kalman_rank);
  } else if (!by_rank && !by_gramian) {
    std::printf("uncontrollable: rank %d, Q singular\n", g.kalman_rank);
  } else {
    std::printf("inconsistent: rank %d but Q %s\n", g.kalman_rank, by_gramian ? "nonsingular" : "singular");
  }

  if (!json_out.empty()) {
    nlohmann::json j;
    j["alpha"] = info.alpha;
    j["T"] = info.T;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(std::vector<double>(Q.begin() + static_cast<long>(i * n), Q.begin() + static_cast<long>((i + 1) * n)));
    }
    j["gramian"] = rows;
    j["rcond"] = g.rcond;
    j["quad_err"] = g.quad_err;
    j["kalman_rank"] = g.kalman_rank;
    j["n"] = info.n;
    j["controllable_by_rank"] = by_rank;
    j["controllable_by_gramian"] = by_gramian;
    std::ofstream os(json_out);
    if (!os) throw Failure{FRACCTL_E_IO, "cannot write '" + json_out + "'"};
    os << j.dump(2) << '\n';
  }
}

// --- synthesize ----------------------------------------------------------------

void run_synthesize(const std::string& path, const std::string& method, const std::string& out,
                    const std::string& csv) {
  const Problem prob = load(path);
  const fracctl_problem_info info = info_of(prob.get());
  fracctl_synthesis* s = nullptr;
  check(fracctl_synthesize(prob.get(), method.empty() ? nullptr : method.c_str(), &s));
  const Synthesis syn(s);
  fracctl_report rep{};
  std::vector<double> xT(static_cast<std::size_t>(info.n));
  std::vector<double> f(xT.size());
  check(fracctl_synthesis_verify(prob.get(), syn.get(), &rep, xT.data()));
  check(fracctl_synthesis_f(syn.get(), f.data()));

  std::printf("method           %s\n", method.empty() ? info.method : method.c_str());
  std::printf("f_T              %s\n", vec(f).c_str());
  std::printf("energy           %s\n", num(rep.energy).c_str());
  std::printf("energy (quad)    %s\n", num(rep.energy_quadrature).c_str());
  if (!std::isnan(rep.energy_mismatch)) std::printf("energy mismatch  %s\n", num(rep.energy_mismatch).c_str());
  if (!std::isnan(rep.rcond)) std::printf("rcond            %s\n", num(rep.rcond).c_str());
  std::printf("terminal state   %s\n", vec(xT).c_str());
  std::printf("terminal error   abs %s  rel %s\n", num(rep.terminal_abs).c_str(), num(rep.terminal_rel).c_str());
  std::printf("caputo residual  %s\n", num(rep.caputo_residual).c_str());
  if (!out.empty()) {
    check(fracctl_synthesis_write_json(prob.get(), syn.get(), out.c_str()));
    std::printf("control          %s\n", out.c_str());
  }
  if (!csv.empty()) {
    check(fracctl_synthesis_write_csv(prob.get(), syn.get(), csv.c_str()));
    std::printf("control csv      %s\n", csv.c_str());
  }
}

// --- reproduce ----------------------------------------------------------------

std::string problem_text(double alpha, const std::string& A, const std::string& B, const std::string& a,
                         const std::string& b, double T, int N, const std::string& method) {
  const int n = static_cast<int>(nlohmann::json::parse(A).size());
  const int m = static_cast<int>(nlohmann::json::parse(B)[0].size());
  std::ostringstream os;
  os << R"({"system":{"alpha":)" << num(alpha) << R"(,"n":)" << n << R"(,"m":)" << m << R"(,"A":)" << A
     << R"(,"B":)" << B << R"(},"steering":{"a":)" << a << R"(,"b":)" << b << R"(,"T":)" << num(T)
     << R"(},"numerics":{"N":)" << N << R"(},"method":")" << method << R"("})";
  return os.str();
}

int g_failed_rows = 0;

void row(const std::string& what, double expected, double computed, double tol, bool relative) {
  const double err = relative ? rel_err(computed, expected) : std::fabs(computed - expected);
  const bool pass = err <= tol;
  if (!pass) ++g_failed_rows;
  std::printf("  %-34s expected %-12s computed %-22s tol %-8s %s\n", what.c_str(), num(expected, 6).c_str(),
              num(computed).c_str(), num(tol, 2).c_str(), pass ? "PASS" : "FAIL");
}

double energy_of(const std::string& text, const char* method) {
  const Problem p = parse(text);
  fracctl_synthesis* s = nullptr;
  check(fracctl_synthesize(p.get(), method, &s));
  const Synthesis syn(s);
  double e = 0.0;
  check(fracctl_synthesis_energy(syn.get(), &e));
  return e;
}

void run_reproduce(int example) {
  if (example == 1) {
    std::printf("Example 1: A = [[0,1],[0,0]], B = (0,1)^T, alpha = 1/2, a = (1,0)^T, b = 0\n");
    for (double T : {1.0, 2.0, 10.0}) {
      const std::string text = problem_text(0.5, "[[0,1],[0,0]]", "[[0],[1]]", "[1,0]", "[0,0]", T, 256, "min-energy");
      const Problem p = parse(text);
      std::vector<double> Q(4);
      check(fracctl_gramian(p.get(), Q.data(), nullptr));
      const double pi = std::acos(-1.0);
      row("Q11 = T^2/2, T = " + num(T, 3), T * T / 2, Q[0], 1e-8, true);
      row("Q12 = 2T^1.5/(3 sqrt(pi)), T = " + num(T, 3), 2 * std::pow(T, 1.5) / (3 * std::sqrt(pi)), Q[1], 1e-8, true);
      row("Q22 = T/pi, T = " + num(T, 3), T / pi, Q[3], 1e-8, true);
      row("energy 18/T^2, T = " + num(T, 3), 18 / (T * T), energy_of(text, "min-energy"), 1e-6, true);
    }
    return;
  }
  if (example == 2) {
    std::printf("Example 2: A = [[0,1],[-1,0]], B = (0,1)^T, alpha = 1/2, T = 10, a = (0,1)^T, b = 0\n");
    const std::string text = problem_text(0.5, "[[0,1],[-1,0]]", "[[0],[1]]", "[0,1]", "[0,0]", 10.0, 256, "min-energy");
    row("minimal energy m (m_12 = 0.0911)", 0.0911, energy_of(text, "min-energy"), 0.005, false);
    std::printf("  c_L trend (cos_{1/2} replaced by c_L in Q_T; reported, not checked)\n");
    const double a[2] = {0.0, 1.0};
    const double b[2] = {0.0, 0.0};
    const double expected[] = {1.02, 0.0921, 0.0911};
    int k = 0;
    for (int L : {1, 11, 12}) {
      double m = 0.0;
      check(fracctl_cl_trend_energy(L, 10.0, a, b, &m));
      std::printf("    L = %-3d expected %-8s computed %s\n", L, num(expected[k++], 4).c_str(), num(m).c_str());
    }
    return;
  }
  if (example == 3) {
    std::printf("Scalar example: A = 0, B = 1, a = 0, b = 1, energy Gamma(alpha)^2 (b-a)^2 / T\n");
    for (double alpha : {0.3, 0.5, 0.9}) {
      for (double T : {1.0, 5.0}) {
        const std::string text = problem_text(alpha, "[[0]]", "[[1]]", "[0]", "[1]", T, 256, "min-energy");
        const double want = std::tgamma(alpha) * std::tgamma(alpha) / T;
        const std::string tag = "alpha = " + num(alpha, 2) + ", T = " + num(T, 2);
        row("min-energy " + tag, want, energy_of(text, "min-energy"), 1e-6, true);
        row("pinv       " + tag, want, energy_of(text, "pinv"), 1e-6, true);
      }
    }
    return;
  }
  throw Failure{FRACCTL_E_INVALID_INPUT, "--example must be 1, 2 or 3"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional-order (Caputo) control systems: simulation, Gramians and steering controls"};
  app.require_subcommand(1);

  MlArgs ml;
  auto* ml_cmd = app.add_subcommand("ml", "Mittag-Leffler functions and related kernels");
  ml_cmd->add_option("--alpha", ml.alpha, "order alpha");
  ml_cmd->add_option("--beta", ml.beta, "second parameter beta");
  ml_cmd->add_option("--z", ml.z, "arguments of E_{alpha,beta}");
  ml_cmd->add_option("--t", ml.t, "times for --sin, --cos, --cl and matrix kernels");
  ml_cmd->add_flag("--sin", ml.sin, "fractional sine sin_alpha");
  ml_cmd->add_flag("--cos", ml.cos, "fractional cosine cos_alpha");
  ml_cmd->add_option("--cl", ml.cl, "truncated cosine c_L of order L");
  ml_cmd->add_option("--A", ml.A, "square matrix, rows separated by ';' (prints e_alpha^{At})");
  ml_cmd->add_flag("--s0", ml.s0, "with --A: print S_0(t) = E_alpha(A t^alpha)");
  ml_cmd->add_flag("--g", ml.g, "with --A: print the inverse kernel g(t)");

  std::string sim_file;
  std::string sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate the forward trajectory under the file's control");
  sim_cmd->add_option("problem", sim_file, "problem file (JSON)")->required();
  sim_cmd->add_option("--out", sim_out, "trajectory CSV");

  std::string gram_file;
  std::string gram_json;
  auto* gram_cmd = app.add_subcommand("gramian", "Controllability Gramian and Kalman rank");
  gram_cmd->add_option("problem", gram_file, "problem file (JSON)")->required();
  gram_cmd->add_option("--json", gram_json, "write the result as JSON");

  std::string syn_file;
  std::string syn_method;
  std::string syn_out;
  std::string syn_csv;
  auto* syn_cmd = app.add_subcommand("synthesize", "Synthesize and verify a steering control");
  syn_cmd->add_option("problem", syn_file, "problem file (JSON)")->required();
  syn_cmd->add_option("--method", syn_method, "min-energy, pinv or rank (default: the file's method)")
      ->check(CLI::IsMember({"min-energy", "pinv", "rank"}));
  syn_cmd->add_option("--out", syn_out, "control JSON");
  syn_cmd->add_option("--csv", syn_csv, "control samples CSV");

  int example = 0;
  auto* rep_cmd = app.add_subcommand("reproduce", "Run the worked examples end to end");
  rep_cmd->add_option("--example", example, "1, 2 or 3")->required()->check(CLI::Range(1, 3));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*ml_cmd) run_ml(ml);
    if (*sim_cmd) run_simulate(sim_file, sim_out);
    if (*gram_cmd) run_gramian(gram_file, gram_json);
    if (*syn_cmd) run_synthesize(syn_file, syn_method, syn_out, syn_csv);
    if (*rep_cmd) {
      run_reproduce(example);
      if (g_failed_rows > 0) return kExitMismatch;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return fracctl_status_is_input_error(f.status) ? kExitInput : kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return 0;
}
