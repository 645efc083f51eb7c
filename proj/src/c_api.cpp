#include "fracctl/fracctl.h"

#include "fracctl/controlsyn.hpp"
#include "fracctl/errors.hpp"
#include "fracctl/io.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <string>

using namespace fracctl;

struct fracctl_problem {
  ProblemFile file;
};

struct fracctl_control {
  ControlSignal signal;
};

struct fracctl_trajectory {
  Trajectory traj;
};

struct fracctl_synthesis {
  SynthesisResult result;
};

namespace {

thread_local std::string g_last_error;

fracctl_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParams: return FRACCTL_E_INVALID_PARAMS;
    case ErrorCode::InvalidOrder: return FRACCTL_E_INVALID_ORDER;
    case ErrorCode::DomainError: return FRACCTL_E_DOMAIN;
    case ErrorCode::NonConvergence: return FRACCTL_E_NONCONVERGENCE;
    case ErrorCode::SingularKernel: return FRACCTL_E_SINGULAR_KERNEL;
    case ErrorCode::SingularGramian: return FRACCTL_E_SINGULAR_GRAMIAN;
    case ErrorCode::RankDeficient: return FRACCTL_E_RANK_DEFICIENT;
    case ErrorCode::RankDeficientB: return FRACCTL_E_RANK_DEFICIENT_B;
    case ErrorCode::InvalidInput: return FRACCTL_E_INVALID_INPUT;
    case ErrorCode::Io: return FRACCTL_E_IO;
  }
  return FRACCTL_E_INTERNAL;
}

template <class F>
fracctl_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return FRACCTL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown exception";
  }
  return FRACCTL_E_INTERNAL;
}

void need(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::InvalidParams, std::string(what) + " must not be NULL");
}

Matrix square_from(const double* A, int n) {
  need(A, "A");
  if (n < 1) fail(ErrorCode::InvalidParams, "n must be >= 1");
  Matrix M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = A[i * n + j];
  return M;
}

void copy_out(const Matrix& M, double* out) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) out[i * M.cols() + j] = M(i, j);
}

void copy_out(const Vector& v, double* out) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v(i);
}

std::ofstream open_out(const char* path) {
  need(path, "path");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, std::string("cannot write '") + path + "'");
  return os;
}

void finish(std::ofstream& os, const char* path) {
  os.flush();
  if (!os) fail(ErrorCode::Io, std::string("error writing '") + path + "'");
}

}  // namespace

extern "C" {

const char* fracctl_last_error(void) { return g_last_error.c_str(); }

const char* fracctl_status_name(fracctl_status status) {
  switch (status) {
    case FRACCTL_OK: return "OK";
    case FRACCTL_E_INVALID_PARAMS: return to_string(ErrorCode::InvalidParams);
    case FRACCTL_E_INVALID_ORDER: return to_string(ErrorCode::InvalidOrder);
    case FRACCTL_E_DOMAIN: return to_string(ErrorCode::DomainError);
    case FRACCTL_E_NONCONVERGENCE: return to_string(ErrorCode::NonConvergence);
    case FRACCTL_E_SINGULAR_KERNEL: return to_string(ErrorCode::SingularKernel);
    case FRACCTL_E_SINGULAR_GRAMIAN: return to_string(ErrorCode::SingularGramian);
    case FRACCTL_E_RANK_DEFICIENT: return to_string(ErrorCode::RankDeficient);
    case FRACCTL_E_RANK_DEFICIENT_B: return to_string(ErrorCode::RankDeficientB);
    case FRACCTL_E_INVALID_INPUT: return to_string(ErrorCode::InvalidInput);
    case FRACCTL_E_IO: return to_string(ErrorCode::Io);
    case FRACCTL_E_INTERNAL: return "Internal";
  }
  return "Unknown";
}

int fracctl_status_is_input_error(fracctl_status status) {
  return status == FRACCTL_E_INVALID_PARAMS || status == FRACCTL_E_INVALID_ORDER ||
         status == FRACCTL_E_INVALID_INPUT || status == FRACCTL_E_IO;
}

fracctl_status fracctl_ml(double alpha, double beta, double z, double rel_tol, int max_terms, double* out) {
  return guarded([&] {
    need(out, "out");
    SeriesPolicy pol;
    if (rel_tol > 0.0) pol.rel_tol = rel_tol;
    if (max_terms > 0) pol.max_terms = max_terms;
    *out = ml_scalar({alpha, beta}, z, pol);
  });
}

fracctl_status fracctl_frac_sin(double alpha, double t, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = frac_sin(alpha, t);
  });
}

fracctl_status fracctl_frac_cos(double alpha, double t, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = frac_cos(alpha, t);
  });
}

fracctl_status fracctl_cl_truncation(int L, double t, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = cl_truncation(L, t);
  });
}

fracctl_status fracctl_alpha_exp(const double* A, int n, double alpha, double t, double* out) {
  return guarded([&] {
    need(out, "out");
    copy_out(alpha_exp(square_from(A, n), alpha, t), out);
  });
}

fracctl_status fracctl_state_transition(const double* A, int n, double alpha, double t, double* out) {
  return guarded([&] {
    need(out, "out");
    copy_out(state_transition_s0(square_from(A, n), alpha, t), out);
  });
}

fracctl_status fracctl_inverse_kernel(const double* A, int n, double alpha, double t, double* out) {
  return guarded([&] {
    need(out, "out");
    copy_out(inverse_kernel_g(square_from(A, n), alpha, t), out);
  });
}

fracctl_status fracctl_problem_load(const char* path, fracctl_problem** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new fracctl_problem{load_problem(path)};
  });
}

fracctl_status fracctl_problem_parse(const char* json_text, const char* base_dir, fracctl_problem** out) {
  return guarded([&] {
    need(json_text, "json_text");
    need(out, "out");
    *out = nullptr;
    *out = new fracctl_problem{parse_problem(json_text, base_dir ? base_dir : "")};
  });
}

fracctl_status fracctl_problem_get_info(const fracctl_problem* prob, fracctl_problem_info* info) {
  return guarded([&] {
    need(prob, "prob");
    need(info, "info");
    const SteeringProblem& p = prob->file.problem;
    *info = fracctl_problem_info{};
    info->n = static_cast<int>(p.sys.n());
    info->m = static_cast<int>(p.sys.m());
    info->p = static_cast<int>(p.sys.p());
    info->alpha = p.sys.alpha;
    info->T = p.T;
    info->steps = p.grid.steps;
    info->has_method = prob->file.method.has_value();
    if (prob->file.method) std::strncpy(info->method, to_string(*prob->file.method), sizeof info->method - 1);
    info->has_control = prob->file.control.kind != ControlSpec::Kind::None;
  });
}

fracctl_status fracctl_problem_get_states(const fracctl_problem* prob, double* a, double* b, double* s0a) {
  return guarded([&] {
    need(prob, "prob");
    const SteeringProblem& p = prob->file.problem;
    if (a) copy_out(p.a, a);
    if (b) copy_out(p.b, b);
    if (s0a) copy_out(Vector(state_transition_s0(p.sys.A, p.sys.alpha, p.T, p.series) * p.a), s0a);
  });
}

void fracctl_problem_free(fracctl_problem* prob) { delete prob; }

fracctl_status fracctl_control_from_problem(const fracctl_problem* prob, fracctl_control** out) {
  return guarded([&] {
    need(prob, "prob");
    need(out, "out");
    *out = nullptr;
    *out = new fracctl_control{resolve_control(prob->file)};
  });
}

fracctl_status fracctl_control_eval(const fracctl_control* u, double t, double* out) {
  return guarded([&] {
    need(u, "u");
    need(out, "out");
    copy_out(u->signal.evaluate(t), out);
  });
}

void fracctl_control_free(fracctl_control* u) { delete u; }

fracctl_status fracctl_simulate(const fracctl_problem* prob, const fracctl_control* u, fracctl_trajectory** out) {
  return guarded([&] {
    need(prob, "prob");
    need(u, "u");
    need(out, "out");
    *out = nullptr;
    const SteeringProblem& p = prob->file.problem;
    SimulationOptions opts;
    opts.series = p.series;
    *out = new fracctl_trajectory{simulate(p.sys, p.a, u->signal, p.grid, opts)};
  });
}

fracctl_status fracctl_trajectory_dims(const fracctl_trajectory* traj, int* nodes, int* n, int* p) {
  return guarded([&] {
    need(traj, "traj");
    if (nodes) *nodes = static_cast<int>(traj->traj.states.rows());
    if (n) *n = static_cast<int>(traj->traj.states.cols());
    if (p) *p = static_cast<int>(traj->traj.outputs.cols());
  });
}

fracctl_status fracctl_trajectory_state(const fracctl_trajectory* traj, int node, double* x) {
  return guarded([&] {
    need(traj, "traj");
    need(x, "x");
    const Eigen::Index rows = traj->traj.states.rows();
    const Eigen::Index i = node < 0 ? rows + node : node;
    if (i < 0 || i >= rows) fail(ErrorCode::InvalidParams, "node index out of range");
    copy_out(traj->traj.state(static_cast<int>(i)), x);
  });
}

fracctl_status fracctl_trajectory_residual(const fracctl_problem* prob, const fracctl_trajectory* traj,
                                           const fracctl_control* u, double* out) {
  return guarded([&] {
    need(prob, "prob");
    need(traj, "traj");
    need(u, "u");
    need(out, "out");
    *out = caputo_residual(prob->file.problem.sys, traj->traj, u->signal);
  });
}

fracctl_status fracctl_trajectory_write_csv(const fracctl_trajectory* traj, const char* path) {
  return guarded([&] {
    need(traj, "traj");
    std::ofstream os = open_out(path);
    write_trajectory_csv(os, traj->traj);
    finish(os, path);
  });
}

void fracctl_trajectory_free(fracctl_trajectory* traj) { delete traj; }

fracctl_status fracctl_gramian(const fracctl_problem* prob, double* Q, fracctl_gramian_info* info) {
  return guarded([&] {
    need(prob, "prob");
    const SteeringProblem& p = prob->file.problem;
    const GramianResult G = gramian(p.sys, p.T, p.quad, p.series);
    if (Q) copy_out(G.Q, Q);
    if (info) {
      info->rcond = G.rcond;
      info->quad_err = G.quad_err;
      info->min_eig = G.eigenvalues.minCoeff();
      info->max_eig = G.eigenvalues.maxCoeff();
      info->kalman_rank = kalman_rank(p.sys).rank;
    }
  });
}

double fracctl_gramian_threshold(void) { return kSingularGramianRcond; }

fracctl_status fracctl_synthesize(const fracctl_problem* prob, const char* method, fracctl_synthesis** out) {
  return guarded([&] {
    need(prob, "prob");
    need(out, "out");
    *out = nullptr;
    std::optional<Method> m = prob->file.method;
    if (method) {
      m = method_from_string(method);
      if (!m) fail(ErrorCode::InvalidInput, std::string("unknown method '") + method + "'");
    }
    if (!m) fail(ErrorCode::InvalidInput, "no synthesis method given");
    *out = new fracctl_synthesis{synthesize(prob->file.problem, *m)};
  });
}

fracctl_status fracctl_synthesis_energy(const fracctl_synthesis* syn, double* energy) {
  return guarded([&] {
    need(syn, "syn");
    need(energy, "energy");
    *energy = syn->result.energy;
  });
}

fracctl_status fracctl_synthesis_f(const fracctl_synthesis* syn, double* f) {
  return guarded([&] {
    need(syn, "syn");
    need(f, "f");
    copy_out(syn->result.f_T, f);
  });
}

fracctl_status fracctl_synthesis_verify(const fracctl_problem* prob, const fracctl_synthesis* syn,
                                        fracctl_report* report, double* terminal) {
  return guarded([&] {
    need(prob, "prob");
    need(syn, "syn");
    need(report, "report");
    const SteeringReport r = verify_steering(prob->file.problem, syn->result);
    report->terminal_abs = r.terminal_abs;
    report->terminal_rel = r.terminal_rel;
    report->energy = syn->result.energy;
    report->energy_quadrature = r.energy_quadrature;
    report->energy_gramian = r.energy_gramian;
    report->energy_mismatch = r.energy_mismatch;
    report->caputo_residual = r.caputo_residual;
    report->rcond = syn->result.rcond;
    if (terminal) copy_out(r.terminal_state, terminal);
  });
}

fracctl_status fracctl_synthesis_control(const fracctl_synthesis* syn, fracctl_control** out) {
  return guarded([&] {
    need(syn, "syn");
    need(out, "out");
    *out = nullptr;
    *out = new fracctl_control{syn->result.control};
  });
}

fracctl_status fracctl_synthesis_write_json(const fracctl_problem* prob, const fracctl_synthesis* syn,
                                            const char* path) {
  return guarded([&] {
    need(prob, "prob");
    need(syn, "syn");
    std::ofstream os = open_out(path);
    write_synthesis_json(os, syn->result, prob->file.problem.grid);
    finish(os, path);
  });
}

fracctl_status fracctl_synthesis_write_csv(const fracctl_problem* prob, const fracctl_synthesis* syn,
                                           const char* path) {
  return guarded([&] {
    need(prob, "prob");
    need(syn, "syn");
    std::ofstream os = open_out(path);
    write_control_csv(os, syn->result.control, prob->file.problem.grid);
    finish(os, path);
  });
}

void fracctl_synthesis_free(fracctl_synthesis* syn) { delete syn; }

fracctl_status fracctl_cl_trend_energy(int L, double T, const double* a, const double* b, double* out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = cl_trend_energy(L, T, Eigen::Map<const Vector>(a, 2), Eigen::Map<const Vector>(b, 2));
  });
}

}  // extern "C"
