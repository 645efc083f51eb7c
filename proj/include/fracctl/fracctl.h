/* C interface to libfracctl.
 *
 * Every function returns a fracctl_status. On failure the message is kept in
 * thread-local storage and can be read with fracctl_last_error() until the
 * next call on the same thread. Matrices are passed row-major. Objects are
 * opaque and released with their *_free function (NULL is accepted). */
#ifndef FRACCTL_H
#define FRACCTL_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fracctl_status {
  FRACCTL_OK = 0,
  FRACCTL_E_INVALID_PARAMS = 1,
  FRACCTL_E_INVALID_ORDER = 2,
  FRACCTL_E_DOMAIN = 3,
  FRACCTL_E_NONCONVERGENCE = 4,
  FRACCTL_E_SINGULAR_KERNEL = 5,
  FRACCTL_E_SINGULAR_GRAMIAN = 6,
  FRACCTL_E_RANK_DEFICIENT = 7,
  FRACCTL_E_RANK_DEFICIENT_B = 8,
  FRACCTL_E_INVALID_INPUT = 9,
  FRACCTL_E_IO = 10,
  FRACCTL_E_INTERNAL = 11
} fracctl_status;

const char* fracctl_last_error(void);
const char* fracctl_status_name(fracctl_status status);
/* Nonzero for statuses caused by bad input (parse errors, bad arguments,
 * unreadable files) as opposed to numerical failures. */
int fracctl_status_is_input_error(fracctl_status status);

/* ---- special functions ------------------------------------------------ */

/* rel_tol <= 0 or max_terms <= 0 select the defaults (1e-14, 500). */
fracctl_status fracctl_ml(double alpha, double beta, double z, double rel_tol, int max_terms, double* out);
fracctl_status fracctl_frac_sin(double alpha, double t, double* out);
fracctl_status fracctl_frac_cos(double alpha, double t, double* out);
fracctl_status fracctl_cl_truncation(int L, double t, double* out);
/* out receives n*n entries. */
fracctl_status fracctl_alpha_exp(const double* A, int n, double alpha, double t, double* out);
fracctl_status fracctl_state_transition(const double* A, int n, double alpha, double t, double* out);
fracctl_status fracctl_inverse_kernel(const double* A, int n, double alpha, double t, double* out);

/* ---- problems ------------------------------------------------------------ */

typedef struct fracctl_problem fracctl_problem;

typedef struct fracctl_problem_info {
  int n, m, p;
  double alpha;
  double T;
  int steps;
  int has_method;  /* method[] is valid when nonzero */
  char method[16];
  int has_control;
} fracctl_problem_info;

fracctl_status fracctl_problem_load(const char* path, fracctl_problem** out);
/* base_dir resolves relative control paths; may be NULL. */
fracctl_status fracctl_problem_parse(const char* json_text, const char* base_dir, fracctl_problem** out);
fracctl_status fracctl_problem_get_info(const fracctl_problem* prob, fracctl_problem_info* info);
/* Initial state a, target b and S_0(T) a, n entries each (any may be NULL). */
fracctl_status fracctl_problem_get_states(const fracctl_problem* prob, double* a, double* b, double* s0a);
void fracctl_problem_free(fracctl_problem* prob);

/* ---- controls and trajectories ------------------------------------------- */

typedef struct fracctl_control fracctl_control;
typedef struct fracctl_trajectory fracctl_trajectory;

/* The control named in the problem's control block. */
fracctl_status fracctl_control_from_problem(const fracctl_problem* prob, fracctl_control** out);
fracctl_status fracctl_control_eval(const fracctl_control* u, double t, double* out);
void fracctl_control_free(fracctl_control* u);

fracctl_status fracctl_simulate(const fracctl_problem* prob, const fracctl_control* u, fracctl_trajectory** out);
fracctl_status fracctl_trajectory_dims(const fracctl_trajectory* traj, int* nodes, int* n, int* p);
fracctl_status fracctl_trajectory_state(const fracctl_trajectory* traj, int node, double* x);
fracctl_status fracctl_trajectory_residual(const fracctl_problem* prob, const fracctl_trajectory* traj,
                                           const fracctl_control* u, double* out);
fracctl_status fracctl_trajectory_write_csv(const fracctl_trajectory* traj, const char* path);
void fracctl_trajectory_free(fracctl_trajectory* traj);

/* ---- Gramian and rank ----------------------------------------------------- */

typedef struct fracctl_gramian_info {
  double rcond;
  double quad_err;
  double min_eig;
  double max_eig;
  int kalman_rank;
} fracctl_gramian_info;

/* Q receives n*n entries (may be NULL). */
fracctl_status fracctl_gramian(const fracctl_problem* prob, double* Q, fracctl_gramian_info* info);
double fracctl_gramian_threshold(void);

/* ---- synthesis -------------------------------------------------------------- */

typedef struct fracctl_synthesis fracctl_synthesis;

typedef struct fracctl_report {
  double terminal_abs;
  double terminal_rel;
  double energy;             /* reported by the synthesis */
  double energy_quadrature;  /* recomputed */
  double energy_gramian;     /* NaN unless min-energy */
  double energy_mismatch;    /* NaN unless min-energy */
  double caputo_residual;
  double rcond;              /* NaN unless min-energy with f_T != 0 */
} fracctl_report;

/* method: "min-energy", "pinv", "rank", or NULL for the problem's method. */
fracctl_status fracctl_synthesize(const fracctl_problem* prob, const char* method, fracctl_synthesis** out);
fracctl_status fracctl_synthesis_energy(const fracctl_synthesis* syn, double* energy);
fracctl_status fracctl_synthesis_f(const fracctl_synthesis* syn, double* f);
/* Fills everything; terminal may be NULL or receive n entries. */
fracctl_status fracctl_synthesis_verify(const fracctl_problem* prob, const fracctl_synthesis* syn,
                                        fracctl_report* report, double* terminal);
fracctl_status fracctl_synthesis_control(const fracctl_synthesis* syn, fracctl_control** out);
fracctl_status fracctl_synthesis_write_json(const fracctl_problem* prob, const fracctl_synthesis* syn,
                                            const char* path);
fracctl_status fracctl_synthesis_write_csv(const fracctl_problem* prob, const fracctl_synthesis* syn,
                                           const char* path);
void fracctl_synthesis_free(fracctl_synthesis* syn);

/* Minimal energy of the rotation example with cos_{1/2} replaced by its
 * truncation c_L inside the Gramian (historical trend table). a and b have
 * two entries. */
fracctl_status fracctl_cl_trend_energy(int L, double T, const double* a, const double* b, double* out);

#ifdef __cplusplus
}
#endif

#endif /* FRACCTL_H */
