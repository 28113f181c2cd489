#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxsplit/funcs.hpp"
#include "proxsplit/solvers.hpp"
#include "proxsplit/trace.hpp"

namespace proxsplit {

/// Outcome of one check. A margin is (allowed - observed); the check fails
/// when some margin drops below minus its slack.
struct CheckReport {
  std::string check;
  std::string instance;
  bool pass = true;
  double worst_margin = kInf;
  int n_violations = 0;
  std::vector<std::string> details;
  std::map<std::string, double> metrics;

  void observe(double margin, double slack, const std::string& where);
  void fail(const std::string& why);
  void note(const std::string& msg) { details.push_back(msg); }
};

nlohmann::json to_json(const CheckReport& r);
/// True when every report passes.
bool all_pass(const std::vector<CheckReport>& reports);

/// Inequality slack: abs + rel * |scale|.
inline double slack_for(double scale, double abs = 1e-9, double rel = 1e-12) {
  return abs + rel * std::abs(scale);
}

struct Optimum {
  Vector x;
  double value = 0.0;
};

// ---- descent and rates -----------------------------------------------------

enum class DescentScheme { gradient, forward_backward };

/// J(x_{n+1}) + c |x_{n+1} - x_n|^2 <= J(x_n), c = (2 - gamma L)/(2 gamma)
/// for gradient steps and 1/gamma - L/2 for forward-backward steps.
CheckReport check_descent_inequality(const SolverTrace& trace, double L,
                                     double gamma, DescentScheme scheme);

/// S_n = n (f(x_n) - f*) + (L/2) |x_n - x*|^2 is non-increasing, and
/// f(x_n) - f* <= L |x_0 - x*|^2 / (2n). Needs a snapshot at every step
/// (thin = 1), including n = 0.
CheckReport check_lyapunov_gd(const SolverTrace& trace, double L,
                              const Optimum& opt);

using RateBound = std::function<double(int n)>;

/// objective_n - opt_value <= bound(n) for every record n = 1..size.
CheckReport check_rate_bound(const SolverTrace& trace, double opt_value,
                             const RateBound& bound, const std::string& name);

RateBound gd_sublinear_bound(double L, double dist0_sq);
RateBound gd_linear_bound(double alpha, double L, double gap0);
RateBound fista_bound(double gamma, double dist0_sq);
RateBound vfista_bound(double alpha, double L, double gap0);

/// t_{n+1}^2 - t_{n+1} - t_n^2 = 0 on the "t" column of a fista_t trace.
CheckReport check_t_sequence(const SolverTrace& trace);

/// Column is non-increasing (strictly decreasing when `strict`), ignoring
/// NaN rows and the first `skip` rows.
CheckReport check_monotone(const std::vector<double>& column,
                           const std::string& name, bool strict = false,
                           int skip = 0);

/// a_n <= b_n for n >= from (1-based), over the common length.
CheckReport check_dominates(const std::vector<double>& a,
                            const std::vector<double>& b, int from,
                            const std::string& name);

/// Some value at record n <= within is <= threshold.
CheckReport check_reaches(const std::vector<double>& column, double threshold,
                          int within, const std::string& name);

// ---- rate fitting -----------------------------------------------------------

enum class RateModel { inv_n, inv_n2, geometric };

struct RateFit {
  double constant = 0.0;
  double ratio = 0.0;  // geometric model only
  double r2 = 0.0;     // in log space
  int used = 0;        // points used (positive prefix)
};

/// series[i] is the value at n = i + 1. Models: C / n, C / (n + 1)^2,
/// C * ratio^n. Fits the log-series on the leading positive prefix.
RateFit fit_rate(const std::vector<double>& series, RateModel model);

// ---- primal-dual ----------------------------------------------------------

struct SaddlePoint {
  Vector x, y;
};

/// Partial gap over a box with closed-form inner problems.
double check_pd_gap(const SaddleProblem& prob, const Vector& x, const Vector& y,
                    const GapBox& box);

/// (1/N)(|x0-x*|^2/(2 tau) + |y0-y*|^2/(2 sigma) - <K(x0-x*), y0-y*>).
double cp_gap_bound(const SaddleProblem& prob, const Vector& x0,
                    const Vector& y0, const SaddlePoint& sp, double sigma,
                    double tau, int N);
/// sup over the box of |x-x0|^2/(2 tau) + |y-y0|^2/(2 sigma), divided by N.
double cp_box_bound(const GapBox& box, const Vector& x0, const Vector& y0,
                    double sigma, double tau, int N);

/// Ergodic gap at the horizons against the bound above, with the gap taken
/// on the box {(x*, y*)}: h(x^N, y*) - h(x*, y^N). Reads x_avg / y_avg
/// snapshots, so every horizon must be a multiple of cfg.thin.
CheckReport check_cp_gap(const SaddleProblem& prob, const SolverTrace& trace,
                         const Vector& x0, const Vector& y0,
                         const SaddlePoint& sp, const std::vector<int>& horizons);
/// The same gap for the iterates paired as (x_n, y_{n+1}): averages of
/// x_1..x_N and y_2..y_{N+1}, bound evaluated from (x_0, y_1). Needs
/// snapshots at n = 1 and n = N + 1 for every horizon.
CheckReport check_cp_gap_shifted(const SaddleProblem& prob, const SolverTrace& trace,
                                 const Vector& x0, const SaddlePoint& sp,
                                 const std::vector<int>& horizons);
/// Ergodic partial gap over a bounded box against D(B1, B2) / N.
CheckReport check_cp_box_gap(const SaddleProblem& prob, const SolverTrace& trace,
                             const Vector& x0, const Vector& y0,
                             const GapBox& box, const std::vector<int>& horizons);
/// |y_n - y*|^2/(2 sigma) + |x_n - x*|^2/(2 tau) <= E_0 / (1 - tau sigma L^2)
/// for every snapshot (thin = 1 checks every iteration).
CheckReport check_cp_boundedness(const SolverTrace& trace, const Vector& x0,
                                 const Vector& y0, const SaddlePoint& sp);

// ---- equivalence harnesses ------------------------------------------------

/// Runs DR on (f, g) from w0 and Chambolle-Pock with K = Id, sigma = 1/gamma,
/// tau = gamma, and checks x_{n+1} = v_{n+1}, gamma y_{n+1} = v_n - w_{n+1}.
/// Defects are |a - b|_inf / (1 + |b|_inf).
CheckReport dr_cp_equivalence(const ProxFn& f, const ProxFn& g, double gamma,
                              const Vector& w0, int iters,
                              double threshold = 1e-8);

/// argmin_s (gamma/2)|K* s - u|^2 + f*(s), from prox_{gamma f o K}.
Vector metric_prox_conjugate(const ProxFn& f_of_K, const LinearOperator& K,
                             const Vector& u, double gamma);

/// Runs DR on (f o K, g) from w0 and ADMM on the dual with A = K*, B = Id,
/// b = 0, and checks z_n = -v_n, gamma y_n = w_n - v_n,
/// -gamma K* x_{n+1} = w_{n+1} - v_n. f must admit compose_with(f, K).
/// Refuses (fails) when K* is not injective.
CheckReport dr_admm_equivalence(const ProxFn& f, const ProxFn& g,
                                const LinearOperator& K, double gamma,
                                const Vector& w0, int iters,
                                double threshold = 1e-8);

/// Smallest eigenvalue of K K*, estimated by power iteration.
double min_eig_kkt(const LinearOperator& K);

// ---- property suites ------------------------------------------------------

struct PropertyOptions {
  int trials = 200;
  std::uint64_t seed = 0;
  Index dim = 4;       // used when the function accepts any length
  double scale = 3.0;  // samples uniform in [-scale, scale]
  std::vector<double> gammas = {0.1, 1.0, 10.0};
  double abs_tol = 1e-8;
  double rel_tol = 1e-12;
};

/// Descent lemma, finite-difference gradient, and when declared: cocoercivity,
/// strong monotonicity, and contraction of Id - gamma grad f.
std::vector<CheckReport> property_suite(const SmoothFn& f,
                                        const PropertyOptions& opt = {});
/// For convex declarations: firm nonexpansiveness of prox and Id - prox,
/// Rprox nonexpansive, prox characterization, Moreau identity (when an
/// independent conjugate prox exists), fixed point at a registered minimizer,
/// and contraction 1/(1 + alpha gamma) when strongly convex.
std::vector<CheckReport> property_suite(const ProxFn& f,
                                        const PropertyOptions& opt = {});

/// max |T x - T y| / |x - y| over random pairs for T = Id - gamma grad f.
double gradient_step_ratio(const SmoothFn& f, double gamma, int pairs,
                           std::uint64_t seed, Index dim, double scale);
/// max |prox x - prox y| / |x - y| over random pairs.
double prox_ratio(const ProxFn& f, double gamma, int pairs, std::uint64_t seed,
                  Index dim, double scale);

// ---- nonconvex monitors -----------------------------------------------------

struct KlOptions {
  std::vector<int> horizons = {100, 1000, 10000};
  double h1_slack = 1e-8;
};

/// H1 sufficient decrease with a = 1/(2 gamma) - L/2, the stated H2 witness
/// with b = 1/gamma, the subgradient witness against b = 1/gamma + L, and
/// the stability of C_N = sqrt(N) min_{n <= N} |x_n - x_{n-1}|.
CheckReport kl_monitor(const SolverTrace& trace, double gamma, double L,
                       const KlOptions& opt = {});

}  // namespace proxsplit
