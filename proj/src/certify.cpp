#include "proxsplit/certify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "proxsplit/cg.hpp"
#include "proxsplit/errors.hpp"
#include "proxsplit/random.hpp"

namespace proxsplit {

namespace {

constexpr int kMaxListed = 10;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const Snapshot* find_snapshot(const SolverTrace& t, int n) {
  for (const auto& s : t.snapshots)
    if (s.n == n) return &s;
  return nullptr;
}

const Vector& aux(const Snapshot& s, const std::string& name) {
  auto it = s.aux.find(name);
  if (it == s.aux.end())
    throw ConfigError("snapshot " + std::to_string(s.n) + " has no '" + name + "'");
  return it->second;
}

double objective_at(const SolverTrace& t, int n) {
  return n == 0 ? t.initial_objective : t.objective[static_cast<std::size_t>(n - 1)];
}

double defect(const Vector& a, const Vector& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / (1.0 + b.lpNorm<Eigen::Infinity>());
}

double summary_value(const SolverTrace& t, const std::string& key) {
  auto it = t.summary.find(key);
  if (it == t.summary.end())
    throw ConfigError(t.algorithm + " trace has no summary entry '" + key + "'");
  return it->second;
}

}  // namespace

void CheckReport::observe(double margin, double slack, const std::string& where) {
  if (std::isnan(margin)) {
    fail("NaN margin at " + where);
    return;
  }
  worst_margin = std::min(worst_margin, margin);
  if (margin < -slack) {
    pass = false;
    if (n_violations < kMaxListed)
      details.push_back("violation at " + where + ": margin " + num(margin));
    ++n_violations;
  }
}

void CheckReport::fail(const std::string& why) {
  pass = false;
  ++n_violations;
  details.push_back(why);
}

nlohmann::json to_json(const CheckReport& r) {
  nlohmann::json j;
  j["check"] = r.check;
  j["instance"] = r.instance;
  j["pass"] = r.pass;
  j["worst_margin"] = std::isfinite(r.worst_margin) ? nlohmann::json(r.worst_margin)
                                                    : nlohmann::json(nullptr);
  j["n_violations"] = r.n_violations;
  auto details = nlohmann::json::array();
  for (const auto& d : r.details) details.push_back(d);
  for (const auto& [k, v] : r.metrics) details.push_back(k + " = " + num(v));
  j["details"] = std::move(details);
  return j;
}

bool all_pass(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(),
                     [](const CheckReport& r) { return r.pass; });
}

// ---------------------------------------------------------------------------

CheckReport check_descent_inequality(const SolverTrace& trace, double L,
                                     double gamma, DescentScheme scheme) {
  CheckReport r;
  r.check = "descent_inequality";
  r.instance = trace.algorithm;
  if (!(gamma > 0.0)) {
    r.fail("gamma must be > 0");
    return r;
  }
  const double c = scheme == DescentScheme::gradient
                       ? (2.0 - gamma * L) / (2.0 * gamma)
                       : 1.0 / gamma - 0.5 * L;
  r.metrics["c"] = c;
  double prev = trace.initial_objective;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double cur = trace.objective[k];
    const double res = trace.residual[k];
    if (std::isfinite(prev) && std::isfinite(cur))
      r.observe(prev - cur - c * res * res, slack_for(prev),
                "n=" + std::to_string(k + 1));
    prev = cur;
  }
  return r;
}

CheckReport check_lyapunov_gd(const SolverTrace& trace, double L,
                              const Optimum& opt) {
  CheckReport r;
  r.check = "lyapunov_gd";
  r.instance = trace.algorithm;
  const Snapshot* s0 = find_snapshot(trace, 0);
  if (!s0) {
    r.fail("no snapshot at n=0; run with thin = 1");
    return r;
  }
  const double d0 = (s0->x - opt.x).squaredNorm();
  double S_prev = 0.5 * L * d0;
  r.metrics["S0"] = S_prev;
  const int N = static_cast<int>(trace.size());
  for (int n = 1; n <= N; ++n) {
    const Snapshot* s = find_snapshot(trace, n);
    if (!s) {
      r.fail("missing snapshot at n=" + std::to_string(n) + "; run with thin = 1");
      return r;
    }
    const double gap = objective_at(trace, n) - opt.value;
    const double S = n * gap + 0.5 * L * (s->x - opt.x).squaredNorm();
    const std::string where = "n=" + std::to_string(n);
    r.observe(S_prev - S, slack_for(S_prev), where);
    r.observe(L * d0 / (2.0 * n) - gap, slack_for(objective_at(trace, n)), where);
    S_prev = S;
  }
  r.metrics["S_final"] = S_prev;
  return r;
}

CheckReport check_rate_bound(const SolverTrace& trace, double opt_value,
                             const RateBound& bound, const std::string& name) {
  CheckReport r;
  r.check = name;
  r.instance = trace.algorithm;
  double worst_ratio = 0.0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const int n = static_cast<int>(k + 1);
    const double gap = trace.objective[k] - opt_value;
    const double b = bound(n);
    r.observe(b - gap, slack_for(trace.objective[k]), "n=" + std::to_string(n));
    if (b > 0.0) worst_ratio = std::max(worst_ratio, gap / b);
  }
  r.metrics["max_gap_over_bound"] = worst_ratio;
  return r;
}

RateBound gd_sublinear_bound(double L, double dist0_sq) {
  return [=](int n) { return L * dist0_sq / (2.0 * n); };
}

RateBound gd_linear_bound(double alpha, double L, double gap0) {
  return [=](int n) { return std::pow(1.0 - alpha / L, n) * gap0; };
}

RateBound fista_bound(double gamma, double dist0_sq) {
  return [=](int n) { return 2.0 * dist0_sq / (gamma * (n + 1.0) * (n + 1.0)); };
}

RateBound vfista_bound(double alpha, double L, double gap0) {
  return [=](int n) { return std::pow(1.0 - std::sqrt(alpha / L), n) * gap0; };
}

CheckReport check_t_sequence(const SolverTrace& trace) {
  CheckReport r;
  r.check = "t_sequence";
  r.instance = trace.algorithm;
  if (!trace.has_column("t")) {
    r.fail("trace has no t column (fista_t inertia)");
    return r;
  }
  const auto& t = trace.column("t");
  if (!t.empty()) r.observe(-std::abs(t[0] - 1.0), 0.0, "t_1");
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double e = t[k] * t[k] - t[k] - t[k - 1] * t[k - 1];
    r.observe(-std::abs(e), 1e-12 * t[k] * t[k], "n=" + std::to_string(k + 1));
  }
  return r;
}

CheckReport check_monotone(const std::vector<double>& column,
                           const std::string& name, bool strict, int skip) {
  CheckReport r;
  r.check = strict ? "strictly_decreasing" : "non_increasing";
  r.instance = name;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = static_cast<std::size_t>(std::max(skip, 0)); k < column.size();
       ++k) {
    const double cur = column[k];
    if (std::isnan(cur)) continue;
    if (!std::isnan(prev)) {
      const std::string where = "n=" + std::to_string(k + 1);
      if (strict) {
        r.worst_margin = std::min(r.worst_margin, prev - cur);
        if (!(cur < prev)) {
          if (r.n_violations < kMaxListed)
            r.details.push_back("not decreasing at " + where);
          ++r.n_violations;
          r.pass = false;
        }
      } else {
        r.observe(prev - cur, slack_for(prev), where);
      }
    }
    prev = cur;
  }
  return r;
}

CheckReport check_dominates(const std::vector<double>& a,
                            const std::vector<double>& b, int from,
                            const std::string& name) {
  CheckReport r;
  r.check = "dominates";
  r.instance = name;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t k = static_cast<std::size_t>(std::max(from, 1) - 1); k < n; ++k)
    r.observe(b[k] - a[k], slack_for(b[k]), "n=" + std::to_string(k + 1));
  return r;
}

CheckReport check_reaches(const std::vector<double>& column, double threshold,
                          int within, const std::string& name) {
  CheckReport r;
  r.check = "reaches_threshold";
  r.instance = name;
  const std::size_t lim = std::min(column.size(), static_cast<std::size_t>(within));
  double best = kInf;
  for (std::size_t k = 0; k < lim; ++k) {
    best = std::min(best, column[k]);
    if (column[k] <= threshold) {
      r.metrics["first_n"] = static_cast<double>(k + 1);
      r.worst_margin = threshold - column[k];
      return r;
    }
  }
  r.worst_margin = threshold - best;
  r.fail("no value <= " + num(threshold) + " within " + std::to_string(within) +
         " records (best " + num(best) + ")");
  return r;
}

// ---------------------------------------------------------------------------

RateFit fit_rate(const std::vector<double>& series, RateModel model) {
  std::vector<double> ns, ls;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!(series[i] > 0.0) || !std::isfinite(series[i])) break;
    ns.push_back(static_cast<double>(i + 1));
    ls.push_back(std::log(series[i]));
  }
  RateFit fit;
  fit.used = static_cast<int>(ns.size());
  if (ns.empty()) throw ConfigError("fit_rate: series has no positive prefix");
  const double m = static_cast<double>(ns.size());
  std::vector<double> pred(ns.size());
  if (model == RateModel::geometric) {
    double sn = 0, sl = 0, snn = 0, snl = 0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      sn += ns[i];
      sl += ls[i];
      snn += ns[i] * ns[i];
      snl += ns[i] * ls[i];
    }
    const double den = m * snn - sn * sn;
    const double slope = den > 0.0 ? (m * snl - sn * sl) / den : 0.0;
    const double icpt = (sl - slope * sn) / m;
    fit.constant = std::exp(icpt);
    fit.ratio = std::exp(slope);
    for (std::size_t i = 0; i < ns.size(); ++i) pred[i] = icpt + slope * ns[i];
  } else {
    auto basis = [model](double n) {
      return model == RateModel::inv_n ? -std::log(n) : -2.0 * std::log(n + 1.0);
    };
    double s = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) s += ls[i] - basis(ns[i]);
    const double logc = s / m;
    fit.constant = std::exp(logc);
    for (std::size_t i = 0; i < ns.size(); ++i) pred[i] = logc + basis(ns[i]);
  }
  double mean = 0.0;
  for (double v : ls) mean += v;
  mean /= m;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    ss_res += (ls[i] - pred[i]) * (ls[i] - pred[i]);
    ss_tot += (ls[i] - mean) * (ls[i] - mean);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res < 1e-20 ? 1.0 : 0.0);
  return fit;
}

// ---------------------------------------------------------------------------

double check_pd_gap(const SaddleProblem& prob, const Vector& x, const Vector& y,
                    const GapBox& box) {
  return partial_gap(prob, x, y, box);
}

double cp_gap_bound(const SaddleProblem& prob, const Vector& x0,
                    const Vector& y0, const SaddlePoint& sp, double sigma,
                    double tau, int N) {
  const Vector dx = x0 - sp.x;
  const Vector dy = y0 - sp.y;
  return (dx.squaredNorm() / (2.0 * tau) + dy.squaredNorm() / (2.0 * sigma) -
          prob.K.apply(dx).dot(dy)) /
         N;
}

double cp_box_bound(const GapBox& box, const Vector& x0, const Vector& y0,
                    double sigma, double tau, int N) {
  auto far = [](const Vector& lo, const Vector& hi, const Vector& c) {
    double s = 0.0;
    for (Index i = 0; i < c.size(); ++i) {
      const double a = lo[i] - c[i], b = hi[i] - c[i];
      s += std::max(a * a, b * b);
    }
    return s;
  };
  return (far(box.x_lo, box.x_hi, x0) / (2.0 * tau) +
          far(box.y_lo, box.y_hi, y0) / (2.0 * sigma)) /
         N;
}

CheckReport check_cp_gap(const SaddleProblem& prob, const SolverTrace& trace,
                         const Vector& x0, const Vector& y0,
                         const SaddlePoint& sp, const std::vector<int>& horizons) {
  CheckReport r;
  r.check = "cp_ergodic_gap";
  r.instance = trace.algorithm;
  const double sigma = summary_value(trace, "sigma");
  const double tau = summary_value(trace, "tau");
  for (int N : horizons) {
    const Snapshot* s = find_snapshot(trace, N);
    if (!s) {
      r.fail("no snapshot at N=" + std::to_string(N));
      continue;
    }
    const Vector& xa = aux(*s, "x_avg");
    const Vector& ya = aux(*s, "y_avg");
    const double gap = prob.lagrangian(xa, sp.y) - prob.lagrangian(sp.x, ya);
    const double bound = cp_gap_bound(prob, x0, y0, sp, sigma, tau, N);
    const std::string where = "N=" + std::to_string(N);
    r.observe(bound - gap, slack_for(bound), where);
    r.observe(gap, slack_for(bound), where + " (gap >= 0)");
    r.metrics["gap_N" + std::to_string(N)] = gap;
    r.metrics["bound_N" + std::to_string(N)] = bound;
  }
  return r;
}

CheckReport check_cp_gap_shifted(const SaddleProblem& prob, const SolverTrace& trace,
                                 const Vector& x0, const SaddlePoint& sp,
                                 const std::vector<int>& horizons) {
  CheckReport r;
  r.check = "cp_ergodic_gap_shifted";
  r.instance = trace.algorithm;
  const double sigma = summary_value(trace, "sigma");
  const double tau = summary_value(trace, "tau");
  const Snapshot* first = find_snapshot(trace, 1);
  if (!first) {
    r.fail("no snapshot at n=1");
    return r;
  }
  const Vector& y1 = aux(*first, "y");
  for (int N : horizons) {
    const Snapshot* sN = find_snapshot(trace, N);
    const Snapshot* sN1 = find_snapshot(trace, N + 1);
    if (!sN || !sN1) {
      r.fail("no snapshots at N=" + std::to_string(N) + " and N+1");
      continue;
    }
    const Vector& xa = aux(*sN, "x_avg");
    const Vector ya = (static_cast<double>(N + 1) * aux(*sN1, "y_avg") - y1) / N;
    const double gap = prob.lagrangian(xa, sp.y) - prob.lagrangian(sp.x, ya);
    const double bound = cp_gap_bound(prob, x0, y1, sp, sigma, tau, N);
    const std::string where = "N=" + std::to_string(N);
    r.observe(bound - gap, slack_for(bound), where);
    r.observe(gap, slack_for(bound), where + " (gap >= 0)");
    r.metrics["gap_N" + std::to_string(N)] = gap;
    r.metrics["bound_N" + std::to_string(N)] = bound;
  }
  return r;
}

CheckReport check_cp_box_gap(const SaddleProblem& prob, const SolverTrace& trace,
                             const Vector& x0, const Vector& y0,
                             const GapBox& box, const std::vector<int>& horizons) {
  CheckReport r;
  r.check = "cp_box_gap";
  r.instance = trace.algorithm;
  const double sigma = summary_value(trace, "sigma");
  const double tau = summary_value(trace, "tau");
  for (int N : horizons) {
    const Snapshot* s = find_snapshot(trace, N);
    if (!s) {
      r.fail("no snapshot at N=" + std::to_string(N));
      continue;
    }
    const double gap = partial_gap(prob, aux(*s, "x_avg"), aux(*s, "y_avg"), box);
    const double bound = cp_box_bound(box, x0, y0, sigma, tau, N);
    const std::string where = "N=" + std::to_string(N);
    r.observe(bound - gap, slack_for(bound), where);
    r.observe(gap, slack_for(bound), where + " (gap >= 0)");
    r.metrics["gap_N" + std::to_string(N)] = gap;
    r.metrics["bound_N" + std::to_string(N)] = bound;
  }
  return r;
}

CheckReport check_cp_boundedness(const SolverTrace& trace, const Vector& x0,
                                 const Vector& y0, const SaddlePoint& sp) {
  CheckReport r;
  r.check = "cp_boundedness";
  r.instance = trace.algorithm;
  const double sigma = summary_value(trace, "sigma");
  const double tau = summary_value(trace, "tau");
  const double L = summary_value(trace, "operator_norm");
  const double q = 1.0 - tau * sigma * L * L;
  if (!(q > 0.0)) {
    r.fail("tau*sigma*L^2 >= 1");
    return r;
  }
  auto E = [&](const Vector& x, const Vector& y) {
    return (y - sp.y).squaredNorm() / (2.0 * sigma) +
           (x - sp.x).squaredNorm() / (2.0 * tau);
  };
  const double bound = E(x0, y0) / q;
  r.metrics["bound"] = bound;
  int checked = 0;
  for (const auto& s : trace.snapshots) {
    if (s.n == 0) continue;
    r.observe(bound - E(s.x, aux(s, "y")), slack_for(bound),
              "n=" + std::to_string(s.n));
    ++checked;
  }
  r.metrics["checked"] = checked;
  if (checked == 0) r.fail("no snapshots to check");
  return r;
}

// ---------------------------------------------------------------------------

CheckReport dr_cp_equivalence(const ProxFn& f, const ProxFn& g, double gamma,
                              const Vector& w0, int iters, double threshold) {
  CheckReport r;
  r.check = "dr_cp_equivalence";
  r.instance = f.name + " + " + g.name + ", gamma=" + num(gamma);
  SolverConfig dc;
  dc.gamma = gamma;
  dc.max_iter = iters;
  dc.thin = 1;
  const SolverTrace dr = douglas_rachford(f, g, w0, dc);

  const Index n = w0.size();
  const Vector v0 = g.prox(w0, gamma);
  SaddleProblem prob{conjugate(f), g, LinearOperator::identity(n), f};
  SolverConfig cc;
  cc.sigma = 1.0 / gamma;
  cc.tau = gamma;
  cc.max_iter = iters;
  cc.thin = 1;
  const SolverTrace cp =
      detail::chambolle_pock_unchecked(prob, v0, (v0 - w0) / gamma, cc);
  if (dr.size() != static_cast<std::size_t>(iters) ||
      cp.size() != static_cast<std::size_t>(iters)) {
    r.fail("runs stopped early: DR " + std::to_string(dr.size()) + ", CP " +
           std::to_string(cp.size()));
    return r;
  }
  double worst = 0.0;
  for (int k = 0; k < iters; ++k) {
    const Snapshot* d0 = find_snapshot(dr, k);
    const Snapshot* d1 = find_snapshot(dr, k + 1);
    const Snapshot* c1 = find_snapshot(cp, k + 1);
    const Vector& v_n = aux(*d0, "y");
    const Vector& v_n1 = aux(*d1, "y");
    const Vector& w_n1 = d1->x;
    const double e1 = defect(c1->x, v_n1);
    const double e2 = defect(gamma * aux(*c1, "y"), v_n - w_n1);
    const std::string where = "n=" + std::to_string(k + 1);
    r.observe(threshold - e1, 0.0, where + " (x)");
    r.observe(threshold - e2, 0.0, where + " (y)");
    worst = std::max({worst, e1, e2});
  }
  r.metrics["max_defect"] = worst;
  return r;
}

Vector metric_prox_conjugate(const ProxFn& f_of_K, const LinearOperator& K,
                             const Vector& u, double gamma) {
  const Vector inner = u - f_of_K.prox(gamma * u, gamma) / gamma;
  const Vector rhs = K.apply(inner);
  return solve_normal(LinearOperator::adjoint_of(K), 0.0, 1.0, rhs,
                      Vector::Zero(K.out_dim()))
      .x;
}

double min_eig_kkt(const LinearOperator& K) {
  LinearOperator k = K;
  const double top = std::pow(operator_norm(k, 1e-12, 100000).value, 2);
  const Index m = K.out_dim();
  auto shifted = [K, top](const Vector& v) -> Vector {
    return top * v - K.apply(K.adjoint_apply(v));
  };
  LinearOperator S = LinearOperator::from_functions(m, m, shifted, shifted, "shifted KK*");
  const double s = operator_norm(S, 1e-12, 100000).value;
  return top - s;
}

namespace {

// Conjugate-side probe for the ADMM objective column.
ProxFn conjugate_probe(const ProxFn& f) {
  ProxFn p;
  p.name = "conj(" + f.name + ")";
  p.value = f.conjugate_value ? f.conjugate_value
                              : std::function<double(const Vector&)>(
                                    [](const Vector&) { return 0.0; });
  return p;
}

}  // namespace

CheckReport dr_admm_equivalence(const ProxFn& f, const ProxFn& g,
                                const LinearOperator& K, double gamma,
                                const Vector& w0, int iters, double threshold) {
  CheckReport r;
  r.check = "dr_admm_equivalence";
  r.instance = f.name + " o " + K.describe() + " + " + g.name + ", gamma=" + num(gamma);
  const double lam = min_eig_kkt(K);
  r.metrics["min_eig_KKt"] = lam;
  LinearOperator kcopy = K;
  const double top = std::pow(operator_norm(kcopy).value, 2);
  if (!(lam > 1e-10 * std::max(1.0, top))) {
    r.fail("K* is not injective (smallest eigenvalue of KK* is " + num(lam) + ")");
    return r;
  }
  const ProxFn fK = compose_with(f, K);
  SolverConfig dc;
  dc.gamma = gamma;
  dc.max_iter = iters;
  dc.thin = 1;
  const SolverTrace dr = douglas_rachford(fK, g, w0, dc);

  const Index n = w0.size();
  const Vector v0 = g.prox(w0, gamma);
  AdmmBlock xb{conjugate_probe(f), LinearOperator::adjoint_of(K),
               [fK, K](const Vector& u, double gm) {
                 return metric_prox_conjugate(fK, K, u, gm);
               }};
  AdmmBlock yb{conjugate_probe(g), LinearOperator::identity(n),
               [g](const Vector& u, double gm) { return prox_conjugate(g, u, 1.0 / gm); }};
  SolverConfig ac;
  ac.gamma = gamma;
  ac.max_iter = iters;
  ac.thin = 1;
  const SolverTrace ad =
      admm(xb, yb, Vector::Zero(n), (w0 - v0) / gamma, -v0, ac);
  if (dr.size() != static_cast<std::size_t>(iters) ||
      ad.size() != static_cast<std::size_t>(iters)) {
    r.fail("runs stopped early: DR " + std::to_string(dr.size()) + ", ADMM " +
           std::to_string(ad.size()));
    return r;
  }
  double worst = 0.0;
  for (int k = 0; k <= iters; ++k) {
    const Snapshot* d = find_snapshot(dr, k);
    const Snapshot* a = find_snapshot(ad, k);
    const Vector& w = d->x;
    const Vector& v = aux(*d, "y");
    const Vector& z = aux(*a, "z");
    const Vector y = k == 0 ? a->x : aux(*a, "y");
    const std::string where = "n=" + std::to_string(k);
    const double e1 = defect(z, -v);
    const double e2 = defect(gamma * y, w - v);
    r.observe(threshold - e1, 0.0, where + " (z)");
    r.observe(threshold - e2, 0.0, where + " (y)");
    worst = std::max({worst, e1, e2});
    if (k < iters) {
      const Snapshot* d1 = find_snapshot(dr, k + 1);
      const Snapshot* a1 = find_snapshot(ad, k + 1);
      const double e3 = defect(-gamma * K.adjoint_apply(a1->x), d1->x - v);
      r.observe(threshold - e3, 0.0, where + " (x)");
      worst = std::max(worst, e3);
    }
  }
  r.metrics["max_defect"] = worst;
  return r;
}

// ---------------------------------------------------------------------------

double gradient_step_ratio(const SmoothFn& f, double gamma, int pairs,
                           std::uint64_t seed, Index dim, double scale) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < pairs; ++t) {
    const Vector x = rng.uniform_vector(dim, -scale, scale);
    const Vector y = rng.uniform_vector(dim, -scale, scale);
    const double d = (x - y).norm();
    if (d == 0.0) continue;
    const Vector tx = x - gamma * f.grad(x);
    const Vector ty = y - gamma * f.grad(y);
    worst = std::max(worst, (tx - ty).norm() / d);
  }
  return worst;
}

double prox_ratio(const ProxFn& f, double gamma, int pairs, std::uint64_t seed,
                  Index dim, double scale) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < pairs; ++t) {
    const Vector x = rng.uniform_vector(dim, -scale, scale);
    const Vector y = rng.uniform_vector(dim, -scale, scale);
    const double d = (x - y).norm();
    if (d == 0.0) continue;
    worst = std::max(worst, (f.prox(x, gamma) - f.prox(y, gamma)).norm() / d);
  }
  return worst;
}

std::vector<CheckReport> property_suite(const SmoothFn& f,
                                        const PropertyOptions& opt) {
  const Index d = f.quadratic ? f.quadratic->A.in_dim() : opt.dim;
  const double L = f.lipschitz;
  const double alpha = f.strong_convexity.value_or(0.0);
  auto tol = [&](double s) { return opt.abs_tol + opt.rel_tol * std::abs(s); };
  auto make = [&](const std::string& name) {
    CheckReport r;
    r.check = name;
    r.instance = f.name;
    return r;
  };
  CheckReport descent = make("descent_lemma");
  CheckReport fd = make("finite_difference_gradient");
  CheckReport coco = make("cocoercivity");
  CheckReport strong = make("strong_monotonicity");
  CheckReport contract = make("gradient_step_contraction");
  Rng rng(opt.seed);
  const double gam[2] = {0.5 / L, 0.99 / L};
  for (int t = 0; t < opt.trials; ++t) {
    const std::string where = "trial " + std::to_string(t);
    const Vector x = rng.uniform_vector(d, -opt.scale, opt.scale);
    const Vector y = rng.uniform_vector(d, -opt.scale, opt.scale);
    const double fx = f.eval(x), fy = f.eval(y);
    const Vector gx = f.grad(x), gy = f.grad(y);
    descent.observe(fy + gy.dot(x - y) + 0.5 * L * (x - y).squaredNorm() - fx,
                    tol(std::abs(fx) + std::abs(fy)), where);

    const double h = 1e-6 * (1.0 + x.norm());
    Vector num_grad(d);
    for (Index i = 0; i < d; ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      num_grad[i] = (f.eval(xp) - f.eval(xm)) / (2.0 * h);
    }
    fd.observe(1e-5 * std::max(1.0, gx.norm()) - (num_grad - gx).norm(), 0.0, where);

    const Vector dg = gx - gy, dx = x - y;
    const double ip = dg.dot(dx);
    if (f.convex && L > 0.0) coco.observe(ip - dg.squaredNorm() / L, tol(ip), where);
    if (alpha > 0.0) {
      strong.observe(ip - alpha * dx.squaredNorm(), tol(ip), where);
      const double gm = gam[t % 2];
      const double lhs = ((x - gm * gx) - (y - gm * gy)).norm();
      contract.observe(std::sqrt(1.0 - gm * alpha) * dx.norm() - lhs,
                       tol(dx.norm()), where);
    }
  }
  std::vector<CheckReport> out{descent, fd};
  if (f.convex && L > 0.0)
    out.push_back(coco);
  if (alpha > 0.0) {
    out.push_back(strong);
    out.push_back(contract);
  }
  return out;
}

std::vector<CheckReport> property_suite(const ProxFn& f,
                                        const PropertyOptions& opt) {
  const Index d = f.dim > 0 ? f.dim : opt.dim;
  const double alpha = f.strong_convexity.value_or(0.0);
  auto tol = [&](double s) { return opt.abs_tol + opt.rel_tol * std::abs(s); };
  auto make = [&](const std::string& name) {
    CheckReport r;
    r.check = name;
    r.instance = f.name;
    return r;
  };
  CheckReport optimal = make("prox_optimality");
  CheckReport firm = make("firm_nonexpansive");
  CheckReport firm_c = make("firm_nonexpansive_complement");
  CheckReport rprox = make("rprox_nonexpansive");
  CheckReport charac = make("prox_characterization");
  CheckReport moreau = make("moreau_identity");
  CheckReport fixed = make("fixed_point_minimizer");
  CheckReport contract = make("strong_prox_contraction");
  Rng rng(opt.seed);
  const Vector m = f.minimizer ? f.minimizer(d) : Vector();
  for (int t = 0; t < opt.trials; ++t) {
    const double g = opt.gammas[static_cast<std::size_t>(t) % opt.gammas.size()];
    const std::string where = "trial " + std::to_string(t) + " gamma=" + num(g);
    const Vector x = rng.uniform_vector(d, -opt.scale, opt.scale);
    const Vector y = rng.uniform_vector(d, -opt.scale, opt.scale);
    const Vector c = rng.uniform_vector(d, -opt.scale, opt.scale);
    const Vector p = f.prox(x, g), q = f.prox(y, g);

    // The prox value beats a feasible competitor and a random point.
    const double fp = f.eval(p);
    const double obj_p = 0.5 * (p - x).squaredNorm() + g * fp;
    for (const Vector& z : {q, c}) {
      const double fz = f.eval(z);
      if (!std::isfinite(fz)) continue;
      optimal.observe(0.5 * (z - x).squaredNorm() + g * fz - obj_p, tol(obj_p), where);
    }
    if (!f.convex) continue;

    const Vector dx = x - y, dp = p - q, dr = dx - dp;
    firm.observe(dp.dot(dx) - dp.squaredNorm(), tol(dx.squaredNorm()), where);
    firm_c.observe(dr.dot(dx) - dr.squaredNorm(), tol(dx.squaredNorm()), where);
    rprox.observe(dx.norm() - (2.0 * dp - dx).norm(), tol(dx.norm()), where);

    const double fq = f.eval(q);
    if (std::isfinite(fq) && std::isfinite(fp))
      charac.observe(fq - fp - (q - p).dot(x - p) / g,
                     tol(std::abs(fq) + std::abs(fp)), where);

    if (f.conjugate_prox) {
      const Vector lhs = p + g * f.conjugate_prox(x / g, 1.0 / g);
      moreau.observe(-(lhs - x).norm(), tol(x.norm()), where);
    }
    if (m.size() > 0)
      fixed.observe(-(f.prox(m, g) - m).norm(), 1e-10, where);
    if (alpha > 0.0)
      contract.observe(dx.norm() / (1.0 + alpha * g) - dp.norm(), tol(dx.norm()), where);
  }
  std::vector<CheckReport> out{optimal};
  if (!f.convex) {
    optimal.note("declared nonconvex; convex properties not applicable");
    out[0] = optimal;
    return out;
  }
  out.push_back(firm);
  out.push_back(firm_c);
  out.push_back(rprox);
  out.push_back(charac);
  if (!f.conjugate_prox) moreau.note("skipped: no independent conjugate prox");
  out.push_back(moreau);
  if (m.size() > 0) out.push_back(fixed);
  if (alpha > 0.0) out.push_back(contract);
  return out;
}

// ---------------------------------------------------------------------------

CheckReport kl_monitor(const SolverTrace& trace, double gamma, double L,
                       const KlOptions& opt) {
  CheckReport r;
  r.check = "kl_monitor";
  r.instance = trace.algorithm;
  const double a = 1.0 / (2.0 * gamma) - 0.5 * L;
  const double b_stated = 1.0 / gamma;
  const double b_true = 1.0 / gamma + L;
  r.metrics["a"] = a;
  if (!(a > 0.0)) {
    r.fail("a = 1/(2 gamma) - L/2 must be > 0");
    return r;
  }
  const bool has_sub = trace.has_column("subgradient_norm");
  const bool has_h2 = trace.has_column("h2_witness");
  double prev = trace.initial_objective;
  double worst_h2 = 0.0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double cur = trace.objective[k];
    const double res = trace.residual[k];
    const std::string where = "n=" + std::to_string(k + 1);
    r.observe(prev - cur - a * res * res, opt.h1_slack, where + " (H1)");
    if (has_h2) {
      const double w = trace.column("h2_witness")[k];
      r.observe(b_stated * res - w, slack_for(w, 1e-12), where + " (H2 stated)");
    }
    if (has_sub) {
      const double w = trace.column("subgradient_norm")[k];
      r.observe(b_true * res - w, slack_for(w, 1e-12), where + " (H2 subgradient)");
      if (res > 0.0) worst_h2 = std::max(worst_h2, w / res);
    }
    prev = cur;
  }
  if (!has_sub) r.note("no subgradient column; H2 subgradient check skipped");
  r.metrics["max_subgradient_over_step"] = worst_h2;

  // C_N = sqrt(N) min_{n <= N} |x_n - x_{n-1}|.
  const double J0 = trace.initial_objective;
  double prev_c = kInf;
  std::vector<double> logn, logm;
  for (int N : opt.horizons) {
    if (N < 1 || static_cast<std::size_t>(N) > trace.size()) {
      r.note("horizon " + std::to_string(N) + " beyond trace length " +
             std::to_string(trace.size()));
      continue;
    }
    const auto first = trace.residual.begin();
    const double mn = *std::min_element(first, first + N);
    const double C = std::sqrt(static_cast<double>(N)) * mn;
    const double JN = trace.objective[static_cast<std::size_t>(N - 1)];
    const double Cth = std::sqrt(std::max(0.0, J0 - JN) / a);
    const std::string tag = "N" + std::to_string(N);
    r.metrics["C_" + tag] = C;
    r.metrics["C_theory_" + tag] = Cth;
    r.observe(Cth - C, slack_for(Cth, 1e-12, 1e-9), tag + " (C_N <= theory)");
    if (std::isfinite(prev_c))
      r.observe(prev_c - C, slack_for(prev_c, 1e-15, 1e-9), tag + " (C_N stable)");
    prev_c = C;
    if (mn > 0.0) {
      logn.push_back(std::log(static_cast<double>(N)));
      logm.push_back(std::log(mn));
    }
  }
  if (logn.size() >= 2) {
    double sxy = 0.0, sxx = 0.0, my = 0.0;
    for (double v : logm) my += v;
    my /= static_cast<double>(logm.size());
    double mxx = 0.0;
    for (double v : logn) mxx += v;
    mxx /= static_cast<double>(logn.size());
    for (std::size_t i = 0; i < logn.size(); ++i) {
      sxy += (logn[i] - mxx) * (logm[i] - my);
      sxx += (logn[i] - mxx) * (logn[i] - mxx);
    }
    if (sxx > 0.0) r.metrics["decay_exponent"] = sxy / sxx;
  }
  return r;
}

}  // namespace proxsplit
