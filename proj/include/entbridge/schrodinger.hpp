#pragma once

// The Schroedinger system solved by log-domain iterative proportional
// fitting, the static coupling, the entropic interpolation path and the
// dynamic decomposition of the entropic cost.
//
// All semigroup applications here go through the positive heat operator
// (see heat_operator): the factors f, g span hundreds of natural-log units
// across the grid, and only a kernel with entrywise relative accuracy keeps
// the log-domain updates meaningful over that range.

#include "entbridge/functionals.hpp"
#include "entbridge/semigroup.hpp"

namespace entbridge {

struct ClampStats {
  long count = 0;
  double mass = 0.0;  // relative undershoot absorbed by the positivity floor
};

namespace detail {

inline constexpr double kDenormFloor = 1e-320;  // below every meaningful kernel value

// log(T exp(u)) by max shift on the potential; u may contain -inf.
inline Field log_apply(const Eigen::MatrixXd& T, const Field& u, ClampStats* clamp = nullptr) {
  const int n = static_cast<int>(u.size());
  double shift = kNegInf;
  for (int i = 0; i < n; ++i) shift = std::max(shift, u[i]);
  if (!std::isfinite(shift)) throw std::invalid_argument("log_apply: empty support");
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = std::isfinite(u[i]) ? std::exp(u[i] - shift) : 0.0;
  Eigen::VectorXd z = T * w;
  Field out(n);
  for (int i = 0; i < n; ++i) {
    if (z[i] < kDenormFloor) {
      if (clamp) {
        ++clamp->count;
        if (z[i] < 0) clamp->mass += -z[i];
      }
      z[i] = kDenormFloor;
    }
    out[i] = shift + std::log(z[i]);
  }
  return out;
}

}  // namespace detail

struct IpfpOptions {
  double tol = 1e-10;   // max of the two marginal total-variation defects
  int max_iter = 100000;
  Field warm_start_psi;  // previous psi = eps log g; empty = cold start
};

struct SchrodingerSolution {
  double epsilon = 0.0;
  Field f, g;          // exact 0 off supp(rho0), supp(rho1)
  Field log_f, log_g;  // -inf off support
  Field phi, psi;      // eps log f / eps log g; NaN off support
  double cost = 0.0;
  int iterations = 0;
  double marginal_error = 0.0;
  double gauge = 1.0;  // multiplicative constant c applied as (f,g) -> (cf, g/c)
  bool converged = false;
  std::vector<double> defect_history;  // max marginal TV defect per iteration
  ClampStats clamp;
  Field rho0, rho1;  // the endpoint densities the system was solved for
};

// Alternating log-domain updates
//   log f <- log rho0 - log(T^eps_1 g)   on supp(rho0)
//   log g <- log rho1 - log(T^eps_1 f)   on supp(rho1)
// against the positive operator T^eps_1 = e^{eps L}.  The gauge is fixed by
// sum phi d mu0 = sum psi d mu1 after convergence.
inline SchrodingerSolution solve_ipfp(const DensityField& rho0, const DensityField& rho1,
                                      double eps, const Eigen::MatrixXd& Teps,
                                      const Generator& L, const IpfpOptions& opt = {}) {
  if (!(eps > 0)) throw std::invalid_argument("solve_ipfp: epsilon must be > 0");
  const int n = L.size();
  if (rho0.rho.size() != n || rho1.rho.size() != n || Teps.rows() != n || Teps.cols() != n)
    throw std::invalid_argument("solve_ipfp: size mismatch");

  Field log_r0(n), log_r1(n);
  bool any0 = false, any1 = false;
  for (int i = 0; i < n; ++i) {
    log_r0[i] = rho0.rho[i] > 0 ? std::log(rho0.rho[i]) : kNegInf;
    log_r1[i] = rho1.rho[i] > 0 ? std::log(rho1.rho[i]) : kNegInf;
    any0 |= rho0.rho[i] > 0;
    any1 |= rho1.rho[i] > 0;
  }
  if (!any0 || !any1) throw std::invalid_argument("solve_ipfp: marginal with empty support");

  Field v(n);
  if (opt.warm_start_psi.size() == n) {
    for (int i = 0; i < n; ++i)
      v[i] = rho1.rho[i] > 0 ? opt.warm_start_psi[i] / eps : kNegInf;
  } else {
    for (int i = 0; i < n; ++i) v[i] = rho1.rho[i] > 0 ? 0.0 : kNegInf;
  }

  SchrodingerSolution sol;
  sol.epsilon = eps;
  sol.rho0 = rho0.rho;
  sol.rho1 = rho1.rho;

  Field u = Field::Constant(n, kNegInf);
  Field log_Tg = detail::log_apply(Teps, v, &sol.clamp);
  double defect = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= opt.max_iter; ++it) {
    for (int i = 0; i < n; ++i)
      u[i] = rho0.rho[i] > 0 ? log_r0[i] - log_Tg[i] : kNegInf;
    const Field log_Tf = detail::log_apply(Teps, u, &sol.clamp);
    for (int i = 0; i < n; ++i)
      v[i] = rho1.rho[i] > 0 ? log_r1[i] - log_Tf[i] : kNegInf;

    const Field log_Tg_next = detail::log_apply(Teps, v, &sol.clamp);
    // After the v-update the 1-marginal is exact; the 0-marginal defect is
    // rho0 |exp(log T g_new - log T g_old) - 1| on supp(rho0).
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < n; ++i) {
      if (rho0.rho[i] > 0)
        d0 += rho0.rho[i] * std::abs(std::expm1(log_Tg_next[i] - log_Tg[i])) * L.m[i];
      if (rho1.rho[i] > 0)
        d1 += rho1.rho[i] * std::abs(std::expm1(v[i] + log_Tf[i] - log_r1[i])) * L.m[i];
    }
    defect = std::max(0.5 * d0, 0.5 * d1);
    sol.defect_history.push_back(defect);
    sol.iterations = it;
    log_Tg = log_Tg_next;
    if (defect <= opt.tol) { sol.converged = true; break; }
  }
  sol.marginal_error = defect;
  // positivity-floor undershoot beyond this level means the kernel lost the
  // transport tail; the run is not trustworthy
  if (sol.clamp.mass > 1e-8) sol.converged = false;

  // Symmetric gauge: shift phi by delta and psi by -delta so the two
  // potential averages agree; the cost is invariant under this rescaling.
  double a = 0.0, b = 0.0;
  for (int i = 0; i < n; ++i) {
    if (rho0.rho[i] > 0) a += eps * u[i] * rho0.rho[i] * L.m[i];
    if (rho1.rho[i] > 0) b += eps * v[i] * rho1.rho[i] * L.m[i];
  }
  const double delta = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(u[i])) u[i] += delta / eps;
    if (std::isfinite(v[i])) v[i] -= delta / eps;
  }
  sol.gauge = std::exp(delta / eps);
  sol.cost = a + b;

  sol.log_f = u;
  sol.log_g = v;
  sol.f = Field(n);
  sol.g = Field(n);
  sol.phi = Field(n);
  sol.psi = Field(n);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < n; ++i) {
    sol.f[i] = std::isfinite(u[i]) ? std::exp(u[i]) : 0.0;
    sol.g[i] = std::isfinite(v[i]) ? std::exp(v[i]) : 0.0;
    sol.phi[i] = std::isfinite(u[i]) ? eps * u[i] : nan;
    sol.psi[i] = std::isfinite(v[i]) ? eps * v[i] : nan;
  }
  return sol;
}

inline SchrodingerSolution solve_ipfp(const DensityField& rho0, const DensityField& rho1,
                                      double eps, const Generator& L,
                                      const IpfpOptions& opt = {}) {
  return solve_ipfp(rho0, rho1, eps, heat_operator(L, eps), L, opt);
}

// Static coupling pi(i,j) = f_i r_eps(i,j) g_j m_i m_j, assembled in log
// space; r_eps(i,j) = T_eps(i,j)/m_j from the positive operator.
inline Eigen::MatrixXd static_coupling(const SchrodingerSolution& sol,
                                       const Eigen::MatrixXd& Teps, const Generator& L) {
  const int n = L.size();
  Field log_m(n);
  for (int i = 0; i < n; ++i) log_m[i] = std::log(L.m[i]);
  Eigen::MatrixXd pi(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      // log pi = log f_i + log g_j + log T(i,j) + log m_i   (T = r m_j)
      const double t = Teps(i, j);
      const double e = (t > 0) ? sol.log_f[i] + sol.log_g[j] + std::log(t) + log_m[i] : kNegInf;
      pi(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
    }
  }
  return pi;
}

struct InterpolationPath {
  double epsilon = 0.0;
  std::vector<double> times;
  std::vector<Field> log_f, log_g;  // log f_t, log g_t
  std::vector<Field> f, g, rho, theta;
  ClampStats clamp;
  Field rho0, rho1;  // endpoint targets, for endpoint diagnostics
};

// f_t = T^eps_t f and g_t = T^eps_{1-t} g (T^eps_t = T_{eps t}), stepped
// through the gaps of the time grid with per-gap positive operators in a
// shift-normalized linear form.  rho_t = f_t g_t, theta_t = (psi_t - phi_t)/2.
inline InterpolationPath build_path(const SchrodingerSolution& sol, const Generator& L,
                                    const std::vector<double>& times) {
  if (!sol.converged)
    throw std::invalid_argument("build_path: solution did not converge");
  if (times.empty()) throw std::invalid_argument("build_path: empty time grid");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < 0 || times[k] > 1 || (k > 0 && times[k] <= times[k - 1]))
      throw std::invalid_argument("build_path: times must be increasing within [0,1]");
  }
  const int n = L.size();
  const std::size_t T = times.size();

  // one operator per distinct gap (a single one on uniform grids)
  std::vector<Eigen::MatrixXd> gap_op(T > 1 ? T - 1 : 0);
  for (std::size_t k = 0; k + 1 < T; ++k) {
    const double gap = times[k + 1] - times[k];
    bool found = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (std::abs((times[j + 1] - times[j]) - gap) <= 1e-14) {
        gap_op[k] = gap_op[j];
        found = true;
        break;
      }
    }
    if (!found) gap_op[k] = heat_operator(L, sol.epsilon * gap);
  }

  InterpolationPath p;
  p.epsilon = sol.epsilon;
  p.times = times;
  p.rho0 = sol.rho0;
  p.rho1 = sol.rho1;

  auto chain = [&](const Field& start_log, bool forward) {
    std::vector<Field> logs(T);
    Field w(n);
    double shift = start_log.maxCoeff();
    for (int i = 0; i < n; ++i)
      w[i] = std::isfinite(start_log[i]) ? std::exp(start_log[i] - shift) : 0.0;
    auto log_of = [&](const Field& vec, double sh) {
      Field out(n);
      for (int i = 0; i < n; ++i) out[i] = vec[i] > 0 ? sh + std::log(vec[i]) : kNegInf;
      return out;
    };
    auto step = [&](std::size_t gap_index) {
      Eigen::VectorXd z = gap_op[gap_index] * w.matrix();
      double neg = 0.0, pos = 0.0;
      for (int i = 0; i < n; ++i) {
        if (z[i] < 0) { neg -= z[i]; ++p.clamp.count; z[i] = 0.0; }
        else pos += z[i];
      }
      if (pos > 0) p.clamp.mass += neg / pos;
      w = z.array();
      const double top = w.maxCoeff();
      if (top > 0) { w /= top; shift += std::log(top); }
    };
    if (forward) {
      logs[0] = start_log;
      for (std::size_t k = 0; k + 1 < T; ++k) {
        step(k);
        logs[k + 1] = log_of(w, shift);
      }
    } else {
      logs[T - 1] = start_log;
      for (std::size_t k = T - 1; k-- > 0;) {
        step(k);
        logs[k] = log_of(w, shift);
      }
    }
    return logs;
  };

  p.log_f = chain(sol.log_f, true);
  p.log_g = chain(sol.log_g, false);

  for (std::size_t k = 0; k < T; ++k) {
    Field f(n), g(n), rho(n), theta(n);
    for (int i = 0; i < n; ++i) {
      f[i] = std::isfinite(p.log_f[k][i]) ? std::exp(p.log_f[k][i]) : 0.0;
      g[i] = std::isfinite(p.log_g[k][i]) ? std::exp(p.log_g[k][i]) : 0.0;
      rho[i] = f[i] * g[i];
      theta[i] = 0.5 * sol.epsilon * (p.log_g[k][i] - p.log_f[k][i]);
    }
    p.f.push_back(std::move(f));
    p.g.push_back(std::move(g));
    p.rho.push_back(std::move(rho));
    p.theta.push_back(std::move(theta));
  }
  return p;
}

namespace detail {

// Is node i's full stencil inside {rho > 0}?  Only endpoint times of
// compactly supported marginals can fail this.
inline bool stencil_inside(const Field& rho, int i, const Grid1D& grid) {
  if (!(rho[i] > 0)) return false;
  const int n = static_cast<int>(rho.size());
  const bool per = grid.boundary == Boundary::periodic;
  const int lo = (i > 0) ? i - 1 : (per ? n - 1 : i);
  const int hi = (i + 1 < n) ? i + 1 : (per ? 0 : i);
  return rho[lo] > 0 && rho[hi] > 0;
}

}  // namespace detail

// sum_i Gamma(theta_t)_i rho_t_i m_i at time index k, with the stencil
// restricted to the support (Gamma(rho)/rho-style zero convention).
inline double kinetic_density(const InterpolationPath& p, std::size_t k,
                              const Generator& L) {
  const Field& rho = p.rho[k];
  const Field& th = p.theta[k];
  const int n = L.size();
  Field th_safe(n);
  for (int i = 0; i < n; ++i) th_safe[i] = std::isfinite(th[i]) ? th[i] : 0.0;
  const Field g = gamma(L, th_safe, th_safe);
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    if (detail::stencil_inside(rho, i, L.grid)) s += g[i] * rho[i] * L.m[i];
  return s;
}

// Fisher information of the time-k marginal (standard Gamma(rho)/rho form).
inline double fisher_density(const InterpolationPath& p, std::size_t k, const Generator& L) {
  DensityField d;
  d.rho = p.rho[k];
  return fisher_information(d, L);
}

struct DynamicCostTerms {
  double kinetic = 0.0;            // int int Gamma(theta)/2 d mu_t dt
  double fisher_integral = 0.0;    // int I(mu_t|m) dt
  double entropy_endpoints = 0.0;  // (eps/2)(H0 + H1)
  double dynamic_total = 0.0;
  double residual = 0.0;           // |dynamic_total - cost|
};

inline DynamicCostTerms dynamic_cost_terms(const InterpolationPath& p, const Generator& L,
                                           const ReferenceMeasure& m, double cost) {
  if (p.times.size() < 3)
    throw std::invalid_argument("dynamic_cost_terms: need at least 3 time nodes");
  const std::size_t T = p.times.size();
  std::vector<double> kin(T), fis(T);
  for (std::size_t k = 0; k < T; ++k) {
    kin[k] = kinetic_density(p, k, L);
    fis[k] = fisher_density(p, k, L);
  }
  DynamicCostTerms out;
  out.kinetic = 0.5 * integrate(p.times, kin);
  out.fisher_integral = integrate(p.times, fis);
  DensityField d0{p.rho.front(), 0.0}, d1{p.rho.back(), 0.0};
  out.entropy_endpoints =
      0.5 * p.epsilon * (relative_entropy(d0, m) + relative_entropy(d1, m));
  out.dynamic_total = out.entropy_endpoints + out.kinetic +
                      p.epsilon * p.epsilon / 8.0 * out.fisher_integral;
  out.residual = std::abs(out.dynamic_total - cost);
  return out;
}

}  // namespace entbridge
