#pragma once

// Dynamic identities along entropic interpolations: the conserved quantity,
// the Hamiltonian, continuity / HJB residuals, Nelson velocities and the
// eps -> 0 sweep.

#include "entbridge/schrodinger.hpp"

#include <optional>

namespace entbridge {

struct ConservationReport {
  std::vector<double> times;       // interior times only
  std::vector<double> Q_exact;     // -eps^2 sum Gamma(f_t, g_t) m
  std::vector<double> Q_velocity;  // sum Gamma(theta) rho m - (eps^2/4) I(mu_t|m)
  double mean_Q_exact = 0.0;
  double spread_exact = 0.0;       // max - min of Q_exact
  double spread_velocity = 0.0;
  double chain_rule_defect = 0.0;  // max |Q_exact - Q_velocity|
};

// The Gamma(f,g) form is conserved exactly in the discrete model (its time
// derivative vanishes by self-adjointness of L); the velocity form carries
// the O(h) chain-rule defect.  Both are reported.
inline ConservationReport conservation_report(const InterpolationPath& p, const Generator& L) {
  ConservationReport r;
  const double eps2 = p.epsilon * p.epsilon;
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    const double t = p.times[k];
    if (t <= 0.0 || t >= 1.0) continue;
    r.times.push_back(t);
    r.Q_exact.push_back(-eps2 * (gamma(L, p.f[k], p.g[k]) * L.m).sum());
    const double kin = kinetic_density(p, k, L);
    const double fis = fisher_density(p, k, L);
    r.Q_velocity.push_back(kin - 0.25 * eps2 * fis);
  }
  if (r.times.size() < 3)
    throw std::invalid_argument("conservation_report: need at least 3 interior times");
  auto spread = [](const std::vector<double>& v) {
    double lo = v[0], hi = v[0];
    for (double x : v) { lo = std::min(lo, x); hi = std::max(hi, x); }
    return hi - lo;
  };
  r.spread_exact = spread(r.Q_exact);
  r.spread_velocity = spread(r.Q_velocity);
  for (double q : r.Q_exact) r.mean_Q_exact += q;
  r.mean_Q_exact /= static_cast<double>(r.Q_exact.size());
  for (std::size_t k = 0; k < r.Q_exact.size(); ++k)
    r.chain_rule_defect = std::max(r.chain_rule_defect, std::abs(r.Q_exact[k] - r.Q_velocity[k]));
  return r;
}

// (1/2) sum Gamma(theta_t) rho_t m - (eps^2/8) I(mu_t|m) at time index k.
// Coincides with Q_velocity/2 summand by summand.
inline double hamiltonian(const InterpolationPath& p, const Generator& L, std::size_t k) {
  const double eps2 = p.epsilon * p.epsilon;
  return 0.5 * kinetic_density(p, k, L) - 0.125 * eps2 * fisher_density(p, k, L);
}

// Weak-form continuity residual at time index k:
//   max_u | sum (d_t rho) u m - sum Gamma(theta, u) rho m | / (1 + ||u||_inf)
// with the exact discrete time derivative d_t rho = eps (g L f - f L g).
inline double continuity_residual(const InterpolationPath& p, const Generator& L,
                                  std::size_t k, const std::vector<Field>& test_fields) {
  if (test_fields.empty())
    throw std::invalid_argument("continuity_residual: empty test set");
  const Field drho = p.epsilon * (p.g[k] * L.apply(p.f[k]) - p.f[k] * L.apply(p.g[k]));
  const int n = L.size();
  Field th(n);
  for (int i = 0; i < n; ++i) th[i] = std::isfinite(p.theta[k][i]) ? p.theta[k][i] : 0.0;
  double worst = 0.0;
  for (const Field& u : test_fields) {
    L.check_size(u);
    const double lhs = (drho * u * L.m).sum();
    const Field gtu = gamma(L, th, u);
    double rhs = 0.0;
    for (int i = 0; i < n; ++i)
      if (detail::stencil_inside(p.rho[k], i, L.grid)) rhs += gtu[i] * p.rho[k][i] * L.m[i];
    const double norm = 1.0 + u.abs().maxCoeff();
    worst = std::max(worst, std::abs(lhs - rhs) / norm);
  }
  return worst;
}

struct HjbResidual {
  double phi = 0.0;  // || d_t phi - Gamma(phi)/2 - eps L phi ||_{L^2(mu_t)}
  double psi = 0.0;  // || d_t psi + Gamma(psi)/2 + eps L psi ||_{L^2(mu_t)}
};

// Finite-difference time derivative over the adjacent path times, restricted
// to nodes carrying mass (rho_t >= 1e-8).
inline HjbResidual hjb_residual(const InterpolationPath& p, const Generator& L, std::size_t k) {
  if (k == 0 || k + 1 >= p.times.size())
    throw std::invalid_argument("hjb_residual: time index without neighbors");
  const double eps = p.epsilon;
  const double dt = p.times[k + 1] - p.times[k - 1];
  const int n = L.size();
  Field phi(n), psi(n), dphi(n), dpsi(n);
  for (int i = 0; i < n; ++i) {
    phi[i] = eps * p.log_f[k][i];
    psi[i] = eps * p.log_g[k][i];
    dphi[i] = eps * (p.log_f[k + 1][i] - p.log_f[k - 1][i]) / dt;
    dpsi[i] = eps * (p.log_g[k + 1][i] - p.log_g[k - 1][i]) / dt;
  }
  const Field r_phi = dphi - 0.5 * gamma(L, phi, phi) - eps * L.apply(phi);
  const Field r_psi = dpsi + 0.5 * gamma(L, psi, psi) + eps * L.apply(psi);
  HjbResidual out;
  double s_phi = 0.0, s_psi = 0.0;
  for (int i = 0; i < n; ++i) {
    if (p.rho[k][i] < 1e-8) continue;
    // adjacent-time potentials can be undefined just outside a compact
    // support; those nodes carry no meaningful residual
    if (!std::isfinite(r_phi[i]) || !std::isfinite(r_psi[i])) continue;
    s_phi += r_phi[i] * r_phi[i] * p.rho[k][i] * L.m[i];
    s_psi += r_psi[i] * r_psi[i] * p.rho[k][i] * L.m[i];
  }
  out.phi = std::sqrt(s_phi);
  out.psi = std::sqrt(s_psi);
  return out;
}

// Centered difference gradient; one-sided at reflecting boundaries.
inline Field centered_gradient(const Field& u, const Grid1D& grid) {
  const int n = grid.n;
  const double h = grid.h;
  Field d(n);
  for (int i = 1; i + 1 < n; ++i) d[i] = (u[i + 1] - u[i - 1]) / (2 * h);
  if (grid.boundary == Boundary::periodic) {
    d[0] = (u[1] - u[n - 1]) / (2 * h);
    d[n - 1] = (u[0] - u[n - 2]) / (2 * h);
  } else {
    d[0] = (u[1] - u[0]) / h;
    d[n - 1] = (u[n - 1] - u[n - 2]) / h;
  }
  return d;
}

struct NelsonVelocities {
  Field v_fwd, v_bwd, v_cur, v_osm;
};

// Forward/backward velocities of the bridge and their half-difference
// (current) and half-sum (osmotic).  Gradients are centered differences;
// this is the one place a signed gradient, not Gamma, is the right object.
inline NelsonVelocities nelson_velocities(const InterpolationPath& p, const Field& Vp,
                                          std::size_t k, const Grid1D& grid) {
  const double eps = p.epsilon;
  const int n = grid.n;
  Field phi(n), psi(n);
  for (int i = 0; i < n; ++i) {
    phi[i] = eps * p.log_f[k][i];
    psi[i] = eps * p.log_g[k][i];
  }
  NelsonVelocities v;
  v.v_fwd = centered_gradient(psi, grid) - 0.5 * eps * Vp;
  v.v_bwd = centered_gradient(phi, grid) - 0.5 * eps * Vp;
  v.v_cur = 0.5 * (v.v_fwd - v.v_bwd);
  v.v_osm = 0.5 * (v.v_fwd + v.v_bwd);
  return v;
}

struct EpsSweepRow {
  double epsilon = 0.0;
  double cost = 0.0;
  double kinetic = 0.0;             // int int Gamma(theta) d mu_t dt
  double t_weighted_kinetic = 0.0;  // int int t Gamma(theta) d mu_t dt
  double fisher_integral = 0.0;     // int I(mu_t|m) dt
  double t_weighted_fisher = 0.0;   // int t I(mu_t|m) dt
  double Q = 0.0;                   // conserved quantity (mean of Q_exact)
  double gamma_theta_end = 0.0;     // sum Gamma(theta_{t ~ 1}) rho1 m
  double w2_squared = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct SweepOptions {
  int time_nodes = 65;
  IpfpOptions ipfp;
  bool warm_start = true;  // carry psi from the previous epsilon
};

inline EpsSweepRow sweep_row(const DensityField& rho0, const DensityField& rho1, double eps,
                             const Space& sp, double w2sq, const IpfpOptions& ipfp,
                             int time_nodes, SchrodingerSolution* sol_out = nullptr) {
  EpsSweepRow row;
  row.epsilon = eps;
  row.w2_squared = w2sq;
  SchrodingerSolution sol = solve_ipfp(rho0, rho1, eps, sp.generator, ipfp);
  row.cost = sol.cost;
  row.converged = sol.converged;
  row.iterations = sol.iterations;
  if (!sol.converged) {
    if (sol_out) *sol_out = std::move(sol);
    return row;
  }
  std::vector<double> times(time_nodes);
  for (int k = 0; k < time_nodes; ++k) times[k] = double(k) / (time_nodes - 1);
  const InterpolationPath path = build_path(sol, sp.generator, times);

  std::vector<double> kin(times.size()), fis(times.size()), tkin(times.size()), tfis(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    kin[k] = kinetic_density(path, k, sp.generator);
    fis[k] = fisher_density(path, k, sp.generator);
    tkin[k] = times[k] * kin[k];
    tfis[k] = times[k] * fis[k];
  }
  row.kinetic = integrate(times, kin);
  row.t_weighted_kinetic = integrate(times, tkin);
  row.fisher_integral = integrate(times, fis);
  row.t_weighted_fisher = integrate(times, tfis);

  const ConservationReport cons = conservation_report(path, sp.generator);
  row.Q = cons.mean_Q_exact;

  // endpoint gradient term of the limit argument, against the true mu_1
  const std::size_t kend = times.size() - 2;
  const int n = sp.grid.n;
  Field th(n);
  for (int i = 0; i < n; ++i)
    th[i] = std::isfinite(path.theta[kend][i]) ? path.theta[kend][i] : 0.0;
  const Field gt = gamma(sp.generator, th, th);
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    if (detail::stencil_inside(rho1.rho, i, sp.grid)) s += gt[i] * rho1.rho[i] * sp.generator.m[i];
  row.gamma_theta_end = s;

  if (sol_out) *sol_out = std::move(sol);
  return row;
}

struct SweepResult {
  std::vector<EpsSweepRow> rows;
  double w2_squared = 0.0;
  double cost_gap_order = 0.0;  // lsq order of |cost - w2^2/2| against eps
  double q_gap_order = 0.0;
};

// Least-squares orders of the cost and Q gaps against eps, over converged rows.
inline void fit_gap_orders(SweepResult& out) {
  std::vector<double> le, lc, lq;
  for (const EpsSweepRow& r : out.rows) {
    if (!r.converged) continue;
    const double gc = std::abs(r.cost - 0.5 * out.w2_squared);
    const double gq = std::abs(r.Q - out.w2_squared);
    if (gc > 0 && gq > 0) {
      le.push_back(std::log(r.epsilon));
      lc.push_back(std::log(gc));
      lq.push_back(std::log(gq));
    }
  }
  if (le.size() >= 2) {
    out.cost_gap_order = lsq_slope(le, lc);
    out.q_gap_order = lsq_slope(le, lq);
  }
}

inline SweepResult eps_sweep(const DensityField& rho0, const DensityField& rho1,
                             const std::vector<double>& eps_list, const Space& sp,
                             const SweepOptions& opt = {}) {
  for (std::size_t k = 0; k < eps_list.size(); ++k)
    if (!(eps_list[k] > 0) || (k > 0 && eps_list[k] >= eps_list[k - 1]))
      throw std::invalid_argument("eps_sweep: eps_list must be positive and decreasing");
  SweepResult out;
  out.w2_squared = std::pow(wasserstein2_1d(rho0, rho1, sp.grid, sp.measure), 2);
  IpfpOptions ipfp = opt.ipfp;
  for (double eps : eps_list) {
    SchrodingerSolution sol;
    out.rows.push_back(sweep_row(rho0, rho1, eps, sp, out.w2_squared, ipfp,
                                 opt.time_nodes, &sol));
    if (opt.warm_start && sol.converged) ipfp.warm_start_psi = sol.psi;
  }
  fit_gap_orders(out);
  return out;
}

}  // namespace entbridge
