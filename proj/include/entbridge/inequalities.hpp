#pragma once

// Both sides of the HWI family of inequalities, the finite-eps key
// inequality along an interpolation, and the bridge Cauchy-Schwarz and
// Q-limit identities backing the eps -> 0 argument.

#include "entbridge/diagnostics.hpp"

#include <map>

namespace entbridge {

struct InequalityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  double kappa_used = 0.0;
  std::optional<double> epsilon;
  std::map<std::string, double> components;  // named terms summing to rhs
  bool applicable = true;
  std::string note;
};

namespace detail {

inline InequalityReport finish(InequalityReport r, double lhs) {
  r.lhs = lhs;
  r.rhs = 0.0;
  for (const auto& [key, value] : r.components) { (void)key; r.rhs += value; }
  r.margin = r.rhs - r.lhs;
  return r;
}

// Simpson over the interior portion of the time grid, weighted by t.
inline double t_weighted_interior_integral(const InterpolationPath& p,
                                           const std::vector<double>& values) {
  std::vector<double> ts, ys;
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    if (p.times[k] <= 0.0 || p.times[k] >= 1.0) continue;
    ts.push_back(p.times[k]);
    ys.push_back(p.times[k] * values[k]);
  }
  return integrate(ts, ys);
}

}  // namespace detail

// Finite-eps key inequality:
//   H(mu1|m) - H(mu0|m) <= sum Gamma(theta_{t~1}, rho1) m
//                          - kappa int t Gamma(theta_t) d mu_t dt
//                          - kappa (eps^2/4) int t Gamma(log rho_t) d mu_t dt.
// theta is taken at the last interior time node; the induced endpoint bias
// is part of the discretization slack.
inline InequalityReport entropy_difference_bound(const InterpolationPath& p, const Generator& L,
                                        const ReferenceMeasure& m, double kappa,
                                        const DensityField& rho0, const DensityField& rho1) {
  const int n = L.size();
  const std::size_t T = p.times.size();
  if (T < 5) throw std::invalid_argument("entropy_difference_bound: need at least 5 time nodes");
  const double eps2 = p.epsilon * p.epsilon;

  std::vector<double> kin(T, 0.0), fis_log(T, 0.0);
  for (std::size_t k = 0; k < T; ++k) {
    if (p.times[k] <= 0.0 || p.times[k] >= 1.0) continue;
    kin[k] = kinetic_density(p, k, L);
    DensityField dk{p.rho[k], 0.0};
    fis_log[k] = fisher_information_log(dk, L);
  }

  const std::size_t kend = T - 2;  // last interior node
  Field th(n);
  for (int i = 0; i < n; ++i)
    th[i] = std::isfinite(p.theta[kend][i]) ? p.theta[kend][i] : 0.0;
  const Field gtr = gamma(L, th, rho1.rho);
  double transport = 0.0;
  for (int i = 0; i < n; ++i)
    if (detail::stencil_inside(rho1.rho, i, L.grid)) transport += gtr[i] * m.weights[i];

  InequalityReport r;
  r.name = "entropy_difference_bound";
  r.kappa_used = kappa;
  r.epsilon = p.epsilon;
  r.components["gamma_theta1_rho1"] = transport;
  r.components["curvature_kinetic"] = -kappa * detail::t_weighted_interior_integral(p, kin);
  r.components["curvature_fisher"] =
      -kappa * eps2 / 4.0 * detail::t_weighted_interior_integral(p, fis_log);
  const double lhs = relative_entropy(rho1, m) - relative_entropy(rho0, m);
  return detail::finish(std::move(r), lhs);
}

// HWI*:  H1 - H0 <= W2 sqrt(I1) - (kappa/2) W2^2.
inline InequalityReport hwi_star_check(double kappa, double w2, double fisher1,
                                       double H0, double H1,
                                       std::optional<double> eps = std::nullopt) {
  InequalityReport r;
  r.name = "hwi_star";
  r.kappa_used = kappa;
  r.epsilon = eps;
  if (!std::isfinite(fisher1)) {
    r.applicable = false;
    r.note = "vacuous - infinite information";
    r.margin = std::numeric_limits<double>::infinity();
    return r;
  }
  r.components["transport_information"] = w2 * std::sqrt(fisher1);
  r.components["curvature"] = -0.5 * kappa * w2 * w2;
  return detail::finish(std::move(r), H1 - H0);
}

// Theorem items: (a) HWI, (b) Talagrand (kappa > 0), (c) log-Sobolev (kappa > 0),
// all against the reference measure itself.
inline std::vector<InequalityReport> theorem_suite(const DensityField& nu, const Space& sp,
                                                   double kappa) {
  DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
  const double H = relative_entropy(nu, sp.measure);
  const double I = fisher_information(nu, sp.generator);
  const double w2 = wasserstein2_1d(nu, unit, sp.grid, sp.measure);

  std::vector<InequalityReport> out;
  {
    InequalityReport r;
    r.name = "hwi";
    r.kappa_used = kappa;
    r.components["transport_information"] = w2 * std::sqrt(I);
    r.components["curvature"] = -0.5 * kappa * w2 * w2;
    out.push_back(detail::finish(std::move(r), H));
  }
  {
    InequalityReport r;
    r.name = "talagrand";
    r.kappa_used = kappa;
    if (kappa > 0) {
      r.components["entropy"] = H;
      r = detail::finish(std::move(r), 0.5 * kappa * w2 * w2);
    } else {
      r.applicable = false;
      r.note = "not applicable: kappa <= 0";
    }
    out.push_back(std::move(r));
  }
  {
    InequalityReport r;
    r.name = "log_sobolev";
    r.kappa_used = kappa;
    if (kappa > 0) {
      r.components["information_over_2kappa"] = I / (2.0 * kappa);
      r = detail::finish(std::move(r), H);
    } else {
      r.applicable = false;
      r.note = "not applicable: kappa <= 0";
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct CauchySchwarzBridge {
  double inner = 0.0;  // sum Gamma(theta_{t~1}, log rho1) rho1 m
  double bound = 0.0;  // sqrt(sum Gamma(theta_{t~1}) rho1 m) * sqrt(fisher1)
};

// The displayed step in the source argument omits the square root on the
// first factor; this is the standard two-square-root Cauchy-Schwarz, exact
// in the Gamma(log rho) rho metric (pass fisher_information_log for fisher1).
inline CauchySchwarzBridge cauchy_schwarz_bridge(const InterpolationPath& p, const Generator& L,
                                                 const DensityField& rho1, double fisher1) {
  const int n = L.size();
  const std::size_t kend = p.times.size() - 2;
  Field th(n), lr(n);
  for (int i = 0; i < n; ++i) {
    th[i] = std::isfinite(p.theta[kend][i]) ? p.theta[kend][i] : 0.0;
    lr[i] = rho1.rho[i] > 0 ? std::log(rho1.rho[i]) : 0.0;
  }
  const Field g_cross = gamma(L, th, lr);
  const Field g_theta = gamma(L, th, th);
  CauchySchwarzBridge out;
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!detail::stencil_inside(rho1.rho, i, L.grid)) continue;
    out.inner += g_cross[i] * rho1.rho[i] * L.m[i];
    quad += g_theta[i] * rho1.rho[i] * L.m[i];
  }
  out.bound = std::sqrt(std::max(quad, 0.0)) * std::sqrt(std::max(fisher1, 0.0));
  return out;
}

struct QLimitRow {
  double epsilon = 0.0;
  double gamma_theta_end = 0.0;
  double identity_rhs = 0.0;   // Q + (eps^2/4) I(mu1|m)
  double relative_defect = 0.0;
};

struct QLimitBridge {
  std::vector<QLimitRow> rows;
  double w2_squared = 0.0;
  double first_gap = 0.0;  // |gamma_theta_end - w2^2| at the largest eps
  double final_gap = 0.0;  //                          at the smallest eps
};

// Per-row identity sum Gamma(theta_{t~1}) d mu1 = Q + (eps^2/4) I(mu1|m)
// (within chain-rule + endpoint tolerance) and the trend of the column
// toward W2^2 across the sweep.
inline QLimitBridge q_limit_bridge(const std::vector<EpsSweepRow>& sweep, double rho1_fisher) {
  if (sweep.empty()) throw std::invalid_argument("q_limit_bridge: empty sweep");
  QLimitBridge out;
  out.w2_squared = sweep.front().w2_squared;
  for (const EpsSweepRow& r : sweep) {
    if (!r.converged) continue;
    QLimitRow row;
    row.epsilon = r.epsilon;
    row.gamma_theta_end = r.gamma_theta_end;
    row.identity_rhs = r.Q + r.epsilon * r.epsilon / 4.0 * rho1_fisher;
    row.relative_defect =
        std::abs(row.gamma_theta_end - row.identity_rhs) / (1.0 + std::abs(row.identity_rhs));
    out.rows.push_back(row);
  }
  if (out.rows.empty()) throw std::invalid_argument("q_limit_bridge: no converged rows");
  out.first_gap = std::abs(out.rows.front().gamma_theta_end - out.w2_squared);
  out.final_gap = std::abs(out.rows.back().gamma_theta_end - out.w2_squared);
  return out;
}

}  // namespace entbridge
