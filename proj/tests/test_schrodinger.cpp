#include <catch2/catch_amalgamated.hpp>

#include "entbridge/diagnostics.hpp"
#include "entbridge/marginals.hpp"

#include <map>

using namespace entbridge;

namespace {

const Space& std_space() {
  static Space sp = make_space(Grid1D::reflecting(-8, 8, 801), Potential::quadratic(1.0));
  return sp;
}

const Eigen::MatrixXd& std_op(double eps) {
  static std::map<double, Eigen::MatrixXd> cache;
  auto it = cache.find(eps);
  if (it == cache.end())
    it = cache.emplace(eps, heat_operator(std_space().generator, eps)).first;
  return it->second;
}

DensityField gauss_left() {
  return build_density(MarginalSpec::gaussian(-1.0, 0.6), std_space().grid, std_space().measure);
}
DensityField gauss_right() {
  return build_density(MarginalSpec::gaussian(1.5, 0.6), std_space().grid, std_space().measure);
}

std::vector<double> uniform_times(int count) {
  std::vector<double> t(count);
  for (int k = 0; k < count; ++k) t[k] = double(k) / (count - 1);
  return t;
}

double coupling_entropy_cost(const SchrodingerSolution& sol, const Eigen::MatrixXd& Teps,
                             const Generator& L) {
  // oracle: eps * H(pi | R01) computed from the assembled coupling matrix
  const Eigen::MatrixXd pi = static_coupling(sol, Teps, L);
  const Field& m = L.m;
  double H = 0.0;
  for (int i = 0; i < pi.rows(); ++i)
    for (int j = 0; j < pi.cols(); ++j)
      if (pi(i, j) > 0 && Teps(i, j) > 0)
        H += pi(i, j) *
             (std::log(pi(i, j)) - (std::log(Teps(i, j)) - std::log(m[j])) - std::log(m[i]) -
              std::log(m[j]));
  return sol.epsilon * H;
}

}  // namespace

TEST_CASE("solve_ipfp: stationary marginals converge immediately") {
  const Space& sp = std_space();
  const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
  const SchrodingerSolution sol = solve_ipfp(unit, unit, 0.3, std_op(0.3), sp.generator);
  CHECK(sol.converged);
  CHECK(sol.iterations == 1);
  CHECK(std::abs(sol.cost) <= 1e-10);
  // f and g are constant up to the gauge
  const double f0 = sol.f[400];
  const double g0 = sol.g[400];
  CHECK((sol.f / f0 - 1.0).abs().maxCoeff() <= 1e-9);
  CHECK((sol.g / g0 - 1.0).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("solve_ipfp: validation errors") {
  const Space& sp = std_space();
  const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
  const Eigen::MatrixXd& T = std_op(0.3);
  CHECK_THROWS_AS(solve_ipfp(unit, unit, 0.0, T, sp.generator), std::invalid_argument);
  CHECK_THROWS_AS(solve_ipfp(unit, unit, -1.0, T, sp.generator), std::invalid_argument);
  const DensityField empty{Field::Zero(sp.grid.n), 0.0};
  CHECK_THROWS_AS(solve_ipfp(empty, unit, 0.3, T, sp.generator), std::invalid_argument);
}

TEST_CASE("solve_ipfp: Schroedinger system and telemetry on the Gaussian pair") {
  const Space& sp = std_space();
  const DensityField r0 = gauss_left(), r1 = gauss_right();
  const SchrodingerSolution sol = solve_ipfp(r0, r1, 0.2, std_op(0.2), sp.generator);
  REQUIRE(sol.converged);
  CHECK(sol.marginal_error <= 1e-10);
  CHECK(sol.cost >= -1e-10);

  // the system rho0 = f T g, rho1 = g T f holds within the marginal error
  const Field Tg = (std_op(0.2) * sol.g.matrix()).array();
  const Field Tf = (std_op(0.2) * sol.f.matrix()).array();
  const double tv0 = 0.5 * ((sol.f * Tg - r0.rho).abs() * sp.measure.weights).sum();
  const double tv1 = 0.5 * ((sol.g * Tf - r1.rho).abs() * sp.measure.weights).sum();
  CHECK(tv0 <= 1e-9);
  CHECK(tv1 <= 1e-9);

  // gauge convention: the two potential averages agree
  double a = 0.0, b = 0.0;
  for (int i = 0; i < sp.grid.n; ++i) {
    a += sol.phi[i] * r0.rho[i] * sp.measure.weights[i];
    b += sol.psi[i] * r1.rho[i] * sp.measure.weights[i];
  }
  CHECK(a == Catch::Approx(b).margin(1e-9));

  // IPFP defect trace is non-increasing (1e-12 slack)
  for (std::size_t k = 1; k < sol.defect_history.size(); ++k)
    CHECK(sol.defect_history[k] <= sol.defect_history[k - 1] + 1e-12);

  CHECK(sol.clamp.mass <= 1e-8);
}

TEST_CASE("solve_ipfp: swap symmetry under reversibility") {
  const Space& sp = std_space();
  const DensityField r0 = gauss_left(), r1 = gauss_right();
  const SchrodingerSolution fwd = solve_ipfp(r0, r1, 0.2, std_op(0.2), sp.generator);
  const SchrodingerSolution bwd = solve_ipfp(r1, r0, 0.2, std_op(0.2), sp.generator);
  CHECK(fwd.cost == Catch::Approx(bwd.cost).margin(1e-8));
  // f and g exchange roles (symmetric gauge makes the exchange exact);
  // compared through the potentials against the mass that carries them
  CHECK(((fwd.phi - bwd.psi).abs() * r0.rho * sp.measure.weights).sum() <= 1e-8);
  CHECK(((fwd.psi - bwd.phi).abs() * r1.rho * sp.measure.weights).sum() <= 1e-8);

  // time symmetry of the marginal flow
  const InterpolationPath pf = build_path(fwd, sp.generator, uniform_times(11));
  const InterpolationPath pb = build_path(bwd, sp.generator, uniform_times(11));
  CHECK((pf.rho[3] - pb.rho[7]).abs().maxCoeff() <= 1e-8);
}

TEST_CASE("solve_ipfp: separated bumps, cost matches the coupling entropy") {
  const Space& sp = std_space();
  const DensityField r0 = build_density(MarginalSpec::bump(-1.5, 0.8), sp.grid, sp.measure);
  const DensityField r1 = build_density(MarginalSpec::bump(1.5, 0.8), sp.grid, sp.measure);
  // compact disjoint supports: f and g vanish exactly off their marginals
  const SchrodingerSolution sol = solve_ipfp(r0, r1, 0.1, std_op(0.1), sp.generator);
  REQUIRE(sol.converged);
  for (int i = 0; i < sp.grid.n; ++i) {
    if (r0.rho[i] == 0.0) CHECK(sol.f[i] == 0.0);
    if (r1.rho[i] == 0.0) CHECK(sol.g[i] == 0.0);
  }
  const double oracle = coupling_entropy_cost(sol, std_op(0.1), sp.generator);
  CHECK(sol.cost == Catch::Approx(oracle).margin(1e-8));
}

TEST_CASE("static_coupling: stationary case and mass/marginal contracts") {
  const Space& sp = std_space();
  const int n = sp.grid.n;
  const DensityField unit = make_density(Field::Ones(n), sp.measure);
  const SchrodingerSolution sol = solve_ipfp(unit, unit, 0.4, std_op(0.4), sp.generator);
  const Eigen::MatrixXd pi = static_coupling(sol, std_op(sol.epsilon), sp.generator);
  const Eigen::MatrixXd r = operator_to_kernel(std_op(0.4), sp.measure.weights);

  double mass = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mass += pi(i, j);
  CHECK(mass == Catch::Approx(1.0).margin(1e-9));

  // pi = r m (x) m for the reference joint law, checked where mass lives
  for (int i = 300; i <= 500; i += 50)
    for (int j = 300; j <= 500; j += 50) {
      const double ref = r(i, j) * sp.measure.weights[i] * sp.measure.weights[j];
      CHECK(pi(i, j) == Catch::Approx(ref).epsilon(1e-8));
    }

  // row/column marginals reproduce the endpoint laws
  const DensityField r0 = gauss_left(), r1 = gauss_right();
  const SchrodingerSolution solg = solve_ipfp(r0, r1, 0.2, std_op(0.2), sp.generator);
  const Eigen::MatrixXd pig = static_coupling(solg, std_op(0.2), sp.generator);
  double tv_row = 0.0, tv_col = 0.0;
  for (int i = 0; i < n; ++i) {
    tv_row += std::abs(pig.row(i).sum() - r0.rho[i] * sp.measure.weights[i]);
    tv_col += std::abs(pig.col(i).sum() - r1.rho[i] * sp.measure.weights[i]);
  }
  CHECK(0.5 * tv_row <= 1e-8);
  CHECK(0.5 * tv_col <= 1e-8);
}

TEST_CASE("static_coupling: large eps flattens to the product measure") {
  // moderate box so spectral noise stays far below the 1e-4 comparison
  MeasureOptions opt;
  opt.tail_override = true;
  const Space sp = make_space(Grid1D::reflecting(-5, 5, 201), Potential::quadratic(1.0), opt);
  const DensityField r0 = build_density(MarginalSpec::gaussian(-0.8, 0.5), sp.grid, sp.measure);
  const DensityField r1 = build_density(MarginalSpec::gaussian(1.0, 0.5), sp.grid, sp.measure);
  const Eigen::MatrixXd T = heat_operator(sp.generator, 1e3);
  const SchrodingerSolution sol = solve_ipfp(r0, r1, 1e3, T, sp.generator);
  REQUIRE(sol.converged);
  const Eigen::MatrixXd pi = static_coupling(sol, T, sp.generator);
  double worst = 0.0;
  for (int i = 0; i < sp.grid.n; ++i) {
    for (int j = 0; j < sp.grid.n; ++j) {
      const double prod = r0.rho[i] * sp.measure.weights[i] * r1.rho[j] * sp.measure.weights[j];
      if (prod > 1e-12) worst = std::max(worst, std::abs(pi(i, j) / prod - 1.0));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("build_path: endpoints, interior positivity, mass conservation") {
  const Space& sp = std_space();
  const DensityField r0 = gauss_left(), r1 = gauss_right();
  const SchrodingerSolution sol = solve_ipfp(r0, r1, 0.2, std_op(0.2), sp.generator);
  const InterpolationPath p = build_path(sol, sp.generator, uniform_times(33));

  CHECK(0.5 * ((p.rho.front() - r0.rho).abs() * sp.measure.weights).sum() <=
        sol.marginal_error + 1e-10);
  CHECK(0.5 * ((p.rho.back() - r1.rho).abs() * sp.measure.weights).sum() <=
        sol.marginal_error + 1e-10);

  for (std::size_t k = 0; k < p.times.size(); ++k) {
    CHECK((p.rho[k] * sp.measure.weights).sum() == Catch::Approx(1.0).margin(1e-9));
    if (p.times[k] > 0 && p.times[k] < 1) {
      CHECK(p.f[k].minCoeff() > 0.0);
      CHECK(p.g[k].minCoeff() > 0.0);
    }
  }

  CHECK_THROWS_AS(build_path(sol, sp.generator, std::vector<double>{0.2, 0.1}),
                  std::invalid_argument);
  SchrodingerSolution bad = sol;
  bad.converged = false;
  CHECK_THROWS_AS(build_path(bad, sp.generator, uniform_times(5)), std::invalid_argument);
}

TEST_CASE("dynamic_cost_terms: stationary case vanishes") {
  const Space& sp = std_space();
  const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
  const SchrodingerSolution sol = solve_ipfp(unit, unit, 0.2, std_op(0.2), sp.generator);
  const InterpolationPath p = build_path(sol, sp.generator, uniform_times(17));
  const DynamicCostTerms terms = dynamic_cost_terms(p, sp.generator, sp.measure, sol.cost);
  CHECK(std::abs(terms.kinetic) <= 1e-10);
  CHECK(std::abs(terms.fisher_integral) <= 1e-10);
  CHECK(std::abs(terms.entropy_endpoints) <= 1e-10);
  CHECK(std::abs(terms.dynamic_total) <= 1e-10);
}

TEST_CASE("dynamic_cost_terms: residual shrinks under refinement; kinetic bounds W2") {
  std::vector<double> residuals;
  double w2 = 0.0, kinetic_last = 0.0;
  for (int n : {201, 401, 801}) {
    const Space sp = make_space(Grid1D::reflecting(-8, 8, n), Potential::quadratic(1.0));
    // close pair: at these resolutions the discrete-walk tail regime stays
    // clear of the Benamou-Brenier comparison
    const DensityField r0 = build_density(MarginalSpec::gaussian(-0.25, 0.6), sp.grid, sp.measure);
    const DensityField r1 = build_density(MarginalSpec::gaussian(0.25, 0.6), sp.grid, sp.measure);
    const SchrodingerSolution sol = solve_ipfp(r0, r1, 0.2, sp.generator);
    REQUIRE(sol.converged);
    const InterpolationPath p = build_path(sol, sp.generator, uniform_times(65));
    const DynamicCostTerms terms = dynamic_cost_terms(p, sp.generator, sp.measure, sol.cost);
    residuals.push_back(terms.residual);
    w2 = wasserstein2_1d(r0, r1, sp.grid, sp.measure);
    kinetic_last = terms.kinetic;
  }
  CHECK(residuals[1] < residuals[0]);
  CHECK(residuals[2] < residuals[1]);
  CHECK(2.0 * kinetic_last >= w2 * w2 - 1e-3);  // Benamou-Brenier lower bound
  CHECK_THROWS_AS(dynamic_cost_terms(InterpolationPath{}, std_space().generator,
                                     std_space().measure, 0.0),
                  std::invalid_argument);
}

TEST_CASE("gauge invariance: c = 7.3 leaves every observable unchanged") {
  const Space& sp = std_space();
  const DensityField r0 = gauss_left(), r1 = gauss_right();
  const SchrodingerSolution sol = solve_ipfp(r0, r1, 0.2, std_op(0.2), sp.generator);

  SchrodingerSolution scaled = sol;
  const double c = 7.3;
  for (int i = 0; i < sp.grid.n; ++i) {
    scaled.f[i] *= c;
    scaled.g[i] /= c;
    scaled.log_f[i] += std::log(c);
    scaled.log_g[i] -= std::log(c);
    scaled.phi[i] += sol.epsilon * std::log(c);
    scaled.psi[i] -= sol.epsilon * std::log(c);
  }

  // cost recomputed from the scaled potentials
  double cost2 = 0.0;
  for (int i = 0; i < sp.grid.n; ++i)
    cost2 += (scaled.phi[i] * r0.rho[i] + scaled.psi[i] * r1.rho[i]) * sp.measure.weights[i];
  CHECK(cost2 == Catch::Approx(sol.cost).margin(1e-12 * (1 + std::abs(sol.cost))));

  // coupling, marginal flow, Gamma(theta) are invariant
  const Eigen::MatrixXd pi1 = static_coupling(sol, std_op(sol.epsilon), sp.generator);
  const Eigen::MatrixXd pi2 = static_coupling(scaled, std_op(0.2), sp.generator);
  CHECK((pi1 - pi2).cwiseAbs().maxCoeff() <= 1e-12);

  const InterpolationPath p1 = build_path(sol, sp.generator, uniform_times(9));
  const InterpolationPath p2 = build_path(scaled, sp.generator, uniform_times(9));
  for (std::size_t k = 0; k < p1.times.size(); ++k) {
    CHECK((p1.rho[k] - p2.rho[k]).abs().maxCoeff() <= 1e-12);
    const double kin1 = kinetic_density(p1, k, sp.generator);
    const double kin2 = kinetic_density(p2, k, sp.generator);
    CHECK(kin1 == Catch::Approx(kin2).margin(1e-12 * (1 + std::abs(kin1))));
  }
}

TEST_CASE("solve_ipfp: iteration cap reports non-convergence") {
  const Space& sp = std_space();
  const DensityField r0 = gauss_left(), r1 = gauss_right();
  IpfpOptions opt;
  opt.max_iter = 2;
  const SchrodingerSolution sol = solve_ipfp(r0, r1, 0.05, std_op(0.05), sp.generator, opt);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 2);
  CHECK(sol.marginal_error > 1e-10);
}
