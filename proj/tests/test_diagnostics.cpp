#include <catch2/catch_amalgamated.hpp>

#include "entbridge/diagnostics.hpp"
#include "entbridge/marginals.hpp"

#include <random>

using namespace entbridge;

namespace {

const Space& std_space() {
  static Space sp = make_space(Grid1D::reflecting(-8, 8, 801), Potential::quadratic(1.0));
  return sp;
}

DensityField pair_left(const Space& sp) {
  return build_density(MarginalSpec::gaussian(-0.25, 0.6), sp.grid, sp.measure);
}
DensityField pair_right(const Space& sp) {
  return build_density(MarginalSpec::gaussian(0.25, 0.6), sp.grid, sp.measure);
}

std::vector<double> uniform_times(int count) {
  std::vector<double> t(count);
  for (int k = 0; k < count; ++k) t[k] = double(k) / (count - 1);
  return t;
}

const InterpolationPath& std_path() {
  static InterpolationPath p = [] {
    const Space& sp = std_space();
    const SchrodingerSolution sol =
        solve_ipfp(pair_left(sp), pair_right(sp), 0.2, sp.generator);
    return build_path(sol, sp.generator, uniform_times(35));  // 33 interior times
  }();
  return p;
}

}  // namespace

TEST_CASE("conservation identity on a 5-node toy generator") {
  // the discrete proof reduces to sum [Gamma(Lf,g) - Gamma(f,Lg)] m = 0,
  // which follows from self-adjointness alone; checked on an arbitrary
  // reversible generator and random fields
  const Grid1D g = Grid1D::reflecting(0, 4, 5);
  const Space sp = make_space(g, Potential::tabulated({0.3, 1.1, 0.2, 0.9, 0.5}),
                              MeasureOptions{.tail_override = true});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Field f(5), h(5);
    for (int i = 0; i < 5; ++i) { f[i] = gauss(rng); h[i] = gauss(rng); }
    const Field Lf = sp.generator.apply(f);
    const Field Lh = sp.generator.apply(h);
    const double drift = ((gamma(sp.generator, Lf, h) - gamma(sp.generator, f, Lh)) *
                          sp.measure.weights)
                             .sum();
    CHECK(std::abs(drift) <= 1e-13 * (1 + Lf.abs().maxCoeff() * h.abs().maxCoeff()));
    // integration by parts backs the same argument
    const double ibp = (gamma(sp.generator, f, h) * sp.measure.weights).sum() +
                       2.0 * (f * Lh * sp.measure.weights).sum();
    CHECK(std::abs(ibp) <= 1e-13);
  }
}

TEST_CASE("conservation_report: stationary case and the Gaussian pair") {
  const Space& sp = std_space();

  SECTION("stationary marginals give Q identically zero") {
    const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
    const SchrodingerSolution sol = solve_ipfp(unit, unit, 0.2, sp.generator);
    const InterpolationPath p = build_path(sol, sp.generator, uniform_times(9));
    const ConservationReport r = conservation_report(p, sp.generator);
    for (double q : r.Q_exact) CHECK(std::abs(q) <= 1e-10);
  }

  SECTION("33 interior times: exact conservation at 1e-8 relative") {
    const ConservationReport r = conservation_report(std_path(), sp.generator);
    REQUIRE(r.times.size() == 33);
    CHECK(r.spread_exact <= 1e-8 * (1.0 + std::abs(r.mean_Q_exact)));
    CHECK(r.chain_rule_defect < 1e-3);
  }

  SECTION("too few interior times is an error") {
    const SchrodingerSolution sol =
        solve_ipfp(pair_left(sp), pair_right(sp), 0.2, sp.generator);
    const InterpolationPath p =
        build_path(sol, sp.generator, std::vector<double>{0.0, 0.5, 1.0});
    CHECK_THROWS_AS(conservation_report(p, sp.generator), std::invalid_argument);
  }
}

TEST_CASE("conservation_report: chain-rule defect shrinks under refinement") {
  std::vector<double> defects;
  for (int n : {201, 401, 801}) {
    const Space sp = make_space(Grid1D::reflecting(-8, 8, n), Potential::quadratic(1.0));
    const SchrodingerSolution sol =
        solve_ipfp(pair_left(sp), pair_right(sp), 0.2, sp.generator);
    const InterpolationPath p = build_path(sol, sp.generator, uniform_times(35));
    defects.push_back(conservation_report(p, sp.generator).chain_rule_defect);
  }
  CHECK(defects[1] < defects[0]);
  CHECK(defects[2] < defects[1]);
  CHECK(defects[2] <= 0.35 * defects[0]);
}

TEST_CASE("hamiltonian equals Q_velocity/2 bitwise") {
  const Space& sp = std_space();
  const InterpolationPath& p = std_path();
  const ConservationReport r = conservation_report(p, sp.generator);
  std::size_t iq = 0;
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    if (p.times[k] <= 0.0 || p.times[k] >= 1.0) continue;
    const double H = hamiltonian(p, sp.generator, k);
    CHECK(std::abs(H - 0.5 * r.Q_velocity[iq]) <= 1e-14 * (1.0 + std::abs(H)));
    ++iq;
  }
}

TEST_CASE("continuity_residual: constants, stationarity, refinement") {
  const Space& sp = std_space();
  const Field x = sp.grid.nodes();

  SECTION("constant test field contributes nothing") {
    const std::vector<Field> u = {Field::Constant(sp.grid.n, 4.2)};
    CHECK(continuity_residual(std_path(), sp.generator, 17, u) <= 1e-12);
  }

  SECTION("stationary path has zero residual") {
    const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
    const SchrodingerSolution sol = solve_ipfp(unit, unit, 0.2, sp.generator);
    const InterpolationPath p = build_path(sol, sp.generator, uniform_times(9));
    const std::vector<Field> u = {x, x.square(), x.sin()};
    CHECK(continuity_residual(p, sp.generator, 4, u) <= 1e-12);
  }

  SECTION("empty test set is an error") {
    CHECK_THROWS_AS(continuity_residual(std_path(), sp.generator, 17, {}),
                    std::invalid_argument);
  }

  SECTION("residual decreases roughly like h under refinement") {
    std::vector<double> res;
    for (int n : {201, 401, 801}) {
      const Space s = make_space(Grid1D::reflecting(-8, 8, n), Potential::quadratic(1.0));
      const SchrodingerSolution sol =
          solve_ipfp(pair_left(s), pair_right(s), 0.2, s.generator);
      const InterpolationPath p = build_path(sol, s.generator, uniform_times(17));
      const Field xs = s.grid.nodes();
      const std::vector<Field> u = {xs, xs.square(), xs.sin()};
      res.push_back(continuity_residual(p, s.generator, 8, u));
    }
    CHECK(res[1] < res[0]);
    CHECK(res[2] < res[1]);
  }
}

TEST_CASE("hjb_residual: stationarity, refinement, gauge invariance") {
  const Space& sp = std_space();

  SECTION("stationary potentials solve both equations") {
    const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
    const SchrodingerSolution sol = solve_ipfp(unit, unit, 0.2, sp.generator);
    const InterpolationPath p = build_path(sol, sp.generator, uniform_times(9));
    const HjbResidual r = hjb_residual(p, sp.generator, 4);
    CHECK(r.phi <= 1e-10);
    CHECK(r.psi <= 1e-10);
  }

  SECTION("time index needs both neighbors") {
    CHECK_THROWS_AS(hjb_residual(std_path(), sp.generator, 0), std::invalid_argument);
    CHECK_THROWS_AS(hjb_residual(std_path(), sp.generator, 34), std::invalid_argument);
  }

  SECTION("residuals decrease under space-time refinement") {
    std::vector<double> rphi, rpsi;
    std::vector<int> tn = {17, 33, 65};
    int idx = 0;
    for (int n : {201, 401, 801}) {
      const Space s = make_space(Grid1D::reflecting(-8, 8, n), Potential::quadratic(1.0));
      const SchrodingerSolution sol =
          solve_ipfp(pair_left(s), pair_right(s), 0.2, s.generator);
      const InterpolationPath p = build_path(sol, s.generator, uniform_times(tn[idx]));
      const HjbResidual r = hjb_residual(p, s.generator, tn[idx] / 2);
      rphi.push_back(r.phi);
      rpsi.push_back(r.psi);
      ++idx;
    }
    CHECK(rphi[2] < rphi[0]);
    CHECK(rpsi[2] < rpsi[0]);
  }

  SECTION("gauge shift c = 7.3 leaves residuals unchanged") {
    const SchrodingerSolution sol =
        solve_ipfp(pair_left(sp), pair_right(sp), 0.2, sp.generator);
    SchrodingerSolution scaled = sol;
    const double lc = std::log(7.3);
    for (int i = 0; i < sp.grid.n; ++i) {
      scaled.log_f[i] += lc;
      scaled.log_g[i] -= lc;
    }
    const InterpolationPath p1 = build_path(sol, sp.generator, uniform_times(17));
    const InterpolationPath p2 = build_path(scaled, sp.generator, uniform_times(17));
    const HjbResidual r1 = hjb_residual(p1, sp.generator, 8);
    const HjbResidual r2 = hjb_residual(p2, sp.generator, 8);
    CHECK(std::abs(r1.phi - r2.phi) <= 1e-12 * (1 + r1.phi));
    CHECK(std::abs(r1.psi - r2.psi) <= 1e-12 * (1 + r1.psi));
  }
}

TEST_CASE("nelson_velocities: stationary table, identities, osmotic form") {
  const Space& sp = std_space();
  const double eps = 0.2;

  SECTION("reference process: v_cur = 0 and v_osm = -(eps/2) V'") {
    const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
    const SchrodingerSolution sol = solve_ipfp(unit, unit, eps, sp.generator);
    const InterpolationPath p = build_path(sol, sp.generator, uniform_times(9));
    const NelsonVelocities v = nelson_velocities(p, sp.potential.Vp, 4, sp.grid);
    CHECK(v.v_cur.abs().maxCoeff() <= 1e-10);
    CHECK((v.v_osm + 0.5 * eps * sp.potential.Vp).abs().maxCoeff() <= 1e-10);
  }

  SECTION("half-sum and half-difference identities are exact") {
    const NelsonVelocities v = nelson_velocities(std_path(), sp.potential.Vp, 17, sp.grid);
    CHECK((v.v_cur - 0.5 * (v.v_fwd - v.v_bwd)).abs().maxCoeff() <= 1e-14);
    CHECK((v.v_osm - 0.5 * (v.v_fwd + v.v_bwd)).abs().maxCoeff() <= 1e-14);
  }

  SECTION("osmotic velocity is (eps/2) grad log of the Lebesgue density") {
    const InterpolationPath& p = std_path();
    const std::size_t k = 17;
    const NelsonVelocities v = nelson_velocities(p, sp.potential.Vp, k, sp.grid);
    Field log_rho(sp.grid.n);
    for (int i = 0; i < sp.grid.n; ++i) log_rho[i] = std::log(p.rho[k][i]);
    const Field expected = 0.5 * eps * centered_gradient(log_rho, sp.grid);
    CHECK((v.v_osm + 0.5 * eps * sp.potential.Vp - expected).abs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("eps_sweep: stationary rows vanish; gaps shrink on a Gaussian pair") {
  MeasureOptions opt;
  opt.tail_override = true;
  const Space sp = make_space(Grid1D::reflecting(-6, 6, 401), Potential::quadratic(1.0), opt);

  SECTION("identical marginals") {
    const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
    SweepOptions sopt;
    sopt.time_nodes = 17;
    const SweepResult res = eps_sweep(unit, unit, {0.4, 0.2}, sp, sopt);
    for (const EpsSweepRow& r : res.rows) {
      CHECK(std::abs(r.cost) <= 1e-10);
      CHECK(std::abs(r.kinetic) <= 1e-10);
      CHECK(std::abs(r.Q) <= 1e-10);
    }
  }

  SECTION("Gaussian pair: monotone gap decay and warm starts") {
    const DensityField r0 = pair_left(sp), r1 = pair_right(sp);
    SweepOptions sopt;
    sopt.time_nodes = 33;
    const SweepResult res = eps_sweep(r0, r1, {0.5, 0.2, 0.1}, sp, sopt);
    REQUIRE(res.rows.size() == 3);
    std::vector<double> cost_gap, q_gap, e2f;
    for (const EpsSweepRow& r : res.rows) {
      REQUIRE(r.converged);
      cost_gap.push_back(std::abs(r.cost - 0.5 * res.w2_squared));
      q_gap.push_back(std::abs(r.Q - res.w2_squared));
      e2f.push_back(r.epsilon * r.epsilon * r.fisher_integral);
      CHECK(2.0 * r.kinetic >= res.w2_squared - 1e-3);
      CHECK(std::abs(r.t_weighted_kinetic / r.kinetic - 0.5) <= 0.05);
    }
    for (int k : {1, 2}) {
      CHECK(cost_gap[k] < cost_gap[k - 1]);
      CHECK(q_gap[k] < q_gap[k - 1]);
      CHECK(e2f[k] < e2f[k - 1]);
    }
    CHECK(res.cost_gap_order > 0.0);
  }

  SECTION("per-row non-convergence is flagged, sweep continues") {
    const DensityField r0 = pair_left(sp), r1 = pair_right(sp);
    SweepOptions sopt;
    sopt.time_nodes = 17;
    sopt.ipfp.max_iter = 1;
    const SweepResult res = eps_sweep(r0, r1, {0.5, 0.2}, sp, sopt);
    REQUIRE(res.rows.size() == 2);
    CHECK_FALSE(res.rows[0].converged);
    CHECK_FALSE(res.rows[1].converged);
  }

  SECTION("eps list must be positive decreasing") {
    const DensityField unit = make_density(Field::Ones(sp.grid.n), sp.measure);
    CHECK_THROWS_AS(eps_sweep(unit, unit, {0.2, 0.5}, sp), std::invalid_argument);
    CHECK_THROWS_AS(eps_sweep(unit, unit, {0.2, -0.1}, sp), std::invalid_argument);
  }
}
