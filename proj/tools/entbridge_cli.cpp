// Command-line driver: builds experiments from a JSON config, runs the
// solver and diagnostics, emits CSV/JSON artifacts.
//
// Exit codes: 0 success, 1 config error, 2 solver non-convergence,
// 3 inequality violation beyond tolerance (verify).

#include "entbridge/io.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <iostream>
#include <thread>

using namespace entbridge;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitViolation = 3;

struct RunContext {
  ExperimentConfig cfg;
  fs::path out;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

void write_meta(const RunContext& ctx, const std::string& command) {
  json meta;
  meta["command"] = command;
  meta["out_dir"] = ctx.out.string();
  meta["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.started).count();
  write_json(ctx.out / "meta.json", meta);
}

IpfpOptions ipfp_options(const ExperimentConfig& cfg) {
  IpfpOptions opt;
  opt.tol = cfg.ipfp_tol;
  opt.max_iter = cfg.ipfp_max_iter;
  return opt;
}

void write_solution_artifacts(const RunContext& ctx, const Experiment& ex,
                              const SchrodingerSolution& sol, const Eigen::MatrixXd& Teps) {
  const Field x = ex.space.grid.nodes();
  if (ctx.cfg.json_out) write_json(ctx.out / "solution.json", solution_to_json(sol));
  if (ctx.cfg.csv) {
    CsvWriter pot(ctx.out / "potentials.csv", "x,phi,psi");
    for (int i = 0; i < ex.space.grid.n; ++i) pot.row({x[i], sol.phi[i], sol.psi[i]});

    const Eigen::MatrixXd pi = static_coupling(sol, Teps, ex.space.generator);
    CsvWriter coup(ctx.out / "coupling.csv", "i,j,x_i,x_j,pi");
    for (int i = 0; i < pi.rows(); ++i)
      for (int j = 0; j < pi.cols(); ++j)
        if (pi(i, j) > 1e-16)
          coup.row({double(i), double(j), x[i], x[j], pi(i, j)});
  }
}

int cmd_solve(const RunContext& ctx) {
  if (ctx.cfg.epsilons.size() != 1)
    throw ConfigError("config: solve expects a single epsilon");
  const Experiment ex = build_experiment(ctx.cfg);
  const double eps = ctx.cfg.epsilons[0];
  const Eigen::MatrixXd Teps = heat_operator(ex.space.generator, eps);
  const SchrodingerSolution sol =
      solve_ipfp(ex.rho0, ex.rho1, eps, Teps, ex.space.generator, ipfp_options(ctx.cfg));
  write_solution_artifacts(ctx, ex, sol, Teps);
  write_meta(ctx, "solve");
  if (!sol.converged) {
    std::cerr << "solve: IPFP did not converge (defect " << sol.marginal_error << ")\n";
    return kExitNoConvergence;
  }
  std::cout << "cost " << detail::fmt(sol.cost) << ", " << sol.iterations << " iterations"
            << ", marginal error " << detail::fmt(sol.marginal_error) << "\n";
  return kExitOk;
}

int cmd_interpolate(const RunContext& ctx) {
  if (ctx.cfg.epsilons.size() != 1)
    throw ConfigError("config: interpolate expects a single epsilon");
  const Experiment ex = build_experiment(ctx.cfg);
  const double eps = ctx.cfg.epsilons[0];
  const Generator& L = ex.space.generator;
  const SchrodingerSolution sol =
      solve_ipfp(ex.rho0, ex.rho1, eps, L, ipfp_options(ctx.cfg));
  if (ctx.cfg.json_out) write_json(ctx.out / "solution.json", solution_to_json(sol));
  if (!sol.converged) {
    write_meta(ctx, "interpolate");
    std::cerr << "interpolate: IPFP did not converge\n";
    return kExitNoConvergence;
  }

  const InterpolationPath path = build_path(sol, L, ctx.cfg.times);
  const Field x = ex.space.grid.nodes();
  const int n = ex.space.grid.n;

  if (ctx.cfg.csv) {
    CsvWriter pcsv(ctx.out / "path.csv", "t,x,rho");
    for (std::size_t k = 0; k < path.times.size(); ++k)
      for (int i = 0; i < n; ++i) pcsv.row({path.times[k], x[i], path.rho[k][i]});

    const std::vector<Field> test_fields = {x, x.square(), x.sin()};
    const ConservationReport cons = conservation_report(path, L);
    CsvWriter dcsv(ctx.out / "diagnostics.csv",
                   "t,Q_exact,Q_velocity,hamiltonian,continuity_residual,"
                   "hjb_residual_phi,hjb_residual_psi");
    CsvWriter vcsv(ctx.out / "velocities.csv", "t,x,v_fwd,v_bwd,v_cur,v_osm");
    std::size_t iq = 0;
    for (std::size_t k = 0; k < path.times.size(); ++k) {
      const double t = path.times[k];
      if (t <= 0.0 || t >= 1.0) continue;
      const double ham = hamiltonian(path, L, k);
      const double cres = continuity_residual(path, L, k, test_fields);
      const HjbResidual hjb = hjb_residual(path, L, k);
      dcsv.row({t, cons.Q_exact[iq], cons.Q_velocity[iq], ham, cres, hjb.phi, hjb.psi});
      const NelsonVelocities v = nelson_velocities(path, ex.space.potential.Vp, k, ex.space.grid);
      for (int i = 0; i < n; ++i)
        vcsv.row({t, x[i], v.v_fwd[i], v.v_bwd[i], v.v_cur[i], v.v_osm[i]});
      ++iq;
    }
  }
  write_meta(ctx, "interpolate");
  std::cout << "interpolation written: " << path.times.size() << " times, cost "
            << detail::fmt(sol.cost) << "\n";
  return kExitOk;
}

int cmd_verify(const RunContext& ctx) {
  const Experiment ex = build_experiment(ctx.cfg);
  const Space& sp = ex.space;
  std::vector<InequalityReport> reports;

  const double H0 = relative_entropy(ex.rho0, sp.measure);
  const double H1 = relative_entropy(ex.rho1, sp.measure);
  const double I1 = fisher_information(ex.rho1, sp.generator);
  const double w2 = wasserstein2_1d(ex.rho0, ex.rho1, sp.grid, sp.measure);
  reports.push_back(hwi_star_check(ex.kappa, w2, I1, H0, H1));

  for (int which : {0, 1}) {
    const DensityField& nu = which == 0 ? ex.rho0 : ex.rho1;
    for (InequalityReport r : theorem_suite(nu, sp, ex.kappa)) {
      r.name += which == 0 ? "_mu0" : "_mu1";
      reports.push_back(std::move(r));
    }
  }

  bool solver_failed = false;
  if (ctx.cfg.epsilons.size() == 1) {
    const double eps = ctx.cfg.epsilons[0];
    const SchrodingerSolution sol =
        solve_ipfp(ex.rho0, ex.rho1, eps, sp.generator, ipfp_options(ctx.cfg));
    if (sol.converged) {
      const InterpolationPath path = build_path(sol, sp.generator, ctx.cfg.times);
      reports.push_back(
          entropy_difference_bound(path, sp.generator, sp.measure, ex.kappa, ex.rho0, ex.rho1));
      const double fisher_log = fisher_information_log(ex.rho1, sp.generator);
      const CauchySchwarzBridge cs = cauchy_schwarz_bridge(path, sp.generator, ex.rho1, fisher_log);
      InequalityReport r;
      r.name = "cauchy_schwarz_bridge";
      r.kappa_used = ex.kappa;
      r.epsilon = eps;
      r.components["bound"] = cs.bound;
      r.lhs = cs.inner;
      r.rhs = cs.bound;
      r.margin = r.rhs - r.lhs;
      reports.push_back(std::move(r));
    } else {
      solver_failed = true;
    }
  }

  if (ctx.cfg.json_out) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(report_to_json(r));
    write_json(ctx.out / "inequalities.json", arr);
  }
  write_meta(ctx, "verify");

  bool violated = false;
  for (const auto& r : reports) {
    if (!r.applicable) continue;
    const bool bad = r.margin < -ctx.cfg.report_tol;
    violated |= bad;
    std::cout << (bad ? "VIOLATED " : "ok       ") << r.name << " margin "
              << detail::fmt(r.margin) << "\n";
  }
  if (violated) return kExitViolation;
  if (solver_failed) return kExitNoConvergence;
  return kExitOk;
}

int cmd_sweep(const RunContext& ctx, int jobs) {
  if (ctx.cfg.epsilons.size() < 2)
    throw ConfigError("config: sweep-eps expects a decreasing epsilon list");
  for (std::size_t k = 1; k < ctx.cfg.epsilons.size(); ++k)
    if (ctx.cfg.epsilons[k] >= ctx.cfg.epsilons[k - 1])
      throw ConfigError("config: sweep-eps epsilon list must be strictly decreasing");
  const Experiment ex = build_experiment(ctx.cfg);
  const int time_nodes = static_cast<int>(ctx.cfg.times.size());

  SweepResult res;
  res.w2_squared =
      std::pow(wasserstein2_1d(ex.rho0, ex.rho1, ex.space.grid, ex.space.measure), 2);

  if (jobs <= 1) {
    SweepOptions opt;
    opt.time_nodes = time_nodes;
    opt.ipfp = ipfp_options(ctx.cfg);
    res = eps_sweep(ex.rho0, ex.rho1, ctx.cfg.epsilons, ex.space, opt);
  } else {
    // independent rows, deterministic merge by epsilon index; cold starts
    const std::size_t count = ctx.cfg.epsilons.size();
    res.rows.resize(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1)) {
        res.rows[k] = sweep_row(ex.rho0, ex.rho1, ctx.cfg.epsilons[k], ex.space,
                                res.w2_squared, ipfp_options(ctx.cfg), time_nodes);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(jobs, static_cast<int>(count)); ++t)
      pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    fit_gap_orders(res);
  }

  if (ctx.cfg.csv) {
    CsvWriter csv(ctx.out / "sweep.csv",
                  "epsilon,cost,kinetic,t_weighted_kinetic,fisher_integral,"
                  "t_weighted_fisher,Q,gamma_theta_end,w2_squared,converged,iterations");
    for (const EpsSweepRow& r : res.rows)
      csv.row({r.epsilon, r.cost, r.kinetic, r.t_weighted_kinetic, r.fisher_integral,
               r.t_weighted_fisher, r.Q, r.gamma_theta_end, r.w2_squared,
               double(r.converged), double(r.iterations)});
  }
  if (ctx.cfg.json_out) {
    json summary;
    summary["w2_squared"] = res.w2_squared;
    summary["cost_gap_order"] = res.cost_gap_order;
    summary["q_gap_order"] = res.q_gap_order;
    json rows = json::array();
    for (const EpsSweepRow& r : res.rows) rows.push_back(sweep_row_to_json(r));
    summary["rows"] = rows;
    if (!res.rows.empty()) {
      auto gap = [&](const EpsSweepRow& r) {
        json g;
        g["cost"] = std::abs(r.cost - 0.5 * res.w2_squared);
        g["Q"] = std::abs(r.Q - res.w2_squared);
        g["eps2_fisher"] = r.epsilon * r.epsilon * r.fisher_integral;
        return g;
      };
      summary["initial_gaps"] = gap(res.rows.front());
      summary["final_gaps"] = gap(res.rows.back());
    }
    write_json(ctx.out / "summary.json", summary);
  }
  write_meta(ctx, "sweep-eps");

  int converged = 0;
  for (const EpsSweepRow& r : res.rows) converged += r.converged;
  std::cout << converged << "/" << res.rows.size() << " rows converged, cost gap order "
            << detail::fmt(res.cost_gap_order) << "\n";
  return converged > 0 ? kExitOk : kExitNoConvergence;
}

int cmd_refine(const RunContext& ctx) {
  if (ctx.cfg.epsilons.size() != 1)
    throw ConfigError("config: refine expects a single epsilon");
  const double eps = ctx.cfg.epsilons[0];

  struct Row {
    int n;
    double h;
    double dynamic_residual, chain_defect, spread_rel, continuity, hjb_phi, hjb_psi,
        fisher_gap;
  };
  std::vector<Row> rows;

  for (int factor : {1, 2, 4}) {
    ExperimentConfig cfg = ctx.cfg;
    const int n = ctx.cfg.grid.n * factor;
    cfg.grid = ctx.cfg.grid.boundary == Boundary::reflecting
                   ? Grid1D::reflecting(ctx.cfg.grid.a, ctx.cfg.grid.b, n)
                   : Grid1D::periodic(ctx.cfg.grid.a, ctx.cfg.grid.b, n);
    const Experiment ex = build_experiment(cfg);
    const Generator& L = ex.space.generator;
    const SchrodingerSolution sol = solve_ipfp(ex.rho0, ex.rho1, eps, L, ipfp_options(cfg));
    if (!sol.converged) {
      std::cerr << "refine: IPFP did not converge at n = " << n << "\n";
      return kExitNoConvergence;
    }
    const InterpolationPath path = build_path(sol, L, cfg.times);
    const DynamicCostTerms terms = dynamic_cost_terms(path, L, ex.space.measure, sol.cost);
    const ConservationReport cons = conservation_report(path, L);
    const Field x = ex.space.grid.nodes();
    const std::size_t mid = path.times.size() / 2;
    const HjbResidual hjb = hjb_residual(path, L, mid);
    const double cres = continuity_residual(path, L, mid, {x, x.square(), x.sin()});
    const double fgap = std::abs(fisher_information(ex.rho1, L) -
                                 fisher_information_sqrt(ex.rho1, L));
    rows.push_back({n, ex.space.grid.h, terms.residual, cons.chain_rule_defect,
                    cons.spread_exact / (1 + std::abs(cons.mean_Q_exact)), cres, hjb.phi,
                    hjb.psi, fgap});
  }

  auto order_of = [&](const std::function<double(const Row&)>& pick) {
    std::vector<double> lh, lv;
    for (const Row& r : rows) {
      const double v = pick(r);
      if (v > 0) {
        lh.push_back(std::log(r.h));
        lv.push_back(std::log(v));
      }
    }
    return lh.size() >= 2 ? lsq_slope(lh, lv) : 0.0;
  };

  const std::vector<std::pair<std::string, std::function<double(const Row&)>>> quantities = {
      {"dynamic_residual", [](const Row& r) { return r.dynamic_residual; }},
      {"chain_rule_defect", [](const Row& r) { return r.chain_defect; }},
      {"conservation_spread_rel", [](const Row& r) { return r.spread_rel; }},
      {"continuity_residual_mid", [](const Row& r) { return r.continuity; }},
      {"hjb_residual_phi_mid", [](const Row& r) { return r.hjb_phi; }},
      {"hjb_residual_psi_mid", [](const Row& r) { return r.hjb_psi; }},
      {"fisher_form_gap", [](const Row& r) { return r.fisher_gap; }},
  };

  json jrows = json::array();
  std::optional<CsvWriter> csv;
  if (ctx.cfg.csv)
    csv.emplace(ctx.out / "refine.csv", "quantity,n1,n2,n3,value1,value2,value3,order");
  std::cout << "quantity                    order   values (n = " << rows[0].n << ", "
            << rows[1].n << ", " << rows[2].n << ")\n";
  for (const auto& [name, pick] : quantities) {
    const double order = order_of(pick);
    if (csv) {
      std::string line = name;
      for (const Row& r : rows) line += "," + std::to_string(r.n);
      for (const Row& r : rows) line += "," + detail::fmt(pick(r));
      line += "," + detail::fmt(order);
      csv->raw_row(line);
    }
    json jr;
    jr["quantity"] = name;
    jr["order"] = order;
    json vals = json::array();
    for (const Row& r : rows) vals.push_back(pick(r));
    jr["values"] = vals;
    jrows.push_back(jr);
    std::printf("%-26s %7.3f   %.3e  %.3e  %.3e\n", name.c_str(), order, pick(rows[0]),
                pick(rows[1]), pick(rows[2]));
  }
  if (ctx.cfg.json_out) {
    json out;
    out["epsilon"] = eps;
    out["rows"] = jrows;
    write_json(ctx.out / "refine.json", out);
  }
  write_meta(ctx, "refine");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entropic interpolation toolkit for weighted 1-d grids"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int jobs = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment configuration")->required();
    cmd->add_option("--out", out_override, "output directory (overrides outputs.dir)");
    cmd->add_option("--jobs", jobs, "worker threads for sweeps")->default_val(1);
  };

  CLI::App* solve = app.add_subcommand(
      "solve", "solve the Schroedinger system; writes solution.json, coupling.csv "
               "(i,j,x_i,x_j,pi), potentials.csv (x,phi,psi)");
  CLI::App* interpolate = app.add_subcommand(
      "interpolate", "build the entropic interpolation; writes path.csv (t,x,rho), "
                     "diagnostics.csv (t,Q_exact,Q_velocity,hamiltonian,continuity_residual,"
                     "hjb_residual_phi,hjb_residual_psi), velocities.csv "
                     "(t,x,v_fwd,v_bwd,v_cur,v_osm)");
  CLI::App* verify = app.add_subcommand(
      "verify", "evaluate the inequality suite; writes inequalities.json; exit 3 on a "
                "margin below -report_tol");
  CLI::App* sweep = app.add_subcommand(
      "sweep-eps", "run the epsilon sweep; writes sweep.csv (epsilon,cost,kinetic,"
                   "t_weighted_kinetic,fisher_integral,t_weighted_fisher,Q,gamma_theta_end,"
                   "w2_squared,converged,iterations) and summary.json");
  CLI::App* refine = app.add_subcommand(
      "refine", "run at n, 2n, 4n and tabulate residual decay orders; writes refine.csv "
                "and refine.json");
  for (CLI::App* cmd : {solve, interpolate, verify, sweep, refine}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    RunContext ctx;
    ctx.cfg = load_config(config_path);
    if (!out_override.empty()) ctx.cfg.out_dir = out_override;
    ctx.out = ctx.cfg.out_dir;
    std::filesystem::create_directories(ctx.out);

    if (solve->parsed()) return cmd_solve(ctx);
    if (interpolate->parsed()) return cmd_interpolate(ctx);
    if (verify->parsed()) return cmd_verify(ctx);
    if (sweep->parsed()) return cmd_sweep(ctx, jobs);
    if (refine->parsed()) return cmd_refine(ctx);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
