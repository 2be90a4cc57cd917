#include "cli/commands.hpp"

#include <cmath>
#include <sstream>

#include "cli/inputs.hpp"
#include "sfe/distance.hpp"
#include "sfe/error.hpp"
#include "sfe/functionals.hpp"
#include "sfe/hpath.hpp"
#include "sfe/io.hpp"
#include "sfe/kernel.hpp"
#include "sfe/moment.hpp"
#include "sfe/random.hpp"
#include "sfe/solver.hpp"
#include "sfe/stability.hpp"

namespace sfe::cli {

namespace {

SupportPtr optional_grid(const RunConfig& cfg) {
  if (!cfg.has("grid")) return nullptr;
  const GridSpec g = parse_grid(cfg.text("grid"));
  return make_grid(g.dim, g.radius, g.points_per_axis);
}

SolveOptions solve_options(const RunConfig& cfg) {
  SolveOptions o;
  o.tol = cfg.number("tol", o.tol);
  o.max_iters = static_cast<int>(cfg.integer("max_iters", o.max_iters));
  const std::string ex = cfg.text("exhaustion", "balls");
  if (ex == "balls") {
    o.exhaustion = Exhaustion::kBalls;
  } else if (ex == "compact") {
    o.exhaustion = Exhaustion::kCompact;
  } else {
    throw InvalidArgument("exhaustion must be 'balls' or 'compact', got '" + ex + "'");
  }
  return o;
}

double positive(const RunConfig& cfg, const std::string& key) {
  const double v = cfg.number(key);
  if (!(v > 0.0)) throw InvalidArgument(key + " must be positive");
  return v;
}

std::string point_table(const Support& s, const std::vector<std::pair<std::string, const Vec*>>& columns) {
  std::vector<std::string> header;
  for (int k = 0; k < s.dim(); ++k) header.push_back("x_" + std::to_string(k + 1));
  RowMat rows(s.size(), s.dim() + static_cast<int>(columns.size()));
  rows.leftCols(s.dim()) = s.points();
  for (std::size_t c = 0; c < columns.size(); ++c) {
    header.push_back(columns[c].first);
    rows.col(s.dim() + static_cast<Eigen::Index>(c)) = *columns[c].second;
  }
  std::ostringstream os;
  io::write_rows(os, header, rows);
  return os.str();
}

json solution_json(const SchroedingerSolution& sol) {
  const auto [d1, d2] = marginal_defects(plan(sol), sol.mu1.weights, sol.mu2.weights);
  return {{"nu1", to_json(sol.nu1.weights)},
          {"nu2", to_json(sol.nu2.weights)},
          {"u1", to_json(sol.u1)},
          {"u2", to_json(sol.u2)},
          {"m_index", sol.m_index},
          {"scale_C", to_json(sol.scale_C)},
          {"exhaustion", sol.exhaustion == Exhaustion::kBalls ? "balls" : "compact"},
          {"iterations", sol.iterations},
          {"final_residual", to_json(sol.final_residual)},
          {"row_defect", to_json(d1)},
          {"column_defect", to_json(d2)},
          {"converged", sol.converged}};
}

json report_json(const ControlValueReport& r) {
  return {{"v_eps", to_json(r.v_eps)},
          {"h_plan_vs_product", to_json(r.h_plan_vs_product)},
          {"entropy_form", to_json(r.entropy_form)},
          {"dual_form", to_json(r.dual_form)},
          {"max_pairwise_gap", to_json(r.max_pairwise_gap)},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"final_residual", to_json(r.final_residual)}};
}

json estimate_json(const Estimate& e) { return {{"value", to_json(e.value)}, {"std_error", to_json(e.std_error)}}; }

int run_solve(const RunConfig& cfg, ArtifactWriter& out, std::vector<std::string>& files) {
  const SupportPtr grid = optional_grid(cfg);
  const InputMeasure m1 = resolve_measure(cfg, "mu1", grid, files);
  const InputMeasure m2 = resolve_measure(cfg, "mu2", grid, files);
  const DiscreteMeasure mu1 = m1.measure();
  const DiscreteMeasure mu2 = m2.measure();
  const std::string kernel = cfg.text("kernel", "heat");
  std::optional<KernelSpec> q;
  if (kernel == "heat") {
    q.emplace(GaussianHeat{cfg.number("t", 1.0), positive(cfg, "eps")}, mu1.support, mu2.support);
  } else {
    const std::string path = cfg.path(kernel);
    files.push_back(path);
    RowMat values = io::load_matrix_csv(path);
    if (static_cast<std::size_t>(values.rows()) != mu1.size() || static_cast<std::size_t>(values.cols()) != mu2.size())
      throw InvalidArgument("kernel " + path + " is " + std::to_string(values.rows()) + "x" +
                            std::to_string(values.cols()) + " but the marginals have " + std::to_string(mu1.size()) +
                            " and " + std::to_string(mu2.size()) + " points");
    q.emplace(DenseMatrix::from_values(std::move(values)), mu1.support, mu2.support);
  }
  const SolveOptions opt = solve_options(cfg);
  cfg.check_all_used();

  const SchroedingerSolution sol = solve(*q, mu1, mu2, opt);
  out.json_file("solution.json", solution_json(sol));
  out.text_file("source.csv", point_table(*mu1.support, {{"mu1", &mu1.weights}, {"nu1", &sol.nu1.weights}, {"u1", &sol.u1}}));
  out.text_file("target.csv", point_table(*mu2.support, {{"mu2", &mu2.weights}, {"nu2", &sol.nu2.weights}, {"u2", &sol.u2}}));
  std::ostringstream residuals;
  io::write_rows(residuals, {"sweep", "defect"},
                 [&] {
                   RowMat r(static_cast<Eigen::Index>(sol.residual_history.size()), 2);
                   for (std::size_t k = 0; k < sol.residual_history.size(); ++k) {
                     r(static_cast<Eigen::Index>(k), 0) = static_cast<double>(k);
                     r(static_cast<Eigen::Index>(k), 1) = sol.residual_history[k];
                   }
                   return r;
                 }());
  out.text_file("residuals.csv", residuals.str());
  return sol.converged ? kExitOk : kExitNotConverged;
}

}  // namespace

ControlSetup control_setup(const RunConfig& cfg, std::vector<std::string>& files) {
  const SupportPtr grid = optional_grid(cfg);
  Density P0 = resolve_measure(cfg, "P0", grid, files).density();
  Density P1 = resolve_measure(cfg, "P1", grid, files).density();
  const double eps = positive(cfg, "eps");
  const SolveOptions opt = solve_options(cfg);
  cfg.check_all_used();
  return {std::move(P0), std::move(P1), eps, opt};
}

MomentSetup moment_setup(const RunConfig& cfg, std::vector<std::string>& files) {
  if (!cfg.has("grid")) throw InvalidArgument("moment needs grid = d,r,n for the density p");
  const GridSpec gs = parse_grid(cfg.text("grid"));
  const SupportPtr lattice = make_grid(gs.dim, gs.radius, gs.points_per_axis);
  Density P1 = resolve_measure(cfg, "P1", lattice, files).density();
  const double r = cfg.number("r", gs.radius);
  if (!(r > 0.0)) throw InvalidArgument("r must be positive");
  std::vector<double> schedule;
  if (cfg.has("eps_schedule")) {
    schedule = cfg.numbers("eps_schedule");
  } else if (cfg.has("eps")) {
    schedule = {positive(cfg, "eps")};
  } else {
    schedule = geometric_schedule(cfg.number("eps0", 1.0), static_cast<int>(cfg.integer("eps_steps", 8)));
  }
  ContinuationOptions opt;
  opt.tol = cfg.number("tol", opt.tol);
  opt.damping = cfg.number("damping", opt.damping);
  opt.max_outer = static_cast<int>(cfg.integer("max_outer", opt.max_outer));
  opt.solve.tol = cfg.number("solve_tol", opt.solve.tol);
  opt.solve.max_iters = static_cast<int>(cfg.integer("max_iters", opt.solve.max_iters));
  opt.grid = restrict_to_ball(lattice, r);
  const std::string init = cfg.text("init", "uniform");
  if (init == "target") {
    if (P1.support != lattice) throw InvalidArgument("init = target needs P1 generated on the grid");
    // restrict_to_ball keeps the surviving points in their original order.
    const Vec norms = lattice->norms();
    Vec clipped(opt.grid->size());
    Eigen::Index next = 0;
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
      if (norms[i] <= r * (1.0 + 1e-12)) clipped[next++] = P1.values[i];
    }
    opt.init = Density::normalized(opt.grid, clipped);
  } else if (init != "uniform") {
    throw InvalidArgument("init must be 'uniform' or 'target', got '" + init + "'");
  }
  const std::optional<double> threshold = cfg.optional_number("pushforward_threshold");
  if (cfg.has("seed")) opt.pushforward.seed = cfg.seed("seed");
  cfg.check_all_used();
  return {std::move(P1), r, std::move(schedule), std::move(opt), threshold};
}

namespace {

int run_control(const RunConfig& cfg, ArtifactWriter& out, std::vector<std::string>& files) {
  const auto [P0, P1, eps, opt] = control_setup(cfg, files);
  const ControlValue cv = control_value(P0, P1, eps, opt);
  json doc = report_json(cv.report);
  doc["eps"] = eps;
  doc["upper_bound"] = to_json(v_eps_upper_bound(P0, P1, eps));
  out.json_file("control.json", doc);
  const DualVariables dv = dual_variables(cv.solution, P1);
  out.text_file("potentials_source.csv", point_table(*P0.support, {{"density", &P0.values}, {"u1", &cv.solution.u1}}));
  out.text_file("potentials_target.csv",
                point_table(*P1.support, {{"density", &P1.values}, {"u2", &cv.solution.u2}, {"f_o", &dv.f_o}}));
  return cv.report.converged ? kExitOk : kExitNotConverged;
}

int run_bridge(const RunConfig& cfg, ArtifactWriter& out, std::vector<std::string>& files) {
  const SupportPtr grid = optional_grid(cfg);
  const Density P0 = resolve_measure(cfg, "P0", grid, files).density();
  const Density P1 = resolve_measure(cfg, "P1", grid, files).density();
  const double eps = positive(cfg, "eps");
  const std::uint64_t seed = cfg.seed("seed");
  const long n_paths = cfg.integer("n_paths");
  const long n_steps = cfg.integer("n_steps");
  if (n_paths < 1 || n_steps < 1) throw InvalidArgument("n_paths and n_steps must be positive");
  EndpointOptions diag;
  diag.seed = cfg.has("diag_seed") ? cfg.seed("diag_seed") : stream_seed(seed, 0xd1a9);
  diag.bins = static_cast<int>(cfg.integer("bins", diag.bins));
  diag.bootstrap = static_cast<int>(cfg.integer("bootstrap", diag.bootstrap));
  SimulateOptions sim;
  sim.keep_paths = cfg.flag("full_paths", false);
  const SolveOptions opt = solve_options(cfg);
  cfg.check_all_used();

  const SchroedingerSolution sol = solve(KernelSpec(GaussianHeat{1.0, eps}, P0.support, P1.support), P0.to_measure(),
                                         P1.to_measure(), opt);
  if (!sol.converged) {
    out.json_file("bridge.json", {{"converged", false}, {"solver", solution_json(sol)}});
    return kExitNotConverged;
  }
  const PathEnsemble ens = simulate(P0, sol, eps, static_cast<std::size_t>(n_paths),
                                    static_cast<std::size_t>(n_steps), seed, sim);
  const EndpointReport rep = endpoint_diagnostics(ens, sol, P1, diag);
  json doc = {{"converged", true},
              {"eps", eps},
              {"n_paths", n_paths},
              {"n_steps", n_steps},
              {"seed", seed},
              {"diag_seed", diag.seed},
              {"bins", rep.bins},
              {"terminal_bl", estimate_json(rep.terminal_bl)},
              {"terminal_w2", estimate_json(rep.terminal_w2)},
              {"w2_floor", to_json(rep.w2_floor)},
              {"w2_exact", rep.w2_exact},
              {"joint_tv", estimate_json(rep.joint_tv)},
              {"joint_kl", estimate_json(rep.joint_kl)},
              {"solver_iterations", sol.iterations},
              {"solver_residual", to_json(sol.final_residual)}};
  out.json_file("bridge.json", doc);
  std::vector<std::string> header;
  for (int k = 0; k < ens.dim; ++k) header.push_back("x0_" + std::to_string(k + 1));
  for (int k = 0; k < ens.dim; ++k) header.push_back("x1_" + std::to_string(k + 1));
  RowMat ends(ens.initial.rows(), 2 * ens.dim);
  ends << ens.initial, ens.terminal;
  std::ostringstream os;
  io::write_rows(os, header, ends);
  out.text_file("endpoints.csv", os.str());
  if (sim.keep_paths) out.paths_file("paths.bin", ens);
  return kExitOk;
}

int run_moment(const RunConfig& cfg, ArtifactWriter& out, std::vector<std::string>& files) {
  const MomentSetup setup = moment_setup(cfg, files);
  const ContinuationOptions& opt = setup.options;
  const double r = setup.r;
  const std::optional<double>& threshold = setup.threshold;

  const MomentMeasureResult res = zero_noise_continuation(setup.P1, r, setup.schedule, opt);
  const double bound = psi_upper_bound(*opt.grid, r);
  json doc = {{"p0", to_json(res.p0.values)},
              {"u_bar", to_json(res.u_bar)},
              {"grid", to_json(opt.grid->points())},
              {"eps_schedule", res.eps_schedule},
              {"pushforward_error", to_json(res.pushforward_error)},
              {"pushforward_w2", to_json(res.pushforward_w2)},
              {"w2_check", to_json(res.w2_check)},
              {"w2_check_pushforward", to_json(res.w2_check_pushforward)},
              {"convexity_defect", to_json(res.convexity_defect)},
              {"shift", to_json(Vec(res.shift.transpose()))},
              {"psi_upper_bound", to_json(bound)},
              {"final_objective", to_json(res.steps.back().objective)},
              {"converged", res.converged}};
  if (threshold) {
    doc["pushforward_threshold"] = *threshold;
    doc["pushforward_ok"] = res.pushforward_error <= *threshold;
  }
  out.json_file("moment.json", doc);

  RowMat steps(static_cast<Eigen::Index>(res.steps.size()), 11);
  for (std::size_t k = 0; k < res.steps.size(); ++k) {
    const auto& s = res.steps[k];
    steps.row(static_cast<Eigen::Index>(k)) << s.eps, s.residual, s.objective, s.bl_drift, s.convexity_defect,
        s.pushforward_error, s.fixed_point_residual, s.consistency_value, s.psi_bound, s.outer_iterations,
        s.converged ? 1.0 : 0.0;
  }
  std::ostringstream os;
  io::write_rows(os,
                 {"eps", "residual", "objective", "bl_drift", "convexity_defect", "pushforward_error",
                  "fixed_point_residual", "consistency_value", "psi_bound", "outer_iterations", "converged"},
                 steps);
  out.text_file("moment_steps.csv", os.str());
  out.text_file("p0.csv", point_table(*opt.grid, {{"density", &res.p0.values}, {"u_bar", &res.u_bar}}));
  return res.converged ? kExitOk : kExitNotConverged;
}

int run_stability(const RunConfig& cfg, ArtifactWriter& out, std::vector<std::string>& files) {
  const SupportPtr grid = optional_grid(cfg);
  const DiscreteMeasure mu1 = resolve_measure(cfg, "mu1", grid, files).measure();
  const DiscreteMeasure mu2 = resolve_measure(cfg, "mu2", grid, files).measure();
  const double eps = positive(cfg, "eps");
  const KernelSpec q(GaussianHeat{cfg.number("t", 1.0), eps}, mu1.support, mu2.support);
  const FamilyKind kind = family_kind_from_string(cfg.text("family"));
  FamilyParams params;
  if (cfg.has("index_set")) {
    params.index_set.clear();
    for (double n : cfg.numbers("index_set")) {
      if (n != std::floor(n) || n < 1) throw InvalidArgument("index_set entries must be positive integers");
      params.index_set.push_back(static_cast<int>(n));
    }
  }
  params.amplitude = cfg.number("amplitude", params.amplitude);
  params.bandwidth = cfg.number("bandwidth", params.bandwidth);
  params.seed = cfg.seed("seed");
  ConvergenceOptions opt;
  opt.probes = random_probes(mu1, mu2, static_cast<std::size_t>(cfg.integer("probes", 20)),
                             stream_seed(params.seed, 0x9e0be));
  const double shift = cfg.number("probe_shift", 0.0);
  if (shift != 0.0) opt.probe_shift = Eigen::RowVectorXd::Constant(mu1.support->dim(), shift);
  opt.m = static_cast<int>(cfg.integer("m", 1));
  opt.solve = solve_options(cfg);
  const std::optional<double> r_prime = cfg.optional_number("r_prime");
  const double r = cfg.number("r", std::max(mu1.support->bounding_radius(), mu2.support->bounding_radius()));
  cfg.check_all_used();

  const PerturbationFamily fam = make_family(q, mu1, mu2, kind, params);
  const A3rEstimate a3r = check_a3r(q, r);
  if (r_prime && a3r.satisfied) opt.r_prime = r_prime;
  const ConvergenceReport rep = run_convergence(fam, opt);

  RowMat rows(static_cast<Eigen::Index>(rep.rows.size()), 9);
  json jrows = json::array();
  bool all_converged = true;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& r0 = rep.rows[k];
    all_converged = all_converged && r0.converged && r0.error.empty();
    rows.row(static_cast<Eigen::Index>(k)) << r0.n, r0.plan_bl, r0.product_gap, r0.potential_gap, r0.supnorm_gap,
        r0.individual_potential_gap, r0.kernel_sup_gap, r0.converged ? 1.0 : 0.0, r0.iterations;
    jrows.push_back({{"n", r0.n},
                     {"plan_bl", to_json(r0.plan_bl)},
                     {"product_gap", to_json(r0.product_gap)},
                     {"potential_gap", to_json(r0.potential_gap)},
                     {"supnorm_gap", to_json(r0.supnorm_gap)},
                     {"individual_potential_gap", to_json(r0.individual_potential_gap)},
                     {"kernel_sup_gap", to_json(r0.kernel_sup_gap)},
                     {"converged", r0.converged},
                     {"error", r0.error}});
  }
  std::ostringstream os;
  io::write_rows(os,
                 {"n", "plan_bl", "product_gap", "potential_gap", "supnorm_gap", "individual_potential_gap",
                  "kernel_sup_gap", "converged", "iterations"},
                 rows);
  out.text_file("stability.csv", os.str());
  auto trend = [](const TrendSummary& t) {
    return json{{"first", to_json(t.first)},
                {"last", to_json(t.last)},
                {"ratio", to_json(t.ratio)},
                {"non_increasing", t.non_increasing}};
  };
  out.json_file("stability.json", {{"family", to_string(kind)},
                                   {"m", rep.m},
                                   {"a3r", {{"satisfied", a3r.satisfied}, {"C_r", to_json(a3r.C_r)}, {"reason", a3r.reason}}},
                                   {"rows", jrows},
                                   {"trend",
                                    {{"plan_bl", trend(rep.plan_bl)},
                                     {"product_gap", trend(rep.product_gap)},
                                     {"potential_gap", trend(rep.potential_gap)},
                                     {"supnorm_gap", trend(rep.supnorm_gap)}}}});
  return all_converged ? kExitOk : kExitNotConverged;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"solve", "control", "bridge", "moment", "stability"};
  return names;
}

int run_command(const std::string& command, const RunConfig& cfg, ArtifactWriter& out,
                std::vector<std::string>& files) {
  if (cfg.has("command") && cfg.text("command") != command)
    throw InvalidArgument("config is for '" + cfg.text("command") + "' but the subcommand is '" + command + "'");
  if (command == "solve") return run_solve(cfg, out, files);
  if (command == "control") return run_control(cfg, out, files);
  if (command == "bridge") return run_bridge(cfg, out, files);
  if (command == "moment") return run_moment(cfg, out, files);
  if (command == "stability") return run_stability(cfg, out, files);
  throw InvalidArgument("unknown command '" + command + "'");
}

}  // namespace sfe::cli
