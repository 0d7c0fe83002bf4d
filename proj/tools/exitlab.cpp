// exitlab: simulation and verification front end.
//
// Subcommands: flow, conjugation, simulate, tail, density, smallball,
// theory, verify. Exit codes: 0 success, 1 usage error, 2 numerical failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "exitlab/density.hpp"
#include "exitlab/flow.hpp"
#include "exitlab/model.hpp"
#include "exitlab/parallel.hpp"
#include "exitlab/rare.hpp"
#include "exitlab/sde.hpp"
#include "exitlab/stats.hpp"
#include "exitlab/theory.hpp"
#include "exitlab/verify.hpp"

namespace {

using nlohmann::json;
using namespace exitlab;

constexpr const char* kVersion = "1.0.0";

struct Global {
  std::string model_path;
  std::uint64_t seed = 42;
  int threads = 0;
  bool deterministic_reduce = false;  // reductions are deterministic anyway
  std::string out;
};

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CLI::ValidationError("--model", "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Run {
  Global g;
  std::string command;
  std::string model_text;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  model::ModelSpec load() {
    model_text = read_file(g.model_path);
    return model::validate_model(model::raw_model_from_json_text(model_text));
  }

  json manifest() const {
    return json{
        {"schema", 1},
        {"command", command},
        {"model_hash", fnv1a(model_text)},
        {"seed", g.seed},
        {"version", kVersion},
        {"wall_time",
         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
             .count()},
        {"thread_count", parallel::thread_count()}};
  }

  void emit_json(json body) {
    body["manifest"] = manifest();
    const std::string text = body.dump(2) + "\n";
    std::cout << text;
    if (!g.out.empty()) {
      std::ofstream f(g.out);
      f << text;
    }
  }

  void emit_csv(const std::string& text) {
    if (g.out.empty()) {
      std::cout << text;
      return;
    }
    std::ofstream f(g.out);
    f << text;
    std::ofstream mf(g.out + ".manifest.json");
    mf << manifest().dump(2) << "\n";
  }
};

void add_global(CLI::App* app, Global& g, bool needs_model = true) {
  auto* m = app->add_option("--model", g.model_path, "model config (JSON)");
  if (needs_model) m->required();
  app->add_option("--seed", g.seed, "RNG seed");
  app->add_option("--threads", g.threads, "worker threads");
  app->add_flag("--deterministic-reduce", g.deterministic_reduce,
                "force order-independent reductions (always on)");
  app->add_option("--out", g.out, "output file");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"small-noise exit-time laboratory"};
  app.require_subcommand(1);

  // flow -------------------------------------------------------------
  Global g_flow;
  double flow_x = 0.0, flow_t = 0.0;
  auto* c_flow = app.add_subcommand("flow", "deterministic flow map and exit");
  add_global(c_flow, g_flow);
  c_flow->add_option("--x", flow_x, "start point")->required();
  c_flow->add_option("--t", flow_t, "flow time");

  // conjugation --------------------------------------------------------
  Global g_conj;
  int conj_grid = 256;
  auto* c_conj = app.add_subcommand("conjugation", "tabulate f over the interval");
  add_global(c_conj, g_conj);
  c_conj->add_option("--grid", conj_grid, "number of grid nodes");

  // simulate -----------------------------------------------------------
  Global g_sim;
  double sim_eps = 0.1, sim_x0 = 0.0, sim_dt = 1e-3;
  std::size_t sim_n = 1000;
  std::string sim_scheme = "euler";
  int dump_path = -1;
  auto* c_sim = app.add_subcommand("simulate", "sample exit times");
  add_global(c_sim, g_sim);
  c_sim->add_option("--eps", sim_eps, "noise amplitude")->required();
  c_sim->add_option("--x0", sim_x0, "start point");
  c_sim->add_option("--n", sim_n, "number of paths");
  c_sim->add_option("--dt", sim_dt, "time step");
  c_sim->add_option("--scheme", sim_scheme, "euler|milstein");
  c_sim->add_option("--dump-path", dump_path, "emit trajectory CSV for path k");

  // tail -----------------------------------------------------------------
  Global g_tail;
  double tail_eps = 0.1, tail_alpha = 1.3, tail_x = 0.0, tail_dt = 1e-3;
  std::size_t tail_n = 20000;
  int tail_levels = 5;
  std::string tail_method = "splitting";
  auto* c_tail = app.add_subcommand("tail", "long-exit tail probability");
  add_global(c_tail, g_tail);
  c_tail->add_option("--eps", tail_eps)->required();
  c_tail->add_option("--alpha", tail_alpha, "horizon exponent (> 1)");
  c_tail->add_option("--x", tail_x, "start point in units of eps");
  c_tail->add_option("--n", tail_n, "paths (per level for splitting)");
  c_tail->add_option("--dt", tail_dt);
  c_tail->add_option("--method", tail_method, "direct|splitting");
  c_tail->add_option("--levels", tail_levels, "splitting levels");

  // density -----------------------------------------------------------
  Global g_dens;
  double dens_eps = 0.1, dens_x = 0.0, dens_dt = 5e-3, dens_exponent = 1.5;
  std::size_t dens_n = 100000;
  auto* c_dens = app.add_subcommand("density", "KDE of M vs Gaussian limit");
  add_global(c_dens, g_dens);
  c_dens->add_option("--eps", dens_eps)->required();
  c_dens->add_option("--x", dens_x, "start point (M coordinate)");
  c_dens->add_option("--n", dens_n);
  c_dens->add_option("--dt", dens_dt);
  c_dens->add_option("--tprime-exponent", dens_exponent,
                     "lambda T' / log(1/eps)");

  // smallball -----------------------------------------------------------
  Global g_ball;
  double ball_eps = 0.01, ball_x = 0.0, ball_theta = 0.5, ball_dt = 5e-3,
         ball_c = 1.0;
  std::size_t ball_n = 1000000;
  int ball_sign = 1;
  auto* c_ball = app.add_subcommand("smallball", "small-ball law check");
  add_global(c_ball, g_ball);
  c_ball->add_option("--eps", ball_eps)->required();
  c_ball->add_option("--x", ball_x);
  c_ball->add_option("--theta", ball_theta, "ball exponent (> 0)");
  c_ball->add_option("--c", ball_c, "ball prefactor a = c eps^theta");
  c_ball->add_option("--n", ball_n);
  c_ball->add_option("--dt", ball_dt);
  c_ball->add_option("--sign", ball_sign, "+1 or -1");

  // theory --------------------------------------------------------------
  Global g_th;
  double th_eps = 0.05, th_x = 0.0, th_alpha = 1.3, th_theta = 0.5;
  auto* c_th = app.add_subcommand("theory", "closed-form reference constants");
  add_global(c_th, g_th);
  c_th->add_option("--eps", th_eps)->required();
  c_th->add_option("--x", th_x);
  c_th->add_option("--alpha", th_alpha);
  c_th->add_option("--theta", th_theta, "small-ball exponent for T_eps");

  // verify -------------------------------------------------------------
  Global g_ver;
  std::string suite = "quick";
  auto* c_ver = app.add_subcommand("verify", "run the acceptance suite");
  add_global(c_ver, g_ver, /*needs_model=*/false);
  c_ver->add_option("--suite", suite, "quick|full");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto configure = [](const Global& g) {
    int threads = g.threads;
    if (threads <= 0) {
      if (const char* env = std::getenv("EXITLAB_THREADS"))
        threads = std::atoi(env);
    }
    if (threads <= 0)
      threads = static_cast<int>(std::thread::hardware_concurrency());
    parallel::set_threads(threads);
  };

  try {
    if (c_flow->parsed()) {
      configure(g_flow);
      Run run{g_flow, "flow"};
      const model::ModelSpec m = run.load();
      flow::FlowSolverConfig fcfg;
      const auto exit = flow::deterministic_exit_time(m, flow_x, fcfg);
      json body{{"x", flow_x},
                {"t", flow_t},
                {"S_t_x", flow::integrate_flow(m, flow_x, flow_t, fcfg)},
                {"T_exit", exit.T},
                {"exit_side", exit.side},
                {"f_x", flow::conjugation(m, flow_x, fcfg)},
                {"lambda", m.lambda}};
      run.emit_json(body);
      return 0;
    }

    if (c_conj->parsed()) {
      configure(g_conj);
      Run run{g_conj, "conjugation"};
      const model::ModelSpec m = run.load();
      flow::FlowSolverConfig fcfg;
      const auto table = flow::build_conjugation_table(m, conj_grid, fcfg);
      std::string csv = "x,f_of_x\n";
      char line[64];
      for (std::size_t i = 0; i < table.grid.size(); ++i) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g\n", table.grid[i],
                      table.f_values[i]);
        csv += line;
      }
      run.emit_csv(csv);
      std::cerr << "conjugation: " << table.grid.size() << " nodes, f(q-)="
                << table.f_qminus << ", f(q+)=" << table.f_qplus << "\n";
      return 0;
    }

    if (c_sim->parsed()) {
      configure(g_sim);
      Run run{g_sim, "simulate"};
      const model::ModelSpec m = run.load();
      sde::SimConfig cfg;
      cfg.dt = sim_dt;
      cfg.epsilon = sim_eps;
      cfg.max_time = sde::default_max_time(m, sim_eps);
      if (sim_scheme == "milstein")
        cfg.scheme = sde::Scheme::kMilstein;
      else if (sim_scheme != "euler")
        throw CLI::ValidationError("--scheme", "must be euler or milstein");

      if (dump_path >= 0) {
        rng::Stream stream =
            rng::path_stream(g_sim.seed, static_cast<std::uint32_t>(dump_path));
        const auto path = sde::simulate_path(m, sim_x0, cfg, stream);
        std::string csv = "t,x\n";
        char line[64];
        for (std::size_t i = 0; i < path.times.size(); ++i) {
          std::snprintf(line, sizeof(line), "%.17g,%.17g\n", path.times[i],
                        path.states[i]);
          csv += line;
        }
        run.emit_csv(csv);
        return 0;
      }

      const auto results = sde::exit_summary(m, sim_x0, cfg, sim_n, g_sim.seed);
      std::string csv = "path_id,tau,side,censored\n";
      char line[80];
      for (std::size_t i = 0; i < results.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.17g,%d,%d\n", i,
                      results[i].tau, results[i].side,
                      results[i].censored ? 1 : 0);
        csv += line;
      }
      run.emit_csv(csv);
      return 0;
    }

    if (c_tail->parsed()) {
      configure(g_tail);
      Run run{g_tail, "tail"};
      const model::ModelSpec m = run.load();
      sde::SimConfig cfg;
      cfg.dt = tail_dt;
      cfg.epsilon = tail_eps;
      cfg.max_time = sde::default_max_time(m, tail_eps);
      rare::TailQuery query{tail_alpha, tail_eps, tail_x};
      rare::TailEstimate est;
      if (tail_method == "direct")
        est = rare::tail_direct(m, query, tail_n, cfg, g_tail.seed);
      else if (tail_method == "splitting")
        est = rare::tail_splitting(m, query, tail_levels, tail_n, cfg,
                                   g_tail.seed);
      else
        throw CLI::ValidationError("--method", "must be direct or splitting");

      flow::FlowSolverConfig fcfg;
      const auto table = flow::build_conjugation_table(m, 257, fcfg);
      const auto consts = theory::make_constants(m, table);
      const double lam = theory::lambda_constant(consts, tail_x);
      const auto split = theory::exit_split(consts);
      json body{
          {"query",
           {{"alpha", tail_alpha}, {"eps", tail_eps}, {"x", tail_x},
            {"horizon", query.horizon(m.lambda)}, {"method", tail_method}}},
          {"p_hat", est.p_hat},
          {"ci", {est.ci_low, est.ci_high}},
          {"per_side",
           {{"minus", est.side_minus}, {"plus", est.side_plus},
            {"censored", est.censored}}},
          {"n_effective", est.n_effective},
          {"level_fractions", est.level_fractions},
          {"theoretical",
           {{"Lambda", lam},
            {"Lambda_eps_alpha_minus_1",
             lam * std::pow(tail_eps, tail_alpha - 1.0)},
            {"split_minus", split.first},
            {"split_plus", split.second}}},
          {"warning_low_expected_count", est.warning_low_expected_count}};
      run.emit_json(body);
      return 0;
    }

    if (c_dens->parsed()) {
      configure(g_dens);
      Run run{g_dens, "density"};
      const model::ModelSpec m = run.load();
      sde::SimConfig cfg;
      cfg.dt = dens_dt;
      cfg.max_time = 1.0;  // raised internally to the policy horizon
      density::TPrimePolicy policy;
      policy.exponent = dens_exponent;
      const auto sample =
          density::sample_M_at(m, dens_eps, dens_x, policy, dens_n, cfg,
                               g_dens.seed);
      const auto est = density::kde(sample, 0.0, dens_x);
      const density::GaussianReference ref{
          dens_x, m.sigma0 * m.sigma0 / (2.0 * m.lambda)};

      std::string csv = "z,p_emp,p_ref,weighted_gap\n";
      char line[120];
      for (std::size_t i = 0; i < est.grid.size(); ++i) {
        const double z = est.grid[i];
        const double pr = ref.pdf(z);
        const double gap =
            std::fabs(est.values[i] - pr) * std::exp(std::fabs(ref.mean - z));
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n", z,
                      est.values[i], pr, gap);
        csv += line;
      }
      run.emit_csv(csv);
      std::cerr << "density: eps=" << dens_eps << " n=" << dens_n
                << " seed=" << g_dens.seed << " weighted_sup_distance="
                << density::weighted_sup_distance(est, ref) << "\n";
      return 0;
    }

    if (c_ball->parsed()) {
      configure(g_ball);
      Run run{g_ball, "smallball"};
      const model::ModelSpec m = run.load();
      flow::FlowSolverConfig fcfg;
      const auto table = flow::build_conjugation_table(m, 257, fcfg);
      const auto nb = flow::choose_neighborhood(m, table, m.requested_R);
      const auto coeffs = sde::build_linearized_coeffs(m, table, nb);
      sde::SimConfig cfg;
      cfg.dt = ball_dt;
      cfg.max_time = 1.0;  // raised internally to T_eps
      const auto res =
          density::small_ball_check(m, coeffs, ball_eps, ball_x, ball_theta,
                                    ball_n, cfg, g_ball.seed, ball_sign, ball_c);
      json body{{"eps", ball_eps},
                {"x", ball_x},
                {"theta", ball_theta},
                {"sign", ball_sign},
                {"a", res.a},
                {"T_eps", res.T_eps},
                {"n", res.n},
                {"hits", res.hits},
                {"empirical", res.empirical},
                {"theoretical", res.theoretical},
                {"ratio", res.theoretical > 0.0
                              ? res.empirical / res.theoretical
                              : 0.0},
                {"too_few_hits", res.too_few_hits}};
      if (res.too_few_hits)
        body["advice"] = "fewer than 25 hits; increase --n";
      run.emit_json(body);
      return 0;
    }

    if (c_th->parsed()) {
      configure(g_th);
      Run run{g_th, "theory"};
      const model::ModelSpec m = run.load();
      flow::FlowSolverConfig fcfg;
      const auto table = flow::build_conjugation_table(m, 257, fcfg);
      const auto nb = flow::choose_neighborhood(m, table, m.requested_R);
      const auto consts = theory::make_constants(m, table);
      const double lam = theory::lambda_constant(consts, th_x);
      const auto split = theory::exit_split(consts);
      const auto sched =
          theory::recursion_schedule(th_eps, th_theta, m.lambda, m.sigma0);
      json body{
          {"eps", th_eps},
          {"x", th_x},
          {"alpha", th_alpha},
          {"lambda", m.lambda},
          {"sigma0", m.sigma0},
          {"f_qminus", consts.f_qminus},
          {"f_qplus", consts.f_qplus},
          {"Lambda", lam},
          {"Lambda_eps_alpha_minus_1", lam * std::pow(th_eps, th_alpha - 1.0)},
          {"split_minus", split.first},
          {"split_plus", split.second},
          {"C_minus", consts.C_minus},
          {"C_plus", consts.C_plus},
          {"T_eps", theory::deterministic_T(th_eps, nb.R, th_theta, m.lambda)},
          {"schedule",
           {{"theta", sched.theta},
            {"N", sched.N},
            {"alpha_eps", sched.alpha_eps},
            {"T_prime", sched.T_prime},
            {"T_k", sched.T_k},
            {"H_variances", sched.H_variances}}}};
      run.emit_json(body);
      return 0;
    }

    if (c_ver->parsed()) {
      configure(g_ver);
      Run run{g_ver, "verify"};
      verify::Suite level;
      if (suite == "quick")
        level = verify::Suite::kQuick;
      else if (suite == "full")
        level = verify::Suite::kFull;
      else
        throw CLI::ValidationError("--suite", "must be quick or full");

      const auto report = verify::run_suite(level, g_ver.seed);
      json items = json::array();
      for (const auto& c : report.results) {
        std::printf("[%s] %2d %-50s %7.1fs  %s\n", c.pass ? "PASS" : "FAIL",
                    c.id, c.name.c_str(), c.seconds, c.detail.c_str());
        items.push_back({{"id", c.id},
                         {"name", c.name},
                         {"pass", c.pass},
                         {"detail", c.detail},
                         {"seconds", c.seconds}});
      }
      const bool ok = report.all_pass();
      std::printf("%s: %zu criteria, suite=%s, seed=%llu\n",
                  ok ? "PASS" : "FAIL", report.results.size(), suite.c_str(),
                  static_cast<unsigned long long>(report.seed));
      if (!g_ver.out.empty()) {
        json body{{"suite", suite},
                  {"seed", report.seed},
                  {"all_pass", ok},
                  {"criteria", items},
                  {"manifest", run.manifest()}};
        std::ofstream f(g_ver.out);
        f << body.dump(2) << "\n";
      }
      return ok ? 0 : 2;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
