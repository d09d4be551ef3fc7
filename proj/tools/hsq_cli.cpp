// hsq: adaptive sparse quadrature experiments.
//
//   hsq linear --mode hessian --qoi q1 --alpha 1 --max-points 10000 --out run/
//   hsq darcy  --mode hessian --max-points 10000 --out run/
//   hsq rules  --level 3

#include "hsq/experiments.hpp"
#include "hsq/quad1d.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

struct Flags {
  std::string config;
  std::string mode;
  std::string construction;
  std::string qoi;
  int alpha = 0;
  long long seed = -1;
  long long max_points = 0;
  double tolerance = -1.0;
  int mc_trials = -1;
  std::string out;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON problem/config file");
  cmd->add_option("--mode", f.mode, "parametrization")->check(CLI::IsMember({"prior", "hessian"}));
  cmd->add_option("--construction", f.construction, "index selection")
      ->check(CLI::IsMember({"apriori", "aposteriori"}));
  cmd->add_option("--alpha", f.alpha, "prior smoothness (1 or 2)");
  cmd->add_option("--seed", f.seed, "data generation seed");
  cmd->add_option("--max-points", f.max_points, "quadrature point budget");
  cmd->add_option("--tolerance", f.tolerance, "indicator tolerance (0 disables)");
  cmd->add_option("--out", f.out, "output directory");
}

hsq::ExperimentConfig make_config(hsq::ProblemKind kind, const Flags& f) {
  hsq::ExperimentConfig cfg = hsq::ExperimentConfig::defaults(kind);
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    if (!is) throw std::runtime_error("cannot read config " + f.config);
    cfg = hsq::config_from_json(nlohmann::json::parse(is), kind);
  }
  if (!f.mode.empty()) cfg.mode = f.mode == "prior" ? hsq::Parametrization::Prior : hsq::Parametrization::Hessian;
  if (!f.construction.empty()) {
    cfg.construction = f.construction == "apriori" ? hsq::Construction::APriori : hsq::Construction::APosteriori;
  }
  if (!f.qoi.empty()) cfg.qoi = f.qoi == "q2" ? hsq::QoiKind::Q2 : hsq::QoiKind::Q1;
  if (f.alpha != 0) cfg.alpha = f.alpha;
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (f.max_points > 0) cfg.max_points = static_cast<std::size_t>(f.max_points);
  if (f.tolerance >= 0) cfg.tolerance = f.tolerance;
  if (f.mc_trials >= 0) cfg.mc_trials = f.mc_trials;
  cfg.validate();
  return cfg;
}

int run(hsq::ProblemKind kind, const Flags& f) {
  const auto cfg = make_config(kind, f);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = hsq::run_convergence(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!f.out.empty()) hsq::write_outputs(res, f.out);

  std::cout << "points " << res.quad.n_points << "  indices " << res.quad.n_indices << "  stop "
            << hsq::to_string(res.quad.stop_reason) << '\n';
  for (const auto& [k, v] : res.final_values) std::cout << "value " << k << " " << hsq::format_double(v, 12) << '\n';
  for (const auto& [k, v] : res.references) std::cout << "reference " << k << " " << hsq::format_double(v, 12) << '\n';
  for (const auto& [k, v] : res.record.rates) std::cout << "rate " << k << " " << hsq::format_double(v, 4) << '\n';
  std::cerr << "elapsed " << secs << " s\n";

  // A pure budget run has nothing to converge to.
  if (cfg.tolerance > 0.0 && !res.converged) return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hessian-based adaptive sparse quadrature"};
  app.require_subcommand(1);

  Flags lin, dar;
  auto* linear = app.add_subcommand("linear", "Poisson problem with analytic references");
  add_run_flags(linear, lin);
  linear->add_option("--qoi", lin.qoi, "quantity of interest")->check(CLI::IsMember({"q1", "q2"}));
  linear->add_option("--mc-trials", lin.mc_trials, "Monte Carlo trials (0 = none)");

  auto* darcy = app.add_subcommand("darcy", "nonlinear Darcy problem with self-reference");
  add_run_flags(darcy, dar);
  darcy->add_option("--qoi", dar.qoi, "accepted for symmetry; the Darcy QoI is u(0.5)")
      ->check(CLI::IsMember({"q1", "q2"}));

  int level = 0;
  auto* rules = app.add_subcommand("rules", "print a Gauss-Hermite rule as node,weight CSV");
  rules->add_option("--level", level, "rule level (m = level + 1 points)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*linear) return run(hsq::ProblemKind::Linear, lin);
    if (*darcy) return run(hsq::ProblemKind::Darcy, dar);
    const auto& r = hsq::hermite_rule(level);
    std::cout << "node,weight\n";
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
      std::cout << hsq::format_double(r.nodes[i]) << ',' << hsq::format_double(r.weights[i]) << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
