// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "hsq/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace hsq;

namespace {

int failures = 0;

void report(int id, const std::string& what, bool pass, const std::string& detail) {
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

// Runs one criterion; an exception counts as a failure with its message.
void criterion(int id, const std::string& what, const std::function<bool(std::ostringstream&)>& body) {
  std::ostringstream d;
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  try {
    pass = body(d);
  } catch (const std::exception& e) {
    d << "error: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  d << " [" << std::lround(secs) << " s]";
  report(id, what, pass, d.str());
}

bool within(double x, double target, double tol) { return std::isfinite(x) && std::abs(x - target) <= tol; }

double rate_of(const ExperimentResult& r, const std::string& series) {
  auto it = r.record.rates.find(series);
  return it == r.record.rates.end() ? std::nan("") : it->second;
}

double final_rel(const ExperimentResult& r, const std::string& series) {
  const auto rows = r.record.series(series);
  return rows.empty() ? std::nan("") : rows.back().rel_error;
}

ExperimentConfig linear(int alpha, QoiKind qoi, Parametrization mode = Parametrization::Hessian) {
  ExperimentConfig c = ExperimentConfig::defaults(ProblemKind::Linear);
  c.alpha = alpha;
  c.qoi = qoi;
  c.mode = mode;
  c.mesh_exp = 10;
  c.max_points = 10000;
  return c;
}

ExperimentConfig darcy(Parametrization mode) {
  ExperimentConfig c = ExperimentConfig::defaults(ProblemKind::Darcy);
  c.mode = mode;
  c.max_points = 10000;
  return c;
}

// Largest violation of λ¹ ≤ λ⁰ relative to λ⁰ over the common modes.
double reduction_violation(const Vec& prior, const Vec& post) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < std::min(prior.size(), post.size()); ++j) {
    worst = std::max(worst, (post(j) - prior(j)) / prior(j));
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  // Hessian-based linear runs are shared by several criteria.
  ExperimentResult q1[3], prior_q1[3];

  criterion(1, "linear Q1 Hessian-based rate", [&](std::ostringstream& d) {
    q1[1] = run_convergence(linear(1, QoiKind::Q1));
    q1[2] = run_convergence(linear(2, QoiKind::Q1));
    const double s1 = rate_of(q1[1], "estimate"), s2 = rate_of(q1[2], "estimate");
    d << "alpha=1 s=" << s1 << " (0.5 +- 0.2), alpha=2 s=" << s2 << " (1.5 +- 0.3)";
    return within(s1, 0.5, 0.2) && within(s2, 1.5, 0.3);
  });

  criterion(2, "linear Q2 Hessian-based rate", [&](std::ostringstream& d) {
    const double s1 = rate_of(run_convergence(linear(1, QoiKind::Q2)), "estimate");
    const double s2 = rate_of(run_convergence(linear(2, QoiKind::Q2)), "estimate");
    d << "alpha=1 s=" << s1 << " (1.5 +- 0.3), alpha=2 s=" << s2 << " (2.5 +- 0.3)";
    return within(s1, 1.5, 0.3) && within(s2, 2.5, 0.3);
  });

  criterion(3, "prior-based quadrature fails at equal budget", [&](std::ostringstream& d) {
    bool ok = true;
    for (int a : {1, 2}) {
      prior_q1[a] = run_convergence(linear(a, QoiKind::Q1, Parametrization::Prior));
      const double ep = final_rel(prior_q1[a], "estimate"), eh = final_rel(q1[a], "estimate");
      d << "alpha=" << a << " prior " << ep << " vs Hessian " << eh << " (x" << ep / eh << ", need >= 10); ";
      ok = ok && std::isfinite(ep) && ep >= 10.0 * eh;
    }
    return ok;
  });

  criterion(4, "Monte Carlo baseline rate", [&](std::ostringstream& d) {
    bool ok = true;
    for (int a : {1, 2}) {
      const LinearSetup s = build_linear(linear(a, QoiKind::Q1));
      const ConvergenceRecord mc = mc_baseline(s, QoiKind::Q1, 100, 10000);
      const double rate = mc.rates.count("mc") ? mc.rates.at("mc") : std::nan("");
      d << "alpha=" << a << " s=" << rate << " (0.5 +- 0.15); ";
      ok = ok && within(rate, 0.5, 0.15);
    }
    return ok;
  });

  ExperimentResult dh, dp;
  criterion(5, "Darcy Hessian-based rate, prior-based stagnation", [&](std::ostringstream& d) {
    dh = run_convergence(darcy(Parametrization::Hessian));
    dp = run_convergence(darcy(Parametrization::Prior));
    const double sz = rate_of(dh, "Z"), szq = rate_of(dh, "ZQ");
    const double pz = rate_of(dp, "Z"), pzq = rate_of(dp, "ZQ");
    const double eh = final_rel(dh, "ZQ"), ep = final_rel(dp, "ZQ");
    d << "Hessian s(Z)=" << sz << " s(ZQ)=" << szq << " (1.0 +- 0.3); prior s(Z)=" << pz << " s(ZQ)=" << pzq
      << " (need <= 0.25 or unfittable), prior final rel error " << ep << " vs Hessian " << eh
      << " (need >= 0.1 and >= 10x)";
    // Stagnation: no systematic decay over the trailing window and an error still of order one.
    auto flat = [](double s) { return !std::isfinite(s) || s <= 0.25; };
    return within(sz, 1.0, 0.3) && within(szq, 1.0, 0.3) && flat(pz) && flat(pzq) && ep >= 0.1 &&
           ep >= 10.0 * eh;
  });

  criterion(6, "posterior eigenvalues never exceed the prior ones", [&](std::ostringstream& d) {
    double worst = 0.0;
    for (int a : {1, 2}) worst = std::max(worst, reduction_violation(q1[a].prior_spectrum, q1[a].posterior_spectrum));
    const double worst_darcy = reduction_violation(dh.prior_spectrum, dh.posterior_spectrum);
    const Vec& lp = q1[1].prior_spectrum;
    const Vec& lq = q1[1].posterior_spectrum;
    const Eigen::Index last = std::min(lp.size(), lq.size()) - 1;
    const double tail = lq(last) / lp(last);
    d << "linear max (l1-l0)/l0=" << worst << ", Darcy " << worst_darcy << " over " << dh.posterior_spectrum.size()
      << " modes (need <= 1e-10); linear tail ratio at mode " << last + 1 << " = " << tail << " (need > 0.99)";
    return worst <= 1e-10 && worst_darcy <= 1e-10 && dh.posterior_spectrum.size() > 0 && tail > 0.99;
  });

  criterion(7, "posterior spectrum against the closed form", [&](std::ostringstream& d) {
    double worst = 0.0;
    for (int a : {1, 2}) {
      ExperimentConfig c = linear(a, QoiKind::Q1);
      c.mesh_exp = 8;
      const LinearSetup s = build_linear(c);
      const Mesh1D& mesh = s.problem->mesh();
      std::vector<double> want;
      for (int j = 1; j <= mesh.n_interior(); ++j) {
        const double mu = discrete_laplacian_eigenvalue(j, mesh);
        want.push_back(1.0 / (std::pow(c.beta * mu, a) + 1.0 / (c.sigma * c.sigma * mu * mu)));
      }
      std::sort(want.rbegin(), want.rend());
      if (s.post.posterior.count() < 20) throw std::runtime_error("fewer than 20 posterior modes");
      for (int j = 0; j < 20; ++j) {
        worst = std::max(worst, std::abs(s.post.posterior.values(j) - want[static_cast<std::size_t>(j)]) /
                                    want[static_cast<std::size_t>(j)]);
      }
    }
    d << "max relative deviation over the top 20 modes, both alpha: " << worst << " (need <= 1e-3)";
    return worst <= 1e-3;
  });

  criterion(8, "property suites", [&](std::ostringstream& d) {
    doctest::Context ctx(argc, argv);
    ctx.setOption("test-case",
                  "full box equals the direct tensor rule,"
                  "exact through degree 2nu+1,"
                  "linear gradient and Hessian against finite differences,"
                  "Darcy gradient and Hessian against finite differences,"
                  "J1 is flat to third order at the MAP point,"
                  "linear MAP matches the closed form,"
                  "runs are bit reproducible");
    ctx.setOption("minimal", true);
    const int rc = ctx.run();
    d << "sparse-tensor equivalence, Gauss-Hermite exactness, gradient and Hessian checks, J1 flatness, "
         "MAP closed form, bit reproducibility: "
      << (rc == 0 ? "all green" : "failures above");
    return rc == 0;
  });

  return failures == 0 ? 0 : 1;
}
