#include "hsq/quad1d.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

using namespace hsq;

namespace {

double double_factorial(int k) {
  double r = 1.0;
  for (int i = k; i > 1; i -= 2) r *= i;
  return r;
}

double gaussian_moment(int k) { return k % 2 ? 0.0 : double_factorial(k - 1); }

}  // namespace

TEST_SUITE("quad1d") {
  TEST_CASE("low levels by hand") {
    const auto& r0 = hermite_rule(0);
    REQUIRE(r0.nodes.size() == 1);
    CHECK(r0.nodes[0] == 0.0);
    CHECK(r0.weights[0] == doctest::Approx(1.0).epsilon(1e-15));

    const auto& r1 = hermite_rule(1);
    REQUIRE(r1.nodes.size() == 2);
    CHECK(r1.nodes[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(r1.nodes[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r1.weights[0] == doctest::Approx(0.5).epsilon(1e-14));

    const auto& r2 = hermite_rule(2);
    REQUIRE(r2.nodes.size() == 3);
    CHECK(r2.nodes[0] == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-14));
    CHECK(r2.nodes[1] == 0.0);
    CHECK(r2.weights[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(r2.weights[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }

  TEST_CASE("weights sum to one, nodes and weights are symmetric") {
    for (int level : {0, 1, 2, 5, 10, 31, 60, 120, 200}) {
      const auto& r = hermite_rule(level);
      CHECK(static_cast<int>(r.nodes.size()) == points_for_level(level));
      double s = 0.0;
      for (double w : r.weights) s += w;
      CHECK(std::abs(s - 1.0) <= 1e-14);
      const std::size_t n = r.nodes.size();
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(r.nodes[i] == -r.nodes[n - 1 - i]);
        CHECK(r.weights[i] == r.weights[n - 1 - i]);
        if (i) CHECK(r.nodes[i - 1] < r.nodes[i]);
      }
    }
  }

  TEST_CASE("exact through degree 2nu+1") {
    // Relative to the size of the moment: E[xi^24] is about 3e11.
    for (int level = 0; level <= 12; ++level) {
      const auto& r = hermite_rule(level);
      for (int k = 0; k <= 2 * level + 1; ++k) {
        const double q = apply(r, [k](double x) { return std::pow(x, k); });
        const double e = gaussian_moment(k);
        CHECK(std::abs(q - e) <= 1e-10 * std::max(1.0, gaussian_moment(k % 2 ? k + 1 : k)));
      }
      // One degree beyond: not exact for even 2nu+2.
      const int k = 2 * level + 2;
      const double q = apply(r, [k](double x) { return std::pow(x, k); });
      CHECK(std::abs(q - gaussian_moment(k)) > 1e-6);
    }
  }

  TEST_CASE("difference rule examples") {
    const auto sq = [](double x) { return x * x; };
    CHECK(apply(difference_rule(0), [](double) { return 3.0; }) == doctest::Approx(3.0));
    CHECK(apply(difference_rule(1), sq) == doctest::Approx(1.0));
    CHECK(std::abs(apply(difference_rule(2), sq)) < 1e-14);
    // Level 2 contains 0 (three points), level 1 does not: no merge.
    CHECK(difference_rule(2).nodes.size() == 5);
    // Level 2 and 3: 3 + 4 nodes, no coincident nodes.
    CHECK(difference_rule(3).nodes.size() == 7);
    // Levels 4 (5 points, contains 0) and 3: disjoint too.
    CHECK(difference_rule(4).nodes.size() == 9);
  }

  TEST_CASE("telescoping sum reproduces the top rule") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> c(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> coef(12);
      for (double& a : coef) a = c(gen);
      const auto g = [&](double x) {
        double s = 0.0;
        for (std::size_t i = coef.size(); i-- > 0;) s = s * x + coef[i];
        return s;
      };
      for (int L : {0, 3, 8, 15}) {
        double tele = 0.0;
        for (int nu = 0; nu <= L; ++nu) tele += apply(difference_rule(nu), g);
        const double top = apply(hermite_rule(L), g);
        CHECK(std::abs(tele - top) <= 1e-13 * std::max(1.0, std::abs(top)));
      }
    }
  }

  TEST_CASE("rules are deterministic and the cache is consistent") {
    for (int level : {0, 4, 17, 99}) {
      const UnivariateRule a = compute_hermite_rule(level);
      const UnivariateRule b = compute_hermite_rule(level);
      CHECK(a.nodes == b.nodes);
      CHECK(a.weights == b.weights);
      CHECK(hermite_rule(level).nodes == a.nodes);
      CHECK(difference_rule(level).signed_weights == compute_difference_rule(level).signed_weights);
    }
  }

  TEST_CASE("cache tolerates concurrent readers") {
    std::vector<std::thread> pool;
    std::vector<double> sums(4, 0.0);
    for (int t = 0; t < 4; ++t) {
      pool.emplace_back([t, &sums] {
        for (int level = 0; level <= 80; ++level) sums[static_cast<std::size_t>(t)] += hermite_rule(level).weights[0];
      });
    }
    for (auto& th : pool) th.join();
    for (double s : sums) CHECK(s == sums[0]);
  }

  TEST_CASE("unsupported levels") {
    CHECK_THROWS_AS(hermite_rule(-1), std::invalid_argument);
    CHECK_THROWS_AS(hermite_rule(kMaxRuleLevel + 1), std::invalid_argument);
    CHECK_THROWS_AS(difference_rule(kMaxRuleLevel + 1), std::invalid_argument);
  }
}
