#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <catis/error.hpp>
#include <catis/recurrence.hpp>

#include "oracles.hpp"

using namespace catis;

namespace {
RecurrenceConfig example() {
  RecurrenceConfig c;
  c.epsilon0 = 0.1;
  c.alpha = 0.5;
  c.r = 2.0;
  c.delta = 0.1;
  c.L = 12;
  c.T = 1.0;
  return c;
}
}  // namespace

TEST_CASE("feedback off grows linearly") {
  RecurrenceConfig c;
  c.epsilon0 = 0.2;
  c.delta = 0.05;
  c.r = 3;
  c.L = 10;
  auto t = simulate(c);
  REQUIRE(t.deltas.size() == 11);
  for (std::size_t l = 0; l <= 10; ++l)
    CHECK(t.deltas[l] == doctest::Approx(0.2 * 3 * 0.05 * static_cast<double>(l)).epsilon(1e-14));
}

TEST_CASE("near-zero forcing stays near zero") {
  RecurrenceConfig c = example();
  c.epsilon0 = 1e-30;
  for (double v : simulate(c).deltas) CHECK(v < 1e-27);
  c.epsilon0 = 0.0;
  CHECK_THROWS_AS(simulate(c), ValidationError);
}

TEST_CASE("hand-iterated example") {
  auto c = example();
  c.L = 3;
  auto t = simulate(c);
  CHECK(t.deltas[1] == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(t.deltas[2] == doctest::Approx(0.042).epsilon(1e-14));
  CHECK(t.deltas[3] == doctest::Approx(0.0662).epsilon(1e-14));
}

TEST_CASE("closed form") {
  auto c = example();
  CHECK(closed_form(c, 0) == 0.0);
  CHECK(closed_form(c, 1) == doctest::Approx(0.1 * 2 * 0.1).epsilon(1e-14));
  CHECK(closed_form(c, 3) == doctest::Approx(0.2 * (std::pow(1.1, 3) - 1)).epsilon(1e-14));
  CHECK(closed_form(c, 3) == doctest::Approx(0.0662).epsilon(1e-13));
  auto flat = c;
  flat.alpha = 0.0;
  CHECK_THROWS_AS(closed_form(flat, 3), ValidationError);
}

TEST_CASE("closed form agrees with simulation over random configs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    RecurrenceConfig c;
    c.epsilon0 = 0.01 + u(rng);
    c.alpha = 0.01 + u(rng);
    c.delta = 0.01 + 0.2 * u(rng);
    c.r = 0.5 + 4 * u(rng);
    c.L = 64;
    auto traj = simulate(c);
    for (std::size_t l = 1; l <= 64; ++l) {
      double cf = closed_form(c, l);
      CHECK(std::abs(cf - traj.deltas[l]) <= 1e-10 * std::abs(traj.deltas[l]));
    }
  }
}

TEST_CASE("exact critical rate against bisection") {
  auto c = example();
  double rc = r_crit_exact(c);
  double oracle_rc = oracle::bisect_r_crit(0.1, 0.5, 0.1, 12, 1.0);
  CHECK(rc == doctest::Approx(oracle_rc).epsilon(1e-10));
  CHECK(rc == doctest::Approx(3.22073).epsilon(1e-5));
  CHECK(std::pow(1 + 0.5 * rc * 0.1, 12) == doctest::Approx(6.0).epsilon(1e-12));

  auto below = c, above = c;
  below.r = rc - 1e-8;
  above.r = rc + 1e-8;
  CHECK(simulate(below).final_value() < 1.0);
  CHECK(simulate(above).final_value() > 1.0);
}

TEST_CASE("critical rate vanishes with the threshold") {
  auto c = example();
  double prev = r_crit_exact(c);
  for (double T : {1e-1, 1e-3, 1e-6, 1e-9}) {
    c.T = T;
    double rc = r_crit_exact(c);
    CHECK(rc < prev);
    prev = rc;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("approximate critical rate") {
  auto c = example();
  CHECK(r_crit_approx(c) == doctest::Approx(std::log(6.0) / 0.6).epsilon(1e-14));
  CHECK(r_crit_approx(c) == doctest::Approx(2.98627).epsilon(1e-5));

  auto lin = c;
  lin.alpha = 0.0;
  CHECK(r_crit_approx(lin) == doctest::Approx(1.0 / (0.1 * 0.1 * 12)).epsilon(1e-14));
  CHECK(r_crit_exact(lin) == doctest::Approx(1.0 / (0.1 * 0.1 * 12)).epsilon(1e-14));

  auto tiny = c;
  tiny.alpha = 1e-9;
  CHECK(r_crit_approx(tiny) == doctest::Approx(1.0 / (0.1 * 0.1 * 12)).epsilon(1e-6));
  CHECK(r_crit_exact(tiny) == doctest::Approx(1.0 / (0.1 * 0.1 * 12)).epsilon(1e-6));
}

TEST_CASE("approximate rate scales exactly as 1/L") {
  auto c = example();
  double base = r_crit_approx(c);
  for (std::size_t k : {2u, 3u, 5u}) {
    auto s = c;
    s.L = c.L * k;
    CHECK(r_crit_approx(s) == doctest::Approx(base / static_cast<double>(k)).epsilon(1e-14));
  }
}

TEST_CASE("exact rate decreases in L, alpha, delta and eps0") {
  auto c = example();
  double base = r_crit_exact(c);
  auto a = c; a.L = 13;
  auto b = c; b.alpha = 0.6;
  auto d = c; d.delta = 0.11;
  auto e = c; e.epsilon0 = 0.11;
  CHECK(r_crit_exact(a) < base);
  CHECK(r_crit_exact(b) < base);
  CHECK(r_crit_exact(d) < base);
  CHECK(r_crit_exact(e) < base);
}

TEST_CASE("non-linear couplings") {
  auto tab = Coupling::tabulated({{0.0, 0.1}, {1.0, 0.6}});
  CHECK(tab(0.5, 0, 0) == doctest::Approx(0.35));
  CHECK(tab(-1.0, 0, 0) == 0.1);
  CHECK(tab(5.0, 0, 0) == 0.6);
  CHECK_THROWS_AS(Coupling::tabulated({{0.0, 0.5}, {1.0, 0.4}}), ValidationError);
  CHECK_THROWS_AS(Coupling::tabulated({{1.0, 0.1}, {1.0, 0.2}}), ValidationError);

  auto c = example();
  c.coupling = tab;
  CHECK_THROWS_AS(r_crit_exact(c), ValidationError);
  CHECK_THROWS_AS(closed_form(c, 2), ValidationError);
  auto t = simulate(c);
  for (std::size_t l = 1; l < t.deltas.size(); ++l) CHECK(t.deltas[l] > t.deltas[l - 1]);
}

TEST_CASE("divergence is reported with the layer reached") {
  RecurrenceConfig c;
  c.epsilon0 = 1.0;
  c.alpha = 1e3;
  c.delta = 1.0;
  c.r = 1e3;
  c.L = 200;
  try {
    simulate(c);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.layer() < 200);
  }
}

TEST_CASE("dual channel reduces to the single channel") {
  auto c = example();
  DualChannelConfig d;
  d.eps_m0 = c.epsilon0;
  d.eps_e0 = 0.05;
  d.alpha = c.alpha;
  d.delta_m = c.delta;
  d.delta_e = 0.01;
  d.r = c.r;
  d.L = c.L;
  d.schedule = DualChannelConfig::uniform_schedule(c.L, c.r, 0.0, 0.0);
  auto dual = simulate_dual(d);
  auto single = simulate(c);
  for (std::size_t l = 0; l <= c.L; ++l) CHECK(dual.deltas[l] == doctest::Approx(single.deltas[l]).epsilon(1e-14));

  d.schedule = DualChannelConfig::uniform_schedule(c.L, c.r, 1.0, 0.5);
  for (double v : simulate_dual(d).deltas) CHECK(v == 0.0);
}

TEST_CASE("dual channel validation") {
  DualChannelConfig d;
  d.L = 2;
  d.r = 4;
  d.delta_e = 0.2;
  d.delta_m = 0.1;
  d.schedule = DualChannelConfig::uniform_schedule(2, 4, 0.0, 0.5);
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d.delta_e = 0.05;
  CHECK_NOTHROW(d.validate());
  d.schedule[0].r_m += 0.5;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d.schedule.pop_back();
  CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("shifting budget to the gentler evict channel lowers distortion") {
  DualChannelConfig d;
  d.alpha = 0.5;
  d.delta_m = 0.1;
  d.delta_e = 0.03;
  d.r = 2;
  d.L = 12;
  d.schedule = DualChannelConfig::uniform_schedule(12, 2, 0.0, 0.0);
  double merge_only = simulate_dual(d).final_value();
  d.schedule = DualChannelConfig::uniform_schedule(12, 2, 0.0, 0.5);
  CHECK(simulate_dual(d).final_value() < merge_only);
}

TEST_CASE("inverse depth fit") {
  std::vector<std::pair<std::size_t, double>> exact{{12, 186.0 / 12}, {24, 186.0 / 24}, {40, 186.0 / 40}};
  auto f = fit_inverse_depth(exact);
  CHECK(f.slope == doctest::Approx(186.0).epsilon(1e-12));
  CHECK(std::abs(f.intercept) < 1e-12);
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK_FALSE(f.underdetermined);

  std::vector<std::pair<std::size_t, double>> two{{12, 3.0}, {24, 1.6}};
  auto g = fit_inverse_depth(two);
  CHECK(g.underdetermined);
  CHECK(g.r2 == doctest::Approx(1.0));

  std::vector<std::pair<std::size_t, double>> one{{12, 3.0}, {12, 3.1}};
  CHECK_THROWS_AS(fit_inverse_depth(one), ValidationError);
}

TEST_CASE("small-coupling critical rates follow 1/L") {
  RecurrenceConfig c;
  c.epsilon0 = 0.1;
  c.alpha = 0.05;
  c.delta = 0.01;
  c.T = 1.0;
  std::vector<std::pair<std::size_t, double>> pts;
  for (std::size_t L : {12u, 24u, 40u}) {
    c.L = L;
    pts.emplace_back(L, r_crit_exact(c));
  }
  auto f = fit_inverse_depth(pts);
  CHECK(f.r2 > 0.99);
}
