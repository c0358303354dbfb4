#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "spnmkl/error.hpp"
#include "spnmkl/weighting.hpp"

using namespace spnmkl;

namespace {

PathTable two_branch() { return enumerate_paths(parse_spn(spnmkl::testing::kTwoBranchSpn)); }

WeightVector ones(const PathTable& t) {
  WeightVector b;
  for (const auto& [node, ids] : t.node_to_paths) b[node] = 1.0;
  return b;
}

double central_difference(const std::function<double(double)>& f, double x) {
  double h = 1e-6 * (1.0 + std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("path weighting on the deep path") {
  auto t = two_branch();
  const auto& deep = t.paths[6];
  auto b = ones(t);
  CHECK(g_path(deep, b) == 1.0);

  b["b9"] = 4;
  b["b4"] = 16;
  b["b6"] = 16;
  CHECK(g_path(deep, b) == doctest::Approx(8.0).epsilon(1e-15));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-3, 10.0);
  for (int i = 0; i < 100; ++i) {
    b["b9"] = u(rng);
    b["b4"] = u(rng);
    b["b6"] = u(rng);
    double expected = std::sqrt(b["b9"]) * std::pow(b["b4"], 0.25) * std::pow(b["b6"], 0.25);
    CHECK(g_path(deep, b) == doctest::Approx(expected).epsilon(1e-14));
  }

  b["b4"] = 0.0;
  CHECK(g_path(deep, b) == 0.0);
  b.erase("b4");
  CHECK_THROWS_AS(g_path(deep, b), Error);
}

TEST_CASE("regularizer coefficients") {
  auto t = two_branch();
  RegularizerParams params;
  params.lambda = 2.5;
  auto c = reg_coeffs(t, params);
  CHECK(c.at("b9") == doctest::Approx(3 * 2.5));
  CHECK(c.at("b4") == doctest::Approx(0.75 * 2.5));
  double total = 0;
  for (const auto& [node, v] : c) {
    CHECK(v > 0);
    total += v;
  }
  CHECK(total == doctest::Approx(8 * 2.5));
}

TEST_CASE("regularizer values") {
  auto t = two_branch();
  RegularizerParams params;
  auto b = ones(t);

  auto r = eval_R(t, b, WNorms(8, 2.0), params);
  CHECK(r.r1 == doctest::Approx(8.0));
  CHECK(r.r2 == doctest::Approx(8.0));

  for (auto& [node, v] : b) v = 0.0;
  r = eval_R(t, b, WNorms(8, 0.0), params);
  CHECK(r.r1 == 0.0);
  CHECK(r.r2 == 0.0);

  WNorms one_nonzero(8, 0.0);
  one_nonzero[3] = 1.0;
  CHECK_THROWS_WITH_AS(eval_R(t, b, one_nonzero, params), doctest::Contains("continuity"), Error);
  CHECK_FALSE(try_eval_R(t, b, one_nonzero, params).has_value());

  auto single = enumerate_paths(parse_spn(spnmkl::testing::single_layer_spn(3)));
  WeightVector sb{{"b1", 0.5}, {"b2", 2.0}, {"b3", 4.0}};
  WNorms w{1.0, 3.0, 5.0};
  params.lambda = 0.0;
  CHECK(eval_R(single, sb, w, params).r1 == doctest::Approx(1.0 / 1.0 + 3.0 / 4.0 + 5.0 / 8.0));
}

TEST_CASE("R1 gradient") {
  auto t = two_branch();
  auto b = ones(t);
  CHECK(grad_R1("b4", t, b, WNorms(8, 0.0)) == 0.0);

  auto single = enumerate_paths(parse_spn(spnmkl::testing::single_layer_spn(1)));
  WeightVector sb{{"b1", 1.7}};
  CHECK(grad_R1("b1", single, sb, WNorms{3.0}) == doctest::Approx(-3.0 / (2 * 1.7 * 1.7)));

  sb["b1"] = 1e-12;
  CHECK_THROWS_WITH_AS(grad_R1("b1", single, sb, WNorms{3.0}), doctest::Contains("floor"), Error);
}

TEST_CASE("R2 gradient") {
  auto t = two_branch();
  RegularizerParams params;
  params.lambda = 1.3;
  auto c = reg_coeffs(t, params);
  auto b = ones(t);
  b["b8"] = 7.0;
  CHECK(grad_R2("b8", c, b, params) == c.at("b8"));

  std::map<NodeId, double> cv{{"v", 1.3}};
  WeightVector bv{{"v", 3.0}};
  params.p["v"] = 2.0;
  CHECK(grad_R2("v", cv, bv, params) == doctest::Approx(6 * 1.3));

  params.p["v"] = 0.5;
  bv["v"] = 0.0;
  CHECK_THROWS_WITH_AS(grad_R2("v", cv, bv, params), doctest::Contains("singular"), Error);
}

TEST_CASE("property: gradients match finite differences") {
  auto t = two_branch();
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> beta(0.3, 3.0), wsq(0.1, 5.0), pick(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    WeightVector b;
    RegularizerParams params;
    params.lambda = beta(rng);
    for (const auto& [node, ids] : t.node_to_paths) {
      b[node] = beta(rng);
      params.p[node] = trial % 2 ? pick(rng) : 1.0 + 2.0 * pick(rng);
    }
    WNorms w(8);
    for (auto& v : w) v = wsq(rng);
    auto c = reg_coeffs(t, params);
    for (const auto& [node, value] : b) {
      auto r_at = [&](double x) {
        WeightVector moved = b;
        moved[node] = x;
        return eval_R(t, moved, w, params);
      };
      double fd1 = central_difference([&](double x) { return r_at(x).r1; }, value);
      double fd2 = central_difference([&](double x) { return r_at(x).r2; }, value);
      CHECK(grad_R1(node, t, b, w) == doctest::Approx(fd1).epsilon(1e-5));
      CHECK(grad_R2(node, c, b, params) == doctest::Approx(fd2).epsilon(1e-5));
    }
  }
}

TEST_CASE("property: joint convexity, AM-GM bound and scale law") {
  auto t = two_branch();
  const auto& deep = t.paths[6];
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(1e-3, 10.0);
  std::normal_distribution<double> normal;

  auto draw = [&] {
    WeightVector b{{"b9", pos(rng)}, {"b4", pos(rng)}, {"b6", pos(rng)}};
    Vector w(4);
    for (int k = 0; k < 4; ++k) w[k] = normal(rng);
    return std::pair{b, w};
  };
  auto f = [&](const WeightVector& b, const Vector& w) { return w.squaredNorm() / g_path(deep, b); };

  int convexity_failures = 0, amgm_failures = 0;
  for (int i = 0; i < 10000; ++i) {
    auto [bx, wx] = draw();
    auto [by, wy] = draw();
    WeightVector bm;
    for (const auto& [node, v] : bx) bm[node] = 0.5 * (v + by[node]);
    Vector wm = 0.5 * (wx + wy);
    double fx = f(bx, wx), fy = f(by, wy), fm = f(bm, wm);
    if (fm > 0.5 * (fx + fy) + 1e-9 * (1 + std::abs(fm))) ++convexity_failures;

    double bound = 0;
    for (const auto& m : deep.members) bound += m.exponent.to_double() * wx.squaredNorm() / bx[m.node];
    if (fx > bound * (1 + 1e-12)) ++amgm_failures;

    double scale = pos(rng);
    WeightVector scaled = bx;
    for (auto& [node, v] : scaled) v *= scale;
    CHECK(g_path(deep, scaled) == doctest::Approx(scale * g_path(deep, bx)).epsilon(1e-12));
  }
  CHECK(convexity_failures == 0);
  CHECK(amgm_failures == 0);
}
