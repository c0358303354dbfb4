#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "spnmkl/dataset.hpp"
#include "spnmkl/error.hpp"
#include "spnmkl/trainer.hpp"

using namespace spnmkl;
using spnmkl::testing::seven_kernels;
using spnmkl::testing::kTwoBranchSpn;

namespace {

const FitResult& trained() {
  static const FitResult r = [] {
    auto d = two_gaussians(100, 23);
    return fit(d.x, d.labels, parse_spn(kTwoBranchSpn), seven_kernels(), TrainConfig{});
  }();
  return r;
}

double rademacher_estimate(const Vector& f, std::mt19937_64& rng, int draws) {
  std::bernoulli_distribution coin(0.5);
  double total = 0;
  for (int k = 0; k < draws; ++k) {
    double s = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i) s += coin(rng) ? f[i] : -f[i];
    total += std::abs(2.0 * s / static_cast<double>(f.size()));
  }
  return total / draws;
}

}  // namespace

TEST_CASE("training decision values are reproduced by predict") {
  const auto& r = trained();
  auto d = two_gaussians(100, 23);
  auto pred = predict(r.model, d.x);
  Matrix f;
  {
    auto t = r.model.table;
    auto ws = build_workspace(d.x, r.model.kernels, t);
    f = decision_values(t, ws, r.state);
  }
  CHECK((pred.decision - f).cwiseAbs().maxCoeff() <= 1e-10);

  for (const auto& path : r.model.table.paths)
    CHECK(r.model.path_weights[path.id] == doctest::Approx(g_path(path, r.model.betas)).epsilon(1e-12));

  // Every retained row has some positive alpha.
  for (Eigen::Index i = 0; i < r.model.support_vectors.rows(); ++i) CHECK(r.model.tasks[0].alpha[i] > 0.0);
}

TEST_CASE("free support vectors sit on the margin") {
  const auto& r = trained();
  const auto& task = r.model.tasks[0];
  auto pred = predict(r.model, r.model.support_vectors);
  int free = 0;
  for (Eigen::Index i = 0; i < task.alpha.size(); ++i) {
    if (task.alpha[i] <= 1e-8 || task.alpha[i] >= r.model.params.C - 1e-8) continue;
    ++free;
    CHECK(std::abs(pred.decision(i, 0)) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(free > 0);
}

TEST_CASE("zero-alpha model is constant") {
  TrainedModel m = trained().model;
  for (auto& t : m.tasks) t.alpha.setZero();
  m.tasks[0].bias = -0.25;
  auto pred = predict(m, two_gaussians(10, 3).x);
  CHECK((pred.decision.array() == -0.25).all());
  for (int label : pred.labels) CHECK(label == m.classes[0]);
  m.tasks[0].bias = 0.0;
  for (int label : predict(m, two_gaussians(10, 3).x).labels) CHECK(label == m.classes[1]);
}

TEST_CASE("multiclass ties go to the smallest class") {
  auto d = k_blobs(60, 3, 29);
  auto r = fit(d.x, d.labels, parse_spn(spnmkl::testing::single_layer_spn(1)),
               {{"K1", {"K1", KernelFamily::rbf, 2, 1.0, 0.5}}}, TrainConfig{});
  TrainedModel m = r.model;
  for (auto& t : m.tasks) {
    t.alpha.setZero();
    t.bias = 0.5;
  }
  for (int label : predict(m, d.x).labels) CHECK(label == 0);
}

TEST_CASE("persistence round trip is exact") {
  const auto& model = trained().model;
  std::string text = save_model(model);
  TrainedModel loaded = load_model(text);
  CHECK(save_model(loaded) == text);
  CHECK(loaded.graph == model.graph);
  CHECK(loaded.table == model.table);
  CHECK(loaded.betas == model.betas);
  CHECK(loaded.path_weights == model.path_weights);
  CHECK(loaded.support_vectors == model.support_vectors);

  auto query = two_gaussians(50, 31).x;
  auto a = predict(model, query), b = predict(loaded, query);
  CHECK(a.decision == b.decision);
  CHECK(a.labels == b.labels);
}

TEST_CASE("model file errors") {
  const auto& model = trained().model;
  std::string text = save_model(model);

  std::string wrong_version = text;
  wrong_version.replace(wrong_version.find("\"version\": 1"), 12, "\"version\": 9");
  CHECK_THROWS_WITH_AS(load_model(wrong_version), doctest::Contains("version"), Error);
  CHECK_THROWS_AS(load_model("{}"), Error);
  CHECK_THROWS_AS(load_model("not json"), Error);

  std::string tampered = text;
  auto pos = tampered.find("\"g\": ");
  tampered.insert(pos + 5, "1");
  CHECK_THROWS_WITH_AS(load_model(tampered), doctest::Contains("inconsistent"), Error);

  Matrix wrong(2, 5);
  wrong.setOnes();
  try {
    predict(model, wrong);
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
  }
  CHECK_THROWS_AS(read_model_file("/nonexistent/model.json"), Error);
}

TEST_CASE("complexity diagnostic") {
  auto d = two_gaussians(60, 37);

  SUBCASE("trivial model gives 2AC") {
    TrainedModel m = trained().model;
    for (auto& [node, b] : m.betas) b = 0.0;
    for (auto& g : m.path_weights) g = 0.0;
    for (auto& t : m.tasks) {
      t.alpha.setZero();
      t.bias = 0.0;
    }
    m.params.C = 3.0;
    auto rep = rademacher_bound(m, d.x, d.labels);
    CHECK(rep.regularizer == 0.0);
    CHECK(rep.bound == doctest::Approx(2 * rep.A * 3.0).epsilon(1e-14));
    CHECK(rep.A == doctest::Approx(compute_A(build_workspace(d.x, m.kernels, m.table))));

    // Unnormalized linear leaf: scaling the data by t scales every gram by t^2 and A by t.
    auto single = parse_spn(spnmkl::testing::single_layer_spn(1));
    KernelSpec lin{"K1", KernelFamily::linear};
    lin.normalize = false;
    auto r = fit(d.x, d.labels, single, {{"K1", lin}}, TrainConfig{});
    TrainedModel z = r.model;
    for (auto& [node, b] : z.betas) b = 0.0;
    for (auto& g : z.path_weights) g = 0.0;
    for (auto& t : z.tasks) {
      t.alpha.setZero();
      t.bias = 0.0;
    }
    double base = rademacher_bound(z, d.x, d.labels).bound;
    for (double t : {0.5, 2.0, 7.0})
      CHECK(rademacher_bound(z, t * d.x, d.labels).bound == doctest::Approx(t * base).epsilon(1e-12));
  }

  SUBCASE("Monte-Carlo estimate stays below the bound") {
    std::mt19937_64 rng(41);
    for (int run = 0; run < 3; ++run) {
      auto data = two_gaussians(60, 100 + run);
      auto r = fit(data.x, data.labels, parse_spn(kTwoBranchSpn), seven_kernels(), TrainConfig{});
      auto rep = rademacher_bound(r.model, data.x, data.labels);
      Vector f = predict(r.model, data.x).decision.col(0);
      CHECK(rep.bound > 0.0);
      CHECK(rademacher_estimate(f, rng, 1000) <= rep.bound);
    }
  }
}
