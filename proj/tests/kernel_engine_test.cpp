#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "spnmkl/error.hpp"
#include "spnmkl/kernel_engine.hpp"

using namespace spnmkl;
using spnmkl::testing::random_matrix;

TEST_CASE("basic grams") {
  Matrix eye(2, 2);
  eye << 1, 0, 0, 1;
  for (bool normalize : {false, true}) {
    KernelSpec lin{"lin", KernelFamily::linear};
    lin.normalize = normalize;
    CHECK(compute_gram(eye, lin) == Matrix::Identity(2, 2));
  }

  Matrix same(3, 2);
  same << 0.3, -1, 0.3, -1, 0.3, -1;
  KernelSpec rbf{"rbf", KernelFamily::rbf, 2, 1.0, 0.7};
  CHECK(compute_gram(same, rbf) == Matrix::Ones(3, 3));

  Matrix pts(2, 1);
  pts << 0, 2;
  rbf.gamma = 0.5;
  auto g = compute_gram(pts, rbf);
  CHECK(g(0, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(g(1, 0) == g(0, 1));

  KernelSpec poly{"poly", KernelFamily::polynomial, 3, 0.5};
  poly.normalize = false;
  Matrix ab(2, 2);
  ab << 1, 2, -1, 0.5;
  CHECK(compute_gram(ab, poly)(0, 1) == doctest::Approx(std::pow(-1 + 1 + 0.5, 3)));
}

TEST_CASE("gram errors") {
  KernelSpec lin{"lin", KernelFamily::linear};
  Matrix zero_row(2, 2);
  zero_row << 0, 0, 1, 1;
  CHECK_THROWS_WITH_AS(compute_gram(zero_row, lin), doctest::Contains("zero self-similarity"), Error);
  Matrix bad(1, 1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(compute_gram(bad, lin), Error);
  CHECK_THROWS_AS(compute_gram(Matrix(0, 2), lin), Error);
  KernelSpec neg{"neg", KernelFamily::rbf, 2, 1.0, -1.0};
  CHECK_THROWS_AS(compute_gram(zero_row, neg), Error);
  KernelSpec deg0{"deg0", KernelFamily::polynomial, 0, 1.0};
  CHECK_THROWS_AS(deg0.validate(), Error);
}

TEST_CASE("path kernels are Hadamard products of leaf grams") {
  std::mt19937_64 rng(3);
  Matrix x = random_matrix(12, 3, rng);
  auto specs = spnmkl::testing::seven_kernels();
  auto table = enumerate_paths(parse_spn(spnmkl::testing::kTwoBranchSpn));
  auto ws = build_workspace(x, specs, table);
  REQUIRE(ws.path_grams.size() == 8);

  CHECK(ws.path_grams[6] == ws.basis_grams.at("K4").cwiseProduct(ws.basis_grams.at("K6")));
  CHECK(ws.path_grams[0] == ws.basis_grams.at("K1"));

  KernelWorkspace ones;
  ones.basis_grams["one"] = Matrix::Ones(12, 12);
  ones.basis_grams["K"] = ws.basis_grams.at("K3");
  Path p;
  p.leaf_kernels = {"one", "K"};
  CHECK(path_kernel(p, ones) == ws.basis_grams.at("K3"));

  p.leaf_kernels = {"K", "missing"};
  CHECK_THROWS_AS(path_kernel(p, ones), Error);
}

TEST_CASE("cross kernels") {
  std::mt19937_64 rng(5);
  Matrix x = random_matrix(9, 2, rng);
  auto specs = spnmkl::testing::seven_kernels();
  auto table = enumerate_paths(parse_spn(spnmkl::testing::kTwoBranchSpn));
  auto ws = build_workspace(x, specs, table);

  for (const auto& path : table.paths) CHECK(cross_kernel(x, x, path, specs) == ws.path_grams[path.id]);

  Matrix first = x.topRows(1);
  CHECK(cross_kernel(x, first, table.paths[0], specs).row(0) == ws.basis_grams.at("K1").row(0));

  // Direct per-pair evaluation of the K3 o K5 path on fresh queries.
  Matrix q = random_matrix(4, 2, rng);
  Matrix cross = cross_kernel(x, q, table.paths[2], specs);
  for (Eigen::Index a = 0; a < q.rows(); ++a) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double expected = 1.0;
      for (const char* name : {"K3", "K5"}) {
        const auto& s = specs.at(name);
        Vector qa = q.row(a).transpose(), xi = x.row(i).transpose();
        expected *= kernel_value(s, qa, xi) / std::sqrt(kernel_value(s, qa, qa) * kernel_value(s, xi, xi));
      }
      CHECK(cross(a, i) == doctest::Approx(expected).epsilon(1e-13));
    }
  }

  Matrix wrong = random_matrix(2, 3, rng);
  CHECK_THROWS_WITH_AS(cross_kernel(x, wrong, table.paths[0], specs), doctest::Contains("dimension"), Error);
}

TEST_CASE("constant A") {
  KernelWorkspace one;
  one.path_grams = {Matrix::Identity(7, 7)};
  CHECK(compute_A(one) == doctest::Approx(std::sqrt(7.0)));

  std::mt19937_64 rng(11);
  Matrix x = random_matrix(10, 2, rng);
  KernelWorkspace two;
  two.path_grams = {compute_gram(x, {"a", KernelFamily::rbf, 2, 1.0, 0.3}), compute_gram(x, {"b", KernelFamily::rbf, 2, 1.0, 3.0})};
  CHECK(compute_A(two) == doctest::Approx(std::sqrt(20.0)).epsilon(1e-15));

  // Brute-force double loop over samples and the eight two-branch paths.
  auto specs = spnmkl::testing::seven_kernels();
  for (auto& [name, s] : specs) s.normalize = false;
  auto table = enumerate_paths(parse_spn(spnmkl::testing::kTwoBranchSpn));
  Matrix y = random_matrix(15, 3, rng);
  auto ws = build_workspace(y, specs, table);
  double total = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Vector xi = y.row(i).transpose();
    for (const auto& path : table.paths) {
      double k = 1;
      for (const auto& leaf : path.leaf_kernels) k *= kernel_value(specs.at(leaf), xi, xi);
      total += k;
    }
  }
  CHECK(compute_A(ws) == doctest::Approx(std::sqrt(total)).epsilon(1e-12));

  KernelWorkspace bad;
  bad.path_grams = {-Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(compute_A(bad), Error);
}

TEST_CASE("property: symmetry, unit diagonal, Schur product PSD, leaf order") {
  std::mt19937_64 rng(19);
  auto specs = spnmkl::testing::seven_kernels();
  auto table = enumerate_paths(parse_spn(spnmkl::testing::kTwoBranchSpn));
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = random_matrix(20, 3, rng);
    auto ws = build_workspace(x, specs, table);
    for (const auto& [name, gram] : ws.basis_grams) {
      CHECK((gram - gram.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((gram.diagonal() - Vector::Ones(20)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(is_psd(gram));
    }
    for (const auto& path : table.paths) {
      const Matrix& k = ws.path_grams[path.id];
      CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
      double norm = eig.eigenvalues().cwiseAbs().maxCoeff();
      CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * norm);

      Path reversed = path;
      std::reverse(reversed.leaf_kernels.begin(), reversed.leaf_kernels.end());
      Matrix r = path_kernel(reversed, ws);
      CHECK((r - k).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, k.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("Lanczos spectrum estimate agrees with a full eigendecomposition") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Index n = 5 + trial * 3;
    Matrix b = random_matrix(n, n, rng);
    Matrix m = b * b.transpose();
    if (trial % 2 == 1) m.diagonal().array() -= 0.5 * m.diagonal().mean();  // indefinite
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    auto est = estimate_spectrum(m);
    double norm = eig.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(est.spectral_norm == doctest::Approx(norm).epsilon(1e-8));
    CHECK(est.min_eigenvalue == doctest::Approx(eig.eigenvalues().minCoeff()).epsilon(1e-6).scale(norm));
    CHECK(is_psd(m) == (eig.eigenvalues().minCoeff() >= -1e-8 * norm));
  }
}
