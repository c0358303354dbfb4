#pragma once

#include <random>
#include <string>

#include "spnmkl/kernel_engine.hpp"
#include "spnmkl/spn_graph.hpp"

namespace spnmkl::testing {

// b8 (b1 K1 + b2 K2) + b9 (b3 K3 + b4 K4) o (b5 K5 + b6 K6 + b7 K7)
inline const char* kTwoBranchSpn = R"({
  "root": "S0",
  "nodes": [
    {"id": "S0", "kind": "sum", "children": ["b8", "b9"]},
    {"id": "b8", "kind": "product", "children": ["S1"]},
    {"id": "S1", "kind": "sum", "children": ["b1", "b2"]},
    {"id": "b1", "kind": "product", "children": ["L1"]},
    {"id": "b2", "kind": "product", "children": ["L2"]},
    {"id": "b9", "kind": "product", "children": ["H"]},
    {"id": "H", "kind": "combiner", "children": ["S2", "S3"]},
    {"id": "S2", "kind": "sum", "children": ["b3", "b4"]},
    {"id": "S3", "kind": "sum", "children": ["b5", "b6", "b7"]},
    {"id": "b3", "kind": "product", "children": ["L3"]},
    {"id": "b4", "kind": "product", "children": ["L4"]},
    {"id": "b5", "kind": "product", "children": ["L5"]},
    {"id": "b6", "kind": "product", "children": ["L6"]},
    {"id": "b7", "kind": "product", "children": ["L7"]},
    {"id": "L1", "kind": "leaf", "kernel": "K1"},
    {"id": "L2", "kind": "leaf", "kernel": "K2"},
    {"id": "L3", "kind": "leaf", "kernel": "K3"},
    {"id": "L4", "kind": "leaf", "kernel": "K4"},
    {"id": "L5", "kind": "leaf", "kernel": "K5"},
    {"id": "L6", "kind": "leaf", "kernel": "K6"},
    {"id": "L7", "kind": "leaf", "kernel": "K7"}
  ]
})";

/// Root sum over one weighted product per kernel: the classical linear MKL layout.
inline std::string single_layer_spn(int kernels) {
  std::string nodes, children;
  for (int k = 1; k <= kernels; ++k) {
    std::string b = "b" + std::to_string(k), l = "L" + std::to_string(k);
    children += (k > 1 ? ", \"" : "\"") + b + "\"";
    nodes += ",\n{\"id\": \"" + b + "\", \"kind\": \"product\", \"children\": [\"" + l + "\"]}";
    nodes += ",\n{\"id\": \"" + l + "\", \"kind\": \"leaf\", \"kernel\": \"K" + std::to_string(k) + "\"}";
  }
  return "{\"root\": \"S0\", \"nodes\": [{\"id\": \"S0\", \"kind\": \"sum\", \"children\": [" + children + "]}" + nodes +
         "]}";
}

/// Seven basis kernels matching the two-branch leaves.
inline KernelSpecs seven_kernels() {
  KernelSpecs specs;
  auto add = [&](KernelSpec s) { specs.emplace(s.name, s); };
  add({"K1", KernelFamily::linear});
  add({"K2", KernelFamily::polynomial, 2, 1.0});
  add({"K3", KernelFamily::rbf, 2, 1.0, 0.1});
  add({"K4", KernelFamily::rbf, 2, 1.0, 0.5});
  add({"K5", KernelFamily::rbf, 2, 1.0, 1.0});
  add({"K6", KernelFamily::polynomial, 3, 1.0});
  add({"K7", KernelFamily::rbf, 2, 1.0, 2.0});
  return specs;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

}  // namespace spnmkl::testing
