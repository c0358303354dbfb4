#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spnmkl/kernel_engine.hpp"

namespace spnmkl {

enum class DataFormat { csv, libsvm };

struct Dataset {
  Matrix x;
  std::vector<int> labels;  // empty when the file carries no labels
  bool labeled() const { return !labels.empty(); }
};

/// ".svm", ".libsvm" and ".txt" select libsvm, anything else CSV.
DataFormat format_from_path(const std::string& path);
DataFormat data_format_from_string(std::string_view text);

/// CSV: one sample per line, label first. A line with a non-numeric first
/// field is a header and is skipped. `labeled = false` reads features only.
///
/// libsvm: "label index:value ..." with 1-based indices. Unlabeled files
/// start each line with the first pair. `dimension` pads sparse rows; when 0
/// the largest index seen is used.
Dataset parse_dataset(std::string_view text, DataFormat format, std::optional<bool> labeled = std::nullopt,
                      Eigen::Index dimension = 0);
Dataset read_dataset(const std::string& path, std::optional<DataFormat> format = std::nullopt,
                     std::optional<bool> labeled = std::nullopt, Eigen::Index dimension = 0);

std::string format_csv(const Dataset& data);
/// Zero features are omitted.
std::string format_libsvm(const Dataset& data);

/// Seeded synthetic datasets in two dimensions.
Dataset two_gaussians(std::size_t n, std::uint64_t seed);
/// Points on noisy rings around the four quadrant centers; opposite quadrants share a label.
Dataset xor_rings(std::size_t n, std::uint64_t seed);
/// k isotropic blobs on a circle, labels 0..k-1 in round-robin order.
Dataset k_blobs(std::size_t n, int k, std::uint64_t seed);

}  // namespace spnmkl
