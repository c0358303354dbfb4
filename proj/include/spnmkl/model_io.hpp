#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spnmkl/kernel_engine.hpp"
#include "spnmkl/spn_graph.hpp"
#include "spnmkl/weighting.hpp"

namespace spnmkl {

inline constexpr int kModelFormatVersion = 1;

/// One binary decision function. Binary problems have a single task whose
/// positive class is the larger label; one-vs-rest problems have one per class.
struct TaskModel {
  int positive_class = 0;
  Vector alpha;  // over support-vector rows
  double bias = 0.0;
};

/// Everything prediction needs, frozen after training.
struct TrainedModel {
  explicit TrainedModel(SpnGraph g) : graph(std::move(g)) {}

  int format_version = kModelFormatVersion;
  SpnGraph graph;
  PathTable table;
  KernelSpecs kernels;
  RegularizerParams params;  // exponents resolved for every surviving node
  WeightVector betas;
  std::vector<double> path_weights;  // g_m cache, indexed by path id
  std::vector<int> classes;          // ascending
  std::vector<TaskModel> tasks;
  Eigen::Index dimension = 0;
  Matrix support_vectors;  // rows with some nonzero alpha
  std::vector<int> support_labels;
  std::vector<NodeId> pruned;
};

/// +1/-1 targets of one task over a label list.
Vector task_targets(const TaskModel& task, const std::vector<int>& labels);

struct Prediction {
  Matrix decision;  // rows: queries, columns: tasks
  std::vector<int> labels;
};

/// Binary: sign of the decision value with ties to the positive class.
/// Multiclass: arg-max over tasks with ties to the smallest class id.
Prediction predict(const TrainedModel& model, const Matrix& query);

struct RademacherReport {
  double A = 0.0;
  double regularizer = 0.0;  // R(B, W; lambda = 1, p = 1)
  double hinge = 0.0;        // sum of hinge losses over tasks and samples
  double bound = 0.0;        // (2A / N) (regularizer + C hinge)
};

/// Plug-in evaluation of the complexity bound at the trained point. The bound
/// is stated with a minimum over all weights, so the plug-in value is an upper
/// bound of that bound.
RademacherReport rademacher_bound(const TrainedModel& model, const Matrix& data, const std::vector<int>& labels);

std::string save_model(const TrainedModel& model);
TrainedModel load_model(std::string_view text);

void write_model_file(const TrainedModel& model, const std::string& path);
TrainedModel read_model_file(const std::string& path);

}  // namespace spnmkl
