#include "spnmkl/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json_io.hpp"
#include "spnmkl/model_io.hpp"

namespace spnmkl {

using nlohmann::json;
namespace fs = std::filesystem;

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n < 2) throw Error(ErrorKind::parse, "synthetic datasets need n >= 2");
  if (spec.kind == "two-gaussians") return two_gaussians(spec.n, seed);
  if (spec.kind == "xor-rings") return xor_rings(spec.n, seed);
  if (spec.kind == "k-blobs") return k_blobs(spec.n, spec.k, seed);
  throw Error(ErrorKind::parse, "unknown synthetic kind '" + spec.kind + "' (two-gaussians, xor-rings, k-blobs)");
}

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::parse, "config: " + what); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) config_error("'" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) config_error("unknown key '" + key + "' in " + where);
  }
}

std::string resolve(const std::string& path, const std::string& base) {
  fs::path p(path);
  return p.is_absolute() || base.empty() ? p.string() : (fs::path(base) / p).string();
}

std::string read_file(const std::string& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kind, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string number_text(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string accuracy_text(std::size_t correct, std::size_t total) {
  return number_text(static_cast<double>(correct) / static_cast<double>(total)) + " (" + std::to_string(correct) + "/" +
         std::to_string(total) + ")";
}

void warn(const CommandOptions& opts, std::ostream& err, const std::string& what) {
  if (opts.log_level >= LogLevel::warn) err << json{{"warning", what}}.dump() << '\n';
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    check_keys(doc, {"data", "structure", "kernels", "regularizer", "train", "output"}, "config");
    if (!doc.contains("structure")) config_error("missing 'structure'");
    if (!doc.contains("kernels")) config_error("missing 'kernels'");

    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      if (d.is_string()) {
        cfg.data_path = resolve(d.get<std::string>(), base_dir);
      } else {
        check_keys(d, {"path", "format", "synthetic"}, "data");
        if (d.contains("path")) cfg.data_path = resolve(d.at("path").get<std::string>(), base_dir);
        if (d.contains("format")) cfg.data_format = data_format_from_string(d.at("format").get<std::string>());
        if (d.contains("synthetic")) {
          const auto& s = d.at("synthetic");
          check_keys(s, {"kind", "n", "k"}, "data.synthetic");
          SynthSpec spec;
          spec.kind = s.at("kind").get<std::string>();
          spec.n = get<std::size_t>(s, "n", spec.n);
          spec.k = get<int>(s, "k", spec.k);
          cfg.synthetic = spec;
        }
        if (cfg.data_path && cfg.synthetic) config_error("'data' has both a path and a synthetic source");
      }
    }

    const auto& st = doc.at("structure");
    if (st.is_string()) cfg.structure_path = resolve(st.get<std::string>(), base_dir);
    else cfg.structure_text = st.dump();

    for (const auto& [name, j] : doc.at("kernels").items()) cfg.kernels.emplace(name, detail::kernel_from_json(name, j));
    if (cfg.kernels.empty()) config_error("no kernels defined");

    auto& params = cfg.train.params;
    if (doc.contains("regularizer")) {
      const auto& r = doc.at("regularizer");
      check_keys(r, {"C", "lambda", "p", "node_p"}, "regularizer");
      params.C = get<double>(r, "C", params.C);
      params.lambda = get<double>(r, "lambda", params.lambda);
      params.default_p = get<double>(r, "p", params.default_p);
      if (r.contains("node_p")) params.p = r.at("node_p").get<std::map<NodeId, double>>();
    }
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      check_keys(t,
                 {"outer_max_iters", "outer_rel_tol", "step", "convex_inner_steps", "cccp_max_inner", "inner_tol",
                  "prune_threshold", "seed", "max_paths", "solver_tol", "solver_max_updates"},
                 "train");
      auto& tr = cfg.train;
      tr.outer_max_iters = get<int>(t, "outer_max_iters", tr.outer_max_iters);
      tr.outer_rel_tol = get<double>(t, "outer_rel_tol", tr.outer_rel_tol);
      tr.convex_inner_steps = get<int>(t, "convex_inner_steps", tr.convex_inner_steps);
      tr.cccp_max_inner = get<int>(t, "cccp_max_inner", tr.cccp_max_inner);
      tr.inner_tol = get<double>(t, "inner_tol", tr.inner_tol);
      tr.prune_threshold = get<double>(t, "prune_threshold", tr.prune_threshold);
      tr.seed = get<std::uint64_t>(t, "seed", tr.seed);
      tr.max_paths = get<std::size_t>(t, "max_paths", tr.max_paths);
      tr.solver.tol = get<double>(t, "solver_tol", tr.solver.tol);
      tr.solver.max_updates = get<std::int64_t>(t, "solver_max_updates", tr.solver.max_updates);
      if (t.contains("step")) {
        const auto& s = t.at("step");
        check_keys(s, {"initial", "shrink", "armijo", "max_shrinks"}, "train.step");
        tr.step.initial = get<double>(s, "initial", tr.step.initial);
        tr.step.shrink = get<double>(s, "shrink", tr.step.shrink);
        tr.step.armijo = get<double>(s, "armijo", tr.step.armijo);
        tr.step.max_shrinks = get<int>(s, "max_shrinks", tr.step.max_shrinks);
      }
    }
    if (doc.contains("output")) {
      const auto& o = doc.at("output");
      check_keys(o, {"model", "log"}, "output");
      if (o.contains("model")) cfg.model_path = o.at("model").get<std::string>();
      if (o.contains("log")) cfg.log_path = o.at("log").get<std::string>();
    }
    cfg.model_path = resolve(cfg.model_path, base_dir);
    if (!cfg.log_path.empty()) cfg.log_path = resolve(cfg.log_path, base_dir);
  } catch (const json::exception& e) {
    config_error(e.what());
  }
  cfg.train.validate();
  return cfg;
}

ExperimentConfig read_experiment_config(const std::string& path) {
  return parse_experiment_config(read_file(path, ErrorKind::parse), fs::path(path).parent_path().string());
}

SpnGraph load_structure(const ExperimentConfig& config) {
  std::set<std::string> known;
  for (const auto& [name, spec] : config.kernels) known.insert(name);
  if (config.structure_text) return parse_spn(*config.structure_text, &known);
  return parse_spn(read_file(config.structure_path, ErrorKind::parse), &known);
}

std::string format_log_record(const IterationRecord& rec) {
  json j = {{"iteration", rec.iteration},
            {"objective", rec.objective},
            {"r1", rec.r1},
            {"r2", rec.r2},
            {"hinge", rec.hinge},
            {"objective_after_beta", rec.objective_after_beta},
            {"active_nodes", rec.active_nodes},
            {"active_paths", rec.active_paths},
            {"pruned", rec.pruned},
            {"dual_updates", rec.dual_updates},
            {"line_search_shrinks", rec.line_search_shrinks},
            {"cccp_inner_iterations", rec.cccp_inner_iterations},
            {"stalled", rec.stalled},
            {"psd_warning", rec.psd_warning}};
  return j.dump();
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse:
    case ErrorKind::limit: return 2;
    case ErrorKind::data:
    case ErrorKind::io: return 3;
    case ErrorKind::degenerate:
    case ErrorKind::empty_model:
    case ErrorKind::numeric: return 4;
  }
  return 1;
}

std::string format_error(const Error& e) {
  return json{{"error", to_string(e.kind())}, {"message", e.what()}, {"exit_code", exit_code(e.kind())}}.dump();
}

LogLevel log_level_from_string(std::string_view text) {
  if (text == "error") return LogLevel::error;
  if (text == "warn") return LogLevel::warn;
  if (text == "info") return LogLevel::info;
  if (text == "debug") return LogLevel::debug;
  throw Error(ErrorKind::parse, "unknown log level '" + std::string(text) + "' (error, warn, info, debug)");
}

int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.config.empty()) throw Error(ErrorKind::parse, "train needs --config");
  ExperimentConfig cfg = read_experiment_config(opts.config);
  if (!opts.data.empty()) {
    cfg.data_path = opts.data;
    cfg.synthetic.reset();
  }
  if (!opts.format.empty()) cfg.data_format = data_format_from_string(opts.format);
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (opts.max_paths) cfg.train.max_paths = *opts.max_paths;
  if (!opts.out.empty()) cfg.model_path = opts.out;
  if (cfg.log_path.empty()) cfg.log_path = cfg.model_path + ".log.jsonl";

  Dataset data;
  if (cfg.synthetic) data = generate_synthetic(*cfg.synthetic, cfg.train.seed);
  else if (cfg.data_path) data = read_dataset(*cfg.data_path, cfg.data_format, true);
  else throw Error(ErrorKind::parse, "no training data: set 'data' in the config or pass --data");

  SpnGraph graph = load_structure(cfg);

  std::ofstream log(cfg.log_path, std::ios::binary);
  if (!log) throw Error(ErrorKind::io, "cannot open log file '" + cfg.log_path + "'");
  cfg.train.on_iteration = [&](const IterationRecord& rec) {
    std::string line = format_log_record(rec);
    log << line << '\n';
    if (opts.log_level >= LogLevel::debug) err << line << '\n';
  };
  FitResult r = fit(data.x, data.labels, graph, cfg.kernels, cfg.train);
  write_model_file(r.model, cfg.model_path);

  if (!r.converged) warn(opts, err, "stopped after " + std::to_string(r.iterations) + " iterations without converging");
  bool psd = std::any_of(r.log.begin(), r.log.end(), [](const IterationRecord& rec) { return rec.psd_warning; });
  if (psd) warn(opts, err, "a composite kernel failed the PSD check; the dual may be unreliable");

  std::size_t correct = static_cast<std::size_t>(std::llround(r.training_accuracy * static_cast<double>(data.labels.size())));
  std::string pruned;
  for (const auto& id : r.model.pruned) pruned += (pruned.empty() ? "" : " ") + id;
  out << "iterations: " << r.iterations << '\n'
      << "converged: " << (r.converged ? "true" : "false") << '\n'
      << "objective: " << number_text(r.state.objective_trace.back().second) << '\n'
      << "training accuracy: " << accuracy_text(correct, data.labels.size()) << '\n'
      << "active paths: " << r.model.table.size() << '\n'
      << "pruned nodes: " << (pruned.empty() ? "none" : pruned) << '\n'
      << "model: " << cfg.model_path << '\n'
      << "log: " << cfg.log_path << '\n';
  return 0;
}

int cmd_predict(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.model.empty() || opts.data.empty()) throw Error(ErrorKind::parse, "predict needs --model and --data");
  TrainedModel model = read_model_file(opts.model);
  DataFormat format = opts.format.empty() ? format_from_path(opts.data) : data_format_from_string(opts.format);

  Dataset data;
  if (format == DataFormat::csv) {
    data = read_dataset(opts.data, format, false);
    if (data.x.cols() == model.dimension + 1) {
      data = read_dataset(opts.data, format, true);
    } else if (data.x.cols() != model.dimension) {
      throw Error(ErrorKind::data, "data file has " + std::to_string(data.x.cols()) +
                                       " columns; the model expects " + std::to_string(model.dimension) +
                                       " features, optionally preceded by a label");
    }
  } else {
    data = read_dataset(opts.data, format, std::nullopt, model.dimension);
  }

  Prediction pred = predict(model, data.x);
  std::ostringstream rows;
  rows << "label";
  if (model.tasks.size() == 1) rows << ",decision";
  else
    for (const auto& t : model.tasks) rows << ",decision_" << t.positive_class;
  rows << '\n';
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    rows << pred.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < pred.decision.cols(); ++c) rows << ',' << number_text(pred.decision(i, c));
    rows << '\n';
  }

  std::ostream* summary = &out;
  if (opts.out.empty()) {
    out << rows.str();
    summary = &err;
  } else {
    std::ofstream file(opts.out, std::ios::binary);
    if (!file || !(file << rows.str())) throw Error(ErrorKind::io, "cannot write predictions to '" + opts.out + "'");
    out << "predictions: " << opts.out << '\n';
  }
  if (data.labeled()) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.labels.size(); ++i) correct += pred.labels[i] == data.labels[i];
    *summary << "accuracy: " << accuracy_text(correct, data.labels.size()) << '\n';
  }
  return 0;
}

int cmd_inspect(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  std::optional<TrainedModel> model;
  std::optional<SpnGraph> graph;
  PathTable table;
  WeightVector betas;
  RegularizerParams params;
  std::vector<double> weights;
  std::vector<NodeId> pruned;

  if (!opts.model.empty()) {
    model = read_model_file(opts.model);
    table = model->table;
    betas = model->betas;
    params = model->params;
    weights = model->path_weights;
    pruned = model->pruned;
  } else if (!opts.config.empty()) {
    ExperimentConfig cfg = read_experiment_config(opts.config);
    if (opts.max_paths) cfg.train.max_paths = *opts.max_paths;
    graph = load_structure(cfg);
    table = enumerate_paths(*graph, cfg.train.max_paths);
    params = resolve_exponents(cfg.train.params, *graph);
    for (const auto& [node, ids] : table.node_to_paths) betas[node] = 1.0;
    for (const auto& path : table.paths) weights.push_back(g_path(path, betas));
    out << "untrained structure (all weights 1)\n";
  } else {
    throw Error(ErrorKind::parse, "inspect needs --model or --config");
  }

  out << "paths: " << table.size() << '\n' << "weighted nodes: " << table.node_to_paths.size() << '\n';
  out << "lambda: " << number_text(params.lambda) << '\n' << "C: " << number_text(params.C) << '\n';
  out << "\npath  g  members  exponents  leaves\n";
  for (const auto& path : table.paths) {
    std::string members, exponents, leaves;
    for (const auto& m : path.members) {
      members += (members.empty() ? "" : ", ") + m.node;
      std::ostringstream e;
      e << m.exponent;
      exponents += (exponents.empty() ? "" : ", ") + e.str();
    }
    for (const auto& l : path.leaf_kernels) leaves += (leaves.empty() ? "" : "*") + l;
    out << path.id << "  " << number_text(weights[path.id]) << "  (" << members << ")  (" << exponents << ")  " << leaves
        << '\n';
  }

  auto coeffs = reg_coeffs(table, params);
  Rational unit_total;
  out << "\nnode  beta  p  c_v  c_v/lambda\n";
  for (const auto& [node, unit] : table.unit_coeff) {
    unit_total += unit;
    out << node << "  " << number_text(betas.at(node)) << "  " << number_text(params.exponent(node)) << "  "
        << number_text(coeffs.at(node)) << "  " << unit << '\n';
  }
  out << "\nsum of c_v/lambda: " << unit_total << " (path count " << table.size() << ")\n";
  std::string pruned_text;
  for (const auto& id : pruned) pruned_text += (pruned_text.empty() ? "" : " ") + id;
  out << "pruned: " << (pruned_text.empty() ? "none" : pruned_text) << '\n';

  if (model && !opts.data.empty()) {
    DataFormat format = opts.format.empty() ? format_from_path(opts.data) : data_format_from_string(opts.format);
    Dataset data = read_dataset(opts.data, format, true, format == DataFormat::libsvm ? model->dimension : 0);
    auto rep = rademacher_bound(*model, data.x, data.labels);
    out << "\ncomplexity (plug-in value at the trained point; an upper bound of the min-form Rademacher bound)\n"
        << "A: " << number_text(rep.A) << '\n'
        << "regularizer (lambda = 1, p = 1): " << number_text(rep.regularizer) << '\n'
        << "hinge sum: " << number_text(rep.hinge) << '\n'
        << "bound: " << number_text(rep.bound) << '\n';
  } else if (model) {
    warn(opts, err, "pass --data with the training file to report the complexity bound");
  }
  return 0;
}

int cmd_gen_synth(const CommandOptions& opts, std::ostream& out, std::ostream&) {
  if (opts.kind.empty()) throw Error(ErrorKind::parse, "gen-synth needs --kind");
  SynthSpec spec{opts.kind, opts.n, opts.k};
  Dataset d = generate_synthetic(spec, opts.seed.value_or(0));
  DataFormat format = !opts.format.empty() ? data_format_from_string(opts.format)
                      : opts.out.empty()   ? DataFormat::csv
                                           : format_from_path(opts.out);
  std::string text = format == DataFormat::csv ? format_csv(d) : format_libsvm(d);
  if (opts.out.empty()) {
    out << text;
    return 0;
  }
  std::ofstream file(opts.out, std::ios::binary);
  if (!file || !(file << text)) throw Error(ErrorKind::io, "cannot write '" + opts.out + "'");
  out << "wrote " << d.x.rows() << " samples to " << opts.out << '\n';
  return 0;
}

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (name == "train") return cmd_train(opts, out, err);
    if (name == "predict") return cmd_predict(opts, out, err);
    if (name == "inspect") return cmd_inspect(opts, out, err);
    if (name == "gen-synth") return cmd_gen_synth(opts, out, err);
    throw Error(ErrorKind::parse, "unknown command '" + name + "'");
  } catch (const Error& e) {
    err << format_error(e) << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}, {"exit_code", 1}}.dump() << '\n';
    return 1;
  }
}

}  // namespace spnmkl
