#include "transduct/eval.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "transduct/error.hpp"

namespace transduct {

double top1_accuracy(const LabelVector& pred, const LabelVector& truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(pred.size()) + " predictions for " +
                                                std::to_string(truth.size()) + " labels");
  }
  if (pred.size() == 0) throw Error(ErrorCode::kLengthMismatch, "no samples to score");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace {

void check_truth(const SimplexMatrix& y_hat, const std::optional<LabelVector>& truth) {
  if (!truth) return;
  if (truth->size() != y_hat.n()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(truth->size()) + " labels for " +
                                                std::to_string(y_hat.n()) + " samples");
  }
  truth->check_class_count(y_hat.k());
}

}  // namespace

PredictionReport build_report(const SimplexMatrix& y_hat, const SimplexMatrix& z,
                              const std::optional<LabelVector>& truth, const SolverTrace& trace,
                              const SolverConfig& cfg) {
  if (y_hat.n() != z.n() || y_hat.k() != z.k()) {
    throw Error(ErrorCode::kLengthMismatch, "prior and assignments have different shapes");
  }
  check_truth(y_hat, truth);
  Prediction transductive = predict(z);

  PredictionReport report;
  report.predictions = transductive.labels;
  report.confidence = std::move(transductive.confidence);
  report.probabilities = z.data();
  report.config = cfg;
  report.trace = trace;
  if (truth) {
    report.inductive_top1 = top1_accuracy(predict(y_hat).labels, *truth);
    report.transductive_top1 = top1_accuracy(report.predictions, *truth);
    report.delta = *report.transductive_top1 - *report.inductive_top1;
  }
  return report;
}

PredictionReport build_inductive_report(const SimplexMatrix& y_hat,
                                        const std::optional<LabelVector>& truth,
                                        const SolverConfig& cfg) {
  check_truth(y_hat, truth);
  Prediction inductive = predict(y_hat);
  PredictionReport report;
  report.predictions = inductive.labels;
  report.confidence = std::move(inductive.confidence);
  report.probabilities = y_hat.data();
  report.config = cfg;
  if (truth) report.inductive_top1 = top1_accuracy(report.predictions, *truth);
  return report;
}

nlohmann::json report_to_json(const PredictionReport& report) {
  using nlohmann::json;
  const SolverConfig& cfg = report.config;
  const SolverTrace& trace = report.trace;

  json config = {
      {"tau", cfg.tau.value()},
      {"affinity", std::string(to_string(cfg.affinity))},
      {"affinity_resolved", std::string(to_string(trace.affinity_mode))},
      {"k_neighbors", cfg.k_neighbors},
      {"k_neighbors_used", trace.k_neighbors_used},
      {"max_outer_iters", cfg.max_outer_iters},
      {"inner_z_iters", cfg.inner_z_iters},
      {"z_tolerance", cfg.z_tolerance},
      {"top_m_init", cfg.top_m_init},
      {"gmm_weight", std::string(to_string(cfg.gmm_weight))},
      {"laplacian_coefficient", cfg.laplacian_coefficient},
      {"variance_floor", kVarianceFloor},
      {"seed", cfg.seed},
  };

  json iterations = json::array();
  for (const IterationRecord& r : trace.iterations) {
    json item = {{"iteration", r.iteration}, {"max_abs_change", r.max_abs_change}, {"wall_ms", r.wall_ms}};
    if (r.objective) {
      item["gmm"] = r.objective->gmm;
      item["laplacian"] = r.objective->laplacian;
      item["kl"] = r.objective->kl;
      item["total"] = r.objective->total;
    }
    if (r.surrogate) item["surrogate"] = *r.surrogate;
    iterations.push_back(std::move(item));
  }

  json empty_events = json::array();
  for (const EmptyClassEvent& e : trace.empty_class_events) {
    empty_events.push_back({{"iteration", e.iteration}, {"class", e.class_index}});
  }

  auto optional_number = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"config", std::move(config)},
      {"timing",
       {{"load_ms", report.timing.load_ms},
        {"affinity_ms", report.timing.affinity_ms},
        {"solve_ms", report.timing.solve_ms}}},
      {"n", report.predictions.size()},
      {"k", report.probabilities.cols()},
      {"inductive_top1", optional_number(report.inductive_top1)},
      {"transductive_top1", optional_number(report.transductive_top1)},
      {"delta", optional_number(report.delta)},
      {"trace", {{"iterations", std::move(iterations)}, {"converged", trace.converged}}},
      {"flags",
       {{"variance_floor_hit", trace.variance_floor_hit},
        {"empty_class_events", std::move(empty_events)}}},
  };
}

void save_report_json(const PredictionReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "' for writing");
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed on '" + path.string() + "'");
}

std::string format_summary(const PredictionReport& report) {
  std::ostringstream out;
  char buf[64];
  out << "samples: " << report.predictions.size() << ", classes: " << report.probabilities.cols()
      << '\n';
  if (report.inductive_top1) {
    std::snprintf(buf, sizeof buf, "%.1f", *report.inductive_top1);
    out << "inductive top-1:    " << buf << "%\n";
  }
  if (report.transductive_top1) {
    std::snprintf(buf, sizeof buf, "%.1f", *report.transductive_top1);
    out << "transductive top-1: " << buf << "%\n";
  }
  if (report.delta) {
    std::snprintf(buf, sizeof buf, "%+.1f", *report.delta);
    out << "delta:              " << buf << " points\n";
  }
  if (report.trace.variance_floor_hit) out << "note: variance floor was applied\n";
  if (!report.trace.empty_class_events.empty()) {
    out << "note: " << report.trace.empty_class_events.size() << " empty-class mean updates skipped\n";
  }
  return out.str();
}

}  // namespace transduct
