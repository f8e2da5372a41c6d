#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "transduct/solver.hpp"
#include "transduct/types.hpp"

namespace transduct {

/// 100 * matches / N. Throws LengthMismatch on unequal lengths.
double top1_accuracy(const LabelVector& pred, const LabelVector& truth);

struct ReportTiming {
  double load_ms = 0.0;
  double affinity_ms = 0.0;
  double solve_ms = 0.0;
};

struct PredictionReport {
  LabelVector predictions;
  std::vector<double> confidence;
  Matrix probabilities;
  std::optional<double> inductive_top1;
  std::optional<double> transductive_top1;
  std::optional<double> delta;
  SolverConfig config;
  SolverTrace trace;
  ReportTiming timing;
};

/// Inductive accuracy comes from argmax y_hat, transductive from argmax z.
PredictionReport build_report(const SimplexMatrix& y_hat, const SimplexMatrix& z,
                              const std::optional<LabelVector>& truth, const SolverTrace& trace,
                              const SolverConfig& cfg);

/// Report with predictions only (the inductive baseline).
PredictionReport build_inductive_report(const SimplexMatrix& y_hat,
                                        const std::optional<LabelVector>& truth,
                                        const SolverConfig& cfg);

/// Keys: config, timing, inductive_top1, transductive_top1, delta, trace,
/// flags. Absent accuracies serialize as null.
nlohmann::json report_to_json(const PredictionReport& report);
void save_report_json(const PredictionReport& report, const std::filesystem::path& path);

/// Human summary, accuracies with one decimal.
std::string format_summary(const PredictionReport& report);

}  // namespace transduct
