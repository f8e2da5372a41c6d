#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "transduct/error.hpp"
#include "transduct/eval.hpp"
#include "transduct/pseudo_label.hpp"
#include "transduct/solver.hpp"
#include "transduct/synthetic.hpp"
#include "transduct/tensor_io.hpp"

namespace transduct::cli {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::size_t default_threads() {
  if (const char* env = std::getenv("TRANSDUCT_THREADS")) {
    try {
      const long long v = std::stoll(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 0;  // hardware concurrency
}

struct SolverFlags {
  double tau = Temperature::kDefault;
  std::string affinity = "auto";
  std::size_t knn = 3;
  std::size_t outer_iters = 10;
  std::size_t inner_iters = 3;
  double tol = 1e-6;
  std::size_t top_m = kDefaultTopM;
  std::string gmm_weight = "one";
  double laplacian_coef = 1.0;
  std::size_t threads = default_threads();
  bool no_normalize = false;
  bool verbose = false;

  SolverConfig to_config() const {
    static const std::map<std::string, AffinityChoice> kAffinity = {
        {"auto", AffinityChoice::kAuto},
        {"gram", AffinityChoice::kDenseGram},
        {"clamped", AffinityChoice::kDenseClamped},
        {"knn", AffinityChoice::kKnn},
    };
    SolverConfig cfg;
    cfg.tau = Temperature(tau);
    cfg.affinity = kAffinity.at(affinity);
    cfg.k_neighbors = knn;
    cfg.max_outer_iters = outer_iters;
    cfg.inner_z_iters = inner_iters;
    cfg.z_tolerance = tol;
    cfg.top_m_init = top_m;
    cfg.gmm_weight = gmm_weight == "one" ? GmmWeight::kOne : GmmWeight::kInverseN;
    cfg.laplacian_coefficient = laplacian_coef;
    cfg.threads = threads;
    cfg.validate();
    return cfg;
  }
};

void add_tau(CLI::App* app, SolverFlags& flags) {
  app->add_option("--tau", flags.tau, "Logit scale applied to image-text cosine similarity")
      ->capture_default_str();
  app->add_flag("--no-normalize", flags.no_normalize, "Do not L2-normalize embeddings on load");
}

void add_solver_flags(CLI::App* app, SolverFlags& flags) {
  add_tau(app, flags);
  app->add_option("--affinity", flags.affinity, "Affinity graph: auto (knn), gram, clamped, knn")
      ->check(CLI::IsMember({"auto", "gram", "clamped", "knn"}))
      ->capture_default_str();
  app->add_option("--knn", flags.knn, "Neighbours per sample for knn affinity")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--outer-iters", flags.outer_iters, "Maximum outer iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--inner-iters", flags.inner_iters, "z-updates per outer iteration")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--tol", flags.tol, "Stop when max |delta z| over an outer iteration is below this")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--top-m", flags.top_m, "Most confident samples per class used to seed the means")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--gmm-weight", flags.gmm_weight, "Weight of log p in the z-update: one or inverse-n")
      ->check(CLI::IsMember({"one", "inverse-n"}))
      ->capture_default_str();
  app->add_option("--laplacian-coef", flags.laplacian_coef,
                  "Multiplier on the propagated term of the z-update")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--threads", flags.threads,
                  "Worker threads (0 = hardware concurrency; env TRANSDUCT_THREADS)")
      ->capture_default_str();
  app->add_flag("-v,--verbose", flags.verbose, "Print one line per outer iteration");
}

void print_trace(const SolverTrace& trace, std::ostream& err) {
  for (const IterationRecord& r : trace.iterations) {
    err << "iter " << r.iteration << ": max|dz|=" << r.max_abs_change;
    if (r.objective) err << " objective=" << r.objective->total;
    err << " (" << r.wall_ms << " ms)\n";
  }
}

struct Paths {
  std::string images;
  std::string texts;
  std::string labels;
  std::string out;
  std::string report;
};

std::optional<LabelVector> maybe_labels(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_labels(path);
}

void write_outputs(const PredictionReport& report, const Paths& paths, std::ostream& out) {
  if (!paths.out.empty()) save_predictions(report, paths.out);
  if (!paths.report.empty()) save_report_json(report, paths.report);
  out << format_summary(report);
}

int run_solve(const Paths& paths, const SolverFlags& flags, std::ostream& out, std::ostream& err) {
  const SolverConfig cfg = flags.to_config();
  const LoadOptions load{!flags.no_normalize};
  const auto load_start = Clock::now();
  const EmbeddingMatrix images = load_image_embeddings(paths.images, load);
  const ClassEmbeddings texts = load_class_embeddings(paths.texts, load);
  const std::optional<LabelVector> labels = maybe_labels(paths.labels);
  const double load_ms = elapsed_ms(load_start);

  SolveResult result = solve(images, texts, cfg);
  if (flags.verbose) print_trace(result.trace, err);
  PredictionReport report = build_report(result.y_hat, result.z, labels, result.trace, cfg);
  report.timing = {load_ms, result.timing.affinity_ms, result.timing.solve_ms};
  write_outputs(report, paths, out);
  return kExitOk;
}

int run_pseudo_label(const Paths& paths, const SolverFlags& flags, std::ostream& out) {
  SolverConfig cfg;
  cfg.tau = Temperature(flags.tau);
  const LoadOptions load{!flags.no_normalize};
  const auto load_start = Clock::now();
  const EmbeddingMatrix images = load_image_embeddings(paths.images, load);
  const ClassEmbeddings texts = load_class_embeddings(paths.texts, load);
  const std::optional<LabelVector> labels = maybe_labels(paths.labels);
  const double load_ms = elapsed_ms(load_start);

  const auto start = Clock::now();
  const SimplexMatrix y_hat = compute_pseudo_labels(images, texts, cfg.tau);
  PredictionReport report = build_inductive_report(y_hat, labels, cfg);
  report.timing = {load_ms, 0.0, elapsed_ms(start)};
  write_outputs(report, paths, out);
  return kExitOk;
}

int run_ensemble(const std::vector<std::string>& prompts, const std::string& out_path,
                 const std::string& format, bool no_normalize, std::ostream& out) {
  std::vector<Matrix> per_class;
  per_class.reserve(prompts.size());
  for (const std::string& path : prompts) {
    Matrix m = load_matrix(path, TensorKind::kText);
    per_class.push_back(no_normalize ? std::move(m) : normalize_rows(std::move(m)));
  }
  const ClassEmbeddings classes = ensemble_class_embedding(per_class);
  save_embeddings(classes, out_path, format == "npy" ? FileFormat::kNpy : FileFormat::kRste);
  out << "wrote " << classes.k() << " class embeddings (d=" << classes.d() << ") to " << out_path
      << '\n';
  return kExitOk;
}

struct BenchFlags {
  SyntheticSpec spec;
  std::string save_dir;
};

int run_bench(const BenchFlags& bench, const Paths& paths, const SolverFlags& flags,
              std::ostream& out, std::ostream& err) {
  SolverConfig cfg = flags.to_config();
  cfg.seed = bench.spec.seed;
  const auto gen_start = Clock::now();
  const SyntheticInstance instance = generate_mixture(bench.spec);
  const double gen_ms = elapsed_ms(gen_start);
  if (!bench.save_dir.empty()) {
    const std::filesystem::path dir(bench.save_dir);
    std::filesystem::create_directories(dir);
    save_embeddings(instance.images, dir / "images.rste");
    save_embeddings(instance.texts, dir / "texts.rste");
    save_labels(instance.labels, dir / "labels.rste");
  }

  SolveResult result = solve(instance.images, instance.texts, cfg);
  if (flags.verbose) print_trace(result.trace, err);
  PredictionReport report = build_report(result.y_hat, result.z, instance.labels, result.trace, cfg);
  report.timing = {gen_ms, result.timing.affinity_ms, result.timing.solve_ms};
  out << "bench n=" << bench.spec.n << " k=" << bench.spec.k << " d=" << bench.spec.d
      << " seed=" << bench.spec.seed << '\n';
  write_outputs(report, paths, out);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transductive zero-shot classification over precomputed embeddings", "transduct"};
  app.require_subcommand(1);

  Paths paths;
  SolverFlags flags;
  BenchFlags bench;
  std::vector<std::string> prompts;
  std::string ensemble_out;
  std::string ensemble_format = "rste";

  auto* solve_cmd = app.add_subcommand("solve", "Jointly label a query set");
  solve_cmd->add_option("--images", paths.images, "Image embeddings (RSTE or NPY)")->required();
  solve_cmd->add_option("--texts", paths.texts, "Class text embeddings (RSTE or NPY)")->required();
  solve_cmd->add_option("--labels", paths.labels, "Ground-truth labels for accuracy reporting");
  solve_cmd->add_option("--out", paths.out, "Predictions CSV");
  solve_cmd->add_option("--report", paths.report, "JSON report");
  add_solver_flags(solve_cmd, flags);

  auto* pseudo_cmd = app.add_subcommand("pseudo-label", "Text-only (inductive) predictions");
  pseudo_cmd->add_option("--images", paths.images, "Image embeddings (RSTE or NPY)")->required();
  pseudo_cmd->add_option("--texts", paths.texts, "Class text embeddings (RSTE or NPY)")->required();
  pseudo_cmd->add_option("--labels", paths.labels, "Ground-truth labels for accuracy reporting");
  pseudo_cmd->add_option("--out", paths.out, "Predictions CSV");
  pseudo_cmd->add_option("--report", paths.report, "JSON report");
  add_tau(pseudo_cmd, flags);

  auto* ensemble_cmd = app.add_subcommand("ensemble", "Average per-class prompt embeddings");
  ensemble_cmd->add_option("--prompts", prompts, "One prompt-embedding file per class, in class order")
      ->required()
      ->expected(2, CLI::detail::expected_max_vector_size);
  ensemble_cmd->add_option("--out", ensemble_out, "Output class-embedding file")->required();
  ensemble_cmd->add_option("--format", ensemble_format, "Output format: rste or npy")
      ->check(CLI::IsMember({"rste", "npy"}))
      ->capture_default_str();
  ensemble_cmd->add_flag("--no-normalize", flags.no_normalize,
                         "Average prompt rows as stored, without normalizing them first");

  auto* bench_cmd = app.add_subcommand("bench", "Run a seeded synthetic mixture benchmark");
  bench_cmd->add_option("--n", bench.spec.n, "Samples")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--k", bench.spec.k, "Classes")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  bench_cmd->add_option("--d", bench.spec.d, "Embedding dimension")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--seed", bench.spec.seed, "Generator seed")->capture_default_str();
  bench_cmd->add_option("--separation", bench.spec.separation, "Norm of class means")->capture_default_str();
  bench_cmd->add_option("--noise", bench.spec.noise, "Sample noise norm")->capture_default_str();
  bench_cmd->add_option("--text-noise", bench.spec.text_noise, "Text prototype noise norm")->capture_default_str();
  bench_cmd->add_option("--save-dir", bench.save_dir, "Also write images/texts/labels RSTE files here");
  bench_cmd->add_option("--out", paths.out, "Predictions CSV");
  bench_cmd->add_option("--report", paths.report, "JSON report");
  add_solver_flags(bench_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*solve_cmd) return run_solve(paths, flags, out, err);
    if (*pseudo_cmd) return run_pseudo_label(paths, flags, out);
    if (*ensemble_cmd) return run_ensemble(prompts, ensemble_out, ensemble_format, flags.no_normalize, out);
    if (*bench_cmd) return run_bench(bench, paths, flags, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfigError ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace transduct::cli
