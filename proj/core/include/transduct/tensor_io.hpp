#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "transduct/types.hpp"

namespace transduct {

struct PredictionReport;

/// Kind byte of the RSTE container.
enum class TensorKind : std::uint8_t {
  kImage = 0,
  kText = 1,
  kLabels = 2,
};

enum class FileFormat {
  kRste,
  kNpy,
};

struct LoadOptions {
  /// L2-normalize embedding rows after loading. Ignored for labels.
  bool normalize = true;
};

using LoadedTensor = std::variant<EmbeddingMatrix, ClassEmbeddings, LabelVector>;

// RSTE layout, all integers little-endian:
//   [0,4)   magic "RSTE"
//   [4,6)   version u16 = 1
//   [6]     kind u8 (TensorKind)
//   [7]     reserved u8 = 0
//   [8,16)  N u64
//   [16,24) d u64 (1 for labels)
//   payload N*d f32 row-major, or N i64 for labels; nothing after it.
inline constexpr std::size_t kRsteHeaderBytes = 24;
inline constexpr std::uint16_t kRsteVersion = 1;

/// Loads an RSTE or NPY file (detected by magic) and validates it fully.
/// The variant alternative follows `expected`: kImage -> EmbeddingMatrix,
/// kText -> ClassEmbeddings, kLabels -> LabelVector.
LoadedTensor load_embeddings(const std::filesystem::path& path, TensorKind expected,
                             const LoadOptions& options = {});

EmbeddingMatrix load_image_embeddings(const std::filesystem::path& path,
                                      const LoadOptions& options = {});
ClassEmbeddings load_class_embeddings(const std::filesystem::path& path,
                                      const LoadOptions& options = {});
LabelVector load_labels(const std::filesystem::path& path);

/// Raw float payload of an image or text file with format and finiteness
/// checks only. Used for per-class prompt files, which may hold one row.
Matrix load_matrix(const std::filesystem::path& path, TensorKind expected);

/// Writes a float payload. Values are narrowed to 4-byte floats, so a matrix
/// that came from a file round-trips bit-exactly.
void save_matrix(const Matrix& data, TensorKind kind, const std::filesystem::path& path,
                 FileFormat format = FileFormat::kRste);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path,
                     FileFormat format = FileFormat::kRste);
void save_embeddings(const ClassEmbeddings& m, const std::filesystem::path& path,
                     FileFormat format = FileFormat::kRste);
void save_labels(const LabelVector& labels, const std::filesystem::path& path,
                 FileFormat format = FileFormat::kRste);

/// Divides each row by its L2 norm. Rows already unit length to within 1e-13
/// are left untouched, which makes the operation exactly idempotent.
/// Throws ZeroNormRow for a row with norm below 1e-12.
Matrix normalize_rows(Matrix m);
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);
ClassEmbeddings l2_normalize(const ClassEmbeddings& m);

/// Predictions CSV: `index,pred,confidence,p_0,...,p_{K-1}`, probabilities
/// with six decimals. Throws IoError if the file cannot be written.
void save_predictions(const PredictionReport& report, const std::filesystem::path& path);

struct PredictionTable {
  std::vector<std::int64_t> index;
  std::vector<std::int64_t> pred;
  std::vector<double> confidence;
  Matrix probabilities;
};

PredictionTable load_predictions(const std::filesystem::path& path);

}  // namespace transduct
