#include "transduct/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>

#include "transduct/error.hpp"
#include "transduct/eval.hpp"

namespace transduct {
namespace {

constexpr std::array<char, 4> kRsteMagic = {'R', 'S', 'T', 'E'};
constexpr std::array<char, 6> kNpyMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr double kUnitSkipTolerance = 1e-13;
constexpr double kZeroNorm = 1e-12;

std::string describe(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + describe(path));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed on " + describe(path));
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + describe(path) + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed on " + describe(path));
}

template <class T>
T read_le(const unsigned char* p) {
  static_assert(std::is_integral_v<T>);
  std::make_unsigned_t<T> v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    v |= static_cast<std::make_unsigned_t<T>>(p[b]) << (8 * b);
  }
  return static_cast<T>(v);
}

template <class T>
void append_le(std::vector<unsigned char>& out, T value) {
  auto v = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xFFu));
  }
}

float read_f32(const unsigned char* p) { return std::bit_cast<float>(read_le<std::uint32_t>(p)); }

void append_f32(std::vector<unsigned char>& out, float value) {
  append_le(out, std::bit_cast<std::uint32_t>(value));
}

bool has_prefix(const std::vector<unsigned char>& bytes, const char* magic, std::size_t len) {
  return bytes.size() >= len && std::memcmp(bytes.data(), magic, len) == 0;
}

bool is_float_kind(TensorKind kind) { return kind == TensorKind::kImage || kind == TensorKind::kText; }

const char* kind_name(TensorKind kind) {
  switch (kind) {
    case TensorKind::kImage: return "image";
    case TensorKind::kText: return "text";
    case TensorKind::kLabels: return "labels";
  }
  return "?";
}

// Decoded payload before typed validation.
struct RawTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> floats;       // float kinds
  std::vector<std::int64_t> ints;  // labels
};

std::size_t checked_product(std::uint64_t a, std::uint64_t b, std::uint64_t elem,
                            const std::filesystem::path& path) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (a != 0 && b > kMax / a) throw Error(ErrorCode::kCorruptPayload, "shape overflow in " + describe(path));
  const std::uint64_t count = a * b;
  if (count != 0 && elem > kMax / count) {
    throw Error(ErrorCode::kCorruptPayload, "shape overflow in " + describe(path));
  }
  return static_cast<std::size_t>(count * elem);
}

RawTensor parse_rste(const std::vector<unsigned char>& bytes, TensorKind expected,
                     const std::filesystem::path& path) {
  if (bytes.size() < kRsteHeaderBytes) {
    throw Error(ErrorCode::kCorruptPayload, "truncated RSTE header in " + describe(path));
  }
  const auto version = read_le<std::uint16_t>(bytes.data() + 4);
  if (version != kRsteVersion) {
    throw Error(ErrorCode::kUnknownFormat,
                "unsupported RSTE version " + std::to_string(version) + " in " + describe(path));
  }
  const unsigned kind_byte = bytes[6];
  if (kind_byte > 2) {
    throw Error(ErrorCode::kCorruptPayload,
                "invalid RSTE kind " + std::to_string(kind_byte) + " in " + describe(path));
  }
  if (bytes[7] != 0) {
    throw Error(ErrorCode::kCorruptPayload, "non-zero reserved byte in " + describe(path));
  }
  const auto kind = static_cast<TensorKind>(kind_byte);
  if (kind != expected) {
    throw Error(ErrorCode::kKindMismatch, describe(path) + " holds " + kind_name(kind) +
                                              " data, expected " + kind_name(expected));
  }
  const auto n = read_le<std::uint64_t>(bytes.data() + 8);
  const auto d = read_le<std::uint64_t>(bytes.data() + 16);
  if (n == 0 || d == 0) {
    throw Error(ErrorCode::kDimensionError, "empty tensor (N=" + std::to_string(n) +
                                                ", d=" + std::to_string(d) + ") in " + describe(path));
  }
  if (kind == TensorKind::kLabels && d != 1) {
    throw Error(ErrorCode::kCorruptPayload, "label file must have d=1 in " + describe(path));
  }
  const std::size_t elem = kind == TensorKind::kLabels ? 8 : 4;
  const std::size_t payload = checked_product(n, d, elem, path);
  if (bytes.size() - kRsteHeaderBytes != payload) {
    throw Error(ErrorCode::kCorruptPayload,
                "header declares " + std::to_string(payload) + " payload bytes but file has " +
                    std::to_string(bytes.size() - kRsteHeaderBytes) + " in " + describe(path));
  }

  RawTensor raw;
  raw.rows = static_cast<std::size_t>(n);
  raw.cols = static_cast<std::size_t>(d);
  const unsigned char* p = bytes.data() + kRsteHeaderBytes;
  const std::size_t count = raw.rows * raw.cols;
  if (kind == TensorKind::kLabels) {
    raw.ints.resize(count);
    for (std::size_t i = 0; i < count; ++i) raw.ints[i] = read_le<std::int64_t>(p + 8 * i);
  } else {
    raw.floats.resize(count);
    for (std::size_t i = 0; i < count; ++i) raw.floats[i] = read_f32(p + 4 * i);
  }
  return raw;
}

// Minimal reader for the Python-literal header dictionary of NPY files.
struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::uint64_t> shape;
};

std::string dict_value(const std::string& header, const std::string& key,
                       const std::filesystem::path& path) {
  const std::string quoted = "'" + key + "'";
  const auto at = header.find(quoted);
  if (at == std::string::npos) {
    throw Error(ErrorCode::kCorruptPayload, "NPY header lacks " + quoted + " in " + describe(path));
  }
  auto pos = header.find(':', at + quoted.size());
  if (pos == std::string::npos) {
    throw Error(ErrorCode::kCorruptPayload, "malformed NPY header in " + describe(path));
  }
  ++pos;
  while (pos < header.size() && std::isspace(static_cast<unsigned char>(header[pos]))) ++pos;
  if (pos >= header.size()) {
    throw Error(ErrorCode::kCorruptPayload, "malformed NPY header in " + describe(path));
  }
  char close = 0;
  if (header[pos] == '\'') close = '\'';
  if (header[pos] == '(') close = ')';
  if (close != 0) {
    const auto end = header.find(close, pos + 1);
    if (end == std::string::npos) {
      throw Error(ErrorCode::kCorruptPayload, "malformed NPY header in " + describe(path));
    }
    return header.substr(pos + 1, end - pos - 1);
  }
  auto end = header.find_first_of(",}", pos);
  if (end == std::string::npos) end = header.size();
  std::string value = header.substr(pos, end - pos);
  while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back()))) value.pop_back();
  return value;
}

NpyHeader parse_npy_header(const std::string& text, const std::filesystem::path& path) {
  NpyHeader h;
  h.descr = dict_value(text, "descr", path);
  const std::string order = dict_value(text, "fortran_order", path);
  if (order == "True") {
    h.fortran_order = true;
  } else if (order != "False") {
    throw Error(ErrorCode::kCorruptPayload, "bad fortran_order in " + describe(path));
  }
  std::stringstream shape(dict_value(text, "shape", path));
  std::string item;
  while (std::getline(shape, item, ',')) {
    std::size_t b = 0;
    while (b < item.size() && std::isspace(static_cast<unsigned char>(item[b]))) ++b;
    item.erase(0, b);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.pop_back();
    if (item.empty()) continue;
    std::uint64_t v = 0;
    for (char c : item) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw Error(ErrorCode::kCorruptPayload, "bad NPY shape in " + describe(path));
      }
      v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    h.shape.push_back(v);
  }
  return h;
}

RawTensor parse_npy(const std::vector<unsigned char>& bytes, TensorKind expected,
                    const std::filesystem::path& path) {
  if (bytes.size() < 10) throw Error(ErrorCode::kCorruptPayload, "truncated NPY header in " + describe(path));
  const unsigned major = bytes[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = read_le<std::uint16_t>(bytes.data() + 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw Error(ErrorCode::kCorruptPayload, "truncated NPY header in " + describe(path));
    header_len = read_le<std::uint32_t>(bytes.data() + 8);
    offset = 12;
  } else {
    throw Error(ErrorCode::kUnknownFormat, "unsupported NPY version " + std::to_string(major) +
                                               " in " + describe(path));
  }
  if (bytes.size() < offset + header_len) {
    throw Error(ErrorCode::kCorruptPayload, "truncated NPY header in " + describe(path));
  }
  const std::string text(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                         bytes.begin() + static_cast<std::ptrdiff_t>(offset + header_len));
  const NpyHeader h = parse_npy_header(text, path);
  if (h.fortran_order) {
    throw Error(ErrorCode::kUnknownFormat, "Fortran-order NPY arrays are not supported: " + describe(path));
  }

  const bool is_float = h.descr == "<f4";
  const bool is_i64 = h.descr == "<i8";
  const bool is_i32 = h.descr == "<i4";
  if (!is_float && !is_i64 && !is_i32) {
    throw Error(ErrorCode::kUnknownFormat, "unsupported NPY dtype '" + h.descr + "' in " + describe(path));
  }
  if (is_float != is_float_kind(expected)) {
    throw Error(ErrorCode::kKindMismatch, describe(path) + " has dtype " + h.descr +
                                              ", expected " + kind_name(expected) + " data");
  }

  RawTensor raw;
  if (expected == TensorKind::kLabels) {
    if (h.shape.size() == 1) {
      raw.rows = h.shape[0];
      raw.cols = 1;
    } else if (h.shape.size() == 2 && h.shape[1] == 1) {
      raw.rows = h.shape[0];
      raw.cols = 1;
    } else {
      throw Error(ErrorCode::kDimensionError, "labels must be 1-D or (N, 1) in " + describe(path));
    }
  } else {
    if (h.shape.size() != 2) {
      throw Error(ErrorCode::kDimensionError, "embeddings must be 2-D in " + describe(path));
    }
    raw.rows = h.shape[0];
    raw.cols = h.shape[1];
  }
  if (raw.rows == 0 || raw.cols == 0) {
    throw Error(ErrorCode::kDimensionError, "empty tensor in " + describe(path));
  }
  const std::size_t elem = is_float || is_i32 ? 4 : 8;
  const std::size_t payload = checked_product(raw.rows, raw.cols, elem, path);
  if (bytes.size() - offset - header_len != payload) {
    throw Error(ErrorCode::kCorruptPayload,
                "NPY shape implies " + std::to_string(payload) + " payload bytes but file has " +
                    std::to_string(bytes.size() - offset - header_len) + " in " + describe(path));
  }
  const unsigned char* p = bytes.data() + offset + header_len;
  const std::size_t count = raw.rows * raw.cols;
  if (is_float) {
    raw.floats.resize(count);
    for (std::size_t i = 0; i < count; ++i) raw.floats[i] = read_f32(p + 4 * i);
  } else {
    raw.ints.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      raw.ints[i] = is_i64 ? read_le<std::int64_t>(p + 8 * i)
                           : static_cast<std::int64_t>(read_le<std::int32_t>(p + 4 * i));
    }
  }
  return raw;
}

RawTensor read_tensor(const std::filesystem::path& path, TensorKind expected) {
  const auto bytes = read_file(path);
  if (has_prefix(bytes, kRsteMagic.data(), kRsteMagic.size())) return parse_rste(bytes, expected, path);
  if (has_prefix(bytes, kNpyMagic.data(), kNpyMagic.size())) return parse_npy(bytes, expected, path);
  throw Error(ErrorCode::kUnknownFormat, describe(path) + " is neither RSTE nor NPY");
}

Matrix to_matrix(const RawTensor& raw, const std::filesystem::path& path) {
  Matrix m(static_cast<Eigen::Index>(raw.rows), static_cast<Eigen::Index>(raw.cols));
  for (std::size_t i = 0; i < raw.floats.size(); ++i) {
    const float v = raw.floats[i];
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kCorruptPayload, "non-finite value at element " + std::to_string(i) +
                                                  " in " + describe(path));
    }
    m.data()[i] = static_cast<double>(v);
  }
  return m;
}

LabelVector to_labels(const RawTensor& raw, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < raw.ints.size(); ++i) {
    if (raw.ints[i] < 0) {
      throw Error(ErrorCode::kCorruptPayload,
                  "negative label at " + std::to_string(i) + " in " + describe(path));
    }
  }
  return LabelVector(raw.ints);
}

std::vector<unsigned char> npy_preamble(const std::string& descr, const std::string& shape) {
  std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + shape + ", }";
  // Total header (magic + version + length + dict + '\n') is a multiple of 64.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');
  std::vector<unsigned char> out(kNpyMagic.begin(), kNpyMagic.end());
  out.push_back(1);
  out.push_back(0);
  append_le(out, static_cast<std::uint16_t>(dict.size()));
  out.insert(out.end(), dict.begin(), dict.end());
  return out;
}

std::vector<unsigned char> rste_preamble(TensorKind kind, std::uint64_t n, std::uint64_t d) {
  std::vector<unsigned char> out(kRsteMagic.begin(), kRsteMagic.end());
  append_le(out, kRsteVersion);
  out.push_back(static_cast<unsigned char>(kind));
  out.push_back(0);
  append_le(out, n);
  append_le(out, d);
  return out;
}

}  // namespace

LoadedTensor load_embeddings(const std::filesystem::path& path, TensorKind expected,
                             const LoadOptions& options) {
  switch (expected) {
    case TensorKind::kImage: return load_image_embeddings(path, options);
    case TensorKind::kText: return load_class_embeddings(path, options);
    case TensorKind::kLabels: return load_labels(path);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown tensor kind");
}

Matrix load_matrix(const std::filesystem::path& path, TensorKind expected) {
  if (!is_float_kind(expected)) {
    throw Error(ErrorCode::kInvalidArgument, "load_matrix reads image or text files only");
  }
  return to_matrix(read_tensor(path, expected), path);
}

EmbeddingMatrix load_image_embeddings(const std::filesystem::path& path, const LoadOptions& options) {
  EmbeddingMatrix m(load_matrix(path, TensorKind::kImage), false);
  return options.normalize ? l2_normalize(m) : m;
}

ClassEmbeddings load_class_embeddings(const std::filesystem::path& path, const LoadOptions& options) {
  ClassEmbeddings m(load_matrix(path, TensorKind::kText), false);
  return options.normalize ? l2_normalize(m) : m;
}

LabelVector load_labels(const std::filesystem::path& path) {
  return to_labels(read_tensor(path, TensorKind::kLabels), path);
}

void save_matrix(const Matrix& data, TensorKind kind, const std::filesystem::path& path,
                 FileFormat format) {
  if (!is_float_kind(kind)) throw Error(ErrorCode::kInvalidArgument, "save_matrix writes float kinds only");
  const auto n = static_cast<std::uint64_t>(data.rows());
  const auto d = static_cast<std::uint64_t>(data.cols());
  std::vector<unsigned char> out =
      format == FileFormat::kRste
          ? rste_preamble(kind, n, d)
          : npy_preamble("<f4", "(" + std::to_string(n) + ", " + std::to_string(d) + ")");
  out.reserve(out.size() + static_cast<std::size_t>(n * d * 4));
  for (Eigen::Index i = 0; i < data.size(); ++i) append_f32(out, static_cast<float>(data.data()[i]));
  write_file(path, out);
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, FileFormat format) {
  save_matrix(m.data(), TensorKind::kImage, path, format);
}

void save_embeddings(const ClassEmbeddings& m, const std::filesystem::path& path, FileFormat format) {
  save_matrix(m.data(), TensorKind::kText, path, format);
}

void save_labels(const LabelVector& labels, const std::filesystem::path& path, FileFormat format) {
  const auto n = static_cast<std::uint64_t>(labels.size());
  std::vector<unsigned char> out = format == FileFormat::kRste
                                       ? rste_preamble(TensorKind::kLabels, n, 1)
                                       : npy_preamble("<i8", "(" + std::to_string(n) + ",)");
  for (std::int64_t v : labels.labels()) append_le(out, v);
  write_file(path, out);
}

Matrix normalize_rows(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (!(norm >= kZeroNorm)) {
      throw Error(ErrorCode::kZeroNormRow,
                  "row " + std::to_string(i) + " has norm " + std::to_string(norm));
    }
    if (std::abs(norm - 1.0) <= kUnitSkipTolerance) continue;
    m.row(i) /= norm;
  }
  return m;
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  return EmbeddingMatrix(normalize_rows(m.data()), true);
}

ClassEmbeddings l2_normalize(const ClassEmbeddings& m) {
  return ClassEmbeddings(normalize_rows(m.data()), true);
}

void save_predictions(const PredictionReport& report, const std::filesystem::path& path) {
  const std::size_t n = report.predictions.size();
  if (static_cast<std::size_t>(report.probabilities.rows()) != n || report.confidence.size() != n) {
    throw Error(ErrorCode::kLengthMismatch, "prediction report rows disagree");
  }
  std::string out = "index,pred,confidence";
  for (Eigen::Index k = 0; k < report.probabilities.cols(); ++k) out += ",p_" + std::to_string(k);
  out += '\n';
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < n; ++i) {
    out += std::to_string(i);
    out += ',';
    out += std::to_string(report.predictions[i]);
    std::snprintf(buf.data(), buf.size(), ",%.6f", report.confidence[i]);
    out += buf.data();
    for (Eigen::Index k = 0; k < report.probabilities.cols(); ++k) {
      std::snprintf(buf.data(), buf.size(), ",%.6f",
                    report.probabilities(static_cast<Eigen::Index>(i), k));
      out += buf.data();
    }
    out += '\n';
  }
  write_file(path, std::vector<unsigned char>(out.begin(), out.end()));
}

PredictionTable load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + describe(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,pred,confidence", 0) != 0) {
    throw Error(ErrorCode::kUnknownFormat, describe(path) + " is not a predictions CSV");
  }
  const auto k = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') - 2);
  PredictionTable table;
  std::vector<double> probs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != k + 3) {
      throw Error(ErrorCode::kCorruptPayload, "ragged row in " + describe(path));
    }
    table.index.push_back(std::stoll(cells[0]));
    table.pred.push_back(std::stoll(cells[1]));
    table.confidence.push_back(std::stod(cells[2]));
    for (std::size_t c = 3; c < cells.size(); ++c) probs.push_back(std::stod(cells[c]));
  }
  table.probabilities = Matrix(static_cast<Eigen::Index>(table.index.size()), static_cast<Eigen::Index>(k));
  std::copy(probs.begin(), probs.end(), table.probabilities.data());
  return table;
}

}  // namespace transduct
