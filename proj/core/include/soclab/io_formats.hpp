#pragma once

#include "soclab/calib.hpp"
#include "soclab/geometry.hpp"
#include "soclab/observation_set.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace soclab {

// EMB1 layout (little-endian throughout):
//   bytes 0..3   "EMB1"
//   bytes 4..7   row count, uint32
//   bytes 8..11  dimension, uint32
//   then rows * dim IEEE-754 binary32 values, row-major.
inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::size_t kEmbeddingHeaderBytes = 12;

/// Values are narrowed to float. Throws NonFiniteValue or IoError.
void write_embeddings(const Matrix& matrix, const std::filesystem::path& path);

/// Throws BadMagic, TruncatedFile (short or over-long file), NonFiniteValue
/// or IoError.
Matrix read_embeddings(const std::filesystem::path& path);

/// In-memory encoding, exposed for tests and the exporter contract.
std::string encode_embeddings(const Matrix& matrix);
Matrix decode_embeddings(const std::string& bytes);

/// JSON document pairing an embedding file of class prototypes with one of
/// observations. Relative file paths resolve against the manifest directory.
struct DatasetManifest {
  std::vector<std::string> class_names;
  std::string prototype_file;
  std::string observation_file;
  std::vector<int> labels;
  std::vector<ViewGroup> groups;
  double alpha = 100.0;
  // Provenance written by the exporter.
  std::optional<std::string> model;
  std::optional<std::string> augmentation;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// A manifest with its referenced files loaded and cross-checked.
struct Dataset {
  DatasetManifest manifest;
  PrototypeSet prototypes;
  ObservationSet observations;
};

std::string manifest_to_json(const DatasetManifest& manifest);

/// Schema validation only (types, required keys, ranges). Throws SchemaError.
DatasetManifest manifest_from_json(const std::string& text);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Parses, opens both embedding files and validates every cross-count before
/// returning. Throws SchemaError or CrossCheckError.
Dataset read_manifest(const std::filesystem::path& path);

// ---- CSV reports ------------------------------------------------------------

/// %.6g formatting used by every CSV writer.
std::string format_number(double value);

inline constexpr const char* kMetricsHeader = "dataset,method,steps,accuracy,ece,ace,mu_before,mu_after";

struct MetricsRow {
  std::string dataset;
  std::string method;
  int steps = 1;
  double accuracy = 0.0;
  double ece = 0.0;
  double ace = 0.0;
  double mu_before = 0.0;
  double mu_after = 0.0;
};

void write_metrics_table(std::ostream& out, const std::vector<MetricsRow>& rows);

inline constexpr const char* kRecordsHeader = "index,confidence,predicted,label";

/// Confidences are written with 17 significant digits so that reading them
/// back reproduces the metrics exactly.
void write_records(std::ostream& out, const std::vector<CalibrationRecord>& records);
std::vector<CalibrationRecord> read_records(std::istream& in);
std::vector<CalibrationRecord> read_records(const std::filesystem::path& path);

void write_reliability(std::ostream& out, const std::vector<ReliabilityBin>& bins);
void write_selective(std::ostream& out, const std::vector<SelectivePoint>& points);
void write_pair_errors(std::ostream& out, const std::vector<PairErrorEntry>& entries);

}  // namespace soclab
