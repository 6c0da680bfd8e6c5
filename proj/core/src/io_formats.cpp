#include "soclab/io_formats.hpp"

#include "soclab/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace soclab {

namespace {

using nlohmann::json;

constexpr double kObservationNormTol = 1e-4;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::string& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIoError, "short write to " + path.string());
}

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorKind::kSchemaError, what); }

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) schema_error(std::string("missing key '") + key + "'");
  return doc.at(key);
}

std::string require_string(const json& doc, const char* key) {
  const json& v = require(doc, key);
  if (!v.is_string()) schema_error(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  if (!doc.at(key).is_string()) schema_error(std::string("'") + key + "' must be a string");
  return doc.at(key).get<std::string>();
}

}  // namespace

std::string encode_embeddings(const Matrix& matrix) {
  if (!matrix.allFinite()) throw Error(ErrorKind::kNonFiniteValue, "matrix has non-finite entries");
  if (matrix.rows() > 0xFFFFFFFFll || matrix.cols() > 0xFFFFFFFFll) {
    throw Error(ErrorKind::kInvalidArgs, "matrix too large for EMB1");
  }
  std::string out;
  out.reserve(kEmbeddingHeaderBytes + 4 * static_cast<std::size_t>(matrix.size()));
  out.append(kEmbeddingMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
  for (Index i = 0; i < matrix.rows(); ++i) {
    for (Index j = 0; j < matrix.cols(); ++j) {
      const auto f = static_cast<float>(matrix(i, j));
      if (!std::isfinite(f)) throw Error(ErrorKind::kNonFiniteValue, "value overflows binary32");
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

Matrix decode_embeddings(const std::string& bytes) {
  if (bytes.size() < kEmbeddingHeaderBytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
      throw Error(ErrorKind::kBadMagic, "not an EMB1 file");
    }
    throw Error(ErrorKind::kTruncatedFile, "header is incomplete");
  }
  if (std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) throw Error(ErrorKind::kBadMagic, "not an EMB1 file");
  const std::uint64_t rows = get_u32(bytes, 4);
  const std::uint64_t dim = get_u32(bytes, 8);
  const std::uint64_t expected = kEmbeddingHeaderBytes + 4 * rows * dim;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kTruncatedFile, "expected " + std::to_string(expected) + " bytes, found " +
                                               std::to_string(bytes.size()));
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(dim));
  std::size_t offset = kEmbeddingHeaderBytes;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const float f = std::bit_cast<float>(get_u32(bytes, offset));
      offset += 4;
      if (!std::isfinite(f)) {
        throw Error(ErrorKind::kNonFiniteValue,
                    "row " + std::to_string(i) + " column " + std::to_string(j) + " is not finite");
      }
      m(i, j) = f;
    }
  }
  return m;
}

void write_embeddings(const Matrix& matrix, const std::filesystem::path& path) {
  dump(encode_embeddings(matrix), path);
}

Matrix read_embeddings(const std::filesystem::path& path) { return decode_embeddings(slurp(path)); }

std::string manifest_to_json(const DatasetManifest& m) {
  json groups = json::array();
  for (const ViewGroup& g : m.groups) groups.push_back({g.start, g.count});
  json doc = {
      {"class_names", m.class_names},
      {"prototype_file", m.prototype_file},
      {"observation_file", m.observation_file},
      {"labels", m.labels},
      {"groups", groups},
      {"alpha", m.alpha},
  };
  if (m.model) doc["model"] = *m.model;
  if (m.augmentation) doc["augmentation"] = *m.augmentation;
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    schema_error(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("manifest must be a JSON object");

  DatasetManifest m;
  const json& names = require(doc, "class_names");
  if (!names.is_array()) schema_error("'class_names' must be an array");
  for (const json& n : names) {
    if (!n.is_string()) schema_error("'class_names' entries must be strings");
    m.class_names.push_back(n.get<std::string>());
  }
  m.prototype_file = require_string(doc, "prototype_file");
  m.observation_file = require_string(doc, "observation_file");

  const json& labels = require(doc, "labels");
  if (!labels.is_array()) schema_error("'labels' must be an array");
  for (const json& l : labels) {
    if (!l.is_number_integer()) schema_error("'labels' entries must be integers");
    m.labels.push_back(l.get<int>());
  }

  const json& groups = require(doc, "groups");
  if (!groups.is_array()) schema_error("'groups' must be an array");
  for (const json& g : groups) {
    if (!g.is_array() || g.size() != 2 || !g[0].is_number_integer() || !g[1].is_number_integer()) {
      schema_error("'groups' entries must be [start, count] integer pairs");
    }
    const auto start = g[0].get<long long>();
    const auto count = g[1].get<long long>();
    if (start < 0 || count < 1) schema_error("group start must be >= 0 and count >= 1");
    m.groups.push_back({static_cast<Index>(start), static_cast<Index>(count)});
  }

  const json& alpha = require(doc, "alpha");
  if (!alpha.is_number()) schema_error("'alpha' must be a number");
  m.alpha = alpha.get<double>();
  if (!(m.alpha > 0.0) || !std::isfinite(m.alpha)) schema_error("'alpha' must be > 0");

  m.model = optional_string(doc, "model");
  m.augmentation = optional_string(doc, "augmentation");
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  dump(manifest_to_json(manifest), path);
}

Dataset read_manifest(const std::filesystem::path& path) {
  DatasetManifest m = manifest_from_json(slurp(path));
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&base](const std::string& file) {
    const std::filesystem::path p(file);
    return p.is_absolute() ? p : base / p;
  };
  auto cross = [](const std::string& what) { throw Error(ErrorKind::kCrossCheckError, what); };

  const Matrix protos = read_embeddings(resolve(m.prototype_file));
  const Matrix obs = read_embeddings(resolve(m.observation_file));
  if (static_cast<Index>(m.class_names.size()) != protos.rows()) {
    cross(std::to_string(m.class_names.size()) + " class names for " + std::to_string(protos.rows()) +
          " prototype rows");
  }
  if (protos.cols() != obs.cols()) cross("prototype and observation dimensions differ");
  if (static_cast<Index>(m.labels.size()) != obs.rows()) {
    cross(std::to_string(m.labels.size()) + " labels for " + std::to_string(obs.rows()) + " observation rows");
  }
  for (int label : m.labels) {
    if (label < 0 || label >= protos.rows()) cross("label " + std::to_string(label) + " is not a class index");
  }
  for (Index r = 0; r < obs.rows(); ++r) {
    if (std::abs(obs.row(r).norm() - 1.0) > kObservationNormTol) {
      cross("observation row " + std::to_string(r) + " is not unit-norm");
    }
  }

  ObservationSet observations{obs, m.labels, m.groups};
  observations.validate();

  PrototypeSet prototypes = [&] {
    try {
      return PrototypeSet::build(protos, m.class_names);
    } catch (const Error& e) {
      throw Error(ErrorKind::kCrossCheckError, e.what());
    }
  }();
  return Dataset{std::move(m), std::move(prototypes), std::move(observations)};
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

void write_metrics_table(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const MetricsRow& r : rows) {
    out << r.dataset << ',' << r.method << ',' << r.steps << ',' << format_number(r.accuracy) << ','
        << format_number(r.ece) << ',' << format_number(r.ace) << ',' << format_number(r.mu_before) << ','
        << format_number(r.mu_after) << '\n';
  }
}

void write_records(std::ostream& out, const std::vector<CalibrationRecord>& records) {
  out << kRecordsHeader << '\n';
  char buf[40];
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", records[i].confidence);
    out << i << ',' << buf << ',' << records[i].predicted << ',' << records[i].label << '\n';
  }
}

std::vector<CalibrationRecord> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader) {
    throw Error(ErrorKind::kSchemaError, std::string("records file must start with '") + kRecordsHeader + "'");
  }
  std::vector<CalibrationRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string index, conf, pred, label;
    if (!std::getline(ss, index, ',') || !std::getline(ss, conf, ',') || !std::getline(ss, pred, ',') ||
        !std::getline(ss, label)) {
      throw Error(ErrorKind::kSchemaError, "line " + std::to_string(lineno) + ": expected 4 fields");
    }
    try {
      std::size_t used = 0;
      CalibrationRecord r;
      r.confidence = std::stod(conf, &used);
      if (used != conf.size()) throw std::invalid_argument(conf);
      r.predicted = std::stoi(pred, &used);
      if (used != pred.size()) throw std::invalid_argument(pred);
      r.label = std::stoi(label, &used);
      if (used != label.size()) throw std::invalid_argument(label);
      if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) throw std::out_of_range(conf);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kSchemaError, "line " + std::to_string(lineno) + ": bad value");
    }
  }
  return out;
}

std::vector<CalibrationRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  return read_records(in);
}

void write_reliability(std::ostream& out, const std::vector<ReliabilityBin>& bins) {
  out << "lower,upper,count,mean_confidence,accuracy\n";
  for (const ReliabilityBin& b : bins) {
    out << format_number(b.lower) << ',' << format_number(b.upper) << ',' << b.count << ','
        << (b.mean_confidence ? format_number(*b.mean_confidence) : "") << ','
        << (b.accuracy ? format_number(*b.accuracy) : "") << '\n';
  }
}

void write_selective(std::ostream& out, const std::vector<SelectivePoint>& points) {
  out << "threshold,coverage,selected,accuracy\n";
  for (const SelectivePoint& p : points) {
    out << format_number(p.threshold) << ',' << format_number(p.coverage) << ',' << p.selected << ','
        << (p.accuracy ? format_number(*p.accuracy) : "") << '\n';
  }
}

void write_pair_errors(std::ostream& out, const std::vector<PairErrorEntry>& entries) {
  out << "predicted,label,count,mean_error_confidence,zero_shot_similarity\n";
  for (const PairErrorEntry& e : entries) {
    out << e.predicted << ',' << e.label << ',' << e.count << ',' << format_number(e.mean_error_confidence) << ','
        << format_number(e.zero_shot_similarity) << '\n';
  }
}

}  // namespace soclab
