#include "soclab/errors.hpp"
#include "soclab/io_formats.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace soclab {
namespace {

namespace fs = std::filesystem;
using namespace soclab::testing;

template <typename Fn>
ErrorKind kind_of(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no soclab::Error thrown";
  return ErrorKind::kIoError;
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("soclab_io_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void put(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

Matrix floats(Index rows, Index cols, std::mt19937_64& rng) {
  // Values representable in binary32 round-trip exactly.
  return gaussian(rows, cols, rng).unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

TEST(Emb1, HeaderLayout) {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const std::string b = encode_embeddings(m);
  ASSERT_EQ(b.size(), 12u + 24u);
  EXPECT_EQ(b.substr(0, 4), "EMB1");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 2);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 3);
  float first;
  std::memcpy(&first, b.data() + 12, 4);
  EXPECT_EQ(first, 1.0f);
  float last;
  std::memcpy(&last, b.data() + 32, 4);
  EXPECT_EQ(last, 6.0f);
}

TEST(Emb1, RoundTripIsExactForBinary32Values) {
  std::mt19937_64 rng(1);
  TempDir dir;
  for (int t = 0; t < 20; ++t) {
    const Matrix m = floats(1 + t % 7, 1 + t % 13, rng);
    EXPECT_EQ(decode_embeddings(encode_embeddings(m)), m);
    const fs::path p = dir.path() / "m.emb";
    write_embeddings(m, p);
    EXPECT_EQ(read_embeddings(p), m);
  }
}

TEST(Emb1, EmptyMatrix) {
  const Matrix m(0, 4);
  const Matrix back = decode_embeddings(encode_embeddings(m));
  EXPECT_EQ(back.rows(), 0);
  EXPECT_EQ(back.cols(), 4);
}

TEST(Emb1, BrokenFiles) {
  std::mt19937_64 rng(2);
  const std::string good = encode_embeddings(floats(3, 4, rng));

  std::string magic = good;
  magic[3] = '2';
  EXPECT_EQ(kind_of([&] { decode_embeddings(magic); }), ErrorKind::kBadMagic);
  EXPECT_EQ(kind_of([] { decode_embeddings("NOPE"); }), ErrorKind::kBadMagic);
  EXPECT_EQ(kind_of([] { decode_embeddings("EMB"); }), ErrorKind::kTruncatedFile);
  EXPECT_EQ(kind_of([] { decode_embeddings(""); }), ErrorKind::kTruncatedFile);
  EXPECT_EQ(kind_of([&] { decode_embeddings(good.substr(0, 10)); }), ErrorKind::kTruncatedFile);
  EXPECT_EQ(kind_of([&] { decode_embeddings(good.substr(0, good.size() - 1)); }), ErrorKind::kTruncatedFile);
  EXPECT_EQ(kind_of([&] { decode_embeddings(good + "x"); }), ErrorKind::kTruncatedFile);

  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 12 + 4 * 5, &q, 4);
  EXPECT_EQ(kind_of([&] { decode_embeddings(nan); }), ErrorKind::kNonFiniteValue);
  std::string inf = good;
  const float i = std::numeric_limits<float>::infinity();
  std::memcpy(inf.data() + 12, &i, 4);
  EXPECT_EQ(kind_of([&] { decode_embeddings(inf); }), ErrorKind::kNonFiniteValue);
}

TEST(Emb1, WriterRejectsNonFinite) {
  Matrix m = Matrix::Ones(2, 2);
  m(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_EQ(kind_of([&] { encode_embeddings(m); }), ErrorKind::kNonFiniteValue);
  m(1, 1) = 1e300;  // overflows binary32
  EXPECT_EQ(kind_of([&] { encode_embeddings(m); }), ErrorKind::kNonFiniteValue);
}

TEST(Emb1, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { read_embeddings("/nonexistent/dir/x.emb"); }), ErrorKind::kIoError);
}

DatasetManifest sample_manifest() {
  DatasetManifest m;
  m.class_names = {"cat", "dog"};
  m.prototype_file = "p.emb";
  m.observation_file = "o.emb";
  m.labels = {0, 0, 1};
  m.groups = {{0, 2}, {2, 1}};
  m.alpha = 50.0;
  m.model = "toy";
  return m;
}

TEST(Manifest, JsonRoundTrip) {
  const DatasetManifest m = sample_manifest();
  EXPECT_EQ(manifest_from_json(manifest_to_json(m)), m);
  DatasetManifest bare = m;
  bare.model.reset();
  EXPECT_EQ(manifest_from_json(manifest_to_json(bare)), bare);
}

TEST(Manifest, SchemaErrors) {
  const std::vector<std::string> bad{
      "not json",
      "[1, 2]",
      R"({"prototype_file":"p","observation_file":"o","labels":[],"groups":[],"alpha":1})",
      R"({"class_names":"a","prototype_file":"p","observation_file":"o","labels":[],"groups":[],"alpha":1})",
      R"({"class_names":["a"],"prototype_file":3,"observation_file":"o","labels":[],"groups":[],"alpha":1})",
      R"({"class_names":["a"],"prototype_file":"p","observation_file":"o","labels":[0.5],"groups":[],"alpha":1})",
      R"({"class_names":["a"],"prototype_file":"p","observation_file":"o","labels":[0],"groups":[[0]],"alpha":1})",
      R"({"class_names":["a"],"prototype_file":"p","observation_file":"o","labels":[0],"groups":[[0,0]],"alpha":1})",
      R"({"class_names":["a"],"prototype_file":"p","observation_file":"o","labels":[0],"groups":[[0,1]],"alpha":0})",
      R"({"class_names":["a"],"prototype_file":"p","observation_file":"o","labels":[0],"groups":[[0,1]],"alpha":"x"})",
      R"({"class_names":["a"],"prototype_file":"p","observation_file":"o","labels":[0],"groups":[[0,1]]})",
  };
  for (const std::string& text : bad) {
    EXPECT_EQ(kind_of([&] { manifest_from_json(text); }), ErrorKind::kSchemaError) << text;
  }
}

class ManifestFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    protos_ = Matrix::Identity(2, 3);
    obs_ = Matrix::Zero(3, 3);
    obs_(0, 0) = obs_(1, 0) = obs_(2, 1) = 1.0;
    write_embeddings(protos_, dir_.path() / "p.emb");
    write_embeddings(obs_, dir_.path() / "o.emb");
  }
  ErrorKind load_kind(const DatasetManifest& m) {
    write_manifest(m, dir_.path() / "manifest.json");
    return kind_of([&] { read_manifest(dir_.path() / "manifest.json"); });
  }

  TempDir dir_;
  Matrix protos_;
  Matrix obs_;
};

TEST_F(ManifestFiles, LoadsAndCrossChecks) {
  write_manifest(sample_manifest(), dir_.path() / "manifest.json");
  const Dataset d = read_manifest(dir_.path() / "manifest.json");
  EXPECT_EQ(d.prototypes.vectors(), protos_);
  EXPECT_EQ(d.prototypes.class_names(), (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(d.observations.embeddings, obs_);
  EXPECT_EQ(d.observations.num_groups(), 2u);
  EXPECT_EQ(d.manifest.alpha, 50.0);
}

TEST_F(ManifestFiles, CrossCheckFailures) {
  DatasetManifest m = sample_manifest();
  m.labels = {0, 0};
  EXPECT_EQ(load_kind(m), ErrorKind::kCrossCheckError);

  m = sample_manifest();
  m.groups = {{0, 2}, {1, 2}};
  EXPECT_EQ(load_kind(m), ErrorKind::kCrossCheckError);

  m = sample_manifest();
  m.groups = {{0, 1}, {1, 1}};
  EXPECT_EQ(load_kind(m), ErrorKind::kCrossCheckError);

  m = sample_manifest();
  m.class_names = {"cat"};
  EXPECT_EQ(load_kind(m), ErrorKind::kCrossCheckError);

  m = sample_manifest();
  m.class_names = {"cat", "cat"};
  EXPECT_EQ(load_kind(m), ErrorKind::kCrossCheckError);

  m = sample_manifest();
  m.labels = {0, 0, 2};
  EXPECT_EQ(load_kind(m), ErrorKind::kCrossCheckError);

  m = sample_manifest();
  m.labels = {0, 1, 1};  // labels change inside a group
  EXPECT_EQ(load_kind(m), ErrorKind::kCrossCheckError);

  write_embeddings(Matrix::Constant(3, 3, 1.0), dir_.path() / "o.emb");
  EXPECT_EQ(load_kind(sample_manifest()), ErrorKind::kCrossCheckError);  // not unit-norm

  write_embeddings(Matrix::Identity(3, 4), dir_.path() / "o.emb");
  EXPECT_EQ(load_kind(sample_manifest()), ErrorKind::kCrossCheckError);  // dimension mismatch
}

TEST_F(ManifestFiles, BrokenReferencedFiles) {
  put(dir_.path() / "o.emb", "garbage!garbage!");
  EXPECT_EQ(load_kind(sample_manifest()), ErrorKind::kBadMagic);
  DatasetManifest m = sample_manifest();
  m.prototype_file = "missing.emb";
  EXPECT_EQ(load_kind(m), ErrorKind::kIoError);
  put(dir_.path() / "manifest.json", "{\"class_names\": [");
  EXPECT_EQ(kind_of([&] { read_manifest(dir_.path() / "manifest.json"); }), ErrorKind::kSchemaError);
}

TEST(Csv, FormatNumber) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333");
  EXPECT_EQ(format_number(1e-7), "1e-07");
  EXPECT_EQ(format_number(0.0), "0");
}

TEST(Csv, MetricsTable) {
  std::ostringstream out;
  write_metrics_table(out, {{"toy", "soc", 2, 0.75, 0.125, 0.1, 0.9, 0.85}});
  EXPECT_EQ(out.str(), std::string(kMetricsHeader) + "\ntoy,soc,2,0.75,0.125,0.1,0.9,0.85\n");
}

TEST(Csv, RecordsRoundTripExactly) {
  std::mt19937_64 rng(3);
  const auto records = random_records(200, 7, rng);
  std::stringstream s;
  write_records(s, records);
  EXPECT_EQ(read_records(s), records);
}

TEST(Csv, MalformedRecords) {
  const std::vector<std::string> bad{
      "",
      "wrong,header\n",
      std::string(kRecordsHeader) + "\n0,0.5,1\n",
      std::string(kRecordsHeader) + "\n0,abc,1,1\n",
      std::string(kRecordsHeader) + "\n0,1.5,1,1\n",
      std::string(kRecordsHeader) + "\n0,0.5,1x,1\n",
  };
  for (const std::string& text : bad) {
    std::istringstream in(text);
    EXPECT_EQ(kind_of([&] { read_records(in); }), ErrorKind::kSchemaError) << text;
  }
  EXPECT_EQ(kind_of([] { read_records(fs::path("/nonexistent/records.csv")); }), ErrorKind::kIoError);
}

TEST(Csv, ReliabilitySelectiveAndPairs) {
  std::ostringstream rel;
  write_reliability(rel, reliability_report(std::vector<CalibrationRecord>{{0.72, 0, 0}}, 2));
  EXPECT_EQ(rel.str(), "lower,upper,count,mean_confidence,accuracy\n0,0.5,0,,\n0.5,1,1,0.72,1\n");

  std::ostringstream sel;
  const std::vector<double> th{0.5, 0.8};
  write_selective(sel, selective_accuracy(std::vector<CalibrationRecord>{{0.72, 0, 0}}, th));
  EXPECT_EQ(sel.str(), "threshold,coverage,selected,accuracy\n0.5,1,1,1\n0.8,0,0,\n");

  std::ostringstream pairs;
  write_pair_errors(pairs, pair_error_confidence(std::vector<CalibrationRecord>{{0.9, 1, 0}}, SimilarityMatrix(Matrix::Identity(2, 2))));
  EXPECT_EQ(pairs.str(), "predicted,label,count,mean_error_confidence,zero_shot_similarity\n1,0,1,0.9,0\n");
}

}  // namespace
}  // namespace soclab
