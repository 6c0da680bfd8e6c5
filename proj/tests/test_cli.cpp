#include "soclab/cli.hpp"
#include "soclab/io_formats.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using soclab::cli::kExitOk;
using soclab::cli::kExitRuntime;
using soclab::cli::kExitValidation;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = soclab::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("soclab_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path gen_small(const std::string& sub = "data") {
    const Result r = run({"gen", "--out-dir", path(sub), "--samples-per-class", "4", "--augmentations", "8",
                          "--dim", "16", "--seed", "3"});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    return dir_ / sub / "manifest.json";
  }

  fs::path dir_;
};

TEST_F(Cli, DynamicsPairExample) {
  const Result r = run({"dynamics", "--k", "2", "--mu", "0.5", "--eta", "0.01", "--variant", "otpt"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::string header, row;
  std::getline(lines, header);
  EXPECT_EQ(header, "i,j,s,predicted,measured,residual");
  std::getline(lines, row);
  EXPECT_EQ(row.substr(0, row.find(',', row.find(',', row.find(',', row.find(',') + 1) + 1) + 1)), "1,0,0.5,-0.02");
}

TEST_F(Cli, HelpOnEverySubcommand) {
  for (const char* sub : {"gen", "tune", "verify-bound", "dynamics", "report", "selective"}) {
    const Result r = run({sub, "--help"});
    EXPECT_EQ(r.code, kExitOk) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(Cli, ParseErrorsExitWithValidationCode) {
  const Result unknown = run({"dynamics", "--bogus", "1"});
  EXPECT_EQ(unknown.code, kExitValidation);
  EXPECT_NE(unknown.err.find("--mu"), std::string::npos);  // usage follows the error
  EXPECT_EQ(run({}).code, kExitValidation);
  EXPECT_EQ(run({"nonsense"}).code, kExitValidation);
  EXPECT_EQ(run({"dynamics", "--variant", "l2"}).code, kExitValidation);
  EXPECT_EQ(run({"tune"}).code, kExitValidation);  // --manifest is required
}

TEST_F(Cli, LibraryErrorsMapToExitCodes) {
  EXPECT_EQ(run({"dynamics", "--eta", "0"}).code, kExitValidation);
  EXPECT_EQ(run({"dynamics", "--mu", "1.5"}).code, kExitValidation);
  EXPECT_EQ(run({"gen", "--out-dir", path("x"), "--dim", "3"}).code, kExitValidation);  // infeasible
  const Result missing = run({"report", "--records", path("missing.csv")});
  EXPECT_EQ(missing.code, kExitRuntime);
  EXPECT_NE(missing.err.find("IoError"), std::string::npos);
  EXPECT_EQ(run({"tune", "--manifest", path("missing.json")}).code, kExitRuntime);
}

TEST_F(Cli, MalformedConfigIsSchemaError) {
  std::ofstream(path("bad.json")) << "{ not json";
  const Result a = run({"dynamics", "--config", path("bad.json")});
  EXPECT_EQ(a.code, kExitValidation);
  EXPECT_NE(a.err.find("SchemaError"), std::string::npos);
  std::ofstream(path("unknown.json")) << R"({"no_such_key": 1})";
  EXPECT_EQ(run({"dynamics", "--config", path("unknown.json")}).code, kExitValidation);
  std::ofstream(path("type.json")) << R"({"mu": "half"})";
  EXPECT_EQ(run({"dynamics", "--config", path("type.json")}).code, kExitValidation);
}

TEST_F(Cli, FlagsOverrideConfigFile) {
  std::ofstream(path("cfg.json")) << R"({"mu": 0.5, "eta": 0.01, "k": 2})";
  const Result file = run({"dynamics", "--config", path("cfg.json")});
  ASSERT_EQ(file.code, kExitOk) << file.err;
  EXPECT_NE(file.out.find("1,0,0.5,-0.02"), std::string::npos);
  EXPECT_NE(file.err.find("resolved config"), std::string::npos);
  const Result flag = run({"dynamics", "--config", path("cfg.json"), "--mu", "0.25"});
  ASSERT_EQ(flag.code, kExitOk);
  EXPECT_NE(flag.out.find("1,0,0.25,-0.01"), std::string::npos);
}

TEST_F(Cli, ResolvedConfigShowsDefaults) {
  const Result r = run({"dynamics"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.err.find("\"delta\":0.3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("\"variant\":\"otpt\""), std::string::npos) << r.err;
}

TEST_F(Cli, GenWritesALoadableDataset) {
  const fs::path manifest = gen_small();
  const soclab::Dataset d = soclab::read_manifest(manifest);
  EXPECT_EQ(d.prototypes.num_classes(), 6);
  EXPECT_EQ(d.observations.num_groups(), 24u);
  EXPECT_EQ(d.manifest.model, std::optional<std::string>("synthetic-clusters"));
}

TEST_F(Cli, TuneReportAndSelectivePipeline) {
  const fs::path manifest = gen_small();
  const Result t = run({"tune", "--manifest", manifest.string(), "--method", "soc", "--records-out",
                        path("records.csv"), "--reliability-out", path("rel.csv"), "--pairs-out",
                        path("pairs.csv"), "--out", path("metrics.csv")});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  const std::string metrics = slurp(path("metrics.csv"));
  EXPECT_EQ(metrics.rfind(soclab::kMetricsHeader, 0), 0u);
  EXPECT_NE(metrics.find(",soc,1,"), std::string::npos);
  EXPECT_EQ(soclab::read_records(fs::path(path("records.csv"))).size(), 24u);
  EXPECT_EQ(slurp(path("pairs.csv")).rfind("predicted,label,count", 0), 0u);

  const Result rep = run({"report", "--records", path("records.csv"), "--bins", "10", "--metrics-out",
                          path("m2.csv")});
  ASSERT_EQ(rep.code, kExitOk) << rep.err;
  EXPECT_EQ(rep.out.rfind("lower,upper,count", 0), 0u);
  EXPECT_EQ(slurp(path("m2.csv")).rfind("records,bins,accuracy,ece,ace\n24,10,", 0), 0u);

  const Result sel = run({"selective", "--records", path("records.csv"), "--thresholds", "0", "0.5"});
  ASSERT_EQ(sel.code, kExitOk) << sel.err;
  EXPECT_EQ(sel.out.rfind("threshold,coverage,selected,accuracy\n0,1,24,", 0), 0u);
}

TEST_F(Cli, VerifyBoundPasses) {
  const fs::path manifest = gen_small();
  const Result r = run({"verify-bound", "--manifest", manifest.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("class,name,mu,alpha,observed,floor,margin,pass", 0), 0u);
  EXPECT_EQ(r.out.find(",false"), std::string::npos);
}

TEST_F(Cli, DeterministicOutputs) {
  std::string first;
  for (int pass = 0; pass < 2; ++pass) {
    const std::string sub = "run" + std::to_string(pass);
    const fs::path manifest = gen_small(sub);
    const Result r = run({"tune", "--manifest", manifest.string(), "--steps", "2", "--records-out",
                          path(sub + "/records.csv"), "--out", path(sub + "/metrics.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const std::string bytes = slurp(path(sub + "/metrics.csv")) + slurp(path(sub + "/records.csv")) +
                              slurp(dir_ / sub / "observations.emb");
    if (pass == 0) first = bytes;
    else EXPECT_EQ(bytes, first);
  }
}

}  // namespace
