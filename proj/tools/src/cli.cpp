#include "soclab/cli.hpp"

#include "soclab/calib.hpp"
#include "soclab/dynamics.hpp"
#include "soclab/errors.hpp"
#include "soclab/geometry.hpp"
#include "soclab/io_formats.hpp"
#include "soclab/synthdata.hpp"
#include "soclab/tuner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

namespace soclab::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Flags double as config-file keys. A value read from --config only lands
// when the matching flag was not given on the command line.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON file of option values; flags take precedence");
  }

  template <typename T>
  CLI::Option* option(const std::string& key, T& target, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + key, target, help)->capture_default_str();
    add_entry(key, opt, target);
    return opt;
  }

  CLI::Option* flag(const std::string& key, bool& target, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + key, target, help);
    add_entry(key, opt, target);
    return opt;
  }

  void resolve() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) throw Error(ErrorKind::kIoError, "cannot open config " + config_path_);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kSchemaError, "config " + config_path_ + ": " + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorKind::kSchemaError, "config must be a JSON object");
    for (const auto& [raw_key, value] : doc.items()) {
      std::string key = raw_key;
      std::replace(key.begin(), key.end(), '_', '-');
      const auto it = entries_.find(key);
      if (it == entries_.end()) {
        throw Error(ErrorKind::kSchemaError, "config key '" + raw_key + "' is not an option of " + app_->get_name());
      }
      if (it->second.opt->count() > 0) continue;
      try {
        it->second.set(value);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::kSchemaError, "config key '" + raw_key + "': " + e.what());
      }
      from_file_.insert(key);
    }
  }

  bool explicitly_set(const std::string& key) const {
    const auto it = entries_.find(key);
    return from_file_.count(key) > 0 || (it != entries_.end() && it->second.opt->count() > 0);
  }

  json resolved() const {
    json doc = json::object();
    for (const auto& [key, entry] : entries_) doc[key] = entry.get();
    return doc;
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::function<void(const json&)> set;
    std::function<json()> get;
  };

  template <typename T>
  void add_entry(const std::string& key, CLI::Option* opt, T& target) {
    entries_[key] = Entry{opt, [&target](const json& v) { target = v.get<T>(); },
                          [&target] { return json(target); }};
  }

  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> from_file_;
};

// Output target: a file when a path is given, otherwise the data stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw Error(ErrorKind::kIoError, "cannot write " + path);
    stream_ = file_.get();
  }
  std::ostream& operator*() { return *stream_; }
  void close() {
    if (file_) {
      file_->close();
      if (!*file_) throw Error(ErrorKind::kIoError, "write failed");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path);
  body(out);
  out.close();
  if (!out) throw Error(ErrorKind::kIoError, "write failed: " + path);
}

template <typename E>
E lookup(const std::map<std::string, E>& table, const std::string& value, const std::string& what) {
  const auto it = table.find(value);
  if (it == table.end()) throw Error(ErrorKind::kInvalidArgs, "unknown " + what + " '" + value + "'");
  return it->second;
}

template <typename E>
std::vector<std::string> keys(const std::map<std::string, E>& table) {
  std::vector<std::string> out;
  for (const auto& [k, v] : table) out.push_back(k);
  return out;
}

const std::map<std::string, Regularizer> kRegularizers = {
    {"none", Regularizer::kNone}, {"ctpt", Regularizer::kCtpt}, {"otpt", Regularizer::kOtpt},
    {"huber", Regularizer::kHuber}};
const std::map<std::string, NormalizationStrategy> kNormalizations = {
    {"min-max", NormalizationStrategy::kMinMax}, {"div-max", NormalizationStrategy::kDivMax},
    {"shift-min", NormalizationStrategy::kShiftMin}, {"none", NormalizationStrategy::kNone}};
const std::map<std::string, LambdaMode> kLambdaModes = {{"raw", LambdaMode::kRaw},
                                                        {"ratio", LambdaMode::kRatioScaled}};
const std::map<std::string, OtptConvention> kOtptConventions = {
    {"lower", OtptConvention::kLowerTriangle}, {"frobenius", OtptConvention::kFrobenius}};
const std::map<std::string, Optimizer> kOptimizers = {{"gd", Optimizer::kGd}, {"adamw", Optimizer::kAdamW}};
const std::map<std::string, Protocol> kProtocols = {{"per-sample", Protocol::kPerSampleReset},
                                                    {"shared", Protocol::kShared}};
const std::map<std::string, EvalView> kEvalViews = {{"original", EvalView::kOriginal},
                                                    {"augmented-mean", EvalView::kAugmentedMean}};
const std::map<std::string, ShiftVariant> kVariants = {{"otpt", ShiftVariant::kOtpt},
                                                       {"huber", ShiftVariant::kHuber}};
const std::map<std::string, EceVariant> kEceVariants = {{"mean", EceVariant::kMeanConfidence},
                                                        {"midpoint", EceVariant::kMedianMidpoint}};

std::string method_name(Regularizer r) {
  switch (r) {
    case Regularizer::kNone: return "tpt";
    case Regularizer::kCtpt: return "c-tpt";
    case Regularizer::kOtpt: return "o-tpt";
    case Regularizer::kHuber: return "soc";
  }
  return "unknown";
}

void echo(std::ostream& err, const std::string& command, const Settings& settings) {
  json doc = settings.resolved();
  doc["command"] = command;
  err << "resolved config: " << doc.dump() << '\n';
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
  std::string out_dir;
  Index clusters = 2;
  Index classes_per_cluster = 3;
  double intra = 0.85;
  Index dim = 64;
  Index samples = 200;
  double noise = 0.5;
  Index augmentations = 64;
  double aug_noise = 0.2;
  std::uint64_t seed = 0;
  std::uint64_t obs_seed = 1;
  double alpha = kDefaultAlpha;
};

void add_gen(CLI::App& app, GenArgs& a, Settings& s) {
  s.option("out-dir", a.out_dir, "Directory for prototypes.emb, observations.emb and manifest.json")->required();
  s.option("clusters", a.clusters, "Number of clusters");
  s.option("classes-per-cluster", a.classes_per_cluster, "Classes in each cluster");
  s.option("intra", a.intra, "Expected cosine similarity between classes of one cluster");
  s.option("dim", a.dim, "Embedding dimension");
  s.option("samples-per-class", a.samples, "Test samples per class");
  s.option("noise", a.noise, "Sample noise scale");
  s.option("augmentations", a.augmentations, "Views per sample, the original included");
  s.option("aug-noise", a.aug_noise, "Augmentation noise scale");
  s.option("seed", a.seed, "Prototype seed");
  s.option("obs-seed", a.obs_seed, "Observation seed");
  s.option("alpha", a.alpha, "Logit scale recorded in the manifest");
  (void)app;
}

int run_gen(const GenArgs& a, std::ostream& err) {
  ClusterSpec cs;
  cs.num_clusters = a.clusters;
  cs.classes_per_cluster = a.classes_per_cluster;
  cs.intra_similarity = a.intra;
  cs.dimension = a.dim;
  cs.seed = a.seed;
  ObservationSpec os;
  os.samples_per_class = a.samples;
  os.noise_scale = a.noise;
  os.augmentations_per_sample = a.augmentations;
  os.augmentation_noise = a.aug_noise;
  os.seed = a.obs_seed;
  if (!(a.alpha > 0.0)) throw Error(ErrorKind::kInvalidArgs, "alpha must be > 0");

  const PrototypeSet p = gen_prototypes(cs);
  const ObservationSet obs = gen_observations(p, os);

  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create " + a.out_dir + ": " + ec.message());

  DatasetManifest m;
  m.class_names = p.class_names();
  m.prototype_file = "prototypes.emb";
  m.observation_file = "observations.emb";
  m.labels = obs.labels;
  m.groups = obs.groups;
  m.alpha = a.alpha;
  m.model = "synthetic-clusters";
  char aug[96];
  std::snprintf(aug, sizeof aug, "gaussian noise=%g aug_noise=%g views=%lld", a.noise, a.aug_noise,
                static_cast<long long>(a.augmentations));
  m.augmentation = aug;

  write_embeddings(p.vectors(), dir / m.prototype_file);
  write_embeddings(obs.embeddings, dir / m.observation_file);
  write_manifest(m, dir / "manifest.json");
  err << "wrote " << (dir / "manifest.json").string() << ": " << p.num_classes() << " classes, "
      << obs.num_groups() << " samples, " << obs.num_rows() << " rows\n";
  return kExitOk;
}

// ---- tune -------------------------------------------------------------------

struct TuneArgs {
  std::string manifest;
  std::string regularizer = "huber";
  std::string preset = "default";
  double lambda = kDefaultLambda;
  std::string lambda_mode = "raw";
  double delta = 0.0;
  double percentile = kDefaultMarginPercentile;
  std::string normalization = "min-max";
  std::string otpt_convention = "lower";
  bool differentiate_normalization = false;
  double rho = kDefaultRho;
  double alpha = 0.0;
  double lr = kDefaultLearningRate;
  int steps = 1;
  std::string optimizer = "adamw";
  double weight_decay = 0.0;
  std::string protocol = "per-sample";
  std::string eval_view = "original";
  int bins = kDefaultBins;
  unsigned threads = 0;
  std::string dataset;
  std::string method;
  std::string out;
  std::string records_out;
  std::string reliability_out;
  std::string pairs_out;
};

constexpr double kShiftPresetLambda = 14.0;

void add_tune(TuneArgs& a, Settings& s) {
  s.option("manifest", a.manifest, "Dataset manifest")->required();
  s.option("regularizer", a.regularizer, "none | ctpt | otpt | huber")
      ->check(CLI::IsMember(keys(kRegularizers)));
  s.option("preset", a.preset, "default | shift (shift sets lambda to 14 unless lambda is given)")
      ->check(CLI::IsMember({"default", "shift"}));
  s.option("lambda", a.lambda, "Regularizer weight");
  s.option("lambda-mode", a.lambda_mode, "raw | ratio")->check(CLI::IsMember(keys(kLambdaModes)));
  s.option("delta", a.delta, "Huber margin; 0 derives it from --percentile of the normalized similarities");
  s.option("percentile", a.percentile, "Percentile of normalized off-diagonal similarities used for delta");
  s.option("normalization", a.normalization, "min-max | div-max | shift-min | none")
      ->check(CLI::IsMember(keys(kNormalizations)));
  s.option("otpt-convention", a.otpt_convention, "lower | frobenius")
      ->check(CLI::IsMember(keys(kOtptConventions)));
  s.flag("differentiate-normalization", a.differentiate_normalization,
         "Propagate the Huber gradient through the normalization's min/max entries");
  s.option("rho", a.rho, "Fraction of lowest-entropy views kept");
  s.option("alpha", a.alpha, "Logit scale; 0 uses the manifest value");
  s.option("lr", a.lr, "Learning rate");
  s.option("steps", a.steps, "Gradient steps per tuning run");
  s.option("optimizer", a.optimizer, "adamw | gd")->check(CLI::IsMember(keys(kOptimizers)));
  s.option("weight-decay", a.weight_decay, "Decoupled weight decay (adamw)");
  s.option("protocol", a.protocol, "per-sample | shared")->check(CLI::IsMember(keys(kProtocols)));
  s.option("eval-view", a.eval_view, "original | augmented-mean")->check(CLI::IsMember(keys(kEvalViews)));
  s.option("bins", a.bins, "Calibration bins");
  s.option("threads", a.threads, "Worker threads for per-sample runs; 0 = all cores");
  s.option("dataset", a.dataset, "Dataset column; defaults to the manifest file stem");
  s.option("method", a.method, "Method column; defaults to the regularizer's method name");
  s.option("out", a.out, "Metrics CSV path; standard output when empty");
  s.option("records-out", a.records_out, "Per-sample records CSV");
  s.option("reliability-out", a.reliability_out, "Reliability diagram CSV");
  s.option("pairs-out", a.pairs_out, "Per class-pair error confidence CSV");
}

int run_tune(TuneArgs a, const Settings& s, std::ostream& out, std::ostream& err) {
  if (a.preset == "shift" && !s.explicitly_set("lambda")) a.lambda = kShiftPresetLambda;

  const Dataset data = read_manifest(a.manifest);
  TuneConfig cfg;
  cfg.spec.regularizer = lookup(kRegularizers, a.regularizer, "regularizer");
  cfg.spec.lambda = a.lambda;
  cfg.spec.lambda_mode = lookup(kLambdaModes, a.lambda_mode, "lambda mode");
  cfg.spec.normalization = lookup(kNormalizations, a.normalization, "normalization");
  cfg.spec.otpt_convention = lookup(kOtptConventions, a.otpt_convention, "O-TPT convention");
  cfg.spec.differentiate_normalization = a.differentiate_normalization;
  cfg.spec.rho = a.rho;
  cfg.spec.alpha = a.alpha > 0.0 ? a.alpha : data.manifest.alpha;
  cfg.spec.delta = a.delta > 0.0 ? a.delta : huber_margin(data.prototypes, cfg.spec.normalization, a.percentile);
  cfg.learning_rate = a.lr;
  cfg.steps = a.steps;
  cfg.optimizer = lookup(kOptimizers, a.optimizer, "optimizer");
  cfg.weight_decay = a.weight_decay;

  ExperimentOptions opts;
  opts.protocol = lookup(kProtocols, a.protocol, "protocol");
  opts.eval_view = lookup(kEvalViews, a.eval_view, "evaluation view");
  opts.num_bins = a.bins;
  opts.threads = a.threads;

  err << "delta = " << format_number(cfg.spec.delta) << ", alpha = " << format_number(cfg.spec.alpha) << '\n';
  const ExperimentSummary summary = run_experiment(data.prototypes, data.observations, cfg, opts);

  MetricsRow row;
  row.dataset = a.dataset.empty() ? fs::path(a.manifest).stem().string() : a.dataset;
  row.method = a.method.empty() ? method_name(cfg.spec.regularizer) : a.method;
  row.steps = cfg.steps;
  row.accuracy = summary.accuracy;
  row.ece = summary.ece;
  row.ace = summary.ace;
  row.mu_before = summary.mu_before;
  row.mu_after = summary.mu_after;

  Sink sink(a.out, out);
  write_metrics_table(*sink, {row});
  sink.close();
  if (!a.records_out.empty()) {
    write_file(a.records_out, [&](std::ostream& o) { write_records(o, summary.records); });
  }
  if (!a.reliability_out.empty()) {
    write_file(a.reliability_out,
               [&](std::ostream& o) { write_reliability(o, reliability_report(summary.records, a.bins)); });
  }
  if (!a.pairs_out.empty()) {
    const auto pairs = pair_error_confidence(summary.records, similarity_matrix(data.prototypes));
    write_file(a.pairs_out, [&](std::ostream& o) { write_pair_errors(o, pairs); });
  }
  return kExitOk;
}

// ---- verify-bound -----------------------------------------------------------

struct VerifyArgs {
  std::string manifest;
  std::string prototypes;
  double alpha = 0.0;
  std::string out;
};

void add_verify(VerifyArgs& a, Settings& s) {
  s.option("manifest", a.manifest, "Dataset manifest whose prototypes are checked");
  s.option("prototypes", a.prototypes, "EMB1 prototype file (alternative to --manifest)");
  s.option("alpha", a.alpha, "Logit scale; 0 uses the manifest value, or 100 for a bare prototype file");
  s.option("out", a.out, "Floor report CSV path; standard output when empty");
}

int run_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  if (a.manifest.empty() == a.prototypes.empty()) {
    throw Error(ErrorKind::kInvalidArgs, "give exactly one of --manifest or --prototypes");
  }
  double alpha = a.alpha;
  std::optional<PrototypeSet> loaded;
  if (!a.manifest.empty()) {
    Dataset data = read_manifest(a.manifest);
    loaded.emplace(std::move(data.prototypes));
    if (!(alpha > 0.0)) alpha = data.manifest.alpha;
  } else {
    loaded.emplace(PrototypeSet::build(read_embeddings(a.prototypes)));
    if (!(alpha > 0.0)) alpha = kDefaultAlpha;
  }
  const PrototypeSet& p = *loaded;
  const FloorReport report = verify_confidence_floor(p, alpha);

  Sink sink(a.out, out);
  *sink << "class,name,mu,alpha,observed,floor,margin,pass\n";
  for (const FloorCheck& c : report.classes) {
    *sink << c.class_index << ',' << p.class_names()[static_cast<std::size_t>(c.class_index)] << ','
          << format_number(report.mu) << ',' << format_number(report.alpha) << ',' << format_number(c.observed)
          << ',' << format_number(c.floor) << ',' << format_number(c.margin) << ',' << (c.pass ? 1 : 0) << '\n';
  }
  sink.close();
  err << "mu = " << format_number(report.mu) << ", worst margin = " << format_number(report.worst_margin)
      << (report.all_pass ? ", floor holds for every class\n" : ", FLOOR VIOLATED\n");
  return kExitOk;
}

// ---- dynamics ---------------------------------------------------------------

struct DynamicsArgs {
  Index k = 2;
  double mu = 0.5;
  double eta = 0.01;
  std::string variant = "otpt";
  double delta = 0.3;
  double alpha = kDefaultAlpha;
  std::string out;
  std::string sweep_out;
  double sweep_from = 0.1;
  double sweep_to = 0.9;
  double sweep_step = 0.1;
};

void add_dynamics(DynamicsArgs& a, Settings& s) {
  s.option("k", a.k, "Number of prototypes in the equiangular set");
  s.option("mu", a.mu, "Pairwise cosine similarity of the set");
  s.option("eta", a.eta, "Step size");
  s.option("variant", a.variant, "otpt | huber")->check(CLI::IsMember(keys(kVariants)));
  s.option("delta", a.delta, "Huber margin");
  s.option("alpha", a.alpha, "Logit scale for the confidence floors in the sweep");
  s.option("out", a.out, "Per-pair shift CSV path; standard output when empty");
  s.option("sweep-out", a.sweep_out, "Coherence sweep CSV comparing both variants");
  s.option("sweep-from", a.sweep_from, "First mu of the sweep");
  s.option("sweep-to", a.sweep_to, "Last mu of the sweep (inclusive)");
  s.option("sweep-step", a.sweep_step, "Sweep increment");
}

int run_dynamics(const DynamicsArgs& a, std::ostream& out, std::ostream& err) {
  const ShiftVariant variant = lookup(kVariants, a.variant, "variant");
  const PrototypeSet p = equiangular_set(a.k, a.mu);
  const DynamicsReport report = compare_shift(p, variant, a.delta, a.eta);
  const Matrix s = similarity_matrix(p).entries();

  Sink sink(a.out, out);
  *sink << "i,j,s,predicted,measured,residual\n";
  for (Index i = 1; i < a.k; ++i) {
    for (Index j = 0; j < i; ++j) {
      const double pred = report.predicted.delta_s(i, j);
      const double meas = report.measured(i, j);
      *sink << i << ',' << j << ',' << format_number(s(i, j)) << ',' << format_number(pred) << ','
            << format_number(meas) << ',' << format_number(meas - pred) << '\n';
    }
  }
  sink.close();
  err << "max |residual| = " << format_number(report.max_abs_residual) << '\n';

  if (!a.sweep_out.empty()) {
    if (!(a.sweep_step > 0.0) || a.sweep_to < a.sweep_from) {
      throw Error(ErrorKind::kInvalidArgs, "sweep needs step > 0 and to >= from");
    }
    write_file(a.sweep_out, [&](std::ostream& o) {
      o << "mu,mu_prime_otpt,mu_prime_huber,predicted_otpt,predicted_huber,ordering_holds,"
           "floor_tail_otpt,floor_tail_huber,floor_ordering_holds\n";
      const auto n = static_cast<long>(std::floor((a.sweep_to - a.sweep_from) / a.sweep_step + 1e-9));
      for (long i = 0; i <= n; ++i) {
        const double mu = a.sweep_from + static_cast<double>(i) * a.sweep_step;
        const CorollaryReport c = corollary_check(equiangular_set(a.k, mu), a.delta, a.eta, a.alpha);
        o << format_number(mu) << ',' << format_number(c.mu_prime_otpt) << ',' << format_number(c.mu_prime_huber)
          << ',' << format_number(predict_mu_dominant(mu, a.eta, ShiftVariant::kOtpt, a.delta)) << ','
          << format_number(predict_mu_dominant(mu, a.eta, ShiftVariant::kHuber, a.delta)) << ','
          << (c.ordering_holds ? 1 : 0) << ',' << format_number(c.floor_tail_otpt) << ','
          << format_number(c.floor_tail_huber) << ',' << (c.floor_ordering_holds ? 1 : 0) << '\n';
      }
    });
  }
  return kExitOk;
}

// ---- report / selective -----------------------------------------------------

struct ReportArgs {
  std::string records;
  int bins = kDefaultBins;
  std::string ece_variant = "mean";
  std::string out;
  std::string metrics_out;
};

void add_report(ReportArgs& a, Settings& s) {
  s.option("records", a.records, "Records CSV written by tune --records-out")->required();
  s.option("bins", a.bins, "Calibration bins");
  s.option("ece-variant", a.ece_variant, "mean | midpoint")->check(CLI::IsMember(keys(kEceVariants)));
  s.option("out", a.out, "Reliability CSV path; standard output when empty");
  s.option("metrics-out", a.metrics_out, "Summary CSV (records,bins,accuracy,ece,ace)");
}

int run_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  const EceVariant variant = lookup(kEceVariants, a.ece_variant, "ECE variant");
  const auto records = read_records(a.records);
  const double e = ece(records, a.bins, variant);
  const double ad = ace(records, std::min<int>(a.bins, static_cast<int>(records.size())));
  const double acc = accuracy(records);

  Sink sink(a.out, out);
  write_reliability(*sink, reliability_report(records, a.bins));
  sink.close();
  if (!a.metrics_out.empty()) {
    write_file(a.metrics_out, [&](std::ostream& o) {
      o << "records,bins,accuracy,ece,ace\n"
        << records.size() << ',' << a.bins << ',' << format_number(acc) << ',' << format_number(e) << ','
        << format_number(ad) << '\n';
    });
  }
  err << records.size() << " records: accuracy " << format_number(acc) << ", ece " << format_number(e)
      << ", ace " << format_number(ad) << '\n';
  return kExitOk;
}

struct SelectiveArgs {
  std::string records;
  std::vector<double> thresholds;
  double from = 0.0;
  double to = 0.95;
  double step = 0.05;
  std::string out;
};

void add_selective(SelectiveArgs& a, Settings& s) {
  s.option("records", a.records, "Records CSV written by tune --records-out")->required();
  s.option("thresholds", a.thresholds, "Explicit confidence thresholds (overrides the range)");
  s.option("from", a.from, "First threshold of the range");
  s.option("to", a.to, "Last threshold of the range (inclusive)");
  s.option("step", a.step, "Range increment");
  s.option("out", a.out, "Selective accuracy CSV path; standard output when empty");
}

int run_selective(const SelectiveArgs& a, std::ostream& out) {
  std::vector<double> thresholds = a.thresholds;
  if (thresholds.empty()) {
    if (!(a.step > 0.0) || a.to < a.from) throw Error(ErrorKind::kInvalidArgs, "range needs step > 0 and to >= from");
    const auto n = static_cast<long>(std::floor((a.to - a.from) / a.step + 1e-9));
    for (long i = 0; i <= n; ++i) thresholds.push_back(a.from + static_cast<double>(i) * a.step);
  }
  const auto records = read_records(a.records);
  Sink sink(a.out, out);
  write_selective(*sink, selective_accuracy(records, thresholds));
  sink.close();
  return kExitOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDivergedLoss:
    case ErrorKind::kIoError:
      return kExitRuntime;
    default:
      return kExitValidation;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Similarity-coherence calibration lab", "soclab"};
  app.require_subcommand(1);
  app.fallthrough(false);

  GenArgs gen;
  TuneArgs tune;
  VerifyArgs verify;
  DynamicsArgs dyn;
  ReportArgs report;
  SelectiveArgs selective;

  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic clustered dataset (EMB1 + manifest)");
  CLI::App* tune_cmd = app.add_subcommand("tune", "Test-time tune prototypes and write calibration metrics");
  CLI::App* verify_cmd = app.add_subcommand("verify-bound", "Check the coherence confidence floor per class");
  CLI::App* dyn_cmd = app.add_subcommand("dynamics", "Predicted vs measured one-step similarity shifts");
  CLI::App* report_cmd = app.add_subcommand("report", "Calibration metrics and reliability bins from records");
  CLI::App* sel_cmd = app.add_subcommand("selective", "Selective accuracy over confidence thresholds");

  Settings gen_s(gen_cmd), tune_s(tune_cmd), verify_s(verify_cmd), dyn_s(dyn_cmd), report_s(report_cmd),
      sel_s(sel_cmd);
  add_gen(*gen_cmd, gen, gen_s);
  add_tune(tune, tune_s);
  add_verify(verify, verify_s);
  add_dynamics(dyn, dyn_s);
  add_report(report, report_s);
  add_selective(selective, sel_s);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    // exit() only prints the message; show the relevant usage too.
    CLI::App* active = &app;
    for (CLI::App* sub : app.get_subcommands()) active = sub;
    err << active->help();
    return kExitValidation;
  }

  try {
    if (gen_cmd->parsed()) {
      gen_s.resolve();
      echo(err, "gen", gen_s);
      return run_gen(gen, err);
    }
    if (tune_cmd->parsed()) {
      tune_s.resolve();
      echo(err, "tune", tune_s);
      return run_tune(tune, tune_s, out, err);
    }
    if (verify_cmd->parsed()) {
      verify_s.resolve();
      echo(err, "verify-bound", verify_s);
      return run_verify(verify, out, err);
    }
    if (dyn_cmd->parsed()) {
      dyn_s.resolve();
      echo(err, "dynamics", dyn_s);
      return run_dynamics(dyn, out, err);
    }
    if (report_cmd->parsed()) {
      report_s.resolve();
      echo(err, "report", report_s);
      return run_report(report, out, err);
    }
    if (sel_cmd->parsed()) {
      sel_s.resolve();
      echo(err, "selective", sel_s);
      return run_selective(selective, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << app.help();
  return kExitValidation;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace soclab::cli
