#pragma once

#include "soclab/calib.hpp"
#include "soclab/geometry.hpp"
#include "soclab/objectives.hpp"
#include "soclab/observation_set.hpp"

#include <cstdint>
#include <vector>

namespace soclab {

enum class Optimizer { kGd, kAdamW };

inline constexpr double kDefaultLearningRate = 0.005;

struct TuneConfig {
  ObjectiveSpec spec;
  double learning_rate = kDefaultLearningRate;
  int steps = 1;
  Optimizer optimizer = Optimizer::kAdamW;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TuneResult {
  PrototypeSet tuned;
  LossBreakdown initial_loss;
  double initial_coherence = 0.0;
  // One entry per step, evaluated after projecting back to the sphere.
  std::vector<LossBreakdown> loss_trace;
  std::vector<double> coherence_trace;
};

/// Gradient steps on the prototypes (entropy averaged over every group of
/// `views`), each followed by projection of every row to unit norm. Throws
/// DivergedLoss on a non-finite loss.
TuneResult tune_prototypes(const PrototypeSet& p, const ObservationSet& views, const TuneConfig& cfg);

/// Which embedding of a test sample is classified.
enum class EvalView {
  kOriginal,        // first row of each group
  kAugmentedMean,   // normalized mean of the group's rows
};

/// Query embedding of group g under `view`.
Vector evaluation_embedding(const ObservationSet& observations, std::size_t g, EvalView view);

/// One record per group: max softmax probability, argmax class (ties to the
/// smallest index), and the label.
std::vector<CalibrationRecord> evaluate_dataset(const PrototypeSet& tuned,
                                                const ObservationSet& observations, double alpha,
                                                EvalView view = EvalView::kOriginal);

enum class Protocol {
  kPerSampleReset,  // fresh prototypes per test sample, tuned on that sample's group
  kShared,          // one tuning run on all groups together
};

struct ExperimentOptions {
  Protocol protocol = Protocol::kPerSampleReset;
  EvalView eval_view = EvalView::kOriginal;
  int num_bins = kDefaultBins;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct ExperimentSummary {
  std::vector<CalibrationRecord> records;
  double accuracy = 0.0;
  double ece = 0.0;
  double ace = 0.0;
  double mu_before = 0.0;
  // Mean post-tuning coherence over the tuned prototype sets.
  double mu_after = 0.0;
};

ExperimentSummary run_experiment(const PrototypeSet& prototypes, const ObservationSet& observations,
                                 const TuneConfig& cfg, const ExperimentOptions& options = {});

}  // namespace soclab
