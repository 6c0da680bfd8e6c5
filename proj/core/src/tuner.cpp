#include "soclab/tuner.hpp"

#include "soclab/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace soclab {

namespace {

void check_finite(const LossBreakdown& loss, int step) {
  if (!std::isfinite(loss.total)) {
    throw Error(ErrorKind::kDivergedLoss, "non-finite loss at step " + std::to_string(step));
  }
}

class AdamState {
 public:
  AdamState(Index rows, Index cols) : m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)) {}

  void apply(Matrix& x, const Matrix& grad, const TuneConfig& cfg) {
    ++t_;
    m_ = cfg.beta1 * m_ + (1.0 - cfg.beta1) * grad;
    v_ = cfg.beta2 * v_ + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg.beta2, t_);
    // Decoupled weight decay.
    x *= 1.0 - cfg.learning_rate * cfg.weight_decay;
    x.array() -= cfg.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg.adam_epsilon);
  }

 private:
  Matrix m_;
  Matrix v_;
  int t_ = 0;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
// thrown by any task is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void TuneConfig::validate() const {
  spec.validate();
  // A zero rate is accepted so that the no-op tuning run can be expressed.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::kInvalidArgs, "learning_rate must be >= 0");
  }
  if (steps < 1) throw Error(ErrorKind::kInvalidArgs, "steps must be >= 1");
  if (!(weight_decay >= 0.0)) throw Error(ErrorKind::kInvalidArgs, "weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorKind::kInvalidArgs, "moment decays must lie in [0, 1)");
  }
}

TuneResult tune_prototypes(const PrototypeSet& p, const ObservationSet& views, const TuneConfig& cfg) {
  cfg.validate();
  Matrix x = p.vectors();
  AdamState adam(x.rows(), x.cols());

  ObjectiveValue current = composite_objective(x, views, cfg.spec);
  check_finite(current.loss, 0);
  TuneResult result{p, current.loss, cosine_coherence(similarity_matrix(p)).mu, {}, {}};
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));
  result.coherence_trace.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 1; step <= cfg.steps; ++step) {
    const Matrix& grad = current.gradient.per_prototype;
    if (cfg.learning_rate > 0.0) {
      if (cfg.optimizer == Optimizer::kGd) {
        x -= cfg.learning_rate * grad;
      } else {
        adam.apply(x, grad, cfg);
      }
    }
    if (!x.allFinite()) {
      throw Error(ErrorKind::kDivergedLoss, "non-finite prototypes after step " + std::to_string(step));
    }
    result.tuned = PrototypeSet::build(x, p.class_names());
    x = result.tuned.vectors();
    current = composite_objective(x, views, cfg.spec);
    check_finite(current.loss, step);
    result.loss_trace.push_back(current.loss);
    result.coherence_trace.push_back(cosine_coherence(similarity_matrix(result.tuned)).mu);
  }
  return result;
}

Vector evaluation_embedding(const ObservationSet& observations, std::size_t g, EvalView view) {
  if (view == EvalView::kOriginal) return observations.embeddings.row(observations.original_row(g)).transpose();
  const Vector mean = observations.group_rows(g).colwise().mean().transpose();
  return mean.normalized();
}

std::vector<CalibrationRecord> evaluate_dataset(const PrototypeSet& tuned,
                                                const ObservationSet& observations, double alpha,
                                                EvalView view) {
  if (!observations.labeled() && observations.num_groups() > 0) {
    throw Error(ErrorKind::kLabelOutOfRange, "observations carry no labels");
  }
  const Index k = tuned.num_classes();
  std::vector<CalibrationRecord> records;
  records.reserve(observations.num_groups());
  for (std::size_t g = 0; g < observations.num_groups(); ++g) {
    const int label = observations.group_label(g);
    if (label < 0 || label >= k) {
      throw Error(ErrorKind::kLabelOutOfRange, "label " + std::to_string(label) + " with K = " +
                                                   std::to_string(k));
    }
    const Vector probs = softmax_probs(evaluation_embedding(observations, g, view), tuned, alpha);
    Index best = 0;
    for (Index c = 1; c < k; ++c) {
      if (probs[c] > probs[best]) best = c;
    }
    records.push_back({probs[best], static_cast<int>(best), label});
  }
  return records;
}

ExperimentSummary run_experiment(const PrototypeSet& prototypes, const ObservationSet& observations,
                                 const TuneConfig& cfg, const ExperimentOptions& options) {
  cfg.validate();
  observations.validate();
  ExperimentSummary summary;
  summary.mu_before = cosine_coherence(similarity_matrix(prototypes)).mu;
  const std::size_t groups = observations.num_groups();
  if (groups == 0) throw Error(ErrorKind::kEmptyRecords, "no test samples");

  if (options.protocol == Protocol::kShared) {
    const TuneResult tuned = tune_prototypes(prototypes, observations, cfg);
    summary.records = evaluate_dataset(tuned.tuned, observations, cfg.spec.alpha, options.eval_view);
    summary.mu_after = tuned.coherence_trace.back();
  } else {
    summary.records.resize(groups);
    std::vector<double> mu_after(groups, 0.0);
    parallel_for(groups, options.threads, [&](std::size_t g) {
      const ObservationSet sample = observations.single_group(g);
      const TuneResult tuned = tune_prototypes(prototypes, sample, cfg);
      summary.records[g] = evaluate_dataset(tuned.tuned, sample, cfg.spec.alpha, options.eval_view).front();
      mu_after[g] = tuned.coherence_trace.back();
    });
    double sum = 0.0;
    for (double mu : mu_after) sum += mu;
    summary.mu_after = sum / static_cast<double>(groups);
  }

  summary.accuracy = accuracy(summary.records);
  summary.ece = ece(summary.records, options.num_bins);
  const int ace_bins = std::min<int>(options.num_bins, static_cast<int>(summary.records.size()));
  summary.ace = ace(summary.records, ace_bins);
  return summary;
}

}  // namespace soclab
