#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

namespace soclab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// K unit-norm class prototypes (rows) with distinct class names.
class PrototypeSet {
 public:
  /// Rescales every row of `raw` to unit norm. Throws ZeroVectorRow,
  /// DimensionMismatch or DuplicateName.
  static PrototypeSet build(const Matrix& raw, std::vector<std::string> names);

  /// Same as build() with names "class_0", "class_1", ...
  static PrototypeSet build(const Matrix& raw);

  const Matrix& vectors() const noexcept { return vectors_; }
  const std::vector<std::string>& class_names() const noexcept { return names_; }
  Index num_classes() const noexcept { return vectors_.rows(); }
  Index dim() const noexcept { return vectors_.cols(); }

 private:
  PrototypeSet(Matrix vectors, std::vector<std::string> names)
      : vectors_(std::move(vectors)), names_(std::move(names)) {}

  Matrix vectors_;
  std::vector<std::string> names_;
};

PrototypeSet build_prototype_set(const Matrix& raw, std::vector<std::string> names);

/// Symmetric K x K cosine-similarity matrix with unit diagonal.
class SimilarityMatrix {
 public:
  /// Validates symmetry (1e-9) and the unit diagonal (1e-6).
  explicit SimilarityMatrix(Matrix entries);

  const Matrix& entries() const noexcept { return entries_; }
  Index size() const noexcept { return entries_.rows(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

SimilarityMatrix similarity_matrix(const PrototypeSet& p);

enum class NormalizationStrategy { kMinMax, kDivMax, kShiftMin, kNone };

struct CoherenceReport {
  double mu = 0.0;
  std::pair<Index, Index> arg_pair{0, 1};
};

/// Maximum off-diagonal entry; ties go to the first pair in row-major order.
CoherenceReport cosine_coherence(const SimilarityMatrix& s);

/// Same scan over an arbitrary square matrix (e.g. post-step inner products
/// that are no longer unit-diagonal).
CoherenceReport max_off_diagonal(const Matrix& m);

struct OffDiagonalRange {
  double min = 0.0;
  double max = 0.0;
  std::pair<Index, Index> argmin{1, 0};
  std::pair<Index, Index> argmax{1, 0};
};

/// Extremes over the strict lower triangle. Pairs are reported as (i, j), i > j.
OffDiagonalRange off_diagonal_range(const Matrix& m);

/// Strict lower-triangle entries in row-major order.
std::vector<double> lower_triangle(const Matrix& m);

/// Affine rescaling whose constants come from the off-diagonal entries only.
/// The diagonal goes through the same map.
Matrix normalize_similarity(const Matrix& s, NormalizationStrategy strategy);

inline constexpr double kDefaultMarginPercentile = 0.20;

/// q-quantile of the off-diagonal lower triangle, linear interpolation
/// between order statistics.
double margin_from_percentile(const Matrix& normalized, double q = kDefaultMarginPercentile);

/// Normalizes the prototype similarities and takes their q-quantile.
double huber_margin(const PrototypeSet& p, NormalizationStrategy strategy,
                    double q = kDefaultMarginPercentile);

/// 1 / (1 + (k-1) exp(-alpha (1 - mu))).
double confidence_floor(Index k, double mu, double alpha);

/// 1 - confidence_floor(), evaluated without cancellation. Two floors that
/// both round to 1.0 are still ordered by their tails.
double confidence_floor_tail(Index k, double mu, double alpha);

struct FloorCheck {
  Index class_index = 0;
  double observed = 0.0;
  double floor = 0.0;
  double margin = 0.0;  // observed - floor
  bool pass = false;
};

struct FloorReport {
  double mu = 0.0;
  double alpha = 0.0;
  std::vector<FloorCheck> classes;
  double worst_margin = 0.0;
  bool all_pass = true;
};

/// Probes the softmax at v = t_i for every class i and compares the maximum
/// probability against confidence_floor(K, mu, alpha).
FloorReport verify_confidence_floor(const PrototypeSet& p, double alpha);

}  // namespace soclab
