#pragma once

#include "soclab/geometry.hpp"
#include "soclab/observation_set.hpp"

#include <functional>
#include <vector>

namespace soclab {

enum class Regularizer { kNone, kCtpt, kOtpt, kHuber };

/// How lambda is applied. kRatioScaled holds the regularizer contribution at
/// lambda times the entropy magnitude; the rescaling factor is treated as a
/// constant when differentiating.
enum class LambdaMode { kRaw, kRatioScaled };

/// kLowerTriangle: sum_{i<j} s_ij^2 (half the squared Frobenius norm of S - I),
/// whose gradient is 2 sum_{k!=i} s_ik t_k. kFrobenius doubles both.
enum class OtptConvention { kLowerTriangle, kFrobenius };

inline constexpr double kDefaultAlpha = 100.0;
inline constexpr double kDefaultRho = 0.1;
inline constexpr double kDefaultLambda = 30.0;

struct ObjectiveSpec {
  double lambda = kDefaultLambda;
  double delta = 0.2;
  double rho = kDefaultRho;
  double alpha = kDefaultAlpha;
  Regularizer regularizer = Regularizer::kHuber;
  LambdaMode lambda_mode = LambdaMode::kRaw;
  NormalizationStrategy normalization = NormalizationStrategy::kMinMax;
  OtptConvention otpt_convention = OtptConvention::kLowerTriangle;
  /// When false, the off-diagonal min/max used by the normalization are
  /// treated as constants in the Huber gradient (only the 1/range or 1/max
  /// factor is applied). When true, the gradient also flows into the pairs
  /// that attain them.
  bool differentiate_normalization = false;

  /// Throws InvalidArgs when a field is out of range.
  void validate() const;
};

/// total == entropy_term + effective_lambda * regularizer_term. For C-TPT the
/// regularizer term is the negated dispersion.
struct LossBreakdown {
  double entropy_term = 0.0;
  double regularizer_term = 0.0;
  double total = 0.0;
  double effective_lambda = 0.0;
};

/// Per-prototype gradient, same shape as the prototype matrix.
struct GradientField {
  Matrix per_prototype;
};

struct ObjectiveValue {
  LossBreakdown loss;
  GradientField gradient;
};

// ---- TPT entropy term -------------------------------------------------------

/// Softmax of alpha * <v, t_k>. Throws NonUnitInput if |v| is off by > 1e-4.
Vector softmax_probs(const Vector& v, const Matrix& prototypes, double alpha);
Vector softmax_probs(const Vector& v, const PrototypeSet& p, double alpha);

/// Row indices of the max(1, floor(rho N)) lowest-entropy views, in
/// ascending entropy order (ties by index).
std::vector<Index> confident_views(const Eigen::Ref<const Matrix>& views, const Matrix& prototypes,
                                   double alpha, double rho);

/// Mean softmax over the confident views of one augmentation group.
Vector filtered_mean_probs(const Eigen::Ref<const Matrix>& views, const Matrix& prototypes,
                           const ObjectiveSpec& spec);

/// Shannon entropy in nats, 0 log 0 = 0. Throws NotADistribution.
double entropy_loss(const Vector& probs);

/// Entropy of filtered_mean_probs() and its gradient with respect to the
/// prototypes (views fixed, view selection held constant).
ObjectiveValue entropy_objective(const Eigen::Ref<const Matrix>& views, const Matrix& prototypes,
                                 const ObjectiveSpec& spec);

// ---- regularizers -----------------------------------------------------------

/// (1/K) sum_k |mean(t) - t_k|. The composite subtracts it.
double ctpt_penalty(const Matrix& prototypes);
inline double ctpt_penalty(const PrototypeSet& p) { return ctpt_penalty(p.vectors()); }

double otpt_penalty(const Matrix& similarity,
                    OtptConvention convention = OtptConvention::kLowerTriangle);
inline double otpt_penalty(const SimilarityMatrix& s,
                           OtptConvention convention = OtptConvention::kLowerTriangle) {
  return otpt_penalty(s.entries(), convention);
}

/// Huber on |s|: s^2/2 below delta, delta (|s| - delta/2) above.
double huber_value(double s, double delta);

/// Derivative of huber_value: sign(s) min(|s|, delta).
double huber_slope(double s, double delta);

/// 2/(K(K-1)) sum_{i<j} huber_value(s_ij, delta).
double huber_penalty(const Matrix& normalized, double delta);

/// Signed regularizer term as it enters the composite (0 for kNone).
double regularizer_value(const Matrix& prototypes, const ObjectiveSpec& spec);

/// Gradient of regularizer_value(). Throws NoRegularizer for kNone.
GradientField regularizer_gradient(const Matrix& prototypes, const ObjectiveSpec& spec);

// ---- composite --------------------------------------------------------------

/// Entropy of one augmentation group plus the weighted regularizer.
ObjectiveValue composite_objective(const Matrix& prototypes, const Eigen::Ref<const Matrix>& views,
                                   const ObjectiveSpec& spec);

/// Mean entropy over every group of `observations` plus a single weighted
/// regularizer. With one group this equals the single-group overload.
ObjectiveValue composite_objective(const Matrix& prototypes, const ObservationSet& observations,
                                   const ObjectiveSpec& spec);

double effective_lambda(const ObjectiveSpec& spec, double entropy_term, double regularizer_term);

// ---- verification oracle ----------------------------------------------------

using ScalarField = std::function<double(const Matrix&)>;

/// Central differences per coordinate, no renormalization.
GradientField finite_difference_gradient(const ScalarField& f, const Matrix& x, double h = 1e-5);

/// |a - b|_F / max(|a|_F, |b|_F), 0 when both vanish.
double relative_error(const Matrix& a, const Matrix& b);

}  // namespace soclab
