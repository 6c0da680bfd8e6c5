#include "soclab/objectives.hpp"

#include "soclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace soclab {

namespace {

constexpr double kUnitTol = 1e-4;
constexpr double kDistributionTol = 1e-6;
constexpr double kRatioEps = 1e-12;

// Softmax of one row of logits with max subtraction.
Vector stable_softmax(const Vector& logits) {
  const double zmax = logits.maxCoeff();
  Vector p = (logits.array() - zmax).exp();
  return p / p.sum();
}

double entropy_unchecked(const Vector& p) {
  double h = 0.0;
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) h -= p[k] * std::log(p[k]);
  }
  return h;
}

// Number of views kept by the confidence filter.
Index kept_count(Index n, double rho) {
  // The epsilon keeps e.g. 0.3 * 10 from flooring to 2.
  const auto m = static_cast<Index>(std::floor(rho * static_cast<double>(n) + 1e-9));
  return std::max<Index>(1, std::min(m, n));
}

// Turns a symmetric pair-weight matrix W (W_ab = dL/ds_ab) into the
// prototype gradient: grad_a = sum_b W_ab t_b.
Matrix pair_weights_to_gradient(const Matrix& weights, const Matrix& prototypes) {
  return weights * prototypes;
}

// dL/ds_ab for the Huber regularizer, including the chain rule through the
// normalization constants (which are themselves off-diagonal entries of S).
Matrix huber_pair_weights(const Matrix& s, const ObjectiveSpec& spec) {
  const Index k = s.rows();
  const Matrix normalized = normalize_similarity(s, spec.normalization);
  const double scale = 2.0 / static_cast<double>(k * (k - 1));

  Matrix w = Matrix::Zero(k, k);
  auto add_pair = [&w](std::pair<Index, Index> ij, double value) {
    w(ij.first, ij.second) += value;
    w(ij.second, ij.first) += value;
  };

  if (spec.normalization == NormalizationStrategy::kNone) {
    for (Index i = 1; i < k; ++i)
      for (Index j = 0; j < i; ++j) add_pair({i, j}, scale * huber_slope(normalized(i, j), spec.delta));
    return w;
  }

  const OffDiagonalRange r = off_diagonal_range(s);
  double d_min = 0.0;
  double d_max = 0.0;
  for (Index i = 1; i < k; ++i) {
    for (Index j = 0; j < i; ++j) {
      const double c = scale * huber_slope(normalized(i, j), spec.delta);
      const double sij = s(i, j);
      switch (spec.normalization) {
        case NormalizationStrategy::kMinMax: {
          const double range = r.max - r.min;
          add_pair({i, j}, c / range);
          d_min += c * (sij - r.max) / (range * range);
          d_max -= c * (sij - r.min) / (range * range);
          break;
        }
        case NormalizationStrategy::kDivMax:
          add_pair({i, j}, c / r.max);
          d_max -= c * sij / (r.max * r.max);
          break;
        case NormalizationStrategy::kShiftMin:
          add_pair({i, j}, c);
          d_min -= c;
          break;
        case NormalizationStrategy::kNone:
          break;
      }
    }
  }
  if (spec.differentiate_normalization) {
    add_pair(r.argmin, d_min);
    add_pair(r.argmax, d_max);
  }
  return w;
}

double otpt_factor(OtptConvention convention) {
  return convention == OtptConvention::kFrobenius ? 2.0 : 1.0;
}

Matrix gram(const Matrix& prototypes) { return prototypes * prototypes.transpose(); }

}  // namespace

void ObjectiveSpec::validate() const {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::kInvalidArgs, "lambda must be >= 0");
  if (!(delta >= 0.0 && delta <= 1.0)) throw Error(ErrorKind::kInvalidArgs, "delta must lie in [0, 1]");
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorKind::kInvalidArgs, "rho must lie in (0, 1]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorKind::kInvalidArgs, "alpha must be > 0");
}

Vector softmax_probs(const Vector& v, const Matrix& prototypes, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::kInvalidArgs, "alpha must be > 0");
  if (v.size() != prototypes.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "embedding and prototype dimensions differ");
  }
  if (std::abs(v.norm() - 1.0) > kUnitTol) {
    throw Error(ErrorKind::kNonUnitInput, "embedding norm is " + std::to_string(v.norm()));
  }
  return stable_softmax(alpha * (prototypes * v));
}

Vector softmax_probs(const Vector& v, const PrototypeSet& p, double alpha) {
  return softmax_probs(v, p.vectors(), alpha);
}

std::vector<Index> confident_views(const Eigen::Ref<const Matrix>& views, const Matrix& prototypes,
                                   double alpha, double rho) {
  const Index n = views.rows();
  if (n < 1) throw Error(ErrorKind::kEmptyGroup, "augmentation group has no views");
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorKind::kInvalidArgs, "rho must lie in (0, 1]");
  std::vector<double> entropy(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    entropy[static_cast<std::size_t>(r)] =
        entropy_unchecked(softmax_probs(views.row(r).transpose(), prototypes, alpha));
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return entropy[static_cast<std::size_t>(a)] < entropy[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(kept_count(n, rho)));
  return order;
}

Vector filtered_mean_probs(const Eigen::Ref<const Matrix>& views, const Matrix& prototypes,
                           const ObjectiveSpec& spec) {
  const std::vector<Index> kept = confident_views(views, prototypes, spec.alpha, spec.rho);
  Vector mean = Vector::Zero(prototypes.rows());
  for (Index r : kept) mean += softmax_probs(views.row(r).transpose(), prototypes, spec.alpha);
  return mean / static_cast<double>(kept.size());
}

double entropy_loss(const Vector& probs) {
  if (probs.size() == 0 || (probs.array() < 0.0).any() ||
      std::abs(probs.sum() - 1.0) > kDistributionTol) {
    throw Error(ErrorKind::kNotADistribution, "entries must be non-negative and sum to 1");
  }
  return entropy_unchecked(probs);
}

ObjectiveValue entropy_objective(const Eigen::Ref<const Matrix>& views, const Matrix& prototypes,
                                 const ObjectiveSpec& spec) {
  const std::vector<Index> kept = confident_views(views, prototypes, spec.alpha, spec.rho);
  const auto m = static_cast<double>(kept.size());
  const Index k = prototypes.rows();

  std::vector<Vector> probs;
  probs.reserve(kept.size());
  Vector mean = Vector::Zero(k);
  for (Index r : kept) {
    probs.push_back(softmax_probs(views.row(r).transpose(), prototypes, spec.alpha));
    mean += probs.back();
  }
  mean /= m;

  // dL/dmean_k = -(log mean_k + 1); the constant drops out after the softmax
  // Jacobian, and classes with mean_k == 0 carry zero weight anyway.
  Vector g(k);
  for (Index c = 0; c < k; ++c) g[c] = mean[c] > 0.0 ? -std::log(mean[c]) : 0.0;

  Matrix grad = Matrix::Zero(k, prototypes.cols());
  for (std::size_t n = 0; n < kept.size(); ++n) {
    const Vector& p = probs[n];
    const double gbar = p.dot(g);
    const Vector dz = p.cwiseProduct((g.array() - gbar).matrix()) / m;
    grad += spec.alpha * dz * views.row(kept[n]);
  }

  ObjectiveValue out;
  out.loss.entropy_term = entropy_unchecked(mean);
  out.loss.total = out.loss.entropy_term;
  out.gradient.per_prototype = std::move(grad);
  return out;
}

double ctpt_penalty(const Matrix& prototypes) {
  const Index k = prototypes.rows();
  if (k < 2) throw Error(ErrorKind::kInvalidArgs, "need K >= 2");
  const Eigen::RowVectorXd centroid = prototypes.colwise().mean();
  double total = 0.0;
  for (Index i = 0; i < k; ++i) total += (centroid - prototypes.row(i)).norm();
  return total / static_cast<double>(k);
}

double otpt_penalty(const Matrix& similarity, OtptConvention convention) {
  double total = 0.0;
  for (double s : lower_triangle(similarity)) total += s * s;
  return otpt_factor(convention) * total;
}

double huber_value(double s, double delta) {
  const double a = std::abs(s);
  return a <= delta ? 0.5 * s * s : delta * (a - 0.5 * delta);
}

double huber_slope(double s, double delta) {
  const double a = std::abs(s);
  if (a <= delta) return s;
  return s > 0.0 ? delta : -delta;
}

double huber_penalty(const Matrix& normalized, double delta) {
  const Index k = normalized.rows();
  if (k < 2) throw Error(ErrorKind::kEmptyOffDiagonal, "need K >= 2");
  double total = 0.0;
  for (double s : lower_triangle(normalized)) total += huber_value(s, delta);
  return 2.0 / static_cast<double>(k * (k - 1)) * total;
}

double regularizer_value(const Matrix& prototypes, const ObjectiveSpec& spec) {
  switch (spec.regularizer) {
    case Regularizer::kNone:
      return 0.0;
    case Regularizer::kCtpt:
      return -ctpt_penalty(prototypes);
    case Regularizer::kOtpt:
      return otpt_penalty(gram(prototypes), spec.otpt_convention);
    case Regularizer::kHuber:
      return huber_penalty(normalize_similarity(gram(prototypes), spec.normalization), spec.delta);
  }
  return 0.0;
}

GradientField regularizer_gradient(const Matrix& prototypes, const ObjectiveSpec& spec) {
  const Index k = prototypes.rows();
  switch (spec.regularizer) {
    case Regularizer::kNone:
      throw Error(ErrorKind::kNoRegularizer, "objective has no regularizer");
    case Regularizer::kCtpt: {
      // d|c - t_i| / dt_j = u_i/|u_i| (1/K - [i == j]) with u_i = c - t_i,
      // and the term is -(1/K) sum_i |u_i|.
      const Eigen::RowVectorXd centroid = prototypes.colwise().mean();
      Matrix unit_dirs(k, prototypes.cols());
      for (Index i = 0; i < k; ++i) {
        const Eigen::RowVectorXd u = centroid - prototypes.row(i);
        const double n = u.norm();
        unit_dirs.row(i) = n > 0.0 ? Eigen::RowVectorXd(u / n) : Eigen::RowVectorXd::Zero(u.size());
      }
      const Eigen::RowVectorXd dir_mean = unit_dirs.colwise().mean();
      Matrix grad(k, prototypes.cols());
      for (Index j = 0; j < k; ++j) grad.row(j) = (unit_dirs.row(j) - dir_mean) / static_cast<double>(k);
      return {grad};
    }
    case Regularizer::kOtpt: {
      Matrix w = 2.0 * otpt_factor(spec.otpt_convention) * gram(prototypes);
      w.diagonal().setZero();
      return {pair_weights_to_gradient(w, prototypes)};
    }
    case Regularizer::kHuber:
      return {pair_weights_to_gradient(huber_pair_weights(gram(prototypes), spec), prototypes)};
  }
  throw Error(ErrorKind::kNoRegularizer, "unknown regularizer");
}

double effective_lambda(const ObjectiveSpec& spec, double entropy_term, double regularizer_term) {
  if (spec.lambda_mode == LambdaMode::kRaw || spec.regularizer == Regularizer::kNone) return spec.lambda;
  return spec.lambda * std::abs(entropy_term) / (std::abs(regularizer_term) + kRatioEps);
}

namespace {

ObjectiveValue add_regularizer(ObjectiveValue entropy, const Matrix& prototypes,
                               const ObjectiveSpec& spec) {
  ObjectiveValue out = std::move(entropy);
  out.loss.regularizer_term = regularizer_value(prototypes, spec);
  out.loss.effective_lambda = effective_lambda(spec, out.loss.entropy_term, out.loss.regularizer_term);
  out.loss.total = out.loss.entropy_term + out.loss.effective_lambda * out.loss.regularizer_term;
  if (spec.regularizer != Regularizer::kNone && out.loss.effective_lambda != 0.0) {
    out.gradient.per_prototype +=
        out.loss.effective_lambda * regularizer_gradient(prototypes, spec).per_prototype;
  }
  return out;
}

}  // namespace

ObjectiveValue composite_objective(const Matrix& prototypes, const Eigen::Ref<const Matrix>& views,
                                   const ObjectiveSpec& spec) {
  spec.validate();
  return add_regularizer(entropy_objective(views, prototypes, spec), prototypes, spec);
}

ObjectiveValue composite_objective(const Matrix& prototypes, const ObservationSet& observations,
                                   const ObjectiveSpec& spec) {
  spec.validate();
  if (observations.groups.empty()) throw Error(ErrorKind::kEmptyGroup, "no augmentation groups");
  ObjectiveValue sum;
  sum.gradient.per_prototype = Matrix::Zero(prototypes.rows(), prototypes.cols());
  for (std::size_t g = 0; g < observations.num_groups(); ++g) {
    const ObjectiveValue part = entropy_objective(observations.group_rows(g), prototypes, spec);
    sum.loss.entropy_term += part.loss.entropy_term;
    sum.gradient.per_prototype += part.gradient.per_prototype;
  }
  const auto groups = static_cast<double>(observations.num_groups());
  sum.loss.entropy_term /= groups;
  sum.gradient.per_prototype /= groups;
  return add_regularizer(std::move(sum), prototypes, spec);
}

GradientField finite_difference_gradient(const ScalarField& f, const Matrix& x, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::kInvalidArgs, "step must be > 0");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return {grad};
}

double relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

}  // namespace soclab
