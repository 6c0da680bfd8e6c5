#include "soclab/geometry.hpp"

#include "soclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace soclab {

namespace {

constexpr double kZeroNormTol = 1e-12;
constexpr double kSymmetryTol = 1e-9;
constexpr double kDiagonalTol = 1e-6;
constexpr double kRangeTol = 1e-12;
// Slack for comparing two values assembled from the same exponentials.
constexpr double kFloorSlack = 1e-12;

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, std::string(what) + " must be square");
  }
}

}  // namespace

PrototypeSet PrototypeSet::build(const Matrix& raw, std::vector<std::string> names) {
  if (raw.rows() < 2 || raw.cols() < 2) {
    throw Error(ErrorKind::kDimensionMismatch, "prototype matrix needs K >= 2 and d >= 2");
  }
  if (static_cast<Index>(names.size()) != raw.rows()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "expected " + std::to_string(raw.rows()) + " class names, got " +
                    std::to_string(names.size()));
  }
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw Error(ErrorKind::kDuplicateName, "class name '" + n + "'");
  }
  Matrix unit = raw;
  for (Index k = 0; k < unit.rows(); ++k) {
    const double norm = unit.row(k).norm();
    if (!std::isfinite(norm)) {
      throw Error(ErrorKind::kNonFiniteValue, "row " + std::to_string(k) + " is not finite");
    }
    if (norm < kZeroNormTol) {
      throw Error(ErrorKind::kZeroVectorRow, "row " + std::to_string(k) + " has zero norm");
    }
    if (norm != 1.0) unit.row(k) /= norm;
  }
  return PrototypeSet(std::move(unit), std::move(names));
}

PrototypeSet PrototypeSet::build(const Matrix& raw) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(raw.rows()));
  for (Index k = 0; k < raw.rows(); ++k) names.push_back("class_" + std::to_string(k));
  return build(raw, std::move(names));
}

PrototypeSet build_prototype_set(const Matrix& raw, std::vector<std::string> names) {
  return PrototypeSet::build(raw, std::move(names));
}

SimilarityMatrix::SimilarityMatrix(Matrix entries) : entries_(std::move(entries)) {
  require_square(entries_, "similarity matrix");
  for (Index i = 0; i < entries_.rows(); ++i) {
    if (std::abs(entries_(i, i) - 1.0) > kDiagonalTol) {
      throw Error(ErrorKind::kInvalidArgs, "similarity diagonal must be 1");
    }
    for (Index j = 0; j < i; ++j) {
      if (std::abs(entries_(i, j) - entries_(j, i)) > kSymmetryTol) {
        throw Error(ErrorKind::kInvalidArgs, "similarity matrix must be symmetric");
      }
    }
  }
}

SimilarityMatrix similarity_matrix(const PrototypeSet& p) {
  Matrix s = p.vectors() * p.vectors().transpose();
  // The product is symmetric up to rounding; make it exact.
  s = (0.5 * (s + s.transpose())).eval();
  return SimilarityMatrix(std::move(s));
}

CoherenceReport max_off_diagonal(const Matrix& m) {
  require_square(m, "matrix");
  if (m.rows() < 2) throw Error(ErrorKind::kEmptyOffDiagonal, "need K >= 2");
  CoherenceReport best{-std::numeric_limits<double>::infinity(), {0, 1}};
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (i == j) continue;
      if (m(i, j) > best.mu) best = {m(i, j), {i, j}};
    }
  }
  return best;
}

CoherenceReport cosine_coherence(const SimilarityMatrix& s) { return max_off_diagonal(s.entries()); }

OffDiagonalRange off_diagonal_range(const Matrix& m) {
  require_square(m, "matrix");
  if (m.rows() < 2) throw Error(ErrorKind::kEmptyOffDiagonal, "need K >= 2");
  OffDiagonalRange r{m(1, 0), m(1, 0), {1, 0}, {1, 0}};
  for (Index i = 1; i < m.rows(); ++i) {
    for (Index j = 0; j < i; ++j) {
      if (m(i, j) < r.min) {
        r.min = m(i, j);
        r.argmin = {i, j};
      }
      if (m(i, j) > r.max) {
        r.max = m(i, j);
        r.argmax = {i, j};
      }
    }
  }
  return r;
}

std::vector<double> lower_triangle(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.rows() * (m.rows() - 1) / 2));
  for (Index i = 1; i < m.rows(); ++i) {
    for (Index j = 0; j < i; ++j) out.push_back(m(i, j));
  }
  return out;
}

Matrix normalize_similarity(const Matrix& s, NormalizationStrategy strategy) {
  if (strategy == NormalizationStrategy::kNone) return s;
  const OffDiagonalRange r = off_diagonal_range(s);
  switch (strategy) {
    case NormalizationStrategy::kMinMax:
      if (r.max - r.min <= kRangeTol) {
        throw Error(ErrorKind::kDegenerateRange, "all off-diagonal similarities are equal");
      }
      return (s.array() - r.min) / (r.max - r.min);
    case NormalizationStrategy::kDivMax:
      if (std::abs(r.max) <= kRangeTol) {
        throw Error(ErrorKind::kZeroMax, "maximum off-diagonal similarity is zero");
      }
      return s / r.max;
    case NormalizationStrategy::kShiftMin:
      return s.array() - r.min;
    case NormalizationStrategy::kNone:
      break;
  }
  return s;
}

double margin_from_percentile(const Matrix& normalized, double q) {
  require_square(normalized, "matrix");
  if (normalized.rows() < 2) throw Error(ErrorKind::kEmptyOffDiagonal, "need K >= 2");
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorKind::kInvalidArgs, "percentile must lie in (0, 1)");
  std::vector<double> values = lower_triangle(normalized);
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double huber_margin(const PrototypeSet& p, NormalizationStrategy strategy, double q) {
  return margin_from_percentile(normalize_similarity(similarity_matrix(p).entries(), strategy), q);
}

namespace {

void check_floor_args(Index k, double mu, double alpha) {
  if (k < 2 || !(mu >= -1.0 && mu <= 1.0) || !(alpha > 0.0)) {
    throw Error(ErrorKind::kInvalidArgs, "confidence floor needs k >= 2, mu in [-1, 1], alpha > 0");
  }
}

}  // namespace

double confidence_floor(Index k, double mu, double alpha) {
  check_floor_args(k, mu, alpha);
  return 1.0 / (1.0 + static_cast<double>(k - 1) * std::exp(-alpha * (1.0 - mu)));
}

double confidence_floor_tail(Index k, double mu, double alpha) {
  check_floor_args(k, mu, alpha);
  const double tail = static_cast<double>(k - 1) * std::exp(-alpha * (1.0 - mu));
  return tail / (1.0 + tail);
}

FloorReport verify_confidence_floor(const PrototypeSet& p, double alpha) {
  const SimilarityMatrix s = similarity_matrix(p);
  const Index k = s.size();
  FloorReport report;
  report.mu = cosine_coherence(s).mu;
  report.alpha = alpha;
  const double floor = confidence_floor(k, report.mu, alpha);
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < k; ++i) {
    // Logits at v = t_i are alpha * s_ij.
    const Eigen::ArrayXd z = alpha * s.entries().row(i).transpose().array();
    const double zmax = z.maxCoeff();
    const double observed = 1.0 / (z - zmax).exp().sum();
    FloorCheck check{i, observed, floor, observed - floor, observed >= floor - kFloorSlack};
    report.worst_margin = std::min(report.worst_margin, check.margin);
    report.all_pass = report.all_pass && check.pass;
    report.classes.push_back(check);
  }
  return report;
}

}  // namespace soclab
