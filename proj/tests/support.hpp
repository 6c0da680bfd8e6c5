#pragma once

#include "soclab/calib.hpp"
#include "soclab/geometry.hpp"
#include "soclab/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace soclab::testing {

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Matrix unit_rows(Index rows, Index cols, std::mt19937_64& rng) {
  Matrix m = gaussian(rows, cols, rng);
  m.rowwise().normalize();
  return m;
}

inline PrototypeSet random_prototypes(Index k, Index d, std::mt19937_64& rng) {
  return PrototypeSet::build(unit_rows(k, d, rng));
}

// Views scattered around one prototype so the softmax is not saturated to a
// single class for every view.
inline Matrix views_near(const Matrix& prototypes, Index row, Index n, double spread, std::mt19937_64& rng) {
  Matrix v = gaussian(n, prototypes.cols(), rng) * spread;
  v.rowwise() += prototypes.row(row);
  v.rowwise().normalize();
  return v;
}

inline std::vector<CalibrationRecord> random_records(std::size_t m, int classes, std::mt19937_64& rng,
                                                     bool coarse = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::vector<CalibrationRecord> out(m);
  for (auto& r : out) {
    // Coarse confidences produce many ties and exact bin edges.
    r.confidence = coarse ? std::round(u(rng) * 20.0) / 20.0 : u(rng);
    r.predicted = cls(rng);
    r.label = u(rng) < r.confidence ? r.predicted : cls(rng);
  }
  return out;
}

// Brute-force equal-width ECE: every record is dropped into its bin by
// direct comparison against the bin edges.
inline double oracle_ece(const std::vector<CalibrationRecord>& records, int bins) {
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins;
    const double hi = static_cast<double>(b + 1) / bins;
    double conf = 0.0, hits = 0.0, n = 0.0;
    for (const auto& r : records) {
      const bool in = (r.confidence >= lo && r.confidence < hi) || (b == bins - 1 && r.confidence >= hi);
      if (!in) continue;
      conf += r.confidence;
      hits += r.correct() ? 1.0 : 0.0;
      n += 1.0;
    }
    if (n > 0) total += n / static_cast<double>(records.size()) * std::abs(hits / n - conf / n);
  }
  return total;
}

inline double oracle_ace(std::vector<CalibrationRecord> records, int bins) {
  std::stable_sort(records.begin(), records.end(),
                   [](const CalibrationRecord& a, const CalibrationRecord& b) { return a.confidence < b.confidence; });
  const std::size_t m = records.size();
  const std::size_t base = m / static_cast<std::size_t>(bins);
  const std::size_t extra = m % static_cast<std::size_t>(bins);
  double total = 0.0;
  std::size_t pos = 0;
  for (int b = 0; b < bins; ++b) {
    const std::size_t n = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
    double conf = 0.0, hits = 0.0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      conf += records[i].confidence;
      hits += records[i].correct() ? 1.0 : 0.0;
    }
    pos += n;
    if (n > 0) total += static_cast<double>(n) / static_cast<double>(m) * std::abs(hits / n - conf / n);
  }
  return total;
}

// Entropy of the mean softmax over a fixed set of view rows.
inline double oracle_entropy(const Matrix& views, const std::vector<Index>& keep, const Matrix& x, double alpha) {
  Vector mean = Vector::Zero(x.rows());
  for (Index r : keep) {
    Vector z = alpha * (x * views.row(r).transpose());
    z.array() -= z.maxCoeff();
    Vector e = z.array().exp();
    mean += e / e.sum();
  }
  mean /= static_cast<double>(keep.size());
  double h = 0.0;
  for (Index k = 0; k < mean.size(); ++k)
    if (mean[k] > 0) h -= mean[k] * std::log(mean[k]);
  return h;
}

inline double oracle_huber(double s, double delta) {
  const double a = std::abs(s);
  return a <= delta ? 0.5 * s * s : delta * (a - 0.5 * delta);
}

// Huber penalty with the MIN_MAX constants frozen at the values of `base`.
inline double oracle_frozen_huber(const Matrix& x, const Matrix& base, double delta) {
  const Matrix s0 = base * base.transpose();
  const Index k = x.rows();
  double lo = 1e300, hi = -1e300;
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < i; ++j) {
      lo = std::min(lo, s0(i, j));
      hi = std::max(hi, s0(i, j));
    }
  const Matrix s = x * x.transpose();
  double sum = 0.0;
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < i; ++j) sum += oracle_huber((s(i, j) - lo) / (hi - lo), delta);
  return 2.0 * sum / static_cast<double>(k * (k - 1));
}

// True when any normalized pair sits within `gap` of the Huber kink, or when
// the min/max pairs are nearly tied (where the normalization is not smooth).
inline bool near_kink(const Matrix& x, double delta,
                      NormalizationStrategy strategy = NormalizationStrategy::kMinMax, double gap = 1e-3) {
  const Matrix s = x * x.transpose();
  std::vector<double> off;
  for (Index i = 0; i < s.rows(); ++i)
    for (Index j = 0; j < i; ++j) off.push_back(s(i, j));
  std::sort(off.begin(), off.end());
  if (off.size() >= 2 && (off[1] - off[0] < gap || off[off.size() - 1] - off[off.size() - 2] < gap)) return true;
  const Matrix n = normalize_similarity(s, strategy);
  for (Index i = 0; i < n.rows(); ++i)
    for (Index j = 0; j < i; ++j)
      if (std::abs(std::abs(n(i, j)) - delta) < gap) return true;
  return false;
}

}  // namespace soclab::testing
