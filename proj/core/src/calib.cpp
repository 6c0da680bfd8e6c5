#include "soclab/calib.hpp"

#include "soclab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace soclab {

namespace {

void require_records(std::span<const CalibrationRecord> records) {
  if (records.empty()) throw Error(ErrorKind::kEmptyRecords, "no calibration records");
}

void require_bins(int num_bins) {
  if (num_bins < 1) throw Error(ErrorKind::kInvalidArgs, "need at least one bin");
}

double gap_sum(const std::vector<ReliabilityBin>& bins, std::size_t total, EceVariant variant) {
  double sum = 0.0;
  for (const ReliabilityBin& b : bins) {
    if (b.count == 0) continue;
    const double reference =
        variant == EceVariant::kMeanConfidence ? *b.mean_confidence : 0.5 * (b.lower + b.upper);
    sum += static_cast<double>(b.count) / static_cast<double>(total) * std::abs(*b.accuracy - reference);
  }
  return sum;
}

}  // namespace

int confidence_bin(double confidence, int num_bins) {
  const auto edge = [num_bins](int i) { return static_cast<double>(i) / num_bins; };
  auto idx = static_cast<int>(std::floor(confidence * num_bins));
  idx = std::clamp(idx, 0, num_bins - 1);
  // Rounding in confidence * B can land one bin off near the edges.
  if (idx > 0 && confidence < edge(idx)) --idx;
  if (idx < num_bins - 1 && confidence >= edge(idx + 1)) ++idx;
  return idx;
}

std::vector<ReliabilityBin> reliability_report(std::span<const CalibrationRecord> records,
                                               int num_bins) {
  require_records(records);
  require_bins(num_bins);
  std::vector<double> conf_sum(static_cast<std::size_t>(num_bins), 0.0);
  std::vector<std::size_t> correct(static_cast<std::size_t>(num_bins), 0);
  std::vector<ReliabilityBin> bins(static_cast<std::size_t>(num_bins));
  for (int i = 0; i < num_bins; ++i) {
    bins[static_cast<std::size_t>(i)].lower = static_cast<double>(i) / num_bins;
    bins[static_cast<std::size_t>(i)].upper = static_cast<double>(i + 1) / num_bins;
  }
  for (const CalibrationRecord& r : records) {
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
      throw Error(ErrorKind::kInvalidArgs, "confidence outside [0, 1]");
    }
    const auto b = static_cast<std::size_t>(confidence_bin(r.confidence, num_bins));
    ++bins[b].count;
    conf_sum[b] += r.confidence;
    if (r.correct()) ++correct[b];
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].count == 0) continue;
    const auto n = static_cast<double>(bins[b].count);
    bins[b].mean_confidence = conf_sum[b] / n;
    bins[b].accuracy = static_cast<double>(correct[b]) / n;
  }
  return bins;
}

double ece(std::span<const CalibrationRecord> records, int num_bins, EceVariant variant) {
  return gap_sum(reliability_report(records, num_bins), records.size(), variant);
}

std::vector<std::size_t> ace_bin_sizes(std::size_t records, int num_bins) {
  require_bins(num_bins);
  const auto bins = static_cast<std::size_t>(num_bins);
  if (bins > records) throw Error(ErrorKind::kTooManyBins, "more bins than records");
  std::vector<std::size_t> sizes(bins, records / bins);
  for (std::size_t i = 0; i < records % bins; ++i) ++sizes[i];
  return sizes;
}

double ace(std::span<const CalibrationRecord> records, int num_bins) {
  require_records(records);
  const std::vector<std::size_t> sizes = ace_bin_sizes(records.size(), num_bins);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].confidence < records[b].confidence;
  });
  const auto total = static_cast<double>(records.size());
  double sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t n : sizes) {
    double conf = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      conf += records[order[i]].confidence;
      if (records[order[i]].correct()) ++correct;
    }
    const auto count = static_cast<double>(n);
    sum += count / total * std::abs(static_cast<double>(correct) / count - conf / count);
    pos += n;
  }
  return sum;
}

double accuracy(std::span<const CalibrationRecord> records) {
  require_records(records);
  const auto correct = std::count_if(records.begin(), records.end(),
                                     [](const CalibrationRecord& r) { return r.correct(); });
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

std::vector<SelectivePoint> selective_accuracy(std::span<const CalibrationRecord> records,
                                               std::span<const double> thresholds) {
  std::vector<SelectivePoint> out;
  out.reserve(thresholds.size());
  for (double tau : thresholds) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorKind::kInvalidArgs, "threshold outside [0, 1]");
    SelectivePoint pt;
    pt.threshold = tau;
    std::size_t correct = 0;
    for (const CalibrationRecord& r : records) {
      if (r.confidence > tau) {
        ++pt.selected;
        if (r.correct()) ++correct;
      }
    }
    pt.coverage = records.empty() ? 0.0
                                  : static_cast<double>(pt.selected) / static_cast<double>(records.size());
    if (pt.selected > 0) pt.accuracy = static_cast<double>(correct) / static_cast<double>(pt.selected);
    out.push_back(pt);
  }
  return out;
}

std::vector<PairErrorEntry> pair_error_confidence(std::span<const CalibrationRecord> records,
                                                  const SimilarityMatrix& zero_shot) {
  const auto k = static_cast<int>(zero_shot.size());
  std::map<std::pair<int, int>, std::pair<std::size_t, double>> groups;
  for (const CalibrationRecord& r : records) {
    if (r.predicted < 0 || r.predicted >= k || r.label < 0 || r.label >= k) {
      throw Error(ErrorKind::kLabelOutOfRange, "record class index outside the similarity matrix");
    }
    if (r.correct()) continue;
    auto& g = groups[{r.predicted, r.label}];
    ++g.first;
    g.second += r.confidence;
  }
  std::vector<PairErrorEntry> out;
  out.reserve(groups.size());
  for (const auto& [pair, acc] : groups) {
    out.push_back({pair.first, pair.second, acc.first, acc.second / static_cast<double>(acc.first),
                   zero_shot(pair.first, pair.second)});
  }
  std::stable_sort(out.begin(), out.end(), [](const PairErrorEntry& a, const PairErrorEntry& b) {
    return a.zero_shot_similarity > b.zero_shot_similarity;
  });
  return out;
}

}  // namespace soclab
