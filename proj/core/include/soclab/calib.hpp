#pragma once

#include "soclab/geometry.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace soclab {

struct CalibrationRecord {
  double confidence = 0.0;
  int predicted = 0;
  int label = 0;

  bool correct() const noexcept { return predicted == label; }
  friend bool operator==(const CalibrationRecord&, const CalibrationRecord&) = default;
};

inline constexpr int kDefaultBins = 15;

/// kMeanConfidence compares per-bin accuracy with the bin's mean confidence.
/// kMedianMidpoint compares it with the bin's midpoint instead.
enum class EceVariant { kMeanConfidence, kMedianMidpoint };

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_confidence;  // absent for empty bins
  std::optional<double> accuracy;
};

/// Equal-width bin index: [i/B, (i+1)/B), with 1.0 in the top bin.
int confidence_bin(double confidence, int num_bins);

std::vector<ReliabilityBin> reliability_report(std::span<const CalibrationRecord> records,
                                               int num_bins = kDefaultBins);

double ece(std::span<const CalibrationRecord> records, int num_bins = kDefaultBins,
           EceVariant variant = EceVariant::kMeanConfidence);

/// Equal-mass bins over the confidence-sorted records (stable on ties); bin
/// sizes differ by at most one, larger bins first.
double ace(std::span<const CalibrationRecord> records, int num_bins = kDefaultBins);

/// Sizes used by ace() for M records.
std::vector<std::size_t> ace_bin_sizes(std::size_t records, int num_bins);

double accuracy(std::span<const CalibrationRecord> records);

struct SelectivePoint {
  double threshold = 0.0;
  double coverage = 0.0;
  std::size_t selected = 0;
  std::optional<double> accuracy;  // absent when nothing is selected
};

/// Keeps records with confidence strictly above each threshold.
std::vector<SelectivePoint> selective_accuracy(std::span<const CalibrationRecord> records,
                                               std::span<const double> thresholds);

struct PairErrorEntry {
  int predicted = 0;
  int label = 0;
  std::size_t count = 0;
  double mean_error_confidence = 0.0;
  double zero_shot_similarity = 0.0;
};

/// Groups wrong predictions by (predicted, label). Every grouped record is an
/// error, so the per-pair calibration gap is just the mean confidence. Sorted
/// by zero-shot similarity, highest first.
std::vector<PairErrorEntry> pair_error_confidence(std::span<const CalibrationRecord> records,
                                                  const SimilarityMatrix& zero_shot);

}  // namespace soclab
