#pragma once

#include "soclab/geometry.hpp"

#include <cstddef>
#include <vector>

namespace soclab {

/// A contiguous block of rows holding the views of one test sample. The
/// first row of a group is the original (non-augmented) view.
struct ViewGroup {
  Index start = 0;
  Index count = 0;

  friend bool operator==(const ViewGroup&, const ViewGroup&) = default;
};

/// N unit-norm visual embeddings, optional labels (one per row) and the
/// augmentation grouping.
struct ObservationSet {
  Matrix embeddings;
  std::vector<int> labels;
  std::vector<ViewGroup> groups;

  Index num_rows() const noexcept { return embeddings.rows(); }
  std::size_t num_groups() const noexcept { return groups.size(); }
  bool labeled() const noexcept { return !labels.empty(); }

  auto group_rows(std::size_t g) const {
    return embeddings.middleRows(groups[g].start, groups[g].count);
  }
  Index original_row(std::size_t g) const { return groups[g].start; }
  int group_label(std::size_t g) const { return labels[static_cast<std::size_t>(groups[g].start)]; }

  /// Throws CrossCheckError unless labels match rows and groups partition
  /// [0, N) in order with no gaps or overlaps.
  void validate() const;

  /// A copy holding only group g, re-based to start at row 0.
  ObservationSet single_group(std::size_t g) const;
};

/// One group per row.
std::vector<ViewGroup> singleton_groups(Index rows);

}  // namespace soclab
