#include "soclab/errors.hpp"
#include "soclab/observation_set.hpp"

#include <gtest/gtest.h>

namespace soclab {
namespace {

ObservationSet make(Index rows, std::vector<ViewGroup> groups, std::vector<int> labels = {}) {
  ObservationSet o;
  o.embeddings = Matrix::Zero(rows, 3);
  for (Index r = 0; r < rows; ++r) o.embeddings(r, 0) = static_cast<double>(r);
  o.groups = std::move(groups);
  o.labels = std::move(labels);
  return o;
}

ErrorKind validate_kind(const ObservationSet& o) {
  try {
    o.validate();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIoError;  // sentinel: nothing thrown
}

TEST(ObservationSet, ValidPartition) {
  const ObservationSet o = make(5, {{0, 2}, {2, 3}}, {1, 1, 0, 0, 0});
  EXPECT_NO_THROW(o.validate());
  EXPECT_EQ(o.num_groups(), 2u);
  EXPECT_EQ(o.original_row(1), 2);
  EXPECT_EQ(o.group_label(1), 0);
  EXPECT_EQ(o.group_rows(1).rows(), 3);
  EXPECT_TRUE(o.labeled());
  EXPECT_FALSE(make(2, singleton_groups(2)).labeled());
}

TEST(ObservationSet, RejectsBadPartitions) {
  EXPECT_EQ(validate_kind(make(4, {{0, 2}, {1, 2}})), ErrorKind::kCrossCheckError);  // overlap
  EXPECT_EQ(validate_kind(make(4, {{0, 1}, {2, 2}})), ErrorKind::kCrossCheckError);  // gap
  EXPECT_EQ(validate_kind(make(4, {{0, 2}})), ErrorKind::kCrossCheckError);          // short cover
  EXPECT_EQ(validate_kind(make(4, {{0, 2}, {2, 0}, {2, 2}})), ErrorKind::kCrossCheckError);
  EXPECT_EQ(validate_kind(make(3, singleton_groups(3), {0, 1})), ErrorKind::kCrossCheckError);
  EXPECT_EQ(validate_kind(make(2, {{0, 2}}, {0, 1})), ErrorKind::kCrossCheckError);
}

TEST(ObservationSet, SingleGroupIsRebased) {
  const ObservationSet o = make(6, {{0, 1}, {1, 3}, {4, 2}}, {0, 2, 2, 2, 1, 1});
  const ObservationSet g = o.single_group(1);
  EXPECT_NO_THROW(g.validate());
  ASSERT_EQ(g.num_rows(), 3);
  EXPECT_EQ(g.groups, (std::vector<ViewGroup>{{0, 3}}));
  EXPECT_EQ(g.labels, (std::vector<int>{2, 2, 2}));
  EXPECT_EQ(g.embeddings(0, 0), 1.0);
  EXPECT_EQ(g.embeddings(2, 0), 3.0);
}

TEST(ObservationSet, SingletonGroups) {
  EXPECT_EQ(singleton_groups(3), (std::vector<ViewGroup>{{0, 1}, {1, 1}, {2, 1}}));
  EXPECT_TRUE(singleton_groups(0).empty());
}

}  // namespace
}  // namespace soclab
