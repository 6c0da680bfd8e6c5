#include "soclab/observation_set.hpp"

#include "soclab/errors.hpp"

#include <string>

namespace soclab {

void ObservationSet::validate() const {
  if (!labels.empty() && static_cast<Index>(labels.size()) != embeddings.rows()) {
    throw Error(ErrorKind::kCrossCheckError,
                std::to_string(labels.size()) + " labels for " + std::to_string(embeddings.rows()) +
                    " observation rows");
  }
  Index next = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const ViewGroup& grp = groups[g];
    if (grp.count < 1) {
      throw Error(ErrorKind::kCrossCheckError, "group " + std::to_string(g) + " is empty");
    }
    if (grp.start != next) {
      throw Error(ErrorKind::kCrossCheckError,
                  "group " + std::to_string(g) + " starts at row " + std::to_string(grp.start) +
                      ", expected " + std::to_string(next) + " (groups overlap or leave a gap)");
    }
    next += grp.count;
  }
  if (next != embeddings.rows()) {
    throw Error(ErrorKind::kCrossCheckError,
                "groups cover " + std::to_string(next) + " of " + std::to_string(embeddings.rows()) +
                    " rows");
  }
  if (!labels.empty()) {
    for (const ViewGroup& grp : groups) {
      for (Index r = grp.start; r < grp.start + grp.count; ++r) {
        if (labels[static_cast<std::size_t>(r)] != labels[static_cast<std::size_t>(grp.start)]) {
          throw Error(ErrorKind::kCrossCheckError, "labels differ inside a group");
        }
      }
    }
  }
}

ObservationSet ObservationSet::single_group(std::size_t g) const {
  ObservationSet out;
  out.embeddings = group_rows(g);
  if (!labels.empty()) {
    out.labels.assign(labels.begin() + groups[g].start,
                      labels.begin() + groups[g].start + groups[g].count);
  }
  out.groups = {ViewGroup{0, groups[g].count}};
  return out;
}

std::vector<ViewGroup> singleton_groups(Index rows) {
  std::vector<ViewGroup> out;
  out.reserve(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) out.push_back({r, 1});
  return out;
}

}  // namespace soclab
