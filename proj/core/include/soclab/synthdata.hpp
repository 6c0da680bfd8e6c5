#pragma once

#include "soclab/geometry.hpp"
#include "soclab/observation_set.hpp"

#include <cstdint>

namespace soclab {

/// Classes grouped into clusters of semantically close prototypes.
struct ClusterSpec {
  Index num_clusters = 2;
  Index classes_per_cluster = 3;
  double intra_similarity = 0.85;  // expected cosine between same-cluster classes
  Index dimension = 64;
  std::uint64_t seed = 0;

  Index num_classes() const noexcept { return num_clusters * classes_per_cluster; }
};

struct ObservationSpec {
  Index samples_per_class = 200;
  double noise_scale = 0.5;
  Index augmentations_per_sample = 64;
  double augmentation_noise = 0.2;
  std::uint64_t seed = 1;
};

/// Each prototype is sqrt(r) a_c + sqrt(1 - r) u_k, with a_c an orthonormal
/// cluster anchor and u_k a random unit direction orthogonal to every anchor.
/// The rows are unit-norm by construction and the expected same-cluster
/// cosine is exactly r = intra_similarity. Throws InfeasibleSpec when the
/// dimension leaves no room for u_k.
PrototypeSet gen_prototypes(const ClusterSpec& spec);

/// Cluster index of every class produced by gen_prototypes().
std::vector<Index> cluster_of_classes(const ClusterSpec& spec);

/// Per class c and sample: base = normalize(t_c + noise_scale * n), then the
/// group holds base followed by augmentations_per_sample - 1 views
/// normalize(base + augmentation_noise * n'). n and n' have i.i.d.
/// N(0, 1/d) coordinates so the noise scales do not depend on d.
ObservationSet gen_observations(const PrototypeSet& p, const ObservationSpec& spec);

}  // namespace soclab
