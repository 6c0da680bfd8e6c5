#include "soclab/synthdata.hpp"

#include "soclab/errors.hpp"

#include <Eigen/QR>

#include <cmath>
#include <random>

namespace soclab {

namespace {

Matrix gaussian(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace

PrototypeSet gen_prototypes(const ClusterSpec& spec) {
  const Index k = spec.num_classes();
  if (spec.num_clusters < 1 || spec.classes_per_cluster < 1 || k < 2) {
    throw Error(ErrorKind::kInfeasibleSpec, "need at least two classes");
  }
  if (!(spec.intra_similarity >= 0.0 && spec.intra_similarity < 1.0)) {
    throw Error(ErrorKind::kInfeasibleSpec, "intra_similarity must lie in [0, 1)");
  }
  if (spec.dimension < spec.num_clusters + 2) {
    throw Error(ErrorKind::kInfeasibleSpec,
                "dimension " + std::to_string(spec.dimension) + " leaves no room for " +
                    std::to_string(spec.num_clusters) + " orthogonal anchors plus perturbations");
  }
  std::mt19937_64 rng(spec.seed);
  const Index d = spec.dimension;

  // Orthonormal anchors from a QR factorization of a Gaussian matrix.
  const Matrix basis_src = gaussian(d, spec.num_clusters, 1.0, rng);
  const Matrix anchors = Eigen::HouseholderQR<Matrix>(basis_src).householderQ() *
                         Matrix::Identity(d, spec.num_clusters);  // d x C, orthonormal columns

  const double a = std::sqrt(spec.intra_similarity);
  const double b = std::sqrt(1.0 - spec.intra_similarity);
  Matrix raw(k, d);
  for (Index c = 0; c < spec.num_clusters; ++c) {
    for (Index j = 0; j < spec.classes_per_cluster; ++j) {
      Vector u = gaussian(d, 1, 1.0, rng);
      u -= anchors * (anchors.transpose() * u);
      u.normalize();
      raw.row(c * spec.classes_per_cluster + j) = (a * anchors.col(c) + b * u).transpose();
    }
  }
  return PrototypeSet::build(raw);
}

std::vector<Index> cluster_of_classes(const ClusterSpec& spec) {
  std::vector<Index> out;
  for (Index c = 0; c < spec.num_clusters; ++c)
    for (Index j = 0; j < spec.classes_per_cluster; ++j) out.push_back(c);
  return out;
}

ObservationSet gen_observations(const PrototypeSet& p, const ObservationSpec& spec) {
  if (spec.samples_per_class < 1 || spec.augmentations_per_sample < 1 || !(spec.noise_scale >= 0.0) ||
      !(spec.augmentation_noise >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgs, "observation counts must be >= 1 and noise >= 0");
  }
  std::mt19937_64 rng(spec.seed);
  const Index k = p.num_classes();
  const Index d = p.dim();
  const Index views = spec.augmentations_per_sample;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  std::normal_distribution<double> dist(0.0, stddev);
  auto noise = [&](double scale) {
    Eigen::RowVectorXd n(d);
    for (Index j = 0; j < d; ++j) n[j] = dist(rng);
    return Eigen::RowVectorXd(scale * n);
  };

  ObservationSet out;
  out.embeddings.resize(k * spec.samples_per_class * views, d);
  out.labels.reserve(static_cast<std::size_t>(out.embeddings.rows()));
  Index row = 0;
  for (Index c = 0; c < k; ++c) {
    for (Index s = 0; s < spec.samples_per_class; ++s) {
      Eigen::RowVectorXd base = p.vectors().row(c) + noise(spec.noise_scale);
      base.normalize();
      out.groups.push_back({row, views});
      out.embeddings.row(row++) = base;
      for (Index a = 1; a < views; ++a) {
        Eigen::RowVectorXd view = base + noise(spec.augmentation_noise);
        out.embeddings.row(row++) = view.normalized();
      }
      out.labels.insert(out.labels.end(), static_cast<std::size_t>(views), static_cast<int>(c));
    }
  }
  return out;
}

}  // namespace soclab
