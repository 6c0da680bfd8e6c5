#include "soclab/dynamics.hpp"

#include "soclab/errors.hpp"
#include "soclab/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace soclab {

namespace {

void check_step(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorKind::kInvalidStep, "eta must be > 0");
}

Matrix slope_matrix(const Matrix& s, ShiftVariant variant, double delta) {
  Matrix g(s.rows(), s.cols());
  if (variant == ShiftVariant::kOtpt) {
    g = 2.0 * s;
  } else {
    g = s.unaryExpr([delta](double v) { return huber_slope(v, delta); });
  }
  g.diagonal().setZero();
  return g;
}

}  // namespace

Matrix pairwise_gradient(const Matrix& prototypes, ShiftVariant variant, double delta) {
  const Matrix s = prototypes * prototypes.transpose();
  return slope_matrix(s, variant, delta) * prototypes;
}

ShiftPrediction predict_shift_exact(const Matrix& similarity, double eta, ShiftVariant variant,
                                    double delta) {
  check_step(eta);
  const Matrix gs = slope_matrix(similarity, variant, delta) * similarity;
  ShiftPrediction out;
  out.delta_s = -eta * (gs + gs.transpose());
  out.variant = variant;
  out.eta = eta;
  out.delta = delta;
  return out;
}

double huber_shift_asymmetry(const Matrix& similarity, double delta) {
  const Matrix gs = slope_matrix(similarity, ShiftVariant::kHuber, delta) * similarity;
  Matrix diff = (gs - gs.transpose()).cwiseAbs();
  diff.diagonal().setZero();
  return diff.maxCoeff();
}

double predict_mu_dominant(double mu, double eta, ShiftVariant variant, double delta) {
  if (!(mu >= 0.0 && mu <= 1.0) || !(eta > 0.0)) {
    throw Error(ErrorKind::kInvalidArgs, "need mu in [0, 1] and eta > 0");
  }
  if (variant == ShiftVariant::kOtpt) return (1.0 - 4.0 * eta) * mu;
  return mu <= delta ? (1.0 - 2.0 * eta) * mu : mu - 2.0 * eta * delta;
}

Matrix step_similarity(const Matrix& prototypes, ShiftVariant variant, double delta, double eta) {
  check_step(eta);
  const Matrix stepped = prototypes - eta * pairwise_gradient(prototypes, variant, delta);
  return stepped * stepped.transpose();
}

Matrix measure_shift(const Matrix& prototypes, ShiftVariant variant, double delta, double eta) {
  return step_similarity(prototypes, variant, delta, eta) - prototypes * prototypes.transpose();
}

DynamicsReport compare_shift(const PrototypeSet& p, ShiftVariant variant, double delta, double eta) {
  const Matrix& t = p.vectors();
  const Matrix s = similarity_matrix(p).entries();
  DynamicsReport report;
  report.predicted = predict_shift_exact(s, eta, variant, delta);
  report.measured = measure_shift(t, variant, delta, eta);
  report.eta = eta;
  Matrix residual = (report.predicted.delta_s - report.measured).cwiseAbs();
  residual.diagonal().setZero();
  report.max_abs_residual = residual.maxCoeff();
  if (variant == ShiftVariant::kHuber) report.gs_asymmetry = huber_shift_asymmetry(s, delta);
  return report;
}

CorollaryReport corollary_check(const PrototypeSet& p, double delta, double eta, double alpha) {
  const Index k = p.num_classes();
  CorollaryReport r;
  r.mu = cosine_coherence(similarity_matrix(p)).mu;
  r.mu_prime_otpt = max_off_diagonal(step_similarity(p.vectors(), ShiftVariant::kOtpt, delta, eta)).mu;
  r.mu_prime_huber = max_off_diagonal(step_similarity(p.vectors(), ShiftVariant::kHuber, delta, eta)).mu;
  r.ordering_holds = r.mu_prime_otpt < r.mu_prime_huber;
  const auto clamp = [](double mu) { return std::clamp(mu, -1.0, 1.0); };
  r.floor_otpt = confidence_floor(k, clamp(r.mu_prime_otpt), alpha);
  r.floor_huber = confidence_floor(k, clamp(r.mu_prime_huber), alpha);
  r.floor_tail_otpt = confidence_floor_tail(k, clamp(r.mu_prime_otpt), alpha);
  r.floor_tail_huber = confidence_floor_tail(k, clamp(r.mu_prime_huber), alpha);
  r.floor_ordering_holds = r.floor_tail_otpt < r.floor_tail_huber && r.floor_otpt >= r.floor_huber;
  return r;
}

PrototypeSet equiangular_set(Index k, double mu) {
  if (k < 2 || !(mu >= 0.0 && mu <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgs, "equiangular set needs k >= 2 and mu in [0, 1]");
  }
  // t_i = sqrt(mu) e_0 + sqrt(1 - mu) e_{i+1}.
  Matrix raw = Matrix::Zero(k, k + 1);
  for (Index i = 0; i < k; ++i) {
    raw(i, 0) = std::sqrt(mu);
    raw(i, i + 1) = std::sqrt(1.0 - mu);
  }
  return PrototypeSet::build(raw);
}

}  // namespace soclab
