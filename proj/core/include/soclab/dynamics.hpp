#pragma once

#include "soclab/geometry.hpp"

namespace soclab {

// One-step similarity dynamics of the bare pairwise penalties: no lambda, no
// 2/(K(K-1)) averaging, no similarity normalization.
//   O-TPT:  grad_i = 2 sum_{k!=i} s_ik t_k
//   Huber:  grad_i =   sum_{k!=i} g(s_ik) t_k,  g(s) = sign(s) min(|s|, delta)

enum class ShiftVariant { kOtpt, kHuber };

struct ShiftPrediction {
  Matrix delta_s;  // off-diagonal entries are meaningful
  ShiftVariant variant = ShiftVariant::kOtpt;
  double eta = 0.0;
  double delta = 0.0;
};

/// Unaveraged pairwise-penalty gradient with respect to each prototype row.
Matrix pairwise_gradient(const Matrix& prototypes, ShiftVariant variant, double delta);

/// First-order prediction over all pairs:
///   O-TPT: -4 eta (S0 S)_ij, S0 = S with zero diagonal
///   Huber: -eta [(G S)_ij + (G S)_ji], G = g(S) with zero diagonal
ShiftPrediction predict_shift_exact(const Matrix& similarity, double eta, ShiftVariant variant,
                                    double delta);

/// Largest |(G S)_ij - (G S)_ji| over i != j. Nonzero whenever the
/// one-sided -2 eta (G S) form would disagree with the symmetrized predictor.
double huber_shift_asymmetry(const Matrix& similarity, double delta);

/// Dominant-pair update of the coherence:
///   O-TPT: (1 - 4 eta) mu
///   Huber: (1 - 2 eta) mu if mu <= delta, else mu - 2 eta delta
double predict_mu_dominant(double mu, double eta, ShiftVariant variant, double delta);

/// Applies t_i <- t_i - eta grad_i without renormalizing and returns the
/// inner-product matrix after the step.
Matrix step_similarity(const Matrix& prototypes, ShiftVariant variant, double delta, double eta);

/// s' - s for one such step.
Matrix measure_shift(const Matrix& prototypes, ShiftVariant variant, double delta, double eta);

struct DynamicsReport {
  ShiftPrediction predicted;
  Matrix measured;
  double max_abs_residual = 0.0;
  double eta = 0.0;
  // Only populated for the Huber variant; see huber_shift_asymmetry().
  double gs_asymmetry = 0.0;
};

DynamicsReport compare_shift(const PrototypeSet& p, ShiftVariant variant, double delta, double eta);

struct CorollaryReport {
  double mu = 0.0;
  double mu_prime_otpt = 0.0;
  double mu_prime_huber = 0.0;
  bool ordering_holds = false;  // mu'_otpt < mu'_huber
  double floor_otpt = 0.0;
  double floor_huber = 0.0;
  // 1 - floor, so that floors rounding to 1.0 can still be ordered.
  double floor_tail_otpt = 0.0;
  double floor_tail_huber = 0.0;
  bool floor_ordering_holds = false;  // floor_otpt strictly above floor_huber
};

/// One measured step per variant on copies of `p`; coherences are read off
/// the post-step inner products.
CorollaryReport corollary_check(const PrototypeSet& p, double delta, double eta, double alpha = 100.0);

/// K unit vectors in R^(K+1) whose pairwise cosine similarity is exactly mu.
PrototypeSet equiangular_set(Index k, double mu);

}  // namespace soclab
