#pragma once

// Forward evaluators of the three training objectives and their weighted sum. Everything is
// computed in double precision; no gradients.

#include <Eigen/Dense>

#include <string_view>
#include <vector>

#include "clidd/tensor.hpp"

namespace clidd {

using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

inline constexpr double kDualSoftmaxTemperature = 20.0;
inline constexpr double kLogEpsilon = 1e-12;

/// Negative log-likelihood of the visible ground-truth pairs (row i of `d_a` with row i of
/// `d_b`) under P = softmax_rows(S / T) * softmax_cols(S / T), S = d_a d_b^T:
///   L = -(1 / sum m) * sum_i m_i * log(P_ii + eps)
/// Throws ConfigError when no pair is visible or shapes disagree.
double dual_softmax_loss(const MatrixRef& d_a, const MatrixRef& d_b, const VectorRef& mask,
                         double temperature = kDualSoftmaxTemperature);

/// Truncated SVD of the teacher descriptors.
struct LowRankTeacher {
  Eigen::MatrixXd compressed;  // U_C * Sigma_C, rows x target_dim
  Eigen::MatrixXd normalized;  // compressed with unit rows
  Eigen::VectorXd singular_values;  // all of them, descending
  std::vector<Eigen::Index> zero_rows;
};

/// Keeps the `target_dim` leading singular triplets. Each left singular vector is signed so
/// that its first non-zero entry is positive. Throws NumericError if the SVD fails and
/// ConfigError if rows < target_dim.
LowRankTeacher lra_compress(const MatrixRef& teacher, Eigen::Index target_dim);

/// Orthogonal Omega maximising tr(d_a^T reference Omega), i.e. the best rotation/reflection
/// taking `reference` onto `d_a`: Omega = V_p U_p^T with U_p S V_p^T = svd(d_a^T reference).
Eigen::MatrixXd opp_solve(const MatrixRef& d_a, const MatrixRef& reference);

/// sum_i (1 - (d_n Omega d_a^T)_ii)^2
double op_loss(const MatrixRef& d_a, const MatrixRef& d_n, const MatrixRef& omega);

enum class ProcrustesTarget {
  /// Solve Omega against the normalised rows and evaluate with them (default).
  Normalized,
  /// Solve against the unnormalised low-rank rows, evaluate with the normalised ones.
  Mixed,
};

/// Solves for Omega and evaluates op_loss in one go.
double orthogonal_procrustes_loss(const MatrixRef& d_a, const LowRankTeacher& teacher,
                                  ProcrustesTarget target = ProcrustesTarget::Normalized);

/// || d_a d_a^T - reference reference^T ||_F^2
double gram_residual(const MatrixRef& d_a, const MatrixRef& reference);

/// Both maps are split into window x window tiles; each tile is a classification over its
/// cells. Returns the mean over tiles of the cross-entropy between softmax(teacher tile) and
/// softmax(student tile).
double unfold_softmax_loss(const FeatureMapf& student_logits, const FeatureMapf& teacher_logits, int window = 8);

struct LossWeights {
  double ds = 1.0;
  double op = 0.0;
  double us = 1.0;
};

/// Per-variant weights used for training the published presets.
LossWeights loss_weights(std::string_view preset_name);

double total_loss(double l_ds, double l_op, double l_us, const LossWeights& weights);

}  // namespace clidd
