#include "clidd/losses.hpp"

#include <algorithm>
#include <cmath>

#include "clidd/config.hpp"

namespace clidd {

namespace {

Eigen::MatrixXd softmax_rows_d(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Eigen::RowVectorXd e = (m.row(i).array() - m.row(i).maxCoeff()).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

}  // namespace

double dual_softmax_loss(const MatrixRef& d_a, const MatrixRef& d_b, const VectorRef& mask, double temperature) {
  if (d_a.rows() != d_b.rows() || d_a.cols() != d_b.cols() || mask.size() != d_a.rows())
    throw ConfigError("dual_softmax_loss: descriptor matrices and mask must agree in size");
  const double visible = mask.sum();
  if (visible <= 0.0) throw ConfigError("dual_softmax_loss: no visible correspondences");

  const Eigen::MatrixXd logits = (d_a * d_b.transpose()) / temperature;
  const Eigen::MatrixXd rows = softmax_rows_d(logits);
  const Eigen::MatrixXd cols = softmax_rows_d(logits.transpose()).transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (mask(i) == 0.0) continue;
    total += mask(i) * std::log(rows(i, i) * cols(i, i) + kLogEpsilon);
  }
  return -total / visible;
}

LowRankTeacher lra_compress(const MatrixRef& teacher, Eigen::Index target_dim) {
  if (target_dim < 1 || teacher.rows() < target_dim || teacher.cols() < target_dim)
    throw ConfigError("lra_compress: need at least target_dim rows and columns");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(teacher, Eigen::ComputeThinU);
  if (svd.info() != Eigen::Success) throw NumericError("lra_compress: SVD did not converge");

  Eigen::MatrixXd u = svd.matrixU().leftCols(target_dim);
  for (Eigen::Index c = 0; c < target_dim; ++c) {
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      if (std::abs(u(r, c)) > 1e-12) {
        if (u(r, c) < 0) u.col(c) = -u.col(c);
        break;
      }
    }
  }
  LowRankTeacher out;
  out.singular_values = svd.singularValues();
  out.compressed = u * out.singular_values.head(target_dim).asDiagonal();
  // Rows of an all-zero teacher come back as rounding noise; snap them to zero.
  const double floor = 1e-12 * std::max(1.0, out.compressed.rowwise().norm().maxCoeff());
  for (Eigen::Index r = 0; r < out.compressed.rows(); ++r)
    if (out.compressed.row(r).norm() <= floor) out.compressed.row(r).setZero();
  out.normalized = out.compressed;
  out.zero_rows = l2_normalize_rows(out.normalized);
  return out;
}

Eigen::MatrixXd opp_solve(const MatrixRef& d_a, const MatrixRef& reference) {
  if (d_a.cols() != reference.cols() || d_a.rows() != reference.rows())
    throw ConfigError("opp_solve: matrices must have the same shape");
  const Eigen::MatrixXd correlation = d_a.transpose() * reference;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(correlation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericError("opp_solve: SVD did not converge");
  return svd.matrixV() * svd.matrixU().transpose();
}

double op_loss(const MatrixRef& d_a, const MatrixRef& d_n, const MatrixRef& omega) {
  if (d_a.rows() != d_n.rows()) throw ConfigError("op_loss: row counts differ");
  const Eigen::MatrixXd aligned = d_n * omega;
  double total = 0.0;
  for (Eigen::Index i = 0; i < d_a.rows(); ++i) {
    const double r = 1.0 - aligned.row(i).dot(d_a.row(i));
    total += r * r;
  }
  return total;
}

double orthogonal_procrustes_loss(const MatrixRef& d_a, const LowRankTeacher& teacher, ProcrustesTarget target) {
  const Eigen::MatrixXd& solve_against =
      target == ProcrustesTarget::Normalized ? teacher.normalized : teacher.compressed;
  return op_loss(d_a, teacher.normalized, opp_solve(d_a, solve_against));
}

double gram_residual(const MatrixRef& d_a, const MatrixRef& reference) {
  if (d_a.rows() != reference.rows()) throw ConfigError("gram_residual: row counts differ");
  return (d_a * d_a.transpose() - reference * reference.transpose()).squaredNorm();
}

double unfold_softmax_loss(const FeatureMapf& student_logits, const FeatureMapf& teacher_logits, int window) {
  if (!student_logits.same_shape(teacher_logits) || student_logits.channels != 1)
    throw ShapeError("unfold_softmax_loss: maps must be single-channel and the same size");
  if (window < 1 || student_logits.height % window != 0 || student_logits.width % window != 0 ||
      student_logits.height == 0 || student_logits.width == 0)
    throw ShapeError("unfold_softmax_loss: map size must be a positive multiple of the window");

  const int tiles_y = student_logits.height / window;
  const int tiles_x = student_logits.width / window;
  const int cells = window * window;
  Eigen::VectorXd s(cells), t(cells);
  double total = 0.0;
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      for (int dy = 0; dy < window; ++dy) {
        for (int dx = 0; dx < window; ++dx) {
          s(dy * window + dx) = student_logits(ty * window + dy, tx * window + dx, 0);
          t(dy * window + dx) = teacher_logits(ty * window + dy, tx * window + dx, 0);
        }
      }
      const Eigen::VectorXd log_q = s.array() - s.maxCoeff() - std::log((s.array() - s.maxCoeff()).exp().sum());
      const Eigen::VectorXd p = (t.array() - t.maxCoeff()).exp();
      total -= (p / p.sum()).dot(log_q);
    }
  }
  return total / double(tiles_x * tiles_y);
}

LossWeights loss_weights(std::string_view preset_name) {
  if (preset_name == "A48") return {0.05, 1.0, 1.0};
  if (preset_name == "N64") return {0.1, 1.0, 1.0};
  if (preset_name == "T64") return {0.5, 1.0, 1.0};
  if (preset_id(preset_name) >= 0) return {1.0, 0.0, 1.0};
  throw ConfigError("unknown model config '" + std::string(preset_name) + "'");
}

double total_loss(double l_ds, double l_op, double l_us, const LossWeights& weights) {
  if (weights.ds < 0 || weights.op < 0 || weights.us < 0) throw ConfigError("loss weights must be non-negative");
  return weights.ds * l_ds + weights.op * l_op + weights.us * l_us;
}

}  // namespace clidd
