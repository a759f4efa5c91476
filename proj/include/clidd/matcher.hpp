#pragma once

#include <string>
#include <vector>

#include "clidd/tensor.hpp"

namespace clidd {

struct Match {
  int index_a = 0;
  int index_b = 0;
  float confidence = 0.0f;

  bool operator==(const Match&) const = default;
};

enum class MatchMethod { DualSoftmax, MutualNearest };

/// Correspondences ordered by index_a.
struct MatchSet {
  MatchMethod method = MatchMethod::DualSoftmax;
  std::vector<Match> pairs;
};

/// S = A B^T for unit-norm descriptor rows. Throws ConfigError on a dimension mismatch.
RowMatrixf similarity(const Eigen::Ref<const RowMatrixf>& a, const Eigen::Ref<const RowMatrixf>& b);

struct DualSoftmaxOptions {
  /// Logits are S / temperature. The default 0.05 scales similarities by 20, the usual
  /// dual-softmax matcher setting.
  float temperature = 0.05f;
  float threshold = 0.01f;
};

/// P = softmax_rows(S / T) * softmax_cols(S / T), elementwise.
RowMatrixf dual_softmax_probabilities(const Eigen::Ref<const RowMatrixf>& s, float temperature);

/// Keeps (i, j) when j is the argmax of row i of P, i the argmax of column j and
/// P(i, j) >= threshold. Ties resolve to the lowest index.
MatchSet dual_softmax_match(const Eigen::Ref<const RowMatrixf>& a, const Eigen::Ref<const RowMatrixf>& b,
                            const DualSoftmaxOptions& options = {});

/// Mutual nearest neighbours on S; confidence is the similarity.
MatchSet mnn_match(const Eigen::Ref<const RowMatrixf>& a, const Eigen::Ref<const RowMatrixf>& b);

}  // namespace clidd
