#include "clidd/matcher.hpp"

namespace clidd {

namespace {

// Mutual argmax of `scores`, first index wins ties.
template <typename Keep>
std::vector<Match> mutual_argmax(const RowMatrixf& scores, Keep keep) {
  const auto rows = scores.rows(), cols = scores.cols();
  std::vector<Eigen::Index> row_best(std::size_t(rows), 0), col_best(std::size_t(cols), 0);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 1; j < cols; ++j)
      if (scores(i, j) > scores(i, row_best[std::size_t(i)])) row_best[std::size_t(i)] = j;
  for (Eigen::Index i = 1; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (scores(i, j) > scores(col_best[std::size_t(j)], j)) col_best[std::size_t(j)] = i;

  std::vector<Match> pairs;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index j = row_best[std::size_t(i)];
    if (col_best[std::size_t(j)] != i) continue;
    if (!keep(scores(i, j))) continue;
    pairs.push_back({int(i), int(j), scores(i, j)});
  }
  return pairs;
}

}  // namespace

RowMatrixf similarity(const Eigen::Ref<const RowMatrixf>& a, const Eigen::Ref<const RowMatrixf>& b) {
  if (a.cols() != b.cols()) {
    throw ConfigError("descriptor dimensions differ: " + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.cols()));
  }
  RowMatrixf s(a.rows(), b.rows());
  s.noalias() = a * b.transpose();
  return s;
}

RowMatrixf dual_softmax_probabilities(const Eigen::Ref<const RowMatrixf>& s, float temperature) {
  const RowMatrixf logits = s / temperature;
  return softmax_rows(logits).cwiseProduct(softmax_cols(logits));
}

MatchSet dual_softmax_match(const Eigen::Ref<const RowMatrixf>& a, const Eigen::Ref<const RowMatrixf>& b,
                            const DualSoftmaxOptions& options) {
  MatchSet result{MatchMethod::DualSoftmax, {}};
  const RowMatrixf s = similarity(a, b);
  if (s.size() == 0) return result;
  const RowMatrixf p = dual_softmax_probabilities(s, options.temperature);
  result.pairs = mutual_argmax(p, [&](float v) { return v >= options.threshold; });
  return result;
}

MatchSet mnn_match(const Eigen::Ref<const RowMatrixf>& a, const Eigen::Ref<const RowMatrixf>& b) {
  MatchSet result{MatchMethod::MutualNearest, {}};
  const RowMatrixf s = similarity(a, b);
  if (s.size() == 0) return result;
  result.pairs = mutual_argmax(s, [](float) { return true; });
  return result;
}

}  // namespace clidd
