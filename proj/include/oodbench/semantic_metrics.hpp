#ifndef OODBENCH_SEMANTIC_METRICS_HPP
#define OODBENCH_SEMANTIC_METRICS_HPP

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "benchforge.hpp"
#include "error.hpp"

namespace oodbench::metrics {

/// Best (Wu-Palmer + path)/2 over the synsets of the two classes.
inline double prediction_similarity(const bench::ClassKey& gt, const bench::ClassKey& pred,
                                    const bench::ClassMapping& mapping,
                                    const wordnet::Taxonomy& t) {
  return bench::class_similarity(mapping, t, gt, pred, bench::ClassMetric::prediction);
}

struct SimilarityAggregate {
  bench::ClassKey group;
  double mean = 0.0;
  std::size_t count = 0;
};

enum class GroupBy { gt, pred };

/// Mean prediction similarity per ground-truth or predicted class, sorted by
/// descending mean, ties by class name.
inline std::vector<SimilarityAggregate> aggregate_similarity(
    const std::vector<std::pair<bench::ClassKey, bench::ClassKey>>& predictions, GroupBy group_by,
    const bench::ClassMapping& mapping, const wordnet::Taxonomy& t) {
  std::map<bench::ClassKey, std::pair<double, std::size_t>> acc;
  std::map<std::pair<bench::ClassKey, bench::ClassKey>, double> cache;
  for (const auto& pair : predictions) {
    auto it = cache.find(pair);
    if (it == cache.end())
      it = cache.emplace(pair, prediction_similarity(pair.first, pair.second, mapping, t)).first;
    auto& slot = acc[group_by == GroupBy::gt ? pair.first : pair.second];
    slot.first += it->second;
    slot.second += 1;
  }
  std::vector<SimilarityAggregate> out;
  for (const auto& [key, sum_count] : acc)
    out.push_back({key, sum_count.first / static_cast<double>(sum_count.second), sum_count.second});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    return a.group < b.group;
  });
  return out;
}

inline std::vector<SimilarityAggregate> top_k(const std::vector<SimilarityAggregate>& sorted,
                                              std::size_t k = 10) {
  return {sorted.begin(), sorted.begin() + static_cast<long>(std::min(k, sorted.size()))};
}

/// Lowest-k groups, worst first.
inline std::vector<SimilarityAggregate> bottom_k(const std::vector<SimilarityAggregate>& sorted,
                                                 std::size_t k = 10) {
  std::vector<SimilarityAggregate> out(sorted.end() - static_cast<long>(std::min(k, sorted.size())),
                                       sorted.end());
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace oodbench::metrics

#endif  // OODBENCH_SEMANTIC_METRICS_HPP
