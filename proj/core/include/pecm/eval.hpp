#ifndef PECM_EVAL_HPP
#define PECM_EVAL_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pecm/types.hpp"

namespace pecm {

/// Ground truth for metric computation: per-query relevant candidate sets,
/// plus optional class labels for class-wise (macro) aggregation.
struct RelevanceMap {
    std::map<std::string, std::set<std::string>> relevant;
    std::map<std::string, std::string> labels;
};

/// Capped recall: |relevant in top-K| / min(K, |relevant|). The cap makes
/// a perfect top-K retrieval score 1 even when a query has more relevant
/// items than K. Throws EmptyRelevance for an empty relevant set.
double recall_at_k(const RankedList& ranked, const std::set<std::string>& relevant,
                   std::size_t k);

/// |relevant in top-K| / K.
double precision_at_k(const RankedList& ranked, const std::set<std::string>& relevant,
                      std::size_t k);

enum class AggregateMode { Micro, Macro };

struct PerQueryValue {
    std::string query_id;
    std::string class_label; // may be empty for micro aggregation
    double value = 0.0;
};

/// Micro: unweighted mean over query samples. Macro: mean over classes of
/// the per-class mean. Macro requires a nonempty label on every entry
/// (MissingLabels otherwise).
double aggregate(const std::vector<PerQueryValue>& per_query, AggregateMode mode);

} // namespace pecm

#endif // PECM_EVAL_HPP
