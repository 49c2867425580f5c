#include "pecm/eval.hpp"

#include <algorithm>
#include <stdexcept>

namespace pecm {

namespace {

std::size_t hits_in_top_k(const RankedList& ranked, const std::set<std::string>& relevant,
                          std::size_t k) {
    const std::size_t top = std::min<std::size_t>(k, ranked.entries.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < top; ++i) {
        if (relevant.count(ranked.entries[i].candidate_id)) ++hits;
    }
    return hits;
}

} // namespace

double recall_at_k(const RankedList& ranked, const std::set<std::string>& relevant,
                   std::size_t k) {
    if (k == 0) throw std::invalid_argument("recall_at_k: K must be >= 1");
    if (relevant.empty()) {
        throw EmptyRelevance("recall_at_k: query " + ranked.query_id + " has no relevant items");
    }
    const std::size_t cap = std::min<std::size_t>(k, relevant.size());
    return static_cast<double>(hits_in_top_k(ranked, relevant, k)) / static_cast<double>(cap);
}

double precision_at_k(const RankedList& ranked, const std::set<std::string>& relevant,
                      std::size_t k) {
    if (k == 0) throw std::invalid_argument("precision_at_k: K must be >= 1");
    return static_cast<double>(hits_in_top_k(ranked, relevant, k)) / static_cast<double>(k);
}

double aggregate(const std::vector<PerQueryValue>& per_query, AggregateMode mode) {
    if (per_query.empty()) throw std::invalid_argument("aggregate: empty per-query list");
    if (mode == AggregateMode::Micro) {
        double acc = 0.0;
        for (const PerQueryValue& v : per_query) acc += v.value;
        return acc / static_cast<double>(per_query.size());
    }

    std::map<std::string, std::pair<double, std::size_t>> by_class; // sum, count
    for (const PerQueryValue& v : per_query) {
        if (v.class_label.empty()) {
            throw MissingLabels("aggregate: query " + v.query_id +
                                " has no class label for macro aggregation");
        }
        auto& [sum, count] = by_class[v.class_label];
        sum += v.value;
        ++count;
    }
    double acc = 0.0;
    for (const auto& [label, sc] : by_class) acc += sc.first / static_cast<double>(sc.second);
    return acc / static_cast<double>(by_class.size());
}

} // namespace pecm
