#include "pecm/ranking.hpp"

#include <algorithm>
#include <stdexcept>

#include "pecm/parallel.hpp"

namespace pecm {

Embedding global_embedding(const PrototypeSet& set, const WeightVector& weights) {
    if (set.k() != weights.k()) {
        throw MismatchedK("global_embedding: set K=" + std::to_string(set.k()) +
                          " vs weights K=" + std::to_string(weights.k()));
    }
    const std::vector<double>& w = weights.weights();
    Embedding h(set.dim(), 0.0);
    for (std::size_t k = 0; k < set.k(); ++k) {
        const Embedding& z = set.prototypes[k];
        if (z.size() != h.size()) {
            throw DimensionMismatch("global_embedding: ragged prototype dimensions in " +
                                    set.item_id);
        }
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += w[k] * z[i];
    }
    return h;
}

RankedList initial_rank(const PrototypeSet& query, const PrototypeSetRefs& candidates,
                        const WeightVector& weights, unsigned threads) {
    if (candidates.empty()) throw std::invalid_argument("initial_rank: no candidates");
    const Embedding hq = global_embedding(query, weights);

    std::vector<RankedEntry> entries(candidates.size());
    parallel_for(candidates.size(), threads, [&](std::size_t j) {
        entries[j] = {candidates[j]->item_id, cosine(hq, global_embedding(*candidates[j], weights))};
    });
    sort_ranked(entries);
    return {query.item_id, std::move(entries)};
}

namespace {

void sort_reranked(std::vector<RerankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RerankedEntry& a, const RerankedEntry& b) {
        if (a.score.final != b.score.final) return a.score.final > b.score.final;
        return a.candidate_id < b.candidate_id;
    });
}

} // namespace

RerankedList rerank(const PrototypeSet& query, const PrototypeSetRefs& candidates,
                    const WeightVector& weights, Transform transform, std::size_t shortlist,
                    unsigned threads) {
    if (candidates.empty()) throw std::invalid_argument("rerank: no candidates");
    const Embedding hq = global_embedding(query, weights);

    struct Scored {
        const PrototypeSet* candidate;
        double initial;
    };
    std::vector<Scored> initial(candidates.size());
    parallel_for(candidates.size(), threads, [&](std::size_t j) {
        initial[j] = {candidates[j],
                      cosine(hq, global_embedding(*candidates[j], weights))};
    });

    if (shortlist > 0 && shortlist < initial.size()) {
        std::sort(initial.begin(), initial.end(), [](const Scored& a, const Scored& b) {
            if (a.initial != b.initial) return a.initial > b.initial;
            return a.candidate->item_id < b.candidate->item_id;
        });
        initial.resize(shortlist);
    }

    std::vector<RerankedEntry> entries(initial.size());
    parallel_for(initial.size(), threads, [&](std::size_t j) {
        const PrototypeSet& cand = *initial[j].candidate;
        const bool query_is_image = query.modality == Modality::Image;
        const std::vector<double> sims = query_is_image ? similarity_vector(query, cand)
                                                        : similarity_vector(cand, query);
        RerankScore s;
        s.initial = initial[j].initial;
        s.confidence = confidence(sims, weights, transform);
        s.final = s.initial * s.confidence;
        entries[j] = {cand.item_id, s};
    });

    std::size_t flips = 0;
    for (const RerankedEntry& e : entries) {
        if ((e.score.final < 0.0) != (e.score.initial < 0.0)) ++flips;
    }
    sort_reranked(entries);
    return {query.item_id, std::move(entries), flips};
}

RankedList to_ranked_list(const RerankedList& list) {
    RankedList out;
    out.query_id = list.query_id;
    out.entries.reserve(list.entries.size());
    for (const RerankedEntry& e : list.entries) {
        out.entries.push_back({e.candidate_id, e.score.final});
    }
    return out;
}

} // namespace pecm
