#ifndef PECM_RANKING_HPP
#define PECM_RANKING_HPP

#include <cstddef>
#include <vector>

#include "pecm/confidence.hpp"
#include "pecm/types.hpp"

namespace pecm {

/// Score triple for one candidate after adaptive re-ranking.
/// final == initial * confidence, exactly.
struct RerankScore {
    double initial = 0.0;
    double confidence = 0.0;
    double final = 0.0;
};

struct RerankedEntry {
    std::string candidate_id;
    RerankScore score;
};

struct RerankedList {
    std::string query_id;
    std::vector<RerankedEntry> entries;
    /// Candidates whose final score changed sign relative to the initial
    /// one (possible with Transform::Raw and a negative confidence). A
    /// nonzero count is reported as a warning by callers.
    std::size_t sign_flips = 0;
};

using PrototypeSetRefs = std::vector<const PrototypeSet*>;

/// Weighted sum of a set's prototypes: h = sum_k w_k * z_k, no 1/K factor.
/// Cosine similarity is scale-invariant, so any global rescaling of h
/// leaves all rankings untouched.
Embedding global_embedding(const PrototypeSet& set, const WeightVector& weights);

/// Ranks candidates by cosine similarity of weighted global embeddings,
/// descending, with the deterministic id tie-break. Candidate scoring is
/// data-parallel across `threads` workers; the result is identical for
/// every worker count.
RankedList initial_rank(const PrototypeSet& query, const PrototypeSetRefs& candidates,
                        const WeightVector& weights, unsigned threads = 1);

/// Confidence-weighted re-ranking: each candidate's initial similarity is
/// multiplied by the pair's confidence and candidates are re-sorted on the
/// product. shortlist == 0 re-scores the full candidate list (the default,
/// and the faithful behaviour); shortlist M > 0 re-scores only the top-M
/// candidates of the initial ranking and returns just those.
RerankedList rerank(const PrototypeSet& query, const PrototypeSetRefs& candidates,
                    const WeightVector& weights, Transform transform,
                    std::size_t shortlist = 0, unsigned threads = 1);

/// Ranking view of a reranked list (final scores only), for metric code.
RankedList to_ranked_list(const RerankedList& list);

} // namespace pecm

#endif // PECM_RANKING_HPP
