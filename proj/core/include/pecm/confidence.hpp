#ifndef PECM_CONFIDENCE_HPP
#define PECM_CONFIDENCE_HPP

#include <vector>

#include "pecm/types.hpp"

namespace pecm {

/// How per-prototype similarities enter the confidence average.
///
/// Raw uses each similarity as-is, so a pair of anti-aligned prototype
/// sets can yield a negative confidence. Shifted maps every similarity to
/// (s+1)/2 first, which keeps confidence in [0, 1] and makes the re-ranked
/// score monotone in both of its factors; it is the engine default, with
/// Raw retained as an ablation.
enum class Transform { Raw, Shifted };

/// Per-prototype cosine similarities between two aligned prototype sets,
/// one entry per prototype index. Throws MismatchedK when the sets
/// disagree on K.
std::vector<double> similarity_vector(const PrototypeSet& image_side,
                                      const PrototypeSet& report_side);

/// Weighted average of (optionally shifted) per-prototype similarities:
///
///     c = (1/K) * sum_k t_k * w_k,   t_k = s_k or (s_k+1)/2
///
/// With sum(w) = K this is a convex combination of the t_k, so Shifted
/// confidences land in [0, 1] and Raw ones in [-1, 1].
double confidence(const std::vector<double>& sims, const WeightVector& weights,
                  Transform transform);

} // namespace pecm

#endif // PECM_CONFIDENCE_HPP
