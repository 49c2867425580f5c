#include "pecm/confidence.hpp"

#include <algorithm>

namespace pecm {

std::vector<double> similarity_vector(const PrototypeSet& image_side,
                                      const PrototypeSet& report_side) {
    if (image_side.k() != report_side.k()) {
        throw MismatchedK("similarity_vector: K mismatch (" + std::to_string(image_side.k()) +
                          " vs " + std::to_string(report_side.k()) + ")");
    }
    std::vector<double> sims(image_side.k());
    for (std::size_t i = 0; i < sims.size(); ++i) {
        sims[i] = cosine(image_side.prototypes[i], report_side.prototypes[i]);
    }
    return sims;
}

double confidence(const std::vector<double>& sims, const WeightVector& weights,
                  Transform transform) {
    if (sims.size() != weights.k()) {
        throw MismatchedK("confidence: similarity length " + std::to_string(sims.size()) +
                          " vs K=" + std::to_string(weights.k()));
    }
    const std::vector<double>& w = weights.weights();
    double acc = 0.0;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        const double t = transform == Transform::Shifted ? (sims[i] + 1.0) * 0.5 : sims[i];
        acc += t * w[i];
    }
    const double c = acc / static_cast<double>(sims.size());
    if (transform == Transform::Shifted) return std::clamp(c, 0.0, 1.0);
    return std::clamp(c, -1.0, 1.0);
}

} // namespace pecm
