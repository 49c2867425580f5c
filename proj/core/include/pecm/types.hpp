#ifndef PECM_TYPES_HPP
#define PECM_TYPES_HPP

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pecm/errors.hpp"

namespace pecm {

/// Dense real vector of fixed dimension d. All similarity math is 64-bit
/// even when embeddings are stored as 32-bit on disk.
using Embedding = std::vector<double>;

enum class Modality { Image, Report };

double dot(const Embedding& a, const Embedding& b);
double norm(const Embedding& a);

/// Cosine similarity, clamped to [-1, 1] to absorb rounding.
/// Throws ZeroNormVector if either operand has zero norm and
/// DimensionMismatch if the dimensions differ.
double cosine(const Embedding& a, const Embedding& b);

bool all_finite(const Embedding& a);

/// Ordered list of K prototype embeddings for one item: indices
/// 0..K-2 are regional prototypes in row-major region order, index
/// K-1 is the global prototype. K >= 2 for anything produced by the
/// prototype builders; K == 1 (global-only sets) is tolerated so that
/// degenerate single-prototype corpora remain loadable.
struct PrototypeSet {
    std::string item_id;
    Modality modality = Modality::Image;
    std::vector<Embedding> prototypes;

    std::size_t k() const { return prototypes.size(); }
    std::size_t dim() const { return prototypes.empty() ? 0 : prototypes.front().size(); }
};

/// Learnable parameters theta and the per-prototype weights they induce.
/// The weights are a pure function of theta:
///
///     w = K * softmax(theta), renormalized so that sum(w) == K
///
/// which guarantees w_k > 0 and sum(w) = K (to 1e-12). The same weights
/// are shared between confidence scoring and global-embedding pooling.
class WeightVector {
public:
    /// Empty (K = 0) placeholder; assign a real vector before use.
    WeightVector() = default;

    static WeightVector from_theta(std::vector<double> theta);
    static WeightVector uniform(std::size_t k);

    std::size_t k() const { return theta_.size(); }
    const std::vector<double>& theta() const { return theta_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    std::vector<double> theta_;
    std::vector<double> weights_;
};

/// One (candidate id, score) row of a ranking.
struct RankedEntry {
    std::string candidate_id;
    double score = 0.0;
};

/// Deterministic descending ordering of candidates: scores non-increasing,
/// ties broken by ascending candidate id so results do not depend on
/// insertion order or worker count.
struct RankedList {
    std::string query_id;
    std::vector<RankedEntry> entries;
};

/// Sorts entries descending by score with the id tie-break.
void sort_ranked(std::vector<RankedEntry>& entries);

/// Two modality-indexed collections of prototype sets plus the ground-truth
/// pairing (report id -> nonempty set of image ids). Validated on
/// construction: every referenced id resolves, each image belongs to exactly
/// one report, and all sets share K and d. Immutable afterwards.
class Corpus {
public:
    Corpus(std::map<std::string, PrototypeSet> images,
           std::map<std::string, PrototypeSet> reports,
           std::map<std::string, std::set<std::string>> pairing);

    const std::map<std::string, PrototypeSet>& images() const { return images_; }
    const std::map<std::string, PrototypeSet>& reports() const { return reports_; }
    const std::map<std::string, std::set<std::string>>& pairing() const { return pairing_; }

    std::size_t k() const { return k_; }
    std::size_t dim() const { return dim_; }

    /// Report owning the given image; empty string if the image is unpaired.
    const std::string& report_of(const std::string& image_id) const;

    /// All (image, report) ground-truth edges, ordered by image id.
    std::vector<std::pair<const PrototypeSet*, const PrototypeSet*>> paired_items() const;

private:
    std::map<std::string, PrototypeSet> images_;
    std::map<std::string, PrototypeSet> reports_;
    std::map<std::string, std::set<std::string>> pairing_;
    std::map<std::string, std::string> report_of_;
    std::size_t k_ = 0;
    std::size_t dim_ = 0;
};

} // namespace pecm

#endif // PECM_TYPES_HPP
