#include "pecm/types.hpp"

#include <algorithm>
#include <cmath>

namespace pecm {

double dot(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("dot: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(const Embedding& a) {
    double acc = 0.0;
    for (double x : a) acc += x * x;
    return std::sqrt(acc);
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("cosine: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
    }
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw ZeroNormVector("cosine: zero-norm operand");
    }
    return std::clamp(d / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

bool all_finite(const Embedding& a) {
    for (double x : a) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

WeightVector WeightVector::from_theta(std::vector<double> theta) {
    if (theta.empty()) throw InvalidK("WeightVector: theta must be nonempty");
    for (double t : theta) {
        if (!std::isfinite(t)) throw NonFiniteLoss("WeightVector: non-finite theta entry");
    }
    const std::size_t k = theta.size();
    const double m = *std::max_element(theta.begin(), theta.end());
    std::vector<double> w(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        w[i] = std::exp(theta[i] - m);
        sum += w[i];
    }
    // softmax scaled to sum K, then renormalized so sum(w) == K to 1e-12
    const double scale = static_cast<double>(k) / sum;
    for (double& x : w) x *= scale;
    double wsum = 0.0;
    for (double x : w) wsum += x;
    const double fix = static_cast<double>(k) / wsum;
    for (double& x : w) x *= fix;

    WeightVector out;
    out.theta_ = std::move(theta);
    out.weights_ = std::move(w);
    return out;
}

WeightVector WeightVector::uniform(std::size_t k) {
    return from_theta(std::vector<double>(k, 0.0));
}

void sort_ranked(std::vector<RankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.candidate_id < b.candidate_id;
    });
}

Corpus::Corpus(std::map<std::string, PrototypeSet> images,
               std::map<std::string, PrototypeSet> reports,
               std::map<std::string, std::set<std::string>> pairing)
    : images_(std::move(images)), reports_(std::move(reports)), pairing_(std::move(pairing)) {
    if (images_.empty() || reports_.empty()) {
        throw ParseError("Corpus: both modalities must be nonempty");
    }

    k_ = images_.begin()->second.k();
    dim_ = images_.begin()->second.dim();
    auto check_set = [&](const PrototypeSet& s) {
        if (s.k() == 0) throw InvalidK("Corpus: empty prototype set for item " + s.item_id);
        if (s.k() != k_) {
            throw MismatchedK("Corpus: item " + s.item_id + " has K=" + std::to_string(s.k()) +
                              ", expected " + std::to_string(k_));
        }
        for (const Embedding& e : s.prototypes) {
            if (e.size() != dim_) {
                throw DimensionMismatch("Corpus: item " + s.item_id + " has dim " +
                                        std::to_string(e.size()) + ", expected " +
                                        std::to_string(dim_));
            }
        }
    };
    for (const auto& [id, s] : images_) check_set(s);
    for (const auto& [id, s] : reports_) check_set(s);

    for (const auto& [rid, imgs] : pairing_) {
        if (!reports_.count(rid)) {
            throw DanglingPairing("Corpus: pairing references unknown report " + rid);
        }
        if (imgs.empty()) {
            throw DanglingPairing("Corpus: report " + rid + " has an empty image set");
        }
        for (const std::string& iid : imgs) {
            if (!images_.count(iid)) {
                throw DanglingPairing("Corpus: pairing references unknown image " + iid);
            }
            auto [it, inserted] = report_of_.emplace(iid, rid);
            if (!inserted) {
                throw PairingConflict("Corpus: image " + iid + " is paired with both " +
                                      it->second + " and " + rid);
            }
        }
    }
}

const std::string& Corpus::report_of(const std::string& image_id) const {
    static const std::string empty;
    auto it = report_of_.find(image_id);
    return it == report_of_.end() ? empty : it->second;
}

std::vector<std::pair<const PrototypeSet*, const PrototypeSet*>> Corpus::paired_items() const {
    std::vector<std::pair<const PrototypeSet*, const PrototypeSet*>> out;
    for (const auto& [iid, rid] : report_of_) {
        out.emplace_back(&images_.at(iid), &reports_.at(rid));
    }
    return out;
}

} // namespace pecm
