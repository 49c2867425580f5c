#include "pecm/prototypes.hpp"

#include <stdexcept>

namespace pecm {

namespace {

Embedding mean_of(const std::vector<const Embedding*>& members) {
    Embedding acc(members.front()->size(), 0.0);
    for (const Embedding* e : members) {
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*e)[i];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& x : acc) x *= inv;
    return acc;
}

} // namespace

std::vector<std::size_t> partition_axis(std::size_t n, std::size_t g) {
    if (n == 0 || g == 0) throw std::invalid_argument("partition_axis: n and g must be positive");
    std::vector<std::size_t> sizes(n / g, g);
    if (n % g != 0) sizes.push_back(n % g);
    return sizes;
}

PrototypeSet build_image_prototypes(const std::string& item_id, const PatchGrid& grid,
                                    std::size_t group_size) {
    if (grid.rows == 0 || grid.cols == 0) {
        throw std::invalid_argument("build_image_prototypes: empty grid");
    }
    if (grid.patches.size() != grid.rows * grid.cols) {
        throw DimensionMismatch("build_image_prototypes: item " + item_id + " has " +
                                std::to_string(grid.patches.size()) + " patches, expected " +
                                std::to_string(grid.rows * grid.cols));
    }
    const auto row_sizes = partition_axis(grid.rows, group_size);
    const auto col_sizes = partition_axis(grid.cols, group_size);

    PrototypeSet out;
    out.item_id = item_id;
    out.modality = Modality::Image;
    out.prototypes.reserve(row_sizes.size() * col_sizes.size() + 1);

    std::size_t row0 = 0;
    for (std::size_t rs : row_sizes) {
        std::size_t col0 = 0;
        for (std::size_t cs : col_sizes) {
            std::vector<const Embedding*> block;
            block.reserve(rs * cs);
            for (std::size_t r = row0; r < row0 + rs; ++r) {
                for (std::size_t c = col0; c < col0 + cs; ++c) {
                    block.push_back(&grid.patches[r * grid.cols + c]);
                }
            }
            out.prototypes.push_back(mean_of(block));
            col0 += cs;
        }
        row0 += rs;
    }
    out.prototypes.push_back(grid.global);
    return out;
}

PrototypeSet build_report_prototypes(const std::string& item_id, const SentenceSet& sentences,
                                     std::size_t k) {
    if (k < 2) throw InvalidK("build_report_prototypes: K must be >= 2, got " + std::to_string(k));
    if (sentences.sentences.empty()) {
        throw std::invalid_argument("build_report_prototypes: item " + item_id +
                                    " has no sentences");
    }

    const std::size_t n = sentences.sentences.size();
    const std::size_t regional = k - 1;
    const std::size_t groups = std::min(regional, n);
    const std::size_t base = n / groups;
    const std::size_t extra = n % groups; // first `extra` groups get one more

    PrototypeSet out;
    out.item_id = item_id;
    out.modality = Modality::Report;
    out.prototypes.reserve(k);

    std::size_t pos = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t size = base + (g < extra ? 1 : 0);
        std::vector<const Embedding*> group;
        group.reserve(size);
        for (std::size_t i = pos; i < pos + size; ++i) group.push_back(&sentences.sentences[i]);
        out.prototypes.push_back(mean_of(group));
        pos += size;
    }
    // short report: repeat the last group prototype to keep K uniform
    while (out.prototypes.size() < regional) {
        out.prototypes.push_back(out.prototypes.back());
    }
    out.prototypes.push_back(sentences.global);
    return out;
}

} // namespace pecm
