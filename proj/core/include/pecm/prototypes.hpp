#ifndef PECM_PROTOTYPES_HPP
#define PECM_PROTOTYPES_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "pecm/types.hpp"

namespace pecm {

/// Raw encoder output for one image: a rows x cols grid of patch
/// embeddings in row-major order plus the encoder's whole-image summary.
struct PatchGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Embedding> patches; // rows * cols, row-major
    Embedding global;
};

/// Raw encoder output for one report: per-sentence embeddings in reading
/// order plus the document-level embedding.
struct SentenceSet {
    std::vector<Embedding> sentences;
    Embedding global;
};

/// Splits n elements into ceil(n/g) contiguous groups: the first
/// floor(n/g) groups have size g, the final group takes the remainder
/// when nonzero. Sizes always sum to n.
std::vector<std::size_t> partition_axis(std::size_t n, std::size_t g);

/// Builds the multi-level prototype set for an image. Rows and columns are
/// partitioned with partition_axis(group_size); each regional prototype is
/// the arithmetic mean of the patches in its rectangular block, in
/// row-major region order; the grid's global embedding comes last. A 14x14
/// grid with group_size 3 yields 5x5 regions and K = 26.
PrototypeSet build_image_prototypes(const std::string& item_id, const PatchGrid& grid,
                                    std::size_t group_size);

/// Builds the multi-level prototype set for a report with exactly K
/// prototypes. Sentences are split in reading order into
/// min(K-1, #sentences) contiguous groups of near-equal size (sizes differ
/// by at most one, larger groups first); each group prototype is the mean
/// of its sentences. When the report has fewer than K-1 sentences, the
/// trailing missing prototypes repeat the last group prototype so every
/// set in a corpus has the same K. The document embedding comes last.
/// Throws InvalidK for K < 2.
PrototypeSet build_report_prototypes(const std::string& item_id, const SentenceSet& sentences,
                                     std::size_t k);

} // namespace pecm

#endif // PECM_PROTOTYPES_HPP
