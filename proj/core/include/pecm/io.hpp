#ifndef PECM_IO_HPP
#define PECM_IO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pecm/prototypes.hpp"
#include "pecm/types.hpp"

namespace pecm {

/// Deterministic random source used by the synthetic generator and
/// anywhere else reproducibility across platforms matters. mt19937_64 has
/// a standard-specified output sequence; the derived draws are pinned here
/// instead of relying on implementation-defined std distributions:
///   uniform():  (next() >> 11) * 2^-53, in [0, 1)
///   gaussian(): Box-Muller from two uniforms, consuming exactly two
///               64-bit outputs per call
///   bounded(n): next() % n
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }
    double uniform();
    double gaussian();
    std::size_t bounded(std::size_t n);

private:
    std::mt19937_64 gen_;
};

/// Modality byte of the binary embedding file format.
enum class FileModality : std::uint8_t {
    ImageGrid = 0,       // per item: rows*cols patch embeddings + global
    ReportSentences = 1, // per item: per-item sentence count, sentences + global
    PrototypeSets = 2,   // per item: K prototypes, global last
};

class IoFailure : public Error {
public:
    using Error::Error;
};

// Binary embedding files ("PECM" magic, version 1, little-endian, float32
// payload; full layout in docs/FORMAT.md). The loaders also accept the
// line-delimited text format ("pecm-text v1" banner, same document) meant
// for hand-written fixtures; the writers always produce binary.
void save_patch_grids(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, PatchGrid>>& items);
std::vector<std::pair<std::string, PatchGrid>> load_patch_grids(const std::filesystem::path& path);

void save_sentence_sets(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, SentenceSet>>& items);
std::vector<std::pair<std::string, SentenceSet>>
load_sentence_sets(const std::filesystem::path& path);

void save_prototype_sets(const std::filesystem::path& path,
                         const std::vector<PrototypeSet>& items);
std::vector<PrototypeSet> load_prototype_sets(const std::filesystem::path& path,
                                              Modality modality);

/// Modality byte of an embedding file, from its header alone.
FileModality peek_modality(const std::filesystem::path& path);

// Pairing files: `report_id<TAB>image_id`, UTF-8, one edge per line.
void save_pairing(const std::filesystem::path& path,
                  const std::map<std::string, std::set<std::string>>& pairing);
std::map<std::string, std::set<std::string>> load_pairing(const std::filesystem::path& path);

// Label files: `item_id<TAB>label`, one per line.
void save_labels(const std::filesystem::path& path,
                 const std::map<std::string, std::string>& labels);
std::map<std::string, std::string> load_labels(const std::filesystem::path& path);

struct LoadOptions {
    std::size_t group_size = 3; // patch grouping for image-grid files
};

/// Loads a full corpus. The image file may hold patch grids (built into
/// prototype sets here) or ready prototype sets; the report file sentence
/// lists or prototype sets. K is fixed by the image side and enforced on
/// the report side, so every set in the corpus shares K.
Corpus load_corpus(const std::filesystem::path& image_path,
                   const std::filesystem::path& report_path,
                   const std::filesystem::path& pairing_path, const LoadOptions& opts = {});

// Weight checkpoints: UTF-8 key-value text storing theta at 17 significant
// digits, which round-trips doubles exactly. Loading rebuilds
// w = K * softmax(theta). If expected_k is given, a differing checkpoint K
// raises KMismatch.
void save_weights(const WeightVector& weights, const std::filesystem::path& path);
WeightVector load_weights(const std::filesystem::path& path,
                          std::optional<std::size_t> expected_k = std::nullopt);

/// Parameters of the synthetic benchmark corpus. Pairs are grouped into
/// classes; both sides of a pair are the class latent plus iid Gaussian
/// noise, and an ambiguity_fraction of pairs additionally get half of
/// their prototype slots corrupted with heavy noise on both sides,
/// modeling ambiguous regions.
struct SyntheticSpec {
    std::size_t n_pairs = 0;
    std::size_t n_classes = 1;
    std::size_t dim = 0;
    std::size_t k = 2;
    double noise_sigma = 0.0;
    double ambiguity_fraction = 0.0;
    double ambiguity_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticCorpus {
    Corpus corpus;
    std::map<std::string, std::string> class_of; // image and report ids -> class label
    std::set<std::string> ambiguous_images;
    std::set<std::string> ambiguous_reports;
};

/// Pure function of spec.seed: the base corpus (latents + noise) is drawn
/// from one stream and the ambiguity selection/corruption from a second,
/// so the same seed at different ambiguity settings yields the same base
/// corpus. Throws InvalidSpec for out-of-range parameters.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

} // namespace pecm

#endif // PECM_IO_HPP
