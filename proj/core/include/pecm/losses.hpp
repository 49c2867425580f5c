#ifndef PECM_LOSSES_HPP
#define PECM_LOSSES_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "pecm/confidence.hpp"
#include "pecm/types.hpp"

namespace pecm {

/// Diversity term variants. Verbatim sums (1 - sim)^2 over ordered
/// prototype pairs of one modality; Repulsive sums sim^2 instead, which
/// penalizes similar prototypes rather than dissimilar ones. Verbatim is
/// the default; Repulsive is kept selectable because the two express
/// opposite preferences and ablations need both.
enum class DiversityMode { Verbatim, Repulsive };

struct LossConfig {
    double lambda = 1.0;      // confidence-loss coefficient
    double mu = 1.0;          // diversity-loss coefficient
    double temperature = 1.0; // contrastive scale; 1.0 is the plain softmax
    Transform transform = Transform::Shifted;
    DiversityMode diversity_mode = DiversityMode::Verbatim;
};

/// A list of ground-truth (image, report) pairs. Pointees must outlive the
/// batch and share K and d.
struct Batch {
    std::vector<std::pair<const PrototypeSet*, const PrototypeSet*>> pairs;

    std::size_t size() const { return pairs.size(); }
    const PrototypeSet& image(std::size_t i) const { return *pairs[i].first; }
    const PrototypeSet& report(std::size_t i) const { return *pairs[i].second; }
};

/// In-batch contrastive loss over initial similarities: mean over queries
/// i of -log( exp(s_ii/t) / sum_j exp(s_ij/t) ), where s_ij is the cosine
/// of weighted global embeddings and every report in the batch serves as a
/// candidate. Computed with max-subtraction, so it is finite for all
/// finite inputs and exactly zero for a single-pair batch.
double sim_loss(const Batch& batch, const WeightVector& weights, double temperature = 1.0);

/// Mean squared confidence shortfall of the matched pairs:
/// (1/N) * sum_i (1 - C(v_i, t_i))^2.
double conf_loss(const Batch& batch, const WeightVector& weights, Transform transform);

/// Diversity of one prototype set: sum over ordered pairs (k, l), k != l,
/// of (1 - sim)^2 (Verbatim) or sim^2 (Repulsive).
double div_loss(const PrototypeSet& set, DiversityMode mode);

/// Batch diversity: mean of div_loss over all 2N prototype sets in the
/// batch, both modalities.
double div_loss(const Batch& batch, DiversityMode mode);

/// sim + lambda * conf + mu * div.
double total_loss(const Batch& batch, const WeightVector& weights, const LossConfig& cfg);

/// Analytic gradient of total_loss with respect to theta, through the
/// w = K * softmax(theta) reparameterization. The diversity term does not
/// depend on the weights and contributes nothing.
std::vector<double> grad_theta(const Batch& batch, const WeightVector& weights,
                               const LossConfig& cfg);

/// Central finite-difference gradient of total_loss at theta, the
/// independent oracle for grad_theta.
std::vector<double> fd_grad_theta(const Batch& batch, const std::vector<double>& theta,
                                  const LossConfig& cfg, double h = 1e-5);

/// Step-size schedule: maps (step, total_steps) to a learning rate.
using LrSchedule = std::function<double(std::size_t step, std::size_t total_steps)>;

/// lr(step) = lr0 * 0.5 * (1 + cos(pi * step / total_steps)).
LrSchedule cosine_annealing(double lr0);

struct TrainOptions {
    int epochs = 30;
    int batch_size = 32;
    double lr0 = 1e-4;
    std::uint64_t seed = 0;
    LrSchedule schedule; // defaults to cosine_annealing(lr0) when empty
    unsigned threads = 1;
};

/// One loss-trace row: epoch 0 is the state before any update, epoch e the
/// state after the e-th epoch. Losses are evaluated on the full pair list
/// as a single batch, so the trace does not depend on shuffling.
struct TraceRow {
    int epoch = 0;
    double sim = 0.0;
    double conf = 0.0;
    double div = 0.0;
    double total = 0.0;
};

struct TrainResult {
    WeightVector weights;
    std::vector<TraceRow> trace;
};

/// Plain gradient descent on theta over the corpus' ground-truth pairs.
/// Batches are sequential chunks of a seeded per-epoch shuffle, so a fixed
/// seed reproduces the run exactly. Throws NonFiniteLoss, naming the
/// offending batch, if any step produces a NaN/Inf loss, gradient, or
/// parameter.
TrainResult train(const Corpus& corpus, const LossConfig& cfg, const TrainOptions& opts);

} // namespace pecm

#endif // PECM_LOSSES_HPP
