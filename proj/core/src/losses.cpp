#include "pecm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "pecm/parallel.hpp"
#include "pecm/ranking.hpp"

namespace pecm {

namespace {

struct BatchGlobals {
    std::vector<Embedding> image_vecs;  // h_i, weighted sums
    std::vector<Embedding> report_vecs; // g_j
    std::vector<double> image_norms;
    std::vector<double> report_norms;
};

BatchGlobals batch_globals(const Batch& batch, const WeightVector& weights) {
    BatchGlobals g;
    const std::size_t n = batch.size();
    g.image_vecs.resize(n);
    g.report_vecs.resize(n);
    g.image_norms.resize(n);
    g.report_norms.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.image_vecs[i] = global_embedding(batch.image(i), weights);
        g.report_vecs[i] = global_embedding(batch.report(i), weights);
        g.image_norms[i] = norm(g.image_vecs[i]);
        g.report_norms[i] = norm(g.report_vecs[i]);
        if (g.image_norms[i] == 0.0 || g.report_norms[i] == 0.0) {
            throw ZeroNormVector("sim_loss: zero-norm global embedding for pair " +
                                 batch.image(i).item_id);
        }
    }
    return g;
}

/// N x N matrix of initial similarities, s[i*n + j] = cos(h_i, g_j).
std::vector<double> similarity_matrix(const BatchGlobals& g) {
    const std::size_t n = g.image_vecs.size();
    std::vector<double> s(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double raw =
                dot(g.image_vecs[i], g.report_vecs[j]) / (g.image_norms[i] * g.report_norms[j]);
            s[i * n + j] = std::clamp(raw, -1.0, 1.0);
        }
    }
    return s;
}

double sim_loss_from_matrix(const std::vector<double>& s, std::size_t n, double temperature) {
    std::vector<double> per_query(n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) m = std::max(m, s[i * n + j] / temperature);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += std::exp(s[i * n + j] / temperature - m);
        per_query[i] = m + std::log(acc) - s[i * n + i] / temperature;
    }
    return pairwise_sum(per_query) / static_cast<double>(n);
}

void check_batch(const Batch& batch) {
    if (batch.size() == 0) throw std::invalid_argument("loss: empty batch");
}

/// Gradient of a loss with respect to theta given its gradient with
/// respect to w, through w = K * softmax(theta):
///   d/dtheta_k = w_k * (gw_k - (1/K) * sum_m w_m * gw_m)
std::vector<double> reparameterize_grad(const std::vector<double>& grad_w,
                                        const WeightVector& weights) {
    const std::vector<double>& w = weights.weights();
    const std::size_t k = w.size();
    double inner = 0.0;
    for (std::size_t m = 0; m < k; ++m) inner += w[m] * grad_w[m];
    inner /= static_cast<double>(k);
    std::vector<double> g(k);
    for (std::size_t i = 0; i < k; ++i) g[i] = w[i] * (grad_w[i] - inner);
    return g;
}

} // namespace

double sim_loss(const Batch& batch, const WeightVector& weights, double temperature) {
    check_batch(batch);
    if (!(temperature > 0.0)) throw std::invalid_argument("sim_loss: temperature must be > 0");
    const BatchGlobals g = batch_globals(batch, weights);
    return sim_loss_from_matrix(similarity_matrix(g), batch.size(), temperature);
}

double conf_loss(const Batch& batch, const WeightVector& weights, Transform transform) {
    check_batch(batch);
    const std::size_t n = batch.size();
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = confidence(similarity_vector(batch.image(i), batch.report(i)), weights,
                                    transform);
        terms[i] = (1.0 - c) * (1.0 - c);
    }
    return pairwise_sum(terms) / static_cast<double>(n);
}

double div_loss(const PrototypeSet& set, DiversityMode mode) {
    const std::size_t k = set.k();
    double acc = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            if (a == b) continue;
            const double s = cosine(set.prototypes[a], set.prototypes[b]);
            const double term = mode == DiversityMode::Verbatim ? (1.0 - s) : s;
            acc += term * term;
        }
    }
    return acc;
}

double div_loss(const Batch& batch, DiversityMode mode) {
    check_batch(batch);
    std::vector<double> terms(2 * batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        terms[2 * i] = div_loss(batch.image(i), mode);
        terms[2 * i + 1] = div_loss(batch.report(i), mode);
    }
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double total_loss(const Batch& batch, const WeightVector& weights, const LossConfig& cfg) {
    return sim_loss(batch, weights, cfg.temperature) +
           cfg.lambda * conf_loss(batch, weights, cfg.transform) +
           cfg.mu * div_loss(batch, cfg.diversity_mode);
}

std::vector<double> grad_theta(const Batch& batch, const WeightVector& weights,
                               const LossConfig& cfg) {
    check_batch(batch);
    const std::size_t n = batch.size();
    const std::size_t k = weights.k();
    const double tau = cfg.temperature;

    const BatchGlobals g = batch_globals(batch, weights);
    const std::vector<double> s = similarity_matrix(g);

    // softmax rows sigma_ij of s_ij / tau
    std::vector<double> sigma(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) m = std::max(m, s[i * n + j] / tau);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            sigma[i * n + j] = std::exp(s[i * n + j] / tau - m);
            acc += sigma[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) sigma[i * n + j] /= acc;
    }

    const std::size_t d = batch.image(0).dim();
    std::vector<Embedding> h_hat(n), g_hat(n);
    for (std::size_t i = 0; i < n; ++i) {
        h_hat[i] = g.image_vecs[i];
        for (double& x : h_hat[i]) x /= g.image_norms[i];
        g_hat[i] = g.report_vecs[i];
        for (double& x : g_hat[i]) x /= g.report_norms[i];
    }

    // d s_ij / d w_k = z_i^k . u_ij + y_j^k . v_ij with
    //   u_ij = (g_hat_j - s_ij * h_hat_i) / |h_i|
    //   v_ij = (h_hat_i - s_ij * g_hat_j) / |g_j|
    // Folding the coefficient c_ij = (sigma_ij - delta_ij) / (N * tau) over
    // rows and columns first turns the (i, j, k) triple loop into
    //   grad_w[k] = sum_i z_i^k . U_i + sum_j y_j^k . V_j.
    std::vector<double> grad_w(k, 0.0);
    {
        std::vector<Embedding> row_u(n, Embedding(d, 0.0)); // U_i
        std::vector<Embedding> col_v(n, Embedding(d, 0.0)); // V_j
        std::vector<double> col_coeff_dot(n, 0.0);          // sum_i c_ij * s_ij
        std::vector<Embedding> col_coeff_h(n, Embedding(d, 0.0)); // sum_i c_ij * h_hat_i

        for (std::size_t i = 0; i < n; ++i) {
            double row_coeff_dot = 0.0;
            Embedding row_coeff_g(d, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const double c =
                    (sigma[i * n + j] - (i == j ? 1.0 : 0.0)) / (static_cast<double>(n) * tau);
                const double sij = s[i * n + j];
                row_coeff_dot += c * sij;
                for (std::size_t x = 0; x < d; ++x) row_coeff_g[x] += c * g_hat[j][x];
                col_coeff_dot[j] += c * sij;
                for (std::size_t x = 0; x < d; ++x) col_coeff_h[j][x] += c * h_hat[i][x];
            }
            for (std::size_t x = 0; x < d; ++x) {
                row_u[i][x] = (row_coeff_g[x] - row_coeff_dot * h_hat[i][x]) / g.image_norms[i];
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t x = 0; x < d; ++x) {
                col_v[j][x] =
                    (col_coeff_h[j][x] - col_coeff_dot[j] * g_hat[j][x]) / g.report_norms[j];
            }
        }
        for (std::size_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dot(batch.image(i).prototypes[kk], row_u[i]);
                acc += dot(batch.report(i).prototypes[kk], col_v[i]);
            }
            grad_w[kk] = acc;
        }
    }

    // confidence term: d conf / d w_k = -(2 / (N K)) * sum_i (1 - C_i) * t_ik
    if (cfg.lambda != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double> sims = similarity_vector(batch.image(i), batch.report(i));
            const double c = confidence(sims, weights, cfg.transform);
            const double coeff =
                -cfg.lambda * 2.0 * (1.0 - c) / (static_cast<double>(n) * static_cast<double>(k));
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double t =
                    cfg.transform == Transform::Shifted ? (sims[kk] + 1.0) * 0.5 : sims[kk];
                grad_w[kk] += coeff * t;
            }
        }
    }

    // diversity term has no weight dependence: zero gradient
    return reparameterize_grad(grad_w, weights);
}

std::vector<double> fd_grad_theta(const Batch& batch, const std::vector<double>& theta,
                                  const LossConfig& cfg, double h) {
    std::vector<double> g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        std::vector<double> plus = theta, minus = theta;
        plus[i] += h;
        minus[i] -= h;
        const double lp = total_loss(batch, WeightVector::from_theta(plus), cfg);
        const double lm = total_loss(batch, WeightVector::from_theta(minus), cfg);
        g[i] = (lp - lm) / (2.0 * h);
    }
    return g;
}

LrSchedule cosine_annealing(double lr0) {
    return [lr0](std::size_t step, std::size_t total_steps) {
        const double frac =
            total_steps == 0 ? 0.0 : static_cast<double>(step) / static_cast<double>(total_steps);
        return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    };
}

namespace {

/// Explicit Fisher-Yates with mt19937_64 so shuffles are identical on
/// every platform (std::shuffle's draw pattern is implementation-defined).
void seeded_shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
}

TraceRow evaluate_trace(int epoch, const Batch& full, const WeightVector& w,
                        const LossConfig& cfg, double cached_div) {
    TraceRow row;
    row.epoch = epoch;
    row.sim = sim_loss(full, w, cfg.temperature);
    row.conf = conf_loss(full, w, cfg.transform);
    row.div = cached_div;
    row.total = row.sim + cfg.lambda * row.conf + cfg.mu * row.div;
    return row;
}

} // namespace

TrainResult train(const Corpus& corpus, const LossConfig& cfg, const TrainOptions& opts) {
    if (opts.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (opts.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

    const auto pairs = corpus.paired_items();
    if (pairs.empty()) throw std::invalid_argument("train: corpus has no ground-truth pairs");
    Batch full{pairs};

    const std::size_t p = pairs.size();
    const std::size_t batch_size = static_cast<std::size_t>(opts.batch_size);
    const std::size_t batches_per_epoch = (p + batch_size - 1) / batch_size;
    const std::size_t total_steps = static_cast<std::size_t>(opts.epochs) * batches_per_epoch;
    const LrSchedule schedule = opts.schedule ? opts.schedule : cosine_annealing(opts.lr0);

    std::vector<double> theta(corpus.k(), 0.0);
    std::mt19937_64 rng(opts.seed);

    TrainResult result;
    // diversity does not depend on theta; evaluate the trace constant once
    const double trace_div = div_loss(full, cfg.diversity_mode);
    result.trace.push_back(
        evaluate_trace(0, full, WeightVector::from_theta(theta), cfg, trace_div));

    std::vector<std::size_t> order(p);
    std::size_t step = 0;
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        for (std::size_t i = 0; i < p; ++i) order[i] = i;
        seeded_shuffle(order, rng);

        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const std::size_t begin = b * batch_size;
            const std::size_t end = std::min(begin + batch_size, p);
            Batch batch;
            batch.pairs.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) batch.pairs.push_back(pairs[order[i]]);

            const WeightVector w = WeightVector::from_theta(theta);
            const double loss = total_loss(batch, w, cfg);
            const std::vector<double> grad = grad_theta(batch, w, cfg);

            const std::string where =
                "epoch " + std::to_string(epoch) + " batch " + std::to_string(b);
            if (!std::isfinite(loss)) throw NonFiniteLoss("train: non-finite loss at " + where);
            for (double gk : grad) {
                if (!std::isfinite(gk)) {
                    throw NonFiniteLoss("train: non-finite gradient at " + where);
                }
            }

            const double lr = schedule(step, total_steps);
            for (std::size_t kk = 0; kk < theta.size(); ++kk) theta[kk] -= lr * grad[kk];
            for (double t : theta) {
                if (!std::isfinite(t)) {
                    throw NonFiniteLoss("train: non-finite parameter after " + where);
                }
            }
            ++step;
        }
        result.trace.push_back(
            evaluate_trace(epoch, full, WeightVector::from_theta(theta), cfg, trace_div));
    }

    result.weights = WeightVector::from_theta(std::move(theta));
    return result;
}

} // namespace pecm
