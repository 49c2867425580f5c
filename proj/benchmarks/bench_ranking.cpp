#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pecm/losses.hpp"
#include "pecm/prototypes.hpp"
#include "pecm/ranking.hpp"

namespace {

pecm::PrototypeSet random_set(std::mt19937_64& rng, std::string id, pecm::Modality m,
                              std::size_t k, std::size_t d) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    pecm::PrototypeSet set;
    set.item_id = std::move(id);
    set.modality = m;
    for (std::size_t kk = 0; kk < k; ++kk) {
        pecm::Embedding e(d);
        for (double& x : e) x = u(rng);
        set.prototypes.push_back(std::move(e));
    }
    return set;
}

struct Universe {
    pecm::PrototypeSet query;
    std::vector<pecm::PrototypeSet> candidates;
    pecm::PrototypeSetRefs refs;
    pecm::WeightVector weights;
};

Universe make_universe(std::size_t n, std::size_t k, std::size_t d) {
    std::mt19937_64 rng(1234);
    Universe u;
    u.query = random_set(rng, "query", pecm::Modality::Image, k, d);
    u.candidates.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "c%05zu", j);
        u.candidates.push_back(random_set(rng, buf, pecm::Modality::Report, k, d));
    }
    for (const pecm::PrototypeSet& c : u.candidates) u.refs.push_back(&c);
    u.weights = pecm::WeightVector::uniform(k);
    return u;
}

} // namespace

static void BM_GlobalEmbedding(benchmark::State& state) {
    std::mt19937_64 rng(7);
    const pecm::PrototypeSet set =
        random_set(rng, "x", pecm::Modality::Image, 26, static_cast<std::size_t>(state.range(0)));
    const pecm::WeightVector w = pecm::WeightVector::uniform(26);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pecm::global_embedding(set, w));
    }
}
BENCHMARK(BM_GlobalEmbedding)->Arg(64)->Arg(256)->Arg(512);

static void BM_InitialRank(benchmark::State& state) {
    const Universe u = make_universe(static_cast<std::size_t>(state.range(0)), 26, 128);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pecm::initial_rank(u.query, u.refs, u.weights));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_InitialRank)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_Rerank(benchmark::State& state) {
    const Universe u = make_universe(static_cast<std::size_t>(state.range(0)), 26, 128);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            pecm::rerank(u.query, u.refs, u.weights, pecm::Transform::Shifted));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Rerank)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_RerankThreads(benchmark::State& state) {
    const Universe u = make_universe(10000, 26, 128);
    const unsigned threads = static_cast<unsigned>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            pecm::rerank(u.query, u.refs, u.weights, pecm::Transform::Shifted, 0, threads));
    }
    state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_RerankThreads)->Arg(1)->Arg(2)->Arg(4);

static void BM_RerankShortlist(benchmark::State& state) {
    const Universe u = make_universe(10000, 26, 128);
    const std::size_t shortlist = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(pecm::rerank(u.query, u.refs, u.weights,
                                              pecm::Transform::Shifted, shortlist));
    }
}
BENCHMARK(BM_RerankShortlist)->Arg(0)->Arg(100)->Arg(1000);

static void BM_BuildImagePrototypes(benchmark::State& state) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    pecm::PatchGrid grid;
    grid.rows = 14;
    grid.cols = 14;
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    for (int p = 0; p < 14 * 14; ++p) {
        pecm::Embedding e(d);
        for (double& x : e) x = u(rng);
        grid.patches.push_back(std::move(e));
    }
    grid.global.assign(d, 0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pecm::build_image_prototypes("img", grid, 3));
    }
}
BENCHMARK(BM_BuildImagePrototypes)->Arg(128)->Arg(512);

static void BM_GradTheta(benchmark::State& state) {
    std::mt19937_64 rng(13);
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::vector<pecm::PrototypeSet> images, reports;
    for (std::size_t i = 0; i < n; ++i) {
        images.push_back(random_set(rng, "i" + std::to_string(i), pecm::Modality::Image, 8, 32));
        reports.push_back(random_set(rng, "r" + std::to_string(i), pecm::Modality::Report, 8, 32));
    }
    pecm::Batch batch;
    for (std::size_t i = 0; i < n; ++i) batch.pairs.emplace_back(&images[i], &reports[i]);
    const pecm::WeightVector w = pecm::WeightVector::uniform(8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pecm::grad_theta(batch, w, pecm::LossConfig{}));
    }
}
BENCHMARK(BM_GradTheta)->Arg(8)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
