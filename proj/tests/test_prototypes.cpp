#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "pecm/prototypes.hpp"

using namespace pecm;

namespace {

PatchGrid make_grid(std::size_t rows, std::size_t cols, std::size_t dim,
                    const std::function<double(std::size_t r, std::size_t c, std::size_t d)>& f) {
    PatchGrid g;
    g.rows = rows;
    g.cols = cols;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            Embedding e(dim);
            for (std::size_t d = 0; d < dim; ++d) e[d] = f(r, c, d);
            g.patches.push_back(std::move(e));
        }
    }
    g.global = Embedding(dim, 42.0);
    return g;
}

} // namespace

TEST_CASE("partition_axis produces the documented ragged split") {
    CHECK(partition_axis(14, 3) == std::vector<std::size_t>{3, 3, 3, 3, 2});
    CHECK(partition_axis(4, 4) == std::vector<std::size_t>{4});
    CHECK(partition_axis(6, 3) == std::vector<std::size_t>{3, 3});
    CHECK(partition_axis(1, 3) == std::vector<std::size_t>{1});
    CHECK(partition_axis(5, 1) == std::vector<std::size_t>{1, 1, 1, 1, 1});
}

TEST_CASE("partition_axis sizes sum to n with full groups first") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> pick(1, 40);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = pick(rng);
        const std::size_t g = pick(rng);
        const auto sizes = partition_axis(n, g);
        REQUIRE(sizes.size() == (n + g - 1) / g);
        std::size_t sum = 0;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            CHECK(sizes[i] >= 1);
            CHECK(sizes[i] <= g);
            if (i + 1 < sizes.size()) CHECK(sizes[i] == g);
            sum += sizes[i];
        }
        CHECK(sum == n);
    }
}

TEST_CASE("a 14x14 grid with group size 3 yields K=26") {
    const PatchGrid grid = make_grid(14, 14, 4, [](std::size_t r, std::size_t c, std::size_t) {
        return static_cast<double>(r * 100 + c);
    });
    const PrototypeSet set = build_image_prototypes("img", grid, 3);
    CHECK(set.item_id == "img");
    CHECK(set.modality == Modality::Image);
    REQUIRE(set.k() == 26);
    CHECK(set.prototypes.back() == grid.global);

    // region (0,0) covers rows 0..2, cols 0..2: mean value 100 + 1
    CHECK(set.prototypes[0][0] == doctest::Approx(101.0).epsilon(1e-12));
    // region (4,4) covers the ragged 2x2 corner rows 12..13, cols 12..13
    CHECK(set.prototypes[24][0] == doctest::Approx(1262.5).epsilon(1e-12));
    // region (0,4) covers rows 0..2, cols 12..13
    CHECK(set.prototypes[4][0] == doctest::Approx(112.5).epsilon(1e-12));
}

TEST_CASE("2x2 grid with group size 2 averages all four patches") {
    PatchGrid grid;
    grid.rows = 2;
    grid.cols = 2;
    grid.patches = {{1, 0}, {0, 1}, {1, 0}, {0, 1}};
    grid.global = {9, 9};
    const PrototypeSet set = build_image_prototypes("g", grid, 2);
    REQUIRE(set.k() == 2);
    CHECK(set.prototypes[0] == Embedding{0.5, 0.5});
    CHECK(set.prototypes[1] == Embedding{9, 9});
}

TEST_CASE("identical patches give identical regional prototypes") {
    const Embedding u{0.25, -1.5, 3.0};
    const PatchGrid grid = make_grid(7, 5, 3, [&](std::size_t, std::size_t, std::size_t d) {
        return u[d];
    });
    const PrototypeSet set = build_image_prototypes("g", grid, 3);
    REQUIRE(set.k() == 3 * 2 + 1);
    for (std::size_t k = 0; k + 1 < set.k(); ++k) {
        for (std::size_t d = 0; d < 3; ++d) {
            CHECK(set.prototypes[k][d] == doctest::Approx(u[d]).epsilon(1e-15));
        }
    }
}

TEST_CASE("regional means conserve patch mass on random grids") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    std::uniform_int_distribution<std::size_t> extent(1, 16);
    std::uniform_int_distribution<std::size_t> group(1, 5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = extent(rng), cols = extent(rng), dim = 1 + trial % 7;
        const std::size_t g = group(rng);
        PatchGrid grid = make_grid(rows, cols, dim, [&](std::size_t, std::size_t, std::size_t) {
            return val(rng);
        });
        const PrototypeSet set = build_image_prototypes("g", grid, g);

        const auto row_sizes = partition_axis(rows, g);
        const auto col_sizes = partition_axis(cols, g);
        REQUIRE(set.k() == row_sizes.size() * col_sizes.size() + 1);

        for (std::size_t d = 0; d < dim; ++d) {
            double patch_sum = 0.0;
            for (const Embedding& p : grid.patches) patch_sum += p[d];
            double region_sum = 0.0;
            std::size_t k = 0;
            for (const std::size_t rs : row_sizes) {
                for (const std::size_t cs : col_sizes) {
                    region_sum += set.prototypes[k][d] * static_cast<double>(rs * cs);
                    ++k;
                }
            }
            CHECK(region_sum ==
                  doctest::Approx(patch_sum).epsilon(1e-9).scale(std::abs(patch_sum) + 1.0));
        }
    }
}

TEST_CASE("permuting patches inside one block leaves its prototype unchanged") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    PatchGrid grid = make_grid(6, 6, 2, [&](std::size_t, std::size_t, std::size_t) {
        return val(rng);
    });
    const PrototypeSet before = build_image_prototypes("g", grid, 3);
    // swap two patches inside block (0,0): positions (0,0) and (2,1)
    std::swap(grid.patches[0 * 6 + 0], grid.patches[2 * 6 + 1]);
    const PrototypeSet after = build_image_prototypes("g", grid, 3);
    for (std::size_t d = 0; d < 2; ++d) {
        CHECK(after.prototypes[0][d] == doctest::Approx(before.prototypes[0][d]).epsilon(1e-14));
    }
}

TEST_CASE("report prototypes split sentences into near-equal groups") {
    SentenceSet ss;
    ss.sentences = {{1, 0}, {3, 0}, {5, 0}, {7, 0}, {9, 0}};
    ss.global = {0, 1};
    const PrototypeSet set = build_report_prototypes("rep", ss, 4);
    REQUIRE(set.k() == 4);
    CHECK(set.modality == Modality::Report);
    // groups [2,2,1]: means 2, 6, 9
    CHECK(set.prototypes[0] == Embedding{2, 0});
    CHECK(set.prototypes[1] == Embedding{6, 0});
    CHECK(set.prototypes[2] == Embedding{9, 0});
    CHECK(set.prototypes[3] == Embedding{0, 1});
}

TEST_CASE("25 sentences at K=26 pass through as singleton groups") {
    SentenceSet ss;
    for (int i = 0; i < 25; ++i) ss.sentences.push_back({static_cast<double>(i), 1.0});
    ss.global = {-1, -1};
    const PrototypeSet set = build_report_prototypes("rep", ss, 26);
    REQUIRE(set.k() == 26);
    for (std::size_t k = 0; k < 25; ++k) CHECK(set.prototypes[k] == ss.sentences[k]);
    CHECK(set.prototypes[25] == ss.global);
}

TEST_CASE("short reports repeat the last group prototype") {
    SentenceSet ss;
    ss.sentences = {{2, 4}};
    ss.global = {1, 1};
    const PrototypeSet set = build_report_prototypes("rep", ss, 4);
    REQUIRE(set.k() == 4);
    CHECK(set.prototypes[0] == Embedding{2, 4});
    CHECK(set.prototypes[1] == Embedding{2, 4});
    CHECK(set.prototypes[2] == Embedding{2, 4});
    CHECK(set.prototypes[3] == Embedding{1, 1});
}

TEST_CASE("report grouping always returns exactly K with sizes differing by one") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> n_sent(1, 40);
    std::uniform_int_distribution<std::size_t> k_pick(2, 26);
    for (int trial = 0; trial < 200; ++trial) {
        SentenceSet ss;
        const std::size_t n = n_sent(rng);
        for (std::size_t i = 0; i < n; ++i) {
            ss.sentences.push_back({static_cast<double>(i + 1)});
        }
        ss.global = {0.0};
        const std::size_t k = k_pick(rng);
        const PrototypeSet set = build_report_prototypes("rep", ss, k);
        REQUIRE(set.k() == k);

        // reconstruct the contiguous grouping from the prototype means:
        // every group mean of consecutive integers m..m+c-1 is m + (c-1)/2
        const std::size_t groups = std::min(k - 1, n);
        const std::size_t base = n / groups;
        const std::size_t extra = n % groups;
        std::size_t next = 1;
        for (std::size_t gi = 0; gi < groups; ++gi) {
            const std::size_t size = base + (gi < extra ? 1 : 0);
            const double mean =
                static_cast<double>(next) + static_cast<double>(size - 1) / 2.0;
            CHECK(set.prototypes[gi][0] == doctest::Approx(mean).epsilon(1e-12));
            next += size;
        }
        CHECK(next == n + 1);
        for (std::size_t gi = groups; gi + 1 < k; ++gi) {
            CHECK(set.prototypes[gi] == set.prototypes[groups - 1]);
        }
    }
}

TEST_CASE("report prototypes require K of at least 2") {
    SentenceSet ss;
    ss.sentences = {{1.0}};
    ss.global = {1.0};
    CHECK_THROWS_AS(build_report_prototypes("rep", ss, 1), InvalidK);
    CHECK_THROWS_AS(build_report_prototypes("rep", ss, 0), InvalidK);
}
