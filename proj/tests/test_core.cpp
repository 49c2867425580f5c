#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pecm/types.hpp"

using namespace pecm;

namespace {

PrototypeSet make_set(std::string id, Modality m, std::vector<Embedding> protos) {
    PrototypeSet s;
    s.item_id = std::move(id);
    s.modality = m;
    s.prototypes = std::move(protos);
    return s;
}

} // namespace

TEST_CASE("cosine matches hand-computed values") {
    CHECK(cosine({1, 0}, {1, 0}) == 1.0);
    CHECK(cosine({1, 0}, {0, 1}) == 0.0);
    CHECK(cosine({1, 1}, {1, 0}) ==
          doctest::Approx(0.7071067811865475).epsilon(1e-15));
}

TEST_CASE("cosine is symmetric and positive-scale invariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Embedding a(5), b(5);
        for (double& x : a) x = u(rng);
        for (double& x : b) x = u(rng);
        if (norm(a) == 0.0 || norm(b) == 0.0) continue;
        const double c = cosine(a, b);
        CHECK(c == doctest::Approx(cosine(b, a)).epsilon(1e-14));
        CHECK(std::abs(c) <= 1.0);
        Embedding a3 = a;
        for (double& x : a3) x *= 3.0;
        CHECK(cosine(a3, b) == doctest::Approx(c).epsilon(1e-13));
    }
}

TEST_CASE("cosine clamps rounding overshoot to [-1, 1]") {
    // parallel vectors whose naive quotient could exceed 1 by an ulp
    const Embedding a{0.1, 0.2, 0.3, 0.4};
    Embedding b = a;
    for (double& x : b) x *= 7.0;
    const double c = cosine(a, b);
    CHECK(c <= 1.0);
    CHECK(c == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cosine rejects degenerate input") {
    CHECK_THROWS_AS(cosine({0, 0}, {1, 0}), ZeroNormVector);
    CHECK_THROWS_AS(cosine({1, 0}, {0, 0}), ZeroNormVector);
    CHECK_THROWS_AS(cosine({1, 0, 0}, {1, 0}), DimensionMismatch);
    CHECK_THROWS_AS(dot({1, 2}, {1}), DimensionMismatch);
}

TEST_CASE("all_finite flags NaN and infinity") {
    CHECK(all_finite({0.0, -3.5, 1e300}));
    CHECK_FALSE(all_finite({0.0, std::nan("")}));
    CHECK_FALSE(all_finite({std::numeric_limits<double>::infinity()}));
}

TEST_CASE("zero theta yields unit weights") {
    const WeightVector w = WeightVector::from_theta({0.0, 0.0, 0.0});
    REQUIRE(w.k() == 3);
    for (double x : w.weights()) CHECK(x == doctest::Approx(1.0).epsilon(1e-15));
    const WeightVector u = WeightVector::uniform(5);
    for (double x : u.weights()) CHECK(x == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("weights are positive and sum to K for arbitrary theta") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    std::uniform_int_distribution<std::size_t> ks(1, 26);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = ks(rng);
        std::vector<double> theta(k);
        for (double& t : theta) t = u(rng);
        const WeightVector w = WeightVector::from_theta(theta);
        REQUIRE(w.k() == k);
        CHECK(w.theta() == theta);
        double sum = 0.0;
        for (double x : w.weights()) {
            CHECK(x > 0.0);
            sum += x;
        }
        CHECK(std::abs(sum - static_cast<double>(k)) <= 1e-12);
    }
}

TEST_CASE("weight construction rejects empty and non-finite theta") {
    CHECK_THROWS_AS(WeightVector::from_theta({}), InvalidK);
    CHECK_THROWS_AS(WeightVector::from_theta({0.0, std::nan("")}), NonFiniteLoss);
}

TEST_CASE("sort_ranked orders by descending score with id tie-break") {
    std::vector<RankedEntry> entries{
        {"c", 0.5}, {"a", 0.5}, {"d", 0.9}, {"b", 0.5}, {"e", -0.1}};
    sort_ranked(entries);
    REQUIRE(entries.size() == 5);
    CHECK(entries[0].candidate_id == "d");
    CHECK(entries[1].candidate_id == "a");
    CHECK(entries[2].candidate_id == "b");
    CHECK(entries[3].candidate_id == "c");
    CHECK(entries[4].candidate_id == "e");
}

TEST_CASE("corpus validates structure on construction") {
    const std::vector<Embedding> protos{{1.0, 0.0}, {0.0, 1.0}};
    std::map<std::string, PrototypeSet> images{
        {"i1", make_set("i1", Modality::Image, protos)},
        {"i2", make_set("i2", Modality::Image, protos)}};
    std::map<std::string, PrototypeSet> reports{
        {"r1", make_set("r1", Modality::Report, protos)}};

    SUBCASE("well-formed corpus") {
        const Corpus c(images, reports, {{"r1", {"i1", "i2"}}});
        CHECK(c.k() == 2);
        CHECK(c.dim() == 2);
        CHECK(c.report_of("i1") == "r1");
        CHECK(c.report_of("missing").empty());
        const auto pairs = c.paired_items();
        REQUIRE(pairs.size() == 2);
        CHECK(pairs[0].first->item_id == "i1");
        CHECK(pairs[1].first->item_id == "i2");
        CHECK(pairs[0].second->item_id == "r1");
    }
    SUBCASE("mismatched K") {
        images["i2"].prototypes.push_back({1.0, 1.0});
        CHECK_THROWS_AS(Corpus(images, reports, {{"r1", {"i1"}}}), MismatchedK);
    }
    SUBCASE("mismatched dimension") {
        reports["r1"].prototypes[1] = {1.0, 0.0, 0.0};
        CHECK_THROWS_AS(Corpus(images, reports, {{"r1", {"i1"}}}), DimensionMismatch);
    }
    SUBCASE("dangling image reference") {
        CHECK_THROWS_AS(Corpus(images, reports, {{"r1", {"i1", "nope"}}}), DanglingPairing);
    }
    SUBCASE("dangling report reference") {
        CHECK_THROWS_AS(Corpus(images, reports, {{"r9", {"i1"}}}), DanglingPairing);
    }
    SUBCASE("image owned by two reports") {
        reports.emplace("r2", make_set("r2", Modality::Report, protos));
        CHECK_THROWS_AS(Corpus(images, reports, {{"r1", {"i1"}}, {"r2", {"i1"}}}),
                        PairingConflict);
    }
    SUBCASE("empty image set") {
        CHECK_THROWS_AS(Corpus(images, reports, {{"r1", {}}}), DanglingPairing);
    }
}
