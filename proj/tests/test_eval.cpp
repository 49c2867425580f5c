#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <random>

#include "pecm/eval.hpp"

using namespace pecm;

namespace {

RankedList make_list(std::string query, std::vector<std::string> ids) {
    RankedList r;
    r.query_id = std::move(query);
    double score = 1.0;
    for (std::string& id : ids) {
        r.entries.push_back({std::move(id), score});
        score -= 0.01;
    }
    return r;
}

} // namespace

TEST_CASE("recall divides hits by the capped relevant count") {
    const RankedList r = make_list("q", {"a", "b", "c", "d", "e", "f"});
    const std::set<std::string> relevant = {"b", "d", "f"};
    // top-4 holds b and d: 2 / min(4, 3)
    CHECK(recall_at_k(r, relevant, 4) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(recall_at_k(r, relevant, 6) == 1.0);
    CHECK(recall_at_k(r, relevant, 1) == 0.0);
    CHECK(recall_at_k(r, relevant, 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("the cap makes a saturated top-K score one") {
    const RankedList r = make_list("q", {"a", "b", "c", "d", "e"});
    const std::set<std::string> relevant = {"a", "b", "c", "d", "e", "x", "y"};
    // 5 hits / min(5, 7) = 1 even though 2 relevant items cannot fit
    CHECK(recall_at_k(r, relevant, 5) == 1.0);
}

TEST_CASE("precision divides by K even past the list end") {
    const RankedList r = make_list("q", {"a", "b", "c"});
    const std::set<std::string> relevant = {"a", "b", "c"};
    CHECK(precision_at_k(r, relevant, 3) == 1.0);
    CHECK(precision_at_k(r, relevant, 5) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(precision_at_k(r, relevant, 1) == 1.0);
}

TEST_CASE("metrics consume entry order, not stored scores") {
    RankedList r;
    r.query_id = "q";
    r.entries.push_back({"low", 0.1});
    r.entries.push_back({"high", 0.9});
    const std::set<std::string> relevant = {"high"};
    CHECK(recall_at_k(r, relevant, 1) == 0.0);
    CHECK(precision_at_k(r, relevant, 1) == 0.0);
}

TEST_CASE("empty relevance and zero K are rejected") {
    const RankedList r = make_list("q7", {"a"});
    CHECK_THROWS_WITH_AS(recall_at_k(r, {}, 3), doctest::Contains("q7"), EmptyRelevance);
    CHECK_THROWS_AS(recall_at_k(r, {"a"}, 0), std::invalid_argument);
    CHECK_THROWS_AS(precision_at_k(r, {"a"}, 0), std::invalid_argument);
    // precision of an empty relevant set is well-defined: zero hits
    CHECK(precision_at_k(r, {}, 1) == 0.0);
}

TEST_CASE("micro aggregation is the unweighted mean") {
    const std::vector<PerQueryValue> v = {
        {"q1", "", 1.0}, {"q2", "", 0.0}, {"q3", "", 1.0}};
    CHECK(aggregate(v, AggregateMode::Micro) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("macro aggregation averages per-class means") {
    const std::vector<PerQueryValue> v = {
        {"q1", "a", 1.0}, {"q2", "a", 0.0}, {"q3", "b", 1.0}};
    // class a mean 0.5, class b mean 1.0
    CHECK(aggregate(v, AggregateMode::Macro) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(aggregate(v, AggregateMode::Micro) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("macro aggregation requires a label on every entry") {
    const std::vector<PerQueryValue> v = {{"q1", "a", 1.0}, {"q2", "", 0.0}};
    CHECK_THROWS_WITH_AS(aggregate(v, AggregateMode::Macro), doctest::Contains("q2"),
                         MissingLabels);
    CHECK(aggregate(v, AggregateMode::Micro) == 0.5);
    CHECK_THROWS_AS(aggregate({}, AggregateMode::Micro), std::invalid_argument);
}

TEST_CASE("metrics agree with a counting oracle on random fixtures") {
    std::mt19937_64 rng(113);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 20;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "c%02zu", i);
            ids.push_back(buf);
        }
        std::shuffle(ids.begin(), ids.end(), rng);
        const RankedList r = make_list("q", ids);

        std::set<std::string> relevant;
        for (const std::string& id : ids) {
            if (rng() % 3 == 0) relevant.insert(id);
        }
        if (relevant.empty()) relevant.insert(ids[rng() % n]);
        const std::size_t k = 1 + rng() % (n + 4);

        std::size_t hits = 0;
        for (std::size_t i = 0; i < std::min(k, n); ++i) {
            hits += relevant.count(r.entries[i].candidate_id);
        }
        const double want_recall =
            static_cast<double>(hits) /
            static_cast<double>(std::min(k, relevant.size()));
        const double want_precision =
            static_cast<double>(hits) / static_cast<double>(k);
        CHECK(recall_at_k(r, relevant, k) == want_recall);
        CHECK(precision_at_k(r, relevant, k) == want_precision);
    }
}

TEST_CASE("micro and macro coincide for balanced single-query classes") {
    std::mt19937_64 rng(127);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<PerQueryValue> v;
    for (int i = 0; i < 12; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "cls%02d", i);
        v.push_back({"q" + std::to_string(i), buf, u(rng)});
    }
    CHECK(aggregate(v, AggregateMode::Micro) ==
          doctest::Approx(aggregate(v, AggregateMode::Macro)).epsilon(1e-12));
}
