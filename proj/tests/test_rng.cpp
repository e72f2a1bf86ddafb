#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "qrag/qrag.hpp"

using namespace qrag;

TEST_CASE("derive_seed is deterministic and purpose-separated") {
    CHECK(derive_seed(42, "rollout", 1, 2) == derive_seed(42, "rollout", 1, 2));
    CHECK(derive_seed(42, "rollout", 1, 2) != derive_seed(42, "rollout", 2, 1));
    CHECK(derive_seed(42, "rollout", 1, 2) != derive_seed(43, "rollout", 1, 2));
    CHECK(derive_seed(42, "train_task", 0, 0) != derive_seed(42, "eval_task", 0, 0));
}

TEST_CASE("rng_below stays in range and covers values") {
    Rng rng(7);
    std::set<uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const uint64_t v = rng_below(rng, 10);
        REQUIRE(v < 10);
        seen.insert(v);
    }
    CHECK(seen.size() == 10);
    CHECK_THROWS_AS(rng_below(rng, 0), InvalidArgument);
}

TEST_CASE("rng_int covers an inclusive range") {
    Rng rng(3);
    std::set<int64_t> seen;
    for (int i = 0; i < 500; ++i) {
        const int64_t v = rng_int(rng, -2, 2);
        REQUIRE(v >= -2);
        REQUIRE(v <= 2);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("rng_double lands in the half-open unit interval") {
    Rng rng(11);
    double lo = 1.0;
    double hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng_double(rng);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.05);
    CHECK(hi > 0.95);
}

TEST_CASE("rng_normal produces a roughly standard sample") {
    Rng rng(5);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = rng_normal(rng);
        REQUIRE(std::isfinite(x));
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("identical seeds give identical streams") {
    Rng a(123);
    Rng b(123);
    for (int i = 0; i < 100; ++i) CHECK(rng_double(a) == rng_double(b));
}
