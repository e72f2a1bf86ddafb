#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qrag/qrag.hpp"

using namespace qrag;

TEST_CASE("featurize is deterministic and produces sorted unique buckets") {
    const Featurizer f;
    const FeatureVector a = f.featurize("The quick brown fox jumps over the lazy dog.");
    const FeatureVector b = f.featurize("The quick brown fox jumps over the lazy dog.");
    REQUIRE(a.entries == b.entries);
    REQUIRE_FALSE(a.empty());
    for (size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].first >= 0);
        CHECK(a.entries[i].first < a.bucket_count);
        CHECK(a.entries[i].second > 0.0);
        if (i > 0) CHECK(a.entries[i].first > a.entries[i - 1].first);
    }
}

TEST_CASE("repeated tokens accumulate counts") {
    const Featurizer f;
    const FeatureVector once = f.featurize("ember");
    const FeatureVector thrice = f.featurize("ember ember ember");
    // one unigram + five boundary trigrams (^em emb mbe ber er$), minus collisions
    REQUIRE(once.entries.size() >= 2);
    REQUIRE(once.entries.size() <= 6);
    // the unigram bucket appears three times as often in the repeated text
    double max_once = 0.0, max_thrice = 0.0;
    for (auto& [bucket, count] : once.entries) max_once = std::max(max_once, count);
    for (auto& [bucket, count] : thrice.entries) max_thrice = std::max(max_thrice, count);
    CHECK(max_thrice >= 3.0 * 1.0);
    CHECK(thrice.l2() > once.l2());
}

TEST_CASE("features are case and order sensitive") {
    const Featurizer f;
    CHECK(f.featurize("Magic Number").entries != f.featurize("magic number").entries);
    CHECK(f.featurize("alpha beta").entries != f.featurize("beta alpha").entries);
}

TEST_CASE("whitespace splitting ignores blanks and trims") {
    const Featurizer f;
    CHECK(f.featurize("  a\tb \n c ").entries == f.featurize("a b c").entries);
    CHECK(f.featurize("").empty());
    CHECK(f.featurize("   \n\t").empty());
}

TEST_CASE("token cap keeps the head of long texts") {
    FeaturizerConfig cfg;
    cfg.max_tokens = 4;
    const Featurizer f(cfg);
    CHECK(f.featurize("one two three four five six").entries ==
          f.featurize("one two three four").entries);
}

TEST_CASE("token index mode maps decimal ids to single buckets") {
    FeaturizerConfig cfg;
    cfg.bucket_count = 64;
    cfg.mode = FeatureMode::kTokenIndex;
    const Featurizer f(cfg);

    const FeatureVector v = f.featurize("17");
    REQUIRE(v.entries.size() == 1);
    CHECK(v.entries[0] == std::pair<int32_t, double>{17, 1.0});

    CHECK(f.featurize(" 17 ").entries == v.entries);   // whitespace trimmed
    CHECK(f.featurize("81").entries[0].first == 17);   // wraps modulo bucket_count

    const FeatureVector text = f.featurize("not a number");
    REQUIRE(text.entries.size() == 1);  // hashed fallback, still a single bucket
    CHECK(f.featurize("").empty());
}

TEST_CASE("one_hot wraps the bucket index") {
    const FeatureVector v = FeatureVector::one_hot(70, 64);
    CHECK(v.entries == std::vector<std::pair<int32_t, double>>{{6, 1.0}});
    CHECK(v.l2() == 1.0);
}

TEST_CASE("featurizer rejects an empty bucket space") {
    FeaturizerConfig cfg;
    cfg.bucket_count = 0;
    CHECK_THROWS_AS(Featurizer(cfg), InvalidArgument);
}
