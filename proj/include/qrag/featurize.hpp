#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/rng.hpp"

namespace qrag {

// Sparse bag of hashed n-gram counts. Entries are sorted by bucket and
// deduplicated; counts are non-negative.
struct FeatureVector {
    int32_t bucket_count = 0;
    std::vector<std::pair<int32_t, double>> entries;

    bool empty() const { return entries.empty(); }

    double l2() const {
        double s = 0.0;
        for (auto& [b, c] : entries) s += c * c;
        return std::sqrt(s);
    }

    static FeatureVector one_hot(int32_t bucket, int32_t bucket_count) {
        FeatureVector f;
        f.bucket_count = bucket_count;
        f.entries.emplace_back(bucket % bucket_count, 1.0);
        return f;
    }
};

enum class FeatureMode {
    kHashedNgrams,  // word unigrams + bigrams + in-word character trigrams
    kTokenIndex,    // text is a decimal chunk id -> single one-hot bucket
};

struct FeaturizerConfig {
    int32_t bucket_count = 2048;
    FeatureMode mode = FeatureMode::kHashedNgrams;
    int32_t max_tokens = 220;  // longer texts keep the head, tail is dropped
};

// Deterministic, vocabulary-free text features. Stands in for a pretrained
// tokenizer/encoder stack: order sensitivity comes from bigrams and
// character trigrams rather than positions.
class Featurizer {
  public:
    explicit Featurizer(FeaturizerConfig cfg = {}) : cfg_(cfg) {
        if (cfg_.bucket_count < 1) throw InvalidArgument("bucket_count must be >= 1");
    }

    const FeaturizerConfig& config() const { return cfg_; }

    FeatureVector featurize(std::string_view text) const {
        FeatureVector out;
        out.bucket_count = cfg_.bucket_count;

        if (cfg_.mode == FeatureMode::kTokenIndex) {
            uint64_t id = 0;
            if (parse_uint(text, id)) {
                out.entries.emplace_back(static_cast<int32_t>(id % cfg_.bucket_count), 1.0);
            } else if (!text.empty()) {
                out.entries.emplace_back(bucket_of(fnv1a(text)), 1.0);
            }
            return out;
        }

        std::vector<std::string_view> tokens = split_tokens(text);
        if (static_cast<int32_t>(tokens.size()) > cfg_.max_tokens)
            tokens.resize(cfg_.max_tokens);
        if (tokens.empty()) return out;

        std::vector<int32_t> buckets;
        buckets.reserve(tokens.size() * 8);
        for (size_t i = 0; i < tokens.size(); ++i) {
            buckets.push_back(bucket_of(hash_ngram('u', tokens[i])));
            if (i + 1 < tokens.size())
                buckets.push_back(bucket_of(hash_ngram('b', tokens[i], tokens[i + 1])));
            add_char_trigrams(tokens[i], buckets);
        }

        std::sort(buckets.begin(), buckets.end());
        for (size_t i = 0; i < buckets.size();) {
            size_t j = i;
            while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
            out.entries.emplace_back(buckets[i], static_cast<double>(j - i));
            i = j;
        }
        return out;
    }

  private:
    int32_t bucket_of(uint64_t h) const {
        return static_cast<int32_t>(h % static_cast<uint64_t>(cfg_.bucket_count));
    }

    static uint64_t hash_ngram(char tag, std::string_view a, std::string_view b = {}) {
        uint64_t h = fnv1a(std::string_view(&tag, 1));
        h = fnv1a(a, h);
        if (!b.empty()) {
            h = fnv1a(std::string_view(" ", 1), h);
            h = fnv1a(b, h);
        }
        return h;
    }

    void add_char_trigrams(std::string_view word, std::vector<int32_t>& buckets) const {
        // boundary-marked trigrams over ^word$
        std::string padded;
        padded.reserve(word.size() + 2);
        padded.push_back('^');
        padded.append(word);
        padded.push_back('$');
        if (padded.size() < 3) return;
        for (size_t i = 0; i + 3 <= padded.size(); ++i) {
            buckets.push_back(bucket_of(hash_ngram('c', std::string_view(padded).substr(i, 3))));
        }
    }

    static std::vector<std::string_view> split_tokens(std::string_view text) {
        std::vector<std::string_view> tokens;
        size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && is_space(text[i])) ++i;
            size_t j = i;
            while (j < text.size() && !is_space(text[j])) ++j;
            if (j > i) tokens.push_back(text.substr(i, j - i));
            i = j;
        }
        return tokens;
    }

    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

    static bool parse_uint(std::string_view s, uint64_t& out) {
        size_t a = 0, b = s.size();
        while (a < b && is_space(s[a])) ++a;
        while (b > a && is_space(s[b - 1])) --b;
        if (a == b) return false;
        uint64_t v = 0;
        for (size_t i = a; i < b; ++i) {
            if (s[i] < '0' || s[i] > '9') return false;
            v = v * 10 + static_cast<uint64_t>(s[i] - '0');
        }
        out = v;
        return true;
    }

    FeaturizerConfig cfg_;
};

}  // namespace qrag
