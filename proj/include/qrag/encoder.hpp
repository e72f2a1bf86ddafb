#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/featurize.hpp"
#include "qrag/relpos.hpp"
#include "qrag/rope.hpp"
#include "qrag/tensor.hpp"

namespace qrag {

enum class PositionMode {
    kAbsolute,  // rotation angle driven by the raw document index
    kRelative,  // rotation angle driven by rho relative to selected facts
};

struct EncoderConfig {
    int32_t dim = 64;     // embedding dimension d (even)
    int32_t hidden = 64;  // width of the two affine layers
    int32_t buckets = 2048;
    int32_t order_tags = 4;  // selection-order regions in the state features
    double delta = 10.0;
    double ell = 9.0;
    PositionMode position_mode = PositionMode::kRelative;
    bool stop_enabled = false;
    double rope_base = 10000.0;
    FeatureMode feature_mode = FeatureMode::kHashedNgrams;
    int32_t max_tokens = 220;

    int32_t state_rows() const { return (1 + order_tags) * buckets; }

    void validate() const {
        if (dim <= 0 || dim % 2 != 0) throw InvalidArgument("encoder dim must be positive even");
        if (hidden <= 0) throw InvalidArgument("encoder hidden must be positive");
        if (buckets <= 0) throw InvalidArgument("bucket count must be positive");
        if (order_tags < 1) throw InvalidArgument("order_tags must be >= 1");
        if (!(ell > 0.0 && ell < delta)) throw InvalidArgument("need 0 < ell < delta");
    }

    FeaturizerConfig featurizer_config() const {
        return FeaturizerConfig{buckets, feature_mode, max_tokens};
    }
};

// Lookup-sum embedding followed by two affine layers with a tanh in between.
// Doubles as the gradient accumulator for itself (same shapes).
struct EncoderNet {
    Mat embed;  // rows x hidden
    Mat w1;     // hidden x hidden
    Vec b1;
    Mat w2;  // dim x hidden
    Vec b2;

    static EncoderNet zeros_like(const EncoderNet& o) {
        EncoderNet n;
        n.embed = Mat(o.embed.rows, o.embed.cols);
        n.w1 = Mat(o.w1.rows, o.w1.cols);
        n.b1 = Vec(o.b1.size(), 0.0);
        n.w2 = Mat(o.w2.rows, o.w2.cols);
        n.b2 = Vec(o.b2.size(), 0.0);
        return n;
    }
};

// All trainable weights: theta1 (state), theta2 (action content + STOP
// vector). The rotation frequencies are fixed, not trained.
struct EncoderParams {
    EncoderNet state_net;
    EncoderNet action_net;
    Vec stop_embed;
    Vec freqs;

    static EncoderParams zeros_like(const EncoderParams& o) {
        EncoderParams p;
        p.state_net = EncoderNet::zeros_like(o.state_net);
        p.action_net = EncoderNet::zeros_like(o.action_net);
        p.stop_embed = Vec(o.stop_embed.size(), 0.0);
        p.freqs = o.freqs;
        return p;
    }
};

// Visits every trainable flat array with a stable name. The optimizer, EMA,
// checkpointing and the finite-difference harness all iterate through here,
// so a weight cannot silently escape any of them.
template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
    f("state.embed", p.state_net.embed.data);
    f("state.w1", p.state_net.w1.data);
    f("state.b1", p.state_net.b1);
    f("state.w2", p.state_net.w2.data);
    f("state.b2", p.state_net.b2);
    f("action.embed", p.action_net.embed.data);
    f("action.w1", p.action_net.w1.data);
    f("action.b1", p.action_net.b1);
    f("action.w2", p.action_net.w2.data);
    f("action.b2", p.action_net.b2);
    f("stop_embed", p.stop_embed);
}

// Lockstep variant for weight/gradient or online/target pairs.
template <typename PA, typename PB, typename F>
void for_each_tensor_pair(PA& a, PB& b, F&& f) {
    f("state.embed", a.state_net.embed.data, b.state_net.embed.data);
    f("state.w1", a.state_net.w1.data, b.state_net.w1.data);
    f("state.b1", a.state_net.b1, b.state_net.b1);
    f("state.w2", a.state_net.w2.data, b.state_net.w2.data);
    f("state.b2", a.state_net.b2, b.state_net.b2);
    f("action.embed", a.action_net.embed.data, b.action_net.embed.data);
    f("action.w1", a.action_net.w1.data, b.action_net.w1.data);
    f("action.b1", a.action_net.b1, b.action_net.b1);
    f("action.w2", a.action_net.w2.data, b.action_net.w2.data);
    f("action.b2", a.action_net.b2, b.action_net.b2);
    f("stop_embed", a.stop_embed, b.stop_embed);
}

inline EncoderParams init_params(const EncoderConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, "init_params"));
    auto make_net = [&](int32_t rows) {
        EncoderNet n;
        n.embed = Mat(rows, cfg.hidden);
        init_uniform(n.embed, 0.5 / std::sqrt(static_cast<double>(cfg.hidden)), rng);
        n.w1 = Mat(cfg.hidden, cfg.hidden);
        init_uniform(n.w1, glorot_scale(cfg.hidden, cfg.hidden), rng);
        n.b1 = Vec(cfg.hidden, 0.0);
        n.w2 = Mat(cfg.dim, cfg.hidden);
        init_uniform(n.w2, glorot_scale(cfg.hidden, cfg.dim), rng);
        n.b2 = Vec(cfg.dim, 0.0);
        return n;
    };
    EncoderParams p;
    p.state_net = make_net(cfg.state_rows());
    p.action_net = make_net(cfg.buckets);
    p.stop_embed = Vec(cfg.dim);
    for (double& w : p.stop_embed) w = (2.0 * rng_double(rng) - 1.0) * 0.1;
    p.freqs = rope_frequencies(cfg.dim, cfg.rope_base);
    return p;
}

// Recorded activations of one net forward; enough to replay the chain rule.
struct NetTape {
    std::vector<std::pair<int32_t, double>> input;  // normalized (bucket, weight)
    Vec embed_sum;                                  // e
    Vec hidden_act;                                 // tanh(w1 e + b1)
    Vec out;
    bool recorded = false;
};

// out = w2 tanh(w1 (sum_b x_b E[b]) + b1) + b2 with the sparse input
// L2-normalized. Pass a tape to keep activations for a later backward.
inline Vec net_forward(const EncoderNet& net, const FeatureVector& features,
                       NetTape* tape = nullptr) {
    const int32_t hidden = net.w1.rows;
    Vec e(hidden, 0.0);
    const double norm = features.l2();
    const double scale = norm > 0.0 ? 1.0 / norm : 0.0;
    std::vector<std::pair<int32_t, double>> scaled;
    scaled.reserve(features.entries.size());
    for (auto& [bucket, count] : features.entries) {
        if (bucket < 0 || bucket >= net.embed.rows)
            throw InvalidArgument("feature bucket " + std::to_string(bucket) +
                                  " out of range for embedding table");
        const double w = count * scale;
        scaled.emplace_back(bucket, w);
        const double* row = net.embed.row(bucket);
        for (int32_t h = 0; h < hidden; ++h) e[h] += w * row[h];
    }

    Vec a1 = net.b1;
    matvec_acc(net.w1, e, a1);
    for (double& v : a1) v = std::tanh(v);

    Vec out = net.b2;
    matvec_acc(net.w2, a1, out);

    if (tape) {
        tape->input = std::move(scaled);
        tape->embed_sum = std::move(e);
        tape->hidden_act = std::move(a1);
        tape->out = out;
        tape->recorded = true;
    }
    return out;
}

// Accumulates d(loss)/d(net weights) for d(loss)/d(out) = d_out.
inline void net_backward(const EncoderNet& net, const NetTape& tape, const Vec& d_out,
                         EncoderNet& grads) {
    if (!tape.recorded) throw Error("net_backward called without a recorded forward");
    const int32_t hidden = net.w1.rows;

    Vec d_a1(hidden, 0.0);
    matvec_backward(net.w2, tape.hidden_act, d_out, grads.w2, d_a1);
    for (size_t i = 0; i < d_out.size(); ++i) grads.b2[i] += d_out[i];

    // through tanh
    for (int32_t h = 0; h < hidden; ++h)
        d_a1[h] *= 1.0 - tape.hidden_act[h] * tape.hidden_act[h];

    Vec d_e(hidden, 0.0);
    matvec_backward(net.w1, tape.embed_sum, d_a1, grads.w1, d_e);
    for (int32_t h = 0; h < hidden; ++h) grads.b1[h] += d_a1[h];

    for (auto& [bucket, w] : tape.input) {
        double* row = grads.embed.row(bucket);
        for (int32_t h = 0; h < hidden; ++h) row[h] += w * d_e[h];
    }
}

// Merges query features (region 0) with each selected chunk's features,
// tagged by its rank in the document-ordered selection (regions 1..K). The
// strided layout keeps regions collision-free, so identical final states
// produce identical feature vectors no matter the insertion history.
inline FeatureVector assemble_state_features(
    const FeatureVector& query_features,
    const std::vector<const FeatureVector*>& selected_in_doc_order, const EncoderConfig& cfg) {
    FeatureVector out;
    out.bucket_count = cfg.state_rows();
    out.entries = query_features.entries;

    for (size_t k = 0; k < selected_in_doc_order.size(); ++k) {
        const int32_t region =
            1 + std::min<int32_t>(static_cast<int32_t>(k), cfg.order_tags - 1);
        const int32_t offset = region * cfg.buckets;
        for (auto& [bucket, count] : selected_in_doc_order[k]->entries)
            out.entries.emplace_back(offset + bucket, count);
    }
    std::sort(out.entries.begin(), out.entries.end());
    // merge duplicates (possible when order_tags caps the region index)
    size_t w = 0;
    for (size_t i = 0; i < out.entries.size();) {
        size_t j = i;
        double total = 0.0;
        while (j < out.entries.size() && out.entries[j].first == out.entries[i].first)
            total += out.entries[j++].second;
        out.entries[w++] = {out.entries[i].first, total};
        i = j;
    }
    out.entries.resize(w);
    return out;
}

inline Vec encode_state(const EncoderParams& params, const FeatureVector& state_features,
                        NetTape* tape = nullptr) {
    return net_forward(params.state_net, state_features, tape);
}

inline Vec encode_content(const EncoderParams& params, const FeatureVector& chunk_features,
                          NetTape* tape = nullptr) {
    return net_forward(params.action_net, chunk_features, tape);
}

// Q_i = <state_vec, R_{rho_i} content_i>.
inline Vec q_scores(const Vec& state_vec, const std::vector<const Vec*>& content_vecs,
                    const Vec& rhos, const Vec& freqs) {
    if (content_vecs.size() != rhos.size())
        throw InvalidArgument("q_scores: |content_vecs| != |rhos|");
    if (content_vecs.empty()) throw InvalidArgument("q_scores: empty candidate set");
    Vec out(content_vecs.size());
    for (size_t i = 0; i < content_vecs.size(); ++i) {
        if (content_vecs[i]->size() != state_vec.size())
            throw InvalidArgument("q_scores: dimension mismatch");
        out[i] = rope_dot(state_vec, *content_vecs[i], rhos[i], freqs);
    }
    return out;
}

inline Vec q_scores(const Vec& state_vec, const std::vector<Vec>& content_vecs, const Vec& rhos,
                    const Vec& freqs) {
    std::vector<const Vec*> ptrs(content_vecs.size());
    for (size_t i = 0; i < content_vecs.size(); ++i) ptrs[i] = &content_vecs[i];
    return q_scores(state_vec, ptrs, rhos, freqs);
}

// Forward record of one state scored against a candidate list. A null
// feature pointer marks the STOP action, whose content vector is the learned
// stop embedding at rho = 0.
struct ScoreForward {
    NetTape state_tape;
    std::vector<NetTape> content_tapes;
    std::vector<int8_t> stop_flags;
    Vec rhos;
    Vec scores;
    bool recorded = false;
};

inline Vec score_candidates(const EncoderParams& params, const FeatureVector& state_features,
                            const std::vector<const FeatureVector*>& candidate_features,
                            const Vec& rhos, ScoreForward* rec = nullptr) {
    if (candidate_features.size() != rhos.size())
        throw InvalidArgument("score_candidates: |candidates| != |rhos|");
    if (candidate_features.empty())
        throw InvalidArgument("score_candidates: empty candidate set");

    Vec state_vec = encode_state(params, state_features, rec ? &rec->state_tape : nullptr);
    Vec scores(candidate_features.size());
    if (rec) {
        rec->content_tapes.assign(candidate_features.size(), NetTape{});
        rec->stop_flags.assign(candidate_features.size(), 0);
        rec->rhos = rhos;
    }
    for (size_t i = 0; i < candidate_features.size(); ++i) {
        double rho = rhos[i];
        if (candidate_features[i] == nullptr) {
            if (rec) rec->stop_flags[i] = 1;
            scores[i] = rope_dot(state_vec, params.stop_embed, rho, params.freqs);
        } else {
            Vec content = encode_content(params, *candidate_features[i],
                                         rec ? &rec->content_tapes[i] : nullptr);
            scores[i] = rope_dot(state_vec, content, rho, params.freqs);
        }
    }
    if (rec) {
        rec->scores = scores;
        rec->recorded = true;
    }
    return scores;
}

// Accumulates gradients of sum_i upstream[i] * Q_i into `grads`. The
// rotation is linear, so its backward is the transpose (negative-angle)
// rotation applied to the opposite side of the inner product.
inline void grad_q(const EncoderParams& params, const ScoreForward& rec, const Vec& upstream,
                   EncoderParams& grads) {
    if (!rec.recorded) throw Error("grad_q called without a recorded forward");
    if (upstream.size() != rec.scores.size())
        throw InvalidArgument("grad_q: upstream size mismatch");

    const Vec& state_vec = rec.state_tape.out;
    Vec d_state(state_vec.size(), 0.0);
    for (size_t i = 0; i < upstream.size(); ++i) {
        const double u = upstream[i];
        if (u == 0.0) continue;
        const Vec& content = rec.stop_flags[i] ? params.stop_embed : rec.content_tapes[i].out;
        Vec rotated = rope(content, rec.rhos[i], params.freqs);
        for (size_t d = 0; d < d_state.size(); ++d) d_state[d] += u * rotated[d];

        Vec d_content = rope(state_vec, -rec.rhos[i], params.freqs);
        for (double& v : d_content) v *= u;
        if (rec.stop_flags[i]) {
            for (size_t d = 0; d < d_content.size(); ++d) grads.stop_embed[d] += d_content[d];
        } else {
            net_backward(params.action_net, rec.content_tapes[i], d_content, grads.action_net);
        }
    }
    net_backward(params.state_net, rec.state_tape, d_state, grads.state_net);
}

}  // namespace qrag
