#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/encoder.hpp"
#include "qrag/tensor.hpp"

namespace qrag {

struct OptimConfig {
    double lr = 1.5e-5;  // peak rate; the schedule scales it per step
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    double weight_decay = 5e-4;
    double clip_norm = 2.0;  // global L2 clip, 0 disables
};

// First and second moments per tensor, keyed by the stable tensor names.
struct OptimizerState {
    std::map<std::string, Vec> m;
    std::map<std::string, Vec> v;
    int64_t step = 0;        // completed optimizer steps (bias correction)
    int64_t skipped = 0;     // steps dropped because of non-finite gradients

    static OptimizerState for_params(const EncoderParams& params) {
        OptimizerState s;
        for_each_tensor(params, [&](const char* name, const Vec& w) {
            s.m[name] = Vec(w.size(), 0.0);
            s.v[name] = Vec(w.size(), 0.0);
        });
        return s;
    }
};

inline double global_grad_norm(const EncoderParams& grads) {
    double sq = 0.0;
    for_each_tensor(grads, [&](const char*, const Vec& g) {
        for (double v : g) sq += v * v;
    });
    return std::sqrt(sq);
}

// One AdamW step at the given learning rate. Clips the global gradient norm
// first; if the norm is still non-finite the step is skipped (counted in
// state.skipped) so a single bad batch cannot poison the weights. Weight
// decay is decoupled and scaled by lr. Returns the pre-clip gradient norm.
inline double adamw_step(EncoderParams& params, EncoderParams& grads, OptimizerState& state,
                         const OptimConfig& cfg, double lr) {
    const double norm = global_grad_norm(grads);
    if (!std::isfinite(norm)) {
        ++state.skipped;
        return norm;
    }
    double scale = 1.0;
    if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) scale = cfg.clip_norm / norm;

    const int64_t t = state.step + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

    for_each_tensor_pair(params, grads, [&](const char* name, Vec& w, const Vec& g) {
        Vec& m = state.m.at(name);
        Vec& v = state.v.at(name);
        for (size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i] * scale;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * w[i]);
        }
    });
    state.step = t;
    return norm;
}

struct ScheduleConfig {
    double lr0 = 1.5e-5;
    int64_t warmup_steps = 1000;
    int64_t total_steps = 20000;
    double final_frac = 0.1;  // lr decays linearly to final_frac * lr0
    double alpha0 = 0.05;
    bool anneal_alpha = true;
    double alpha_floor = 1e-6;
};

struct ScheduleValues {
    double lr = 0.0;
    double alpha = 0.0;
};

// Linear warmup from zero to lr0, then linear decay to final_frac * lr0 at
// total_steps. The temperature follows the same shape scaled by alpha0/lr0
// so exploration cools exactly as fast as learning does, floored to keep the
// soft backup well defined. lr(0) = 0 and lr(warmup_steps) = lr0 exactly.
inline ScheduleValues schedule_at(int64_t step, const ScheduleConfig& cfg) {
    if (cfg.total_steps <= 0) throw InvalidArgument("schedule: total_steps must be positive");
    if (cfg.warmup_steps < 0) throw InvalidArgument("schedule: warmup_steps must be >= 0");
    if (cfg.warmup_steps >= cfg.total_steps)
        throw InvalidArgument("schedule: warmup_steps must be < total_steps");
    if (step < 0) throw InvalidArgument("schedule: step must be >= 0");
    double frac;
    if (step < cfg.warmup_steps) {
        frac = static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    } else if (step >= cfg.total_steps) {
        frac = cfg.final_frac;
    } else {
        const double progress = static_cast<double>(step - cfg.warmup_steps) /
                                static_cast<double>(cfg.total_steps - cfg.warmup_steps);
        frac = 1.0 + (cfg.final_frac - 1.0) * progress;
    }
    ScheduleValues out;
    out.lr = cfg.lr0 * frac;
    out.alpha = cfg.anneal_alpha ? std::max(cfg.alpha0 * frac, cfg.alpha_floor) : cfg.alpha0;
    return out;
}

// theta_target <- tau * theta + (1 - tau) * theta_target.
inline void ema_update(const EncoderParams& params, EncoderParams& target, double tau) {
    if (tau < 0.0 || tau > 1.0) throw InvalidArgument("ema_update: tau out of [0,1]");
    for_each_tensor_pair(target, params, [&](const char*, Vec& tw, const Vec& pw) {
        for (size_t i = 0; i < tw.size(); ++i) tw[i] = tau * pw[i] + (1.0 - tau) * tw[i];
    });
}

inline void zero_grads(EncoderParams& grads) {
    for_each_tensor(grads, [&](const char*, Vec& g) { std::fill(g.begin(), g.end(), 0.0); });
}

}  // namespace qrag
