#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "qrag/qrag.hpp"

using namespace qrag;

namespace {

EncoderConfig micro_config() {
    EncoderConfig cfg;
    cfg.dim = 4;
    cfg.hidden = 2;
    cfg.buckets = 3;
    cfg.order_tags = 1;
    return cfg;
}

EncoderParams zero_params() {
    return EncoderParams::zeros_like(init_params(micro_config(), 1));
}

void fill_params(EncoderParams& p, double value) {
    for_each_tensor(p, [&](const char*, Vec& w) { std::fill(w.begin(), w.end(), value); });
}

double max_abs_diff(EncoderParams& a, EncoderParams& b) {
    double worst = 0.0;
    for_each_tensor_pair(a, b, [&](const char*, const Vec& x, const Vec& y) {
        for (size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    });
    return worst;
}

}  // namespace

TEST_CASE("optimizer state covers every tensor") {
    EncoderParams params = init_params(micro_config(), 3);
    OptimizerState state = OptimizerState::for_params(params);
    CHECK(state.m.size() == 11);
    CHECK(state.v.size() == 11);
    for_each_tensor(params, [&](const char* name, const Vec& w) {
        REQUIRE(state.m.at(name).size() == w.size());
        REQUIRE(state.v.at(name).size() == w.size());
    });
}

TEST_CASE("global gradient norm") {
    EncoderParams grads = zero_params();
    grads.stop_embed[0] = 3.0;
    grads.stop_embed[1] = -4.0;
    CHECK(global_grad_norm(grads) == Catch::Approx(5.0).margin(1e-12));
}

TEST_CASE("first step moves a unit gradient by roughly the learning rate") {
    EncoderParams params = zero_params();
    EncoderParams grads = zero_params();
    grads.stop_embed[0] = 1.0;
    OptimizerState state = OptimizerState::for_params(params);
    OptimConfig cfg;
    cfg.weight_decay = 0.0;

    const double norm = adamw_step(params, grads, state, cfg, 0.1);
    CHECK(norm == Catch::Approx(1.0).margin(1e-12));
    CHECK(state.step == 1);
    CHECK(state.skipped == 0);
    // bias-corrected Adam normalizes the first step to lr * g/(|g| + eps)
    CHECK(params.stop_embed[0] == Catch::Approx(-0.1).margin(1e-6));
    // untouched weights stay put when decay is off
    CHECK(params.stop_embed[1] == 0.0);
    CHECK(params.state_net.b1[0] == 0.0);
}

TEST_CASE("zero gradients and zero decay leave weights unchanged") {
    EncoderParams params = init_params(micro_config(), 7);
    EncoderParams before = params;
    EncoderParams grads = zero_params();
    OptimizerState state = OptimizerState::for_params(params);
    OptimConfig cfg;
    cfg.weight_decay = 0.0;
    adamw_step(params, grads, state, cfg, 0.1);
    CHECK(max_abs_diff(params, before) == 0.0);
    CHECK(state.step == 1);
}

TEST_CASE("decay is decoupled and scaled by the learning rate") {
    EncoderParams params = zero_params();
    fill_params(params, 2.0);
    EncoderParams grads = zero_params();
    OptimizerState state = OptimizerState::for_params(params);
    OptimConfig cfg;
    cfg.weight_decay = 0.01;
    adamw_step(params, grads, state, cfg, 0.1);
    // w <- w - lr * wd * w with no gradient term
    for_each_tensor(params, [&](const char*, const Vec& w) {
        for (double x : w) CHECK(x == Catch::Approx(2.0 * (1.0 - 0.001)).margin(1e-12));
    });
}

TEST_CASE("clipping rescales the gradient but reports the raw norm") {
    EncoderParams params = zero_params();
    EncoderParams grads = zero_params();
    grads.stop_embed[0] = 4.0;
    grads.stop_embed[1] = 3.0;
    OptimizerState state = OptimizerState::for_params(params);
    OptimConfig cfg;
    cfg.weight_decay = 0.0;

    const double norm = adamw_step(params, grads, state, cfg, 0.1);
    CHECK(norm == Catch::Approx(5.0).margin(1e-12));
    // clip_norm 2 over norm 5 scales gradients by 0.4 before the moments
    CHECK(state.m.at("stop_embed")[0] == Catch::Approx(0.1 * 1.6).margin(1e-12));
    CHECK(state.m.at("stop_embed")[1] == Catch::Approx(0.1 * 1.2).margin(1e-12));
    CHECK(state.v.at("stop_embed")[0] == Catch::Approx(0.02 * 1.6 * 1.6).margin(1e-12));
}

TEST_CASE("non-finite gradients skip the step without touching weights") {
    EncoderParams params = init_params(micro_config(), 9);
    EncoderParams before = params;
    EncoderParams grads = zero_params();
    OptimizerState state = OptimizerState::for_params(params);
    OptimConfig cfg;

    grads.state_net.b2[1] = std::numeric_limits<double>::quiet_NaN();
    double norm = adamw_step(params, grads, state, cfg, 0.1);
    CHECK(!std::isfinite(norm));
    CHECK(state.skipped == 1);
    CHECK(state.step == 0);
    CHECK(max_abs_diff(params, before) == 0.0);
    CHECK(state.m.at("state.b2")[1] == 0.0);

    grads.state_net.b2[1] = std::numeric_limits<double>::infinity();
    norm = adamw_step(params, grads, state, cfg, 0.1);
    CHECK(!std::isfinite(norm));
    CHECK(state.skipped == 2);
    CHECK(max_abs_diff(params, before) == 0.0);
}

TEST_CASE("learning rate schedule endpoints and midpoints") {
    ScheduleConfig cfg;
    cfg.lr0 = 2e-3;
    cfg.warmup_steps = 200;
    cfg.total_steps = 20000;
    cfg.alpha0 = 0.05;

    CHECK(schedule_at(0, cfg).lr == 0.0);
    CHECK(schedule_at(100, cfg).lr == Catch::Approx(1e-3).margin(1e-18));
    CHECK(schedule_at(200, cfg).lr == Catch::Approx(2e-3).margin(1e-18));
    CHECK(schedule_at(10100, cfg).lr == Catch::Approx(0.55 * 2e-3).margin(1e-12));
    CHECK(schedule_at(20000, cfg).lr == Catch::Approx(0.1 * 2e-3).margin(1e-12));
    CHECK(schedule_at(123456, cfg).lr == Catch::Approx(0.1 * 2e-3).margin(1e-12));
}

TEST_CASE("temperature anneals proportionally to the learning rate") {
    ScheduleConfig cfg;
    cfg.lr0 = 2e-3;
    cfg.warmup_steps = 200;
    cfg.total_steps = 20000;
    cfg.alpha0 = 0.05;

    // same shape as lr, scaled by alpha0/lr0, floored at the start
    CHECK(schedule_at(0, cfg).alpha == Catch::Approx(1e-6).margin(1e-18));
    CHECK(schedule_at(100, cfg).alpha == Catch::Approx(0.025).margin(1e-12));
    CHECK(schedule_at(200, cfg).alpha == Catch::Approx(0.05).margin(1e-12));
    CHECK(schedule_at(10100, cfg).alpha == Catch::Approx(0.55 * 0.05).margin(1e-12));

    cfg.anneal_alpha = false;
    for (int64_t step : {int64_t{0}, int64_t{100}, int64_t{15000}})
        CHECK(schedule_at(step, cfg).alpha == 0.05);
}

TEST_CASE("zero warmup starts at the peak rate") {
    ScheduleConfig cfg;
    cfg.lr0 = 1e-2;
    cfg.warmup_steps = 0;
    cfg.total_steps = 100;
    CHECK(schedule_at(0, cfg).lr == Catch::Approx(1e-2).margin(1e-18));
}

TEST_CASE("schedule input validation") {
    ScheduleConfig cfg;
    cfg.total_steps = 0;
    CHECK_THROWS_AS(schedule_at(0, cfg), InvalidArgument);
    cfg = ScheduleConfig{};
    cfg.warmup_steps = -1;
    CHECK_THROWS_AS(schedule_at(0, cfg), InvalidArgument);
    cfg = ScheduleConfig{};
    cfg.warmup_steps = cfg.total_steps;
    CHECK_THROWS_AS(schedule_at(0, cfg), InvalidArgument);
    cfg = ScheduleConfig{};
    CHECK_THROWS_AS(schedule_at(-1, cfg), InvalidArgument);
}

TEST_CASE("target network tracks weights geometrically") {
    EncoderParams params = zero_params();
    fill_params(params, 1.0);
    EncoderParams target = zero_params();

    for (int k = 1; k <= 3; ++k) {
        ema_update(params, target, 0.02);
        const double want = 1.0 - std::pow(0.98, k);
        for_each_tensor(target, [&](const char*, const Vec& w) {
            for (double x : w) CHECK(x == Catch::Approx(want).margin(1e-12));
        });
    }

    ema_update(params, target, 1.0);
    CHECK(max_abs_diff(params, target) == 0.0);

    EncoderParams frozen = target;
    ema_update(params, target, 0.0);
    CHECK(max_abs_diff(frozen, target) == 0.0);

    CHECK_THROWS_AS(ema_update(params, target, -0.1), InvalidArgument);
    CHECK_THROWS_AS(ema_update(params, target, 1.1), InvalidArgument);
}

TEST_CASE("gradient buffers reset to zero") {
    EncoderParams grads = zero_params();
    fill_params(grads, 3.5);
    zero_grads(grads);
    for_each_tensor(grads, [&](const char*, const Vec& g) {
        for (double x : g) CHECK(x == 0.0);
    });
}
