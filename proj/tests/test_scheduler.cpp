#include <doctest.h>

#include <cmath>

#include "hetcache/scheduler.hpp"
#include "test_helpers.hpp"

using namespace hetcache;

namespace {

DitConfig tiny_model_config(std::uint64_t seed = 7) {
    DitConfig cfg;
    cfg.channels = 16;
    cfg.heads = 2;
    cfg.blocks = 2;
    cfg.mlp_hidden = 24;
    cfg.seed = seed;
    return cfg;
}

SchedulerConfig tiny_scheduler_config() {
    SchedulerConfig cfg;
    cfg.steps = 12;
    cfg.delta = 0.05;
    cfg.k_clusters = 4;
    return cfg;
}

TokenGrid constant_grid(int f, int h, int w, int d, float value) {
    TokenGrid g(f, h, w, d);
    std::fill(g.data.begin(), g.data.end(), value);
    return g;
}

}  // namespace

TEST_CASE("rel_l1_distance basics") {
    const TokenGrid a = hetest::random_grid(1, 3, 3, 4, 1);
    CHECK(rel_l1_distance(a, a) == 0.0);

    const TokenGrid ones = constant_grid(1, 2, 2, 2, 1.0f);
    const TokenGrid twos = constant_grid(1, 2, 2, 2, 2.0f);
    CHECK(rel_l1_distance(twos, ones) == doctest::Approx(1.0));

    const TokenGrid zeros = constant_grid(1, 2, 2, 2, 0.0f);
    CHECK_THROWS_AS(rel_l1_distance(ones, zeros), std::domain_error);
    CHECK_THROWS_AS(rel_l1_distance(ones, hetest::random_grid(1, 2, 3, 2, 1)), std::invalid_argument);
}

TEST_CASE("rel_l1_distance matches a scalar loop") {
    const TokenGrid a = hetest::random_grid(2, 3, 3, 4, 5);
    const TokenGrid b = hetest::random_grid(2, 3, 3, 4, 6);
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        diff += std::fabs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
        ref += std::fabs(static_cast<double>(b.data[i]));
    }
    CHECK(rel_l1_distance(a, b) == doctest::Approx(diff / ref).epsilon(1e-12));
}

TEST_CASE("accumulate_drift") {
    CHECK(accumulate_drift(0.0, 0.03) == doctest::Approx(0.03));
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d = accumulate_drift(d, 0.02);
    CHECK(d == doctest::Approx(0.06));
}

TEST_CASE("decide_regime: examples") {
    SchedulerConfig cfg;
    cfg.delta = 0.05;
    cfg.full_multiplier = 1.5;
    CHECK(decide_regime(0.0, cfg, false) == Regime::FullCompute);
    CHECK(decide_regime(123.0, cfg, false) == Regime::FullCompute);
    CHECK(decide_regime(0.03, cfg, true) == Regime::Reuse);
    CHECK(decide_regime(0.05, cfg, true) == Regime::Reuse);     // boundary inclusive
    CHECK(decide_regime(0.06, cfg, true) == Regime::PartialCompute);
    CHECK(decide_regime(0.075, cfg, true) == Regime::PartialCompute);  // boundary inclusive
    CHECK(decide_regime(0.08, cfg, true) == Regime::FullCompute);
}

TEST_CASE("decide_regime: exhaustive grid against a three-way comparison") {
    for (double delta : {0.02, 0.05}) {
        SchedulerConfig cfg;
        cfg.delta = delta;
        cfg.full_multiplier = 1.5;
        for (int k = 0; k <= 300; ++k) {
            const double drift = k * delta / 100.0;
            for (bool cache : {false, true}) {
                Regime expected;
                if (!cache) expected = Regime::FullCompute;
                else if (drift <= delta) expected = Regime::Reuse;
                else if (drift <= 1.5 * delta) expected = Regime::PartialCompute;
                else expected = Regime::FullCompute;
                CHECK(decide_regime(drift, cfg, cache) == expected);
            }
        }
    }
}

TEST_CASE("ema_update: endpoints and midpoint") {
    const TokenGrid a = constant_grid(1, 1, 1, 1, 2.0f);
    const TokenGrid b = constant_grid(1, 1, 1, 1, 4.0f);
    CHECK(ema_update(a, b, 1.0).data[0] == 4.0f);
    CHECK(ema_update(a, b, 0.0).data[0] == 2.0f);
    CHECK(ema_update(a, b, 0.5).data[0] == 3.0f);
    CHECK_THROWS_AS(ema_update(a, hetest::random_grid(1, 1, 2, 1, 0), 0.5), std::invalid_argument);
}

TEST_CASE("ema_update: stays inside the elementwise envelope") {
    std::mt19937_64 eng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const TokenGrid a = hetest::random_grid(1, 3, 3, 4, eng());
        const TokenGrid b = hetest::random_grid(1, 3, 3, 4, eng());
        const double gamma = (eng() % 101) / 100.0;
        const TokenGrid out = ema_update(a, b, gamma);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            CHECK(out.data[i] >= std::min(a.data[i], b.data[i]));
            CHECK(out.data[i] <= std::max(a.data[i], b.data[i]));
        }
    }
}

TEST_CASE("scheduler_step: first step is a forced full compute") {
    const DitModel model(tiny_model_config());
    const SchedulerConfig cfg = tiny_scheduler_config();
    const TimestepEmbedding emb = model.make_timestep_table(cfg.steps);
    const TokenGrid x = hetest::random_grid(1, 4, 4, 16, 5);
    const EditMask mask = hetest::center_rect_mask(1, 4, 4, 1);
    const TokenPartition part = partition_tokens(mask, cfg.margin_radius);

    CacheState state;
    const StepOutcome out = scheduler_step(state, x, cfg.steps, model, emb, part, cfg);
    CHECK(out.regime == Regime::FullCompute);
    CHECK(out.step_distance == 0.0);
    CHECK(out.model_calls == 1);
    CHECK(out.active_tokens == 16);
    CHECK(state.output_cache.has_value());
    CHECK(state.attn_cache.has_value());
    CHECK(state.accumulated_drift == 0.0);
}

TEST_CASE("scheduler_step: reuse returns the cache bitwise with zero model calls") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.delta = 1e9;  // everything after the first step reuses
    const TimestepEmbedding emb = model.make_timestep_table(cfg.steps);
    TokenGrid x = hetest::random_grid(1, 4, 4, 16, 6);
    const EditMask mask = hetest::center_rect_mask(1, 4, 4, 1);
    const TokenPartition part = partition_tokens(mask, cfg.margin_radius);

    CacheState state;
    (void)scheduler_step(state, x, cfg.steps, model, emb, part, cfg);
    const TokenGrid cache_snapshot = *state.output_cache;

    model.reset_forward_calls();
    double drift = state.accumulated_drift;
    for (int t = cfg.steps - 1; t >= 1; --t) {
        const StepOutcome out = scheduler_step(state, x, t, model, emb, part, cfg);
        CHECK(out.regime == Regime::Reuse);
        CHECK(out.model_calls == 0);
        CHECK(out.output.data == cache_snapshot.data);
        CHECK(out.active_tokens == 0);
        CHECK(out.attention_units == 0);
        // drift keeps accumulating across reuse steps
        CHECK(state.accumulated_drift >= drift);
        drift = state.accumulated_drift;
        x.data[0] += 0.01f;  // nudge so the distance is nonzero
    }
    CHECK(model.forward_calls() == 0);
}

TEST_CASE("scheduler_step: partial step merges fresh rows over the cache") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.delta = 0.1;
    cfg.r_ctx = 0.5;
    cfg.ema_gamma = 0.5;
    const TimestepEmbedding emb = model.make_timestep_table(cfg.steps);
    const TokenGrid x = hetest::random_grid(1, 5, 5, 16, 8);
    const EditMask mask = hetest::center_rect_mask(1, 5, 5, 2);
    const TokenPartition part = partition_tokens(mask, cfg.margin_radius);

    CacheState state;
    (void)scheduler_step(state, x, cfg.steps, model, emb, part, cfg);
    const TokenGrid cache_before = *state.output_cache;

    // force the drift into the partial window: d = a/(1+a) where prev = (1+a)F
    const double alpha = 0.14 / (1.0 - 0.14);
    TokenGrid prev = modulated_input(x, emb, cfg.steps - 1);
    for (auto& v : prev.data) v *= static_cast<float>(1.0 + alpha);
    state.prev_modulated = prev;
    state.accumulated_drift = 0.0;

    const StepOutcome out = scheduler_step(state, x, cfg.steps - 1, model, emb, part, cfg);
    CHECK(out.regime == Regime::PartialCompute);
    CHECK(out.model_calls == 1);
    CHECK(out.active_tokens > part.generative_count() + part.margin_count());
    CHECK(out.active_tokens < part.total_tokens);
    CHECK(out.attention_units ==
          static_cast<std::int64_t>(out.active_tokens) * out.active_tokens);
    CHECK(state.accumulated_drift == 0.0);

    // cache became the midpoint between old cache and the merged candidate
    for (std::size_t i = 0; i < cache_before.data.size(); ++i) {
        const float blended = std::lerp(cache_before.data[i], out.output.data[i], 0.5f);
        CHECK(state.output_cache->data[i] == blended);
    }
}

TEST_CASE("scheduler_step: partial with full retention matches a full pass") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.delta = 0.1;
    cfg.r_ctx = 1.0;
    cfg.ema_gamma = 1.0;
    cfg.margin_radius = 8;  // margin swallows every unmasked token near the mask
    const TimestepEmbedding emb = model.make_timestep_table(cfg.steps);
    const TokenGrid x = hetest::random_grid(1, 5, 5, 16, 9);
    const EditMask mask = hetest::center_rect_mask(1, 5, 5, 2);
    const TokenPartition part = partition_tokens(mask, cfg.margin_radius);

    CacheState state;
    (void)scheduler_step(state, x, cfg.steps, model, emb, part, cfg);

    const double alpha = 0.14 / (1.0 - 0.14);
    TokenGrid prev = modulated_input(x, emb, cfg.steps - 1);
    for (auto& v : prev.data) v *= static_cast<float>(1.0 + alpha);
    state.prev_modulated = prev;
    state.accumulated_drift = 0.0;

    const StepOutcome out = scheduler_step(state, x, cfg.steps - 1, model, emb, part, cfg);
    REQUIRE(out.regime == Regime::PartialCompute);
    CHECK(out.active_tokens == part.total_tokens);

    const ForwardResult full = model.forward_full(x, emb, cfg.steps - 1, part, false);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < full.output.data.size(); ++i) {
        max_diff = std::max(max_diff, std::fabs(static_cast<double>(full.output.data[i]) -
                                                static_cast<double>(out.output.data[i])));
    }
    CHECK(max_diff <= 1e-5);
    CHECK(state.output_cache->data == out.output.data);  // gamma = 1 adopts the candidate
}

TEST_CASE("run_denoise: single step produces one full entry") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.steps = 1;
    const TokenGrid x = hetest::random_grid(1, 4, 4, 16, 10);
    const EditMask mask = hetest::center_rect_mask(1, 4, 4, 1);

    const DenoiseResult res = run_denoise(model, x, mask, cfg);
    REQUIRE(res.report.steps.size() == 1);
    CHECK(res.report.steps[0].regime == Regime::FullCompute);
    CHECK(res.report.count(Regime::FullCompute) == 1);
    CHECK(res.report.totals.model_calls == 1);
}

TEST_CASE("run_denoise: identical config and seed reproduce bitwise") {
    const DitModel model(tiny_model_config());
    const SchedulerConfig cfg = tiny_scheduler_config();
    const TokenGrid x = hetest::random_grid(2, 5, 5, 16, 11);
    const EditMask mask = hetest::center_rect_mask(2, 5, 5, 1);

    const DenoiseResult a = run_denoise(model, x, mask, cfg);
    const DenoiseResult b = run_denoise(model, x, mask, cfg);
    CHECK(a.latent.data == b.latent.data);
    CHECK(report_to_json(a.report) == report_to_json(b.report));
}

TEST_CASE("run_denoise: huge threshold degenerates to one full step plus reuse") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.delta = 1e9;
    const TokenGrid x = hetest::random_grid(1, 4, 4, 16, 12);
    const EditMask mask = hetest::center_rect_mask(1, 4, 4, 1);

    const DenoiseResult res = run_denoise(model, x, mask, cfg);
    CHECK(res.report.count(Regime::FullCompute) == 1);
    CHECK(res.report.count(Regime::Reuse) == cfg.steps - 1);

    // closed-loop oracle: replay the cached first output through the sampler
    const TokenPartition part = partition_tokens(mask, cfg.margin_radius);
    const TimestepEmbedding emb = model.make_timestep_table(cfg.steps);
    const ForwardResult first = model.forward_full(x, emb, cfg.steps, part, true);
    TokenGrid expect = x;
    for (int i = 0; i < cfg.steps; ++i) {
        const int t = cfg.steps - i;
        const float eta = step_size(t, cfg.steps);
        for (std::size_t j = 0; j < expect.data.size(); ++j) {
            expect.data[j] -= eta * first.output.data[j];
        }
    }
    CHECK(res.latent.data == expect.data);
}

TEST_CASE("run_denoise: tiny threshold matches the scheduler-free baseline bitwise") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.delta = 1e-12;
    const TokenGrid x = hetest::random_grid(1, 6, 6, 16, 13);
    const EditMask mask = hetest::center_rect_mask(1, 6, 6, 2);

    const DenoiseResult cached = run_denoise(model, x, mask, cfg);
    CHECK(cached.report.count(Regime::FullCompute) == cfg.steps);
    const DenoiseResult plain = run_baseline(model, x, mask, cfg.steps);
    CHECK(cached.latent.data == plain.latent.data);
}

TEST_CASE("run_denoise: smaller delta computes more") {
    const DitModel model(tiny_model_config());
    SchedulerConfig slow = tiny_scheduler_config();
    slow.steps = 30;
    slow.delta = 0.05;
    SchedulerConfig fast = slow;
    fast.delta = 0.02;

    std::int64_t slow_compute = 0;
    std::int64_t fast_compute = 0;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const TokenGrid x = hetest::random_grid(2, 6, 6, 16, seed);
        const EditMask mask = hetest::center_rect_mask(2, 6, 6, 2);
        const DenoiseResult a = run_denoise(model, x, mask, slow);
        const DenoiseResult b = run_denoise(model, x, mask, fast);
        slow_compute += a.report.count(Regime::FullCompute) + a.report.count(Regime::PartialCompute);
        fast_compute += b.report.count(Regime::FullCompute) + b.report.count(Regime::PartialCompute);
    }
    CHECK(fast_compute > slow_compute);
}

TEST_CASE("run_denoise: reuse steps stay pure and resets follow compute steps") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.steps = 30;
    const TokenGrid x = hetest::random_grid(2, 6, 6, 16, 21);
    const EditMask mask = hetest::center_rect_mask(2, 6, 6, 2);

    const DenoiseResult res = run_denoise(model, x, mask, cfg);
    for (const StepTrace& s : res.report.steps) {
        if (s.regime == Regime::Reuse) {
            CHECK(s.model_calls == 0);
            CHECK(s.attention_units == 0);
        } else {
            CHECK(s.model_calls == 1);
        }
    }
    // drift resets after full/partial: the drift recorded on the next trace
    // equals that step's own distance
    for (std::size_t i = 0; i + 1 < res.report.steps.size(); ++i) {
        const StepTrace& cur = res.report.steps[i];
        const StepTrace& next = res.report.steps[i + 1];
        if (cur.regime != Regime::Reuse) {
            CHECK(next.drift_before == doctest::Approx(next.step_distance).epsilon(1e-12));
        }
    }
}

TEST_CASE("run_denoise: mask without generative tokens still runs") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.steps = 20;
    const TokenGrid x = hetest::random_grid(1, 5, 5, 16, 30);
    const EditMask empty_mask(1, 5, 5);

    const DenoiseResult res = run_denoise(model, x, empty_mask, cfg);
    CHECK(res.latent.all_finite());
    CHECK(res.report.steps.size() == 20);
}

TEST_CASE("run_denoise: all-masked scene still runs") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.steps = 20;
    const TokenGrid x = hetest::random_grid(1, 5, 5, 16, 31);
    EditMask mask(1, 5, 5);
    std::fill(mask.flags.begin(), mask.flags.end(), 1);

    const DenoiseResult res = run_denoise(model, x, mask, cfg);
    CHECK(res.latent.all_finite());
}

TEST_CASE("run_denoise: numeric failure carries the step index and partial trace") {
    const DitModel model(tiny_model_config());
    SchedulerConfig cfg = tiny_scheduler_config();
    TokenGrid x = hetest::random_grid(1, 4, 4, 16, 32);
    x.data[0] = std::numeric_limits<float>::quiet_NaN();
    const EditMask mask = hetest::center_rect_mask(1, 4, 4, 1);

    try {
        (void)run_denoise(model, x, mask, cfg);
        FAIL("expected RunAborted");
    } catch (const RunAborted& e) {
        CHECK(e.step_index == 0);
        CHECK(e.partial_report.steps.empty());
    }
}

TEST_CASE("scheduler config validation names the field") {
    SchedulerConfig cfg = tiny_scheduler_config();
    cfg.delta = 0.0;
    try {
        cfg.validate();
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("scheduler.delta") != std::string::npos);
    }
}
