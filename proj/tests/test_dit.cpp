#include <doctest.h>

#include <cmath>

#include "hetcache/dit.hpp"
#include "reference_attention.hpp"
#include "test_helpers.hpp"

using namespace hetcache;

namespace {

DitConfig small_config(std::uint64_t seed = 7) {
    DitConfig cfg;
    cfg.channels = 16;
    cfg.heads = 2;
    cfg.blocks = 2;
    cfg.mlp_hidden = 24;
    cfg.seed = seed;
    return cfg;
}

std::vector<int> all_indices(int n) {
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
}

}  // namespace

TEST_CASE("config validation") {
    DitConfig cfg = small_config();
    cfg.channels = 15;  // not divisible by heads
    CHECK_THROWS_AS(DitModel{cfg}, std::invalid_argument);
    cfg = small_config();
    cfg.blocks = 0;
    CHECK_THROWS_AS(DitModel{cfg}, std::invalid_argument);
}

TEST_CASE("timestep table: every modulation vector is nonzero and in band") {
    const DitModel model(small_config());
    const TimestepEmbedding emb = model.make_timestep_table(40);
    for (int t = 1; t <= 40; ++t) {
        const float* row = emb.at(t);
        for (int c = 0; c < emb.channels; ++c) {
            CHECK(row[c] != 0.0f);
            CHECK(row[c] > 1.0f - kModulationAmplitude - 1e-6f);
            CHECK(row[c] < 1.0f + kModulationAmplitude + 1e-6f);
        }
    }
    CHECK_THROWS_AS(emb.at(0), std::invalid_argument);
    CHECK_THROWS_AS(emb.at(41), std::invalid_argument);
}

TEST_CASE("modulated_input: identity under an all-ones embedding") {
    const TokenGrid grid = hetest::random_grid(1, 3, 3, 16, 5);
    TimestepEmbedding ones;
    ones.steps = 1;
    ones.channels = 16;
    ones.table.assign(16, 1.0f);
    const TokenGrid out = modulated_input(grid, ones, 1);
    CHECK(out.data == grid.data);
}

TEST_CASE("modulated_input: zero latent stays zero") {
    const DitModel model(small_config());
    const TimestepEmbedding emb = model.make_timestep_table(4);
    TokenGrid zeros(1, 2, 2, 16);
    const TokenGrid out = modulated_input(zeros, emb, 3);
    for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("modulated_input: matches an elementwise loop") {
    const DitModel model(small_config());
    const TimestepEmbedding emb = model.make_timestep_table(10);
    const TokenGrid grid = hetest::random_grid(2, 3, 3, 16, 42);
    const TokenGrid out = modulated_input(grid, emb, 6);
    const float* row = emb.at(6);
    for (int i = 0; i < grid.token_count(); ++i) {
        for (int c = 0; c < grid.channels; ++c) {
            CHECK(out.token(i)[c] == row[c] * grid.token(i)[c]);
        }
    }
    CHECK_THROWS_AS(modulated_input(grid, emb, 11), std::invalid_argument);
}

TEST_CASE("forward_full: shape preservation and bitwise determinism") {
    const DitModel model(small_config());
    const TimestepEmbedding emb = model.make_timestep_table(8);
    const TokenGrid grid = hetest::random_grid(2, 4, 4, 16, 9);
    const EditMask mask = hetest::random_mask(2, 4, 4, 10);
    const TokenPartition part = partition_tokens(mask, 1);

    const ForwardResult a = model.forward_full(grid, emb, 5, part, false);
    CHECK(a.output.same_shape(grid));
    CHECK(a.output.all_finite());
    CHECK_FALSE(a.attention.has_value());

    const ForwardResult b = model.forward_full(grid, emb, 5, part, false);
    CHECK(a.output.data == b.output.data);

    // capture must not perturb the numeric path
    const ForwardResult c = model.forward_full(grid, emb, 5, part, true);
    CHECK(c.output.data == a.output.data);
    CHECK(c.attention.has_value());
}

TEST_CASE("forward_full: identical seeds agree, different seeds differ") {
    const TokenGrid grid = hetest::random_grid(1, 3, 3, 16, 2);
    const EditMask mask = hetest::random_mask(1, 3, 3, 3);
    const TokenPartition part = partition_tokens(mask, 1);

    const DitModel m1(small_config(7));
    const DitModel m2(small_config(7));
    const DitModel m3(small_config(8));
    const TimestepEmbedding e1 = m1.make_timestep_table(4);
    const TimestepEmbedding e2 = m2.make_timestep_table(4);
    const TimestepEmbedding e3 = m3.make_timestep_table(4);

    CHECK(m1.forward_full(grid, e1, 2, part, false).output.data ==
          m2.forward_full(grid, e2, 2, part, false).output.data);
    CHECK(m1.forward_full(grid, e1, 2, part, false).output.data !=
          m3.forward_full(grid, e3, 2, part, false).output.data);
}

TEST_CASE("forward_subset: complete token set matches forward_full") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const DitModel model(small_config(seed));
        const TimestepEmbedding emb = model.make_timestep_table(6);
        const TokenGrid grid = hetest::random_grid(2, 8, 8, 16, seed + 100);
        const EditMask mask = hetest::random_mask(2, 8, 8, seed + 200);
        const TokenPartition part = partition_tokens(mask, 1);

        const ForwardResult full = model.forward_full(grid, emb, 3, part, false);
        const TokenMatrix sub = model.forward_subset(grid, emb, 3, all_indices(grid.token_count()));

        double max_rel = 0.0;
        double max_abs = 0.0;
        for (std::size_t i = 0; i < sub.data.size(); ++i) {
            max_abs = std::max(max_abs, std::fabs(static_cast<double>(full.output.data[i])));
            max_rel = std::max(max_rel, std::fabs(static_cast<double>(sub.data[i]) -
                                                  static_cast<double>(full.output.data[i])));
        }
        CHECK(max_rel <= 1e-5 * std::max(1e-12, max_abs));
    }
}

TEST_CASE("forward_subset: singleton attention is identity weighting") {
    const DitModel model(small_config());
    const TimestepEmbedding emb = model.make_timestep_table(4);
    const TokenGrid grid = hetest::random_grid(1, 3, 3, 16, 77);

    // output of a singleton must not depend on the other tokens' values
    TokenGrid altered = grid;
    for (int i = 1; i < grid.token_count(); ++i) {
        for (int c = 0; c < grid.channels; ++c) altered.token(i)[c] += 3.5f;
    }
    const TokenMatrix a = model.forward_subset(grid, emb, 2, {0});
    const TokenMatrix b = model.forward_subset(altered, emb, 2, {0});
    CHECK(a.data == b.data);
}

TEST_CASE("forward_subset: input validation") {
    const DitModel model(small_config());
    const TimestepEmbedding emb = model.make_timestep_table(4);
    const TokenGrid grid = hetest::random_grid(1, 2, 2, 16, 1);
    CHECK_THROWS_AS(model.forward_subset(grid, emb, 1, {}), std::invalid_argument);
    CHECK_THROWS_AS(model.forward_subset(grid, emb, 1, {1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(model.forward_subset(grid, emb, 1, {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(model.forward_subset(grid, emb, 1, {0, 9}), std::invalid_argument);
}

TEST_CASE("forward: non-finite input surfaces as a numeric error with a block index") {
    const DitModel model(small_config());
    const TimestepEmbedding emb = model.make_timestep_table(4);
    TokenGrid grid = hetest::random_grid(1, 2, 2, 16, 1);
    grid.data[3] = std::numeric_limits<float>::infinity();
    const TokenPartition part = partition_tokens(EditMask(1, 2, 2), 1);
    try {
        (void)model.forward_full(grid, emb, 1, part, false);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.block_index == 0);
    }
}

TEST_CASE("attention capture matches the dense reference") {
    DitConfig cfg;
    cfg.channels = 8;
    cfg.heads = 1;
    cfg.blocks = 1;
    cfg.mlp_hidden = 16;

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        cfg.seed = seed;
        const DitModel model(cfg);
        const TimestepEmbedding emb = model.make_timestep_table(6);
        const TokenGrid grid = hetest::random_grid(1, 4, 5, 8, seed + 50);
        EditMask mask(1, 4, 5);
        mask.set(0, 1, 1, true);
        mask.set(0, 2, 3, true);
        const TokenPartition part = partition_tokens(mask, 1);

        const ForwardResult res = model.forward_full(grid, emb, 4, part, true);
        REQUIRE(res.attention.has_value());
        const AttentionCapture& cap = *res.attention;
        CHECK(cap.context_count == part.context_count());
        CHECK(cap.generative_count == part.generative_count());

        const std::vector<double> dense = hetest::dense_attention_matrix(model, grid, emb, 4);
        const int n = grid.token_count();
        for (int i = 0; i < cap.context_count; ++i) {
            for (int j = 0; j < cap.generative_count; ++j) {
                const double expected =
                    dense[static_cast<std::size_t>(part.context[static_cast<std::size_t>(i)]) * n +
                          part.generative[static_cast<std::size_t>(j)]];
                CHECK(std::fabs(cap.at(i, j) - expected) <= 1e-6);
                CHECK(cap.at(i, j) >= 0.0);
                CHECK(cap.at(i, j) <= 1.0);
            }
        }
    }
}

TEST_CASE("attention cost formula") {
    CHECK(attention_cost(100, 20, 30, 1.0) == 22500);
    CHECK(attention_cost(100, 20, 30, 0.7) == 14400);
    CHECK(attention_cost(0, 20, 30, 0.1) == attention_cost(0, 20, 30, 1.0));
    CHECK(attention_cost(10, 0, 0, 0.25) == 9);  // ceil(2.5) = 3 kept

    // keeping everything is never cheaper
    for (double r : {0.1, 0.3, 0.5, 0.99, 1.0}) {
        CHECK(attention_cost(37, 5, 11, 1.0) >= attention_cost(37, 5, 11, r));
    }
}

TEST_CASE("output head: permuting the rows of a diagonal head permutes outputs") {
    DitConfig cfg;
    cfg.channels = 4;
    cfg.heads = 1;
    cfg.blocks = 1;
    cfg.mlp_hidden = 4;
    cfg.seed = 3;
    const DitModel base(cfg);
    const TimestepEmbedding emb = base.make_timestep_table(2);
    const TokenGrid grid = hetest::random_grid(1, 1, 2, 4, 8);  // 2-token instance
    const TokenPartition part = partition_tokens(EditMask(1, 1, 2), 0);

    const int d = 4;
    std::vector<float> flat = base.flatten_weights();
    const std::size_t head_w = flat.size() - static_cast<std::size_t>(d) * d - d;
    const std::size_t head_b = flat.size() - static_cast<std::size_t>(d);

    // diagonal head with distinct entries
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) flat[head_w + static_cast<std::size_t>(r) * d + c] = 0.0f;
        flat[head_w + static_cast<std::size_t>(r) * d + r] = 1.0f + 0.5f * r;
        flat[head_b + static_cast<std::size_t>(r)] = 0.1f * r;
    }
    DitModel diag(cfg);
    diag.load_flat_weights(flat);

    const int perm[4] = {2, 0, 3, 1};
    std::vector<float> permuted = flat;
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            permuted[head_w + static_cast<std::size_t>(r) * d + c] =
                flat[head_w + static_cast<std::size_t>(perm[r]) * d + c];
        }
        permuted[head_b + static_cast<std::size_t>(r)] = flat[head_b + static_cast<std::size_t>(perm[r])];
    }
    DitModel permuted_model(cfg);
    permuted_model.load_flat_weights(permuted);

    const ForwardResult a = diag.forward_full(grid, emb, 1, part, false);
    const ForwardResult b = permuted_model.forward_full(grid, emb, 1, part, false);
    for (int tok = 0; tok < 2; ++tok) {
        for (int c = 0; c < d; ++c) {
            CHECK(b.output.token(tok)[c] == a.output.token(tok)[perm[c]]);
        }
    }
}

TEST_CASE("weight snapshot round trip") {
    const DitModel model(small_config(123));
    const std::vector<float> flat = model.flatten_weights();
    DitModel other(small_config(456));
    CHECK(other.flatten_weights() != flat);
    other.load_flat_weights(flat);
    CHECK(other.flatten_weights() == flat);

    std::vector<float> short_flat(flat.begin(), flat.end() - 1);
    CHECK_THROWS_AS(other.load_flat_weights(short_flat), std::invalid_argument);
}

TEST_CASE("forward call counter") {
    const DitModel model(small_config());
    const TimestepEmbedding emb = model.make_timestep_table(4);
    const TokenGrid grid = hetest::random_grid(1, 2, 2, 16, 1);
    const TokenPartition part = partition_tokens(EditMask(1, 2, 2), 1);
    model.reset_forward_calls();
    (void)model.forward_full(grid, emb, 1, part, false);
    (void)model.forward_subset(grid, emb, 1, {0, 1});
    CHECK(model.forward_calls() == 2);
}
