// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "hico/compressor.hpp"
#include "hico/error.hpp"
#include "hico/io.hpp"
#include "oracles.hpp"

using namespace hico;

namespace {

Clip whole_clip(const TokenGrid& grid) { return Clip{0, grid, {0, grid.frames()}}; }

MergedToken token(std::vector<double> v, std::uint32_t index) {
    return MergedToken{std::move(v), 1, {Source{0, 0, index}}};
}

std::size_t total_size(const std::vector<MergedToken>& tokens) {
    return std::accumulate(tokens.begin(), tokens.end(), std::size_t{0},
                           [](std::size_t acc, const MergedToken& t) { return acc + t.size; });
}

// Within-merge SSE of a merge result, recomputed from provenance and the original points.
double merged_sse(const std::vector<oracle::Vec>& points, const std::vector<MergedToken>& merged) {
    double total = 0.0;
    for (const auto& t : merged) {
        std::vector<std::size_t> group;
        for (const auto& s : t.sources) group.push_back(s.col);
        total += oracle::group_sse(points, group);
    }
    return total;
}

}  // namespace

TEST_SUITE("compressor") {

TEST_CASE("segment_clips splits with a short remainder") {
    const TokenGrid eight(8, 2, 2, 3);
    auto clips = segment_clips(eight, 4);
    REQUIRE(clips.size() == 2);
    CHECK(clips[0].grid.frames() == 4);
    CHECK(clips[1].frame_span == std::pair<std::size_t, std::size_t>{4, 8});

    clips = segment_clips(TokenGrid(10, 2, 2, 3), 4);
    REQUIRE(clips.size() == 3);
    CHECK(clips[0].grid.frames() == 4);
    CHECK(clips[1].grid.frames() == 4);
    CHECK(clips[2].grid.frames() == 2);
    CHECK(clips[2].frame_span.first == clips[1].frame_span.second);

    CHECK(segment_clips(TokenGrid(4, 2, 2, 3), 4).size() == 1);
    CHECK_THROWS_AS(segment_clips(TokenGrid(), 4), DomainError);
    CHECK_THROWS_AS(segment_clips(eight, 0), DomainError);
}

TEST_CASE("st_mix") {
    SUBCASE("identical tokens stay put") {
        const auto grid = synth_grid(SynthKind::constant, {2, 2, 2, 3}, 5);
        const auto mixed = st_mix(whole_clip(grid), 1.0);
        CHECK(mixed.grid == grid);
    }
    SUBCASE("single token unchanged") {
        TokenGrid g(1, 1, 1, 3, {0.5f, -1.0f, 2.0f});
        CHECK(st_mix(whole_clip(g), 0.3).grid == g);
    }
    SUBCASE("two orthogonal unit tokens") {
        TokenGrid g(1, 1, 2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
        // Logits for token 0 are (1/t, 0), so its output is w e1 + (1 - w) e2.
        const double w = oracle::softmax2(1.0, 0.0);
        auto mixed = st_mix(whole_clip(g), 1.0);
        CHECK(mixed.grid.token(0)[0] == doctest::Approx(w).epsilon(1e-6));
        CHECK(mixed.grid.token(0)[1] == doctest::Approx(1.0 - w).epsilon(1e-6));
        CHECK(mixed.grid.token(1)[1] == doctest::Approx(w).epsilon(1e-6));

        mixed = st_mix(whole_clip(g), 1e6);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(mixed.grid.token(i)[0] == doctest::Approx(0.5).epsilon(1e-5));
            CHECK(mixed.grid.token(i)[1] == doctest::Approx(0.5).epsilon(1e-5));
        }
    }
    SUBCASE("shape and finiteness on random input") {
        const auto grid = synth_grid(SynthKind::gaussian, {2, 3, 3, 4}, 9);
        const auto mixed = st_mix(whole_clip(grid), 2.0);
        CHECK(mixed.grid.frames() == 2);
        CHECK(mixed.grid.token_count() == grid.token_count());
        CHECK(mixed.grid.all_finite());
    }
    SUBCASE("non-finite input rejected") {
        TokenGrid g(1, 1, 2, 1, {1.0f, std::numeric_limits<float>::infinity()});
        CHECK_THROWS_AS(st_mix(whole_clip(g), 1.0), DomainError);
        CHECK_THROWS_AS(st_mix(whole_clip(TokenGrid(1, 1, 1, 1)), 0.0), DomainError);
    }
}

TEST_CASE("merge_tokens is size weighted") {
    const MergedToken a{{0.0}, 1, {Source{0, 0, 0}}};
    const MergedToken b{{4.0}, 3, {Source{0, 0, 1}, Source{0, 0, 2}, Source{0, 0, 3}}};
    const std::vector<MergedToken> pair{b, a};
    const auto m = merge_tokens(pair);
    CHECK(m.vector[0] == doctest::Approx(3.0));
    CHECK(m.size == 4);
    CHECK(m.sources.size() == 4);
    CHECK(m.min_source() == Source{0, 0, 0});
}

TEST_CASE("cosine similarity treats zero vectors as dissimilar") {
    const std::vector<double> zero{0.0, 0.0};
    const std::vector<double> x{1.0, 0.0};
    CHECK(cosine_similarity(zero, x) == 0.0);
    CHECK(cosine_similarity(zero, zero) == 0.0);
    CHECK(cosine_similarity(x, x) == doctest::Approx(1.0));
}

TEST_CASE("tome_merge") {
    SUBCASE("identical vectors collapse into one") {
        std::vector<MergedToken> tokens;
        for (std::uint32_t i = 0; i < 4; ++i) tokens.push_back(token({2.0, -1.0}, i));
        const auto out = tome_merge(tokens, 1);
        REQUIRE(out.size() == 1);
        CHECK(out[0].size == 4);
        CHECK(out[0].vector[0] == doctest::Approx(2.0));
        CHECK(out[0].vector[1] == doctest::Approx(-1.0));
    }
    SUBCASE("two pairs") {
        const std::vector<oracle::Vec> points{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
        std::vector<MergedToken> tokens;
        for (std::uint32_t i = 0; i < 4; ++i) tokens.push_back(token(points[i], i));
        const auto out = tome_merge(tokens, 2);
        REQUIRE(out.size() == 2);
        CHECK(out[0].vector == std::vector<double>{1, 0});
        CHECK(out[0].size == 2);
        CHECK(out[1].vector == std::vector<double>{0, 1});
        CHECK(out[1].size == 2);
        // Matches the brute-force optimum, which is a perfect split.
        CHECK(oracle::best_partition_sse(points, 2) == doctest::Approx(0.0));
        CHECK(merged_sse(points, out) == doctest::Approx(0.0));
    }
    SUBCASE("target equal to count is the identity") {
        const auto grid = synth_grid(SynthKind::gaussian, {1, 2, 3, 2}, 4);
        const auto tokens = clip_tokens(whole_clip(grid));
        const auto out = tome_merge(tokens, tokens.size());
        REQUIRE(out.size() == tokens.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i].vector == tokens[i].vector);
            CHECK(out[i].sources == tokens[i].sources);
        }
    }
    SUBCASE("errors") {
        std::vector<MergedToken> tokens{token({1.0}, 0), token({2.0}, 1)};
        CHECK_THROWS_AS(tome_merge(tokens, 3), DomainError);
        CHECK_THROWS_AS(tome_merge(tokens, 0), DomainError);
        tokens[1].sources.clear();
        CHECK_THROWS_AS(tome_merge(tokens, 1), DomainError);
    }
    SUBCASE("zero vectors merge without NaN") {
        std::vector<MergedToken> tokens{token({0.0, 0.0}, 0), token({0.0, 0.0}, 1), token({1.0, 0.0}, 2)};
        const auto out = tome_merge(tokens, 1);
        REQUIRE(out.size() == 1);
        CHECK(out[0].size == 3);
        CHECK(out[0].vector[0] == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("output ordered by smallest source and sizes conserved") {
        const auto grid = synth_grid(SynthKind::gaussian, {2, 4, 4, 3}, 11);
        const auto out = tome_merge(clip_tokens(whole_clip(grid)), 7);
        REQUIRE(out.size() == 7);
        CHECK(total_size(out) == 32);
        for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].min_source() < out[i].min_source());
        for (const auto& t : out) CHECK(t.size == t.sources.size());
        CHECK(conservation_residual(grid, out) < 1e-9);
    }
}

TEST_CASE("spatial downsampling") {
    SUBCASE("4x4 factor 2 block means") {
        std::vector<float> data(16);
        std::iota(data.begin(), data.end(), 0.0f);
        const TokenGrid g(1, 4, 4, 1, data);
        const auto out = spatial_downsample(whole_clip(g), 2);
        REQUIRE(out.size() == 4);
        CHECK(out[0].vector[0] == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
        CHECK(out[1].vector[0] == doctest::Approx((2 + 3 + 6 + 7) / 4.0));
        CHECK(out[2].vector[0] == doctest::Approx((8 + 9 + 12 + 13) / 4.0));
        CHECK(out[3].vector[0] == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
        for (const auto& t : out) CHECK(t.size == 4);
    }
    SUBCASE("16x16 factor 4 keeps 16 tokens per frame") {
        const auto g = synth_grid(SynthKind::gaussian, {2, 16, 16, 2}, 3);
        CHECK(spatial_downsample(whole_clip(g), 4).size() == 32);
        CHECK(downsample_frame(whole_clip(g), 1, 4).size() == 16);
    }
    SUBCASE("constant grid") {
        const auto g = synth_grid(SynthKind::constant, {1, 6, 6, 3}, 8);
        for (const auto& t : spatial_downsample(whole_clip(g), 3)) {
            CHECK(t.size == 9);
            for (std::size_t d = 0; d < 3; ++d) CHECK(t.vector[d] == doctest::Approx(g.token(0)[d]));
        }
    }
    SUBCASE("non-divisible factor") {
        CHECK_THROWS_AS(spatial_downsample(whole_clip(TokenGrid(1, 4, 6, 1)), 4), DomainError);
        CHECK_THROWS_AS(spatial_downsample(whole_clip(TokenGrid(1, 4, 4, 1)), 0), DomainError);
    }
}

TEST_CASE("uneven downsampling") {
    const auto g = synth_grid(SynthKind::gaussian, {4, 16, 16, 2}, 21);
    CHECK(uneven_downsample(whole_clip(g), 2, 8).size() == 64 + 3 * 4);

    const auto same = uneven_downsample(whole_clip(g), 4, 4);
    const auto uniform = spatial_downsample(whole_clip(g), 4);
    REQUIRE(same.size() == uniform.size());
    for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i].vector == uniform[i].vector);

    const auto one = g.slice_frames(0, 1);
    const auto a = uneven_downsample(whole_clip(one), 2, 8);
    const auto b = spatial_downsample(whole_clip(one), 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].vector == b[i].vector);

    CHECK_THROWS_AS(uneven_downsample(whole_clip(g), 8, 2), DomainError);
    CHECK_THROWS_AS(uneven_downsample(whole_clip(g), 2, 5), DomainError);
}

TEST_CASE("resampler cross-attention") {
    SUBCASE("single token, query equal to it") {
        const std::vector<MergedToken> tokens{token({0.3, -0.7, 1.1}, 0)};
        const auto out = resampler_forward(tokens, {{0.3, -0.7, 1.1}}, {});
        REQUIRE(out.size() == 1);
        CHECK(out[0].vector == tokens[0].vector);
        CHECK(out[0].sources.empty());
    }
    SUBCASE("identical inputs give the input for any query") {
        const std::vector<MergedToken> tokens{token({1, 2}, 0), token({1, 2}, 1), token({1, 2}, 2)};
        const auto out = resampler_forward(tokens, seeded_queries(5, 2, 1), {});
        REQUIRE(out.size() == 5);
        for (const auto& t : out) {
            CHECK(t.vector[0] == doctest::Approx(1.0));
            CHECK(t.vector[1] == doctest::Approx(2.0));
        }
    }
    SUBCASE("orthogonal inputs, aligned query") {
        const std::vector<MergedToken> tokens{token({1, 0}, 0), token({0, 1}, 1)};
        for (double temperature : {1.0, 0.1, 0.01}) {
            // Logits (1 / (sqrt(2) t), 0).
            const double w = oracle::softmax2(1.0 / (std::sqrt(2.0) * temperature), 0.0);
            const auto out = resampler_forward(tokens, {{1, 0}}, {}, temperature);
            CHECK(out[0].vector[0] == doctest::Approx(w).epsilon(1e-12));
            CHECK(out[0].vector[1] == doctest::Approx(1.0 - w).epsilon(1e-9));
        }
        const auto cold = resampler_forward(tokens, {{1, 0}}, {}, 0.01);
        CHECK(cold[0].vector[0] > 1.0 - 1e-12);
    }
    SUBCASE("projections are applied") {
        const std::vector<MergedToken> tokens{token({1, 0}, 0), token({0, 1}, 1)};
        ResamplerWeights swap;
        swap.wv = Matrix{2, 2, {0, 1, 1, 0}};
        const auto out = resampler_forward(tokens, {{1, 0}}, swap, 0.01);
        CHECK(out[0].vector[1] == doctest::Approx(1.0));
    }
    SUBCASE("dimension mismatch") {
        const std::vector<MergedToken> tokens{token({1, 0}, 0)};
        CHECK_THROWS_AS(resampler_forward(tokens, {{1, 0, 0}}, {}), DomainError);
        ResamplerWeights bad;
        bad.wk = Matrix::identity(3);
        CHECK_THROWS_AS(resampler_forward(tokens, {{1, 0}}, bad), DomainError);
    }
}

TEST_CASE("compress_clip") {
    SUBCASE("merge: 4 frames of 16x16 to 64 tokens") {
        const auto g = synth_grid(SynthKind::gaussian, {4, 16, 16, 8}, 1);
        ConnectorConfig cfg;
        cfg.budget = 64;
        const auto out = compress_clip(whole_clip(g), cfg);
        CHECK(out.tokens.size() == 64);
        CHECK(out.budget == 64);
        CHECK(total_size(out.tokens) == 1024);
        CHECK(conservation_residual(g, out.tokens) < 1e-9);
    }
    SUBCASE("merge with st_mix conserves the mixed mass") {
        const auto g = synth_grid(SynthKind::gaussian, {4, 4, 4, 4}, 2);
        ConnectorConfig cfg;
        cfg.budget = 16;
        cfg.st_mix_temperature = 4.0;
        const auto ctx = compress_video(g, cfg);
        CHECK(ctx.tokens.size() == 16);
        CHECK(conservation_residual(ctx) < 1e-9);
    }
    SUBCASE("budget equal to source count is the identity") {
        const auto g = synth_grid(SynthKind::gaussian, {4, 2, 2, 3}, 3);
        ConnectorConfig cfg;
        cfg.budget = 16;
        const auto out = compress_clip(whole_clip(g), cfg);
        const auto raw = clip_tokens(whole_clip(g));
        REQUIRE(out.tokens.size() == raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) CHECK(out.tokens[i].vector == raw[i].vector);
    }
    SUBCASE("729-token frames reduced to 16") {
        const auto g = synth_grid(SynthKind::gaussian, {1, 27, 27, 4}, 4);
        ConnectorConfig cfg;
        cfg.clip_len = 1;
        cfg.budget = 16;
        const auto ctx = compress_video(g, cfg);
        CHECK(ctx.tokens.size() == 16);
        CHECK(ctx.source_tokens == 729);
        const double ratio = 100.0 * static_cast<double>(ctx.tokens.size()) / static_cast<double>(ctx.source_tokens);
        CHECK(std::round(ratio * 100.0) / 100.0 == doctest::Approx(2.19));
    }
    SUBCASE("short final clip gets a scaled budget") {
        const auto g = synth_grid(SynthKind::gaussian, {10, 4, 4, 2}, 5);
        ConnectorConfig cfg;
        cfg.budget = 6;
        const auto ctx = compress_video(g, cfg);
        // 6 + 6 + ceil(6 * 2 / 4)
        CHECK(ctx.tokens.size() == 15);
        CHECK(ctx.clip_offsets == std::vector<std::size_t>{0, 6, 12});
        CHECK(expected_token_count(cfg, 2, 4, 4) == 3);
    }
    SUBCASE("downsampling kinds report the analytic count") {
        const auto g = synth_grid(SynthKind::gaussian, {4, 16, 16, 2}, 6);
        ConnectorConfig cfg;
        cfg.kind = ConnectorKind::uneven;
        auto out = compress_clip(whole_clip(g), cfg);
        CHECK(out.tokens.size() == expected_token_count(cfg, 4, 16, 16));
        cfg.kind = ConnectorKind::spatial;
        out = compress_clip(whole_clip(g), cfg);
        CHECK(out.tokens.size() == 64);
    }
    SUBCASE("resampler emits the query count") {
        const auto g = synth_grid(SynthKind::gaussian, {3, 4, 4, 5}, 7);
        ConnectorConfig cfg;
        cfg.kind = ConnectorKind::resampler;
        cfg.resampler_queries = 9;
        const auto out = compress_clip(whole_clip(g), cfg);
        CHECK(out.tokens.size() == 9);
        CHECK_FALSE(out.has_provenance);
    }
    SUBCASE("inconsistent configs") {
        const auto g = synth_grid(SynthKind::gaussian, {4, 4, 4, 2}, 8);
        ConnectorConfig cfg;
        cfg.budget = 65;
        CHECK_THROWS_AS(compress_clip(whole_clip(g), cfg), DomainError);
        cfg.kind = ConnectorKind::spatial;
        cfg.spatial_factor = 3;
        CHECK_THROWS_AS(compress_clip(whole_clip(g), cfg), DomainError);
    }
}

TEST_CASE("concat_context") {
    CompressedClip a{0, std::vector<MergedToken>(64, token({1.0}, 0)), 64, true, 256, {0.0}, 0.0};
    CompressedClip b{1, std::vector<MergedToken>(64, token({1.0}, 0)), 64, true, 256, {0.0}, 0.0};
    auto ctx = concat_context({a, b});
    CHECK(ctx.tokens.size() == 128);
    CHECK(ctx.clip_offsets == std::vector<std::size_t>{0, 64});

    ctx = concat_context({a});
    CHECK(ctx.tokens.size() == 64);
    CHECK(ctx.clip_offsets == std::vector<std::size_t>{0});

    CHECK_THROWS_AS(concat_context({b, a}), DomainError);
}

TEST_CASE("parallel clip compression matches sequential") {
    const auto g = synth_grid(SynthKind::gaussian, {13, 4, 4, 3}, 99);
    ConnectorConfig cfg;
    cfg.budget = 10;
    const auto seq = compress_video(g, cfg, 1);
    const auto par = compress_video(g, cfg, 4);
    REQUIRE(seq.tokens.size() == par.tokens.size());
    CHECK(seq.clip_offsets == par.clip_offsets);
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        CHECK(seq.tokens[i].vector == par.tokens[i].vector);
        CHECK(seq.tokens[i].sources == par.tokens[i].sources);
    }
}

TEST_CASE("clusters fixture is recovered by merging") {
    const auto g = synth_grid(SynthKind::clusters, {1, 1, 4, 3}, 17, SynthOptions{2, 1e-7, 10.0});
    const auto centroids = synth_centroids(2, 3, 17, 10.0);
    const auto out = tome_merge(clip_tokens(whole_clip(g)), 2);
    REQUIRE(out.size() == 2);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t d = 0; d < 3; ++d) CHECK(std::fabs(out[c].vector[d] - centroids[c][d]) < 1e-5);
    }
}

}  // TEST_SUITE
