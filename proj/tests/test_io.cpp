// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "hico/error.hpp"
#include "hico/io.hpp"
#include "hico/kv_text.hpp"
#include "hico/rng.hpp"

using namespace hico;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "hico_unit_io";
    std::filesystem::create_directories(dir);
    return dir / name;
}

ParseErrorKind parse_kind(const std::vector<std::byte>& bytes) {
    try {
        decode_embeddings(bytes);
    } catch (const ParseError& e) {
        return e.kind();
    }
    FAIL("decode did not throw");
    return ParseErrorKind::format;
}

void put_u32(std::vector<std::byte>& bytes, std::size_t offset, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes[offset + i] = static_cast<std::byte>((v >> (8 * i)) & 0xFF);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("header layout") {
    const TokenGrid g(1, 1, 1, 4);
    const auto bytes = encode_embeddings(g);
    REQUIRE(bytes.size() == 22 + 16);
    CHECK(std::memcmp(bytes.data(), "HICO", 4) == 0);
    CHECK(bytes[4] == std::byte{1});
    CHECK(bytes[5] == std::byte{0});
    CHECK(bytes[18] == std::byte{4});
    const auto back = decode_embeddings(bytes);
    CHECK(back == g);
}

TEST_CASE("round trip is bit exact") {
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const GridShape shape{1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(5)};
        const auto g = synth_grid(SynthKind::gaussian, shape, rng.next());
        CHECK(decode_embeddings(encode_embeddings(g)) == g);
    }
    const auto path = scratch("rt.hico").string();
    const auto g = synth_grid(SynthKind::clusters, {2, 3, 3, 4}, 8);
    write_embeddings(g, path);
    CHECK(read_embeddings(path) == g);
    // Overwrite in place.
    const auto h = synth_grid(SynthKind::constant, {1, 1, 2, 2}, 1);
    write_embeddings(h, path);
    CHECK(read_embeddings(path) == h);
}

TEST_CASE("distinct parse errors") {
    const auto good = encode_embeddings(synth_grid(SynthKind::gaussian, {1, 2, 2, 3}, 4));

    auto bytes = good;
    bytes[0] = std::byte{'X'};
    CHECK(parse_kind(bytes) == ParseErrorKind::bad_magic);

    bytes = good;
    bytes[4] = std::byte{2};
    CHECK(parse_kind(bytes) == ParseErrorKind::bad_version);

    bytes = good;
    put_u32(bytes, 6, 0);
    CHECK(parse_kind(bytes) == ParseErrorKind::bad_shape);

    bytes = good;
    bytes.pop_back();
    CHECK(parse_kind(bytes) == ParseErrorKind::truncated);
    bytes.resize(10);
    CHECK(parse_kind(bytes) == ParseErrorKind::truncated);

    bytes = good;
    bytes.push_back(std::byte{0});
    CHECK(parse_kind(bytes) == ParseErrorKind::size_mismatch);

    bytes = good;
    const float inf = std::numeric_limits<float>::infinity();
    std::memcpy(bytes.data() + 22, &inf, 4);
    CHECK(parse_kind(bytes) == ParseErrorKind::non_finite);

    bytes = good;
    put_u32(bytes, 6, 0xFFFFFFFFu);
    put_u32(bytes, 10, 0xFFFFFFFFu);
    put_u32(bytes, 14, 0xFFFFFFFFu);
    put_u32(bytes, 18, 0xFFFFFFFFu);
    CHECK(parse_kind(bytes) == ParseErrorKind::truncated);

    CHECK_THROWS_AS(read_embeddings(scratch("missing.hico").string()), IoError);
    CHECK_THROWS_AS(encode_embeddings(TokenGrid()), DomainError);
}

TEST_CASE("synth grids") {
    const auto c = synth_grid(SynthKind::constant, {2, 2, 2, 3}, 3);
    for (std::size_t i = 1; i < c.token_count(); ++i) {
        CHECK(std::equal(c.token(i).begin(), c.token(i).end(), c.token(0).begin()));
    }
    CHECK(synth_grid(SynthKind::gaussian, {2, 2, 2, 3}, 3) == synth_grid(SynthKind::gaussian, {2, 2, 2, 3}, 3));
    CHECK_FALSE(synth_grid(SynthKind::gaussian, {2, 2, 2, 3}, 3) == synth_grid(SynthKind::gaussian, {2, 2, 2, 3}, 4));
    CHECK(parse_synth_kind("clusters") == SynthKind::clusters);
    CHECK_THROWS_AS(parse_synth_kind("noise"), ConfigError);
    CHECK_THROWS_AS(synth_grid(SynthKind::clusters, {1, 1, 2, 2}, 1, SynthOptions{3, 0.0, 1.0}), DomainError);

    const auto centroids = synth_centroids(2, 3, 1, 10.0);
    CHECK(centroids[0] == std::vector<double>{10.0, 0.0, 0.0});
    CHECK(centroids[1] == std::vector<double>{0.0, 10.0, 0.0});
    CHECK(synth_centroids(2, 1, 1, 10.0)[1] == std::vector<double>{-10.0});
}

TEST_CASE("kv text") {
    const auto kv = parse_kv_text("# header\na = 1\n  b.c=two words  \n\n");
    CHECK(kv.at("a") == "1");
    CHECK(kv.at("b.c") == "two words");
    CHECK_THROWS_AS(parse_kv_text("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_kv_text("just a line\n"), ConfigError);
    CHECK(parse_u64("k", "42") == 42);
    CHECK_THROWS_AS(parse_u64("k", "-1"), ConfigError);
    CHECK(parse_double("k", "0.25") == 0.25);
    CHECK_THROWS_AS(parse_double("k", "nan"), ConfigError);
    CHECK(parse_bool("k", "true"));
    CHECK_THROWS_AS(parse_bool("k", "maybe"), ConfigError);
}

TEST_CASE("tool config") {
    const auto cfg = parse_config(
        "seed = 9\nsampler.t_min = 8\nsampler.t_max = 16\nconnector.kind = uneven\n"
        "dropout.schedule = uni:4:0.75,attn:18:0.25\nmodel.preset = 2b\nmodel.layers = 24\n"
        "niah.hops = 2\nniah.clue_template = next: {caption}\n");
    CHECK(cfg.seed == 9);
    CHECK(cfg.sampling.t_max == 16);
    CHECK(cfg.connector.kind == ConnectorKind::uneven);
    CHECK(cfg.schedule.entries.size() == 2);
    CHECK(cfg.model().layers == 24);
    CHECK(cfg.model().hidden_dim == 1536);
    CHECK(cfg.niah.hops == 2);
    CHECK(cfg.templates.render_clue("x") == "next: x");

    CHECK(parse_config("").model().name == "7b");
    CHECK_THROWS_AS(parse_config("unknown.key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("sampler.t_min = 600\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("model.preset = 70b\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("connector.kind = magic\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("niah.clue_template = none\n"), ConfigError);
    CHECK_THROWS_AS(load_config(scratch("absent.cfg").string()), IoError);
}

}  // TEST_SUITE
