// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hico/compressor.hpp"
#include "hico/costmodel.hpp"
#include "hico/dropout.hpp"
#include "hico/niah.hpp"
#include "hico/sampler.hpp"
#include "hico/token_grid.hpp"

namespace hico {

// Embedding file layout, all little-endian:
//   "HICO"            4 bytes magic
//   version           u16 (= 1)
//   frames rows cols dim   u32 each
//   payload           frames*rows*cols*dim f32, frame-major then row-major
inline constexpr char kEmbeddingMagic[4] = {'H', 'I', 'C', 'O'};
inline constexpr std::uint16_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 4 + 2 + 4 * 4;

std::vector<std::byte> encode_embeddings(const TokenGrid& grid);

// Never reads past `bytes`. Throws ParseError with a kind per failure mode.
TokenGrid decode_embeddings(std::span<const std::byte> bytes);

TokenGrid read_embeddings(const std::string& path);

// Writes to a sibling temp file then renames over `path`.
void write_embeddings(const TokenGrid& grid, const std::string& path);

// Whole-file helpers shared by the CLI; same temp-then-rename contract.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

enum class SynthKind { constant, clusters, gaussian };

SynthKind parse_synth_kind(const std::string& text);

struct GridShape {
    std::size_t frames = 1;
    std::size_t rows = 1;
    std::size_t cols = 1;
    std::size_t dim = 1;
};

struct SynthOptions {
    std::size_t clusters = 2;     // clusters kind: number of centroids
    double noise = 1e-6;          // clusters kind: per-coordinate noise stddev
    double centroid_scale = 10.0;
};

// Deterministic per seed. "clusters" assigns token i (frame-major) to centroid
// floor(i * k / n); centroids are +-scale * e_c, then seeded Gaussian directions.
TokenGrid synth_grid(SynthKind kind, const GridShape& shape, std::uint64_t seed, const SynthOptions& options = {});

// The centroids used by synth_grid's clusters kind.
std::vector<std::vector<double>> synth_centroids(std::size_t k, std::size_t dim, std::uint64_t seed, double scale);

// Resampler projections: frames=1, rows=3 (q, k, v), cols=dim, dim=dim; each
// row slot is a dim x dim matrix, row-major out x in.
ResamplerWeights read_resampler_weights(const std::string& path);

// All tool settings; every field has a default and may be overridden by a config file.
struct ToolConfig {
    SamplingPolicy sampling;
    double fps = 30.0;
    ConnectorConfig connector;
    DropSchedule schedule;
    std::size_t plan_layers = kReferenceDepth;
    DecoderShape decoder;
    std::string model_preset = "7b";
    std::optional<ModelShape> model_override;
    std::uint64_t cache_bytes_per_value = 2;
    std::uint64_t activation_overhead_bytes = kDefaultActivationOverheadBytes;
    std::uint64_t text_tokens = 0;
    niah::MultiHopParams niah;
    niah::Templates templates;
    std::size_t library_size = 100;
    std::uint64_t seed = 0;

    ModelShape model() const;
};

// Flat key/value text (see kv_text.hpp). Known keys:
//   seed, sampler.t_min, sampler.t_max, sampler.fps,
//   connector.kind, connector.clip_len, connector.budget, connector.st_mix_temperature,
//   connector.spatial_factor, connector.uneven_first, connector.uneven_rest,
//   connector.resampler_queries, connector.resampler_temperature, connector.resampler_weights,
//   dropout.schedule, dropout.plan_layers, dropout.layers, dropout.hidden, dropout.heads,
//   dropout.ffn, dropout.vocab,
//   model.preset, model.layers, model.hidden_dim, model.heads, model.kv_heads, model.head_dim,
//   model.nonembed_params, model.bytes_per_param, model.cache_bytes_per_value,
//   model.activation_overhead_bytes, model.text_tokens,
//   niah.haystack_len, niah.hops, niah.distractors, niah.ascending, niah.library_size,
//   niah.clue_template, niah.start_template
// Unknown keys and invariant violations are ConfigErrors.
ToolConfig parse_config(const std::string& text, ToolConfig base = {});
ToolConfig load_config(const std::string& path, ToolConfig base = {});

}  // namespace hico
