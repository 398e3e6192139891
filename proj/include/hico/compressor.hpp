// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hico/token_grid.hpp"

namespace hico {

// A contiguous frame slice of the sampled sequence.
struct Clip {
    std::size_t clip_index = 0;
    TokenGrid grid;
    std::pair<std::size_t, std::size_t> frame_span;  // [start, end) in the sampled sequence
};

struct CompressedClip {
    std::size_t clip_index = 0;
    std::vector<MergedToken> tokens;
    std::size_t budget = 0;
    bool has_provenance = true;
    // Sum and total norm of the connector's input vectors (after any pre-mix).
    std::size_t source_tokens = 0;
    std::vector<double> input_sum;
    double input_mass = 0.0;
};

// Concatenation of compressed clips in clip order.
struct VisualContext {
    std::vector<MergedToken> tokens;
    std::vector<std::size_t> clip_offsets;
    std::size_t source_tokens = 0;
    bool has_provenance = true;
    std::vector<double> input_sum;
    double input_mass = 0.0;
};

enum class ConnectorKind { merge, spatial, uneven, resampler };

ConnectorKind parse_connector_kind(const std::string& text);
std::string to_string(ConnectorKind kind);

// Row-major square matrix, out x in.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    static Matrix identity(std::size_t n);
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Cross-attention projections; an empty optional means identity.
struct ResamplerWeights {
    std::optional<Matrix> wq;
    std::optional<Matrix> wk;
    std::optional<Matrix> wv;
};

struct ConnectorConfig {
    ConnectorKind kind = ConnectorKind::merge;
    std::size_t clip_len = 4;
    std::size_t budget = 64;                   // merge: tokens per full clip
    std::optional<double> st_mix_temperature;  // merge: optional attention pre-mix
    std::size_t spatial_factor = 4;
    std::size_t uneven_first = 2;
    std::size_t uneven_rest = 8;
    std::size_t resampler_queries = 64;
    std::uint64_t resampler_seed = 0;
    double resampler_temperature = 1.0;
    ResamplerWeights resampler_weights;
    std::vector<std::vector<double>> resampler_query_vectors;  // overrides seeded queries when set

    // Checks parameters against a grid shape; throws DomainError.
    void validate(const TokenGrid& grid) const;
};

// Splits frames into ceil(frames / clip_len) clips; only the last may be short.
std::vector<Clip> segment_clips(const TokenGrid& grid, std::size_t clip_len);

// Parameter-free spatio-temporal mixing: each token becomes the softmax-weighted
// mean of all clip tokens, logits (x_i . x_j) / temperature.
Clip st_mix(const Clip& clip, double temperature);

// One size-1 token per grid position with its absolute source position.
std::vector<MergedToken> clip_tokens(const Clip& clip);

// Size-weighted mean of a set of tokens; provenance is united.
MergedToken merge_tokens(std::span<const MergedToken> tokens);

// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Iterative bipartite soft matching down to exactly `target` tokens.
// Output is ordered by each token's smallest source.
std::vector<MergedToken> tome_merge(std::vector<MergedToken> tokens, std::size_t target);

// Block-mean downsampling of one frame of a clip by `factor` in each spatial axis.
std::vector<MergedToken> downsample_frame(const Clip& clip, std::size_t frame, std::size_t factor);

// Every frame downsampled with the same factor, in frame order.
std::vector<MergedToken> spatial_downsample(const Clip& clip, std::size_t factor);

// First frame with f_first, remaining frames with f_rest.
std::vector<MergedToken> uneven_downsample(const Clip& clip, std::size_t f_first, std::size_t f_rest);

// Single-layer cross-attention: softmax(Q K^T / (sqrt(dim) * temperature)) V.
// Outputs carry no provenance.
std::vector<MergedToken> resampler_forward(std::span<const MergedToken> tokens,
                                           const std::vector<std::vector<double>>& queries,
                                           const ResamplerWeights& weights,
                                           double temperature = 1.0);

// Seeded unit-norm query vectors.
std::vector<std::vector<double>> seeded_queries(std::size_t count, std::size_t dim, std::uint64_t seed);

// Merge budget of a clip with `frames` frames, ceil(budget * frames / clip_len).
std::size_t effective_budget(std::size_t budget, std::size_t frames, std::size_t clip_len);

// Analytic output token count of `config` for a clip of `frames` frames of rows x cols.
std::size_t expected_token_count(const ConnectorConfig& config, std::size_t frames,
                                 std::size_t rows, std::size_t cols);

CompressedClip compress_clip(const Clip& clip, const ConnectorConfig& config);

// Requires strictly increasing clip_index.
VisualContext concat_context(std::vector<CompressedClip> clips);

// segment -> compress per clip -> concatenate. threads > 1 compresses clips
// concurrently; the result is identical to the sequential run.
VisualContext compress_video(const TokenGrid& grid, const ConnectorConfig& config,
                             std::size_t threads = 1);

// || sum(size * vector) - sum(inputs) ||_2 divided by the sum of input norms.
double conservation_residual(const TokenGrid& grid, std::span<const MergedToken> tokens);
// Same measure against the connector inputs recorded in the context.
double conservation_residual(const VisualContext& context);

}  // namespace hico
