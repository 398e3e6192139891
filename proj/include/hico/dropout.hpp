// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hico/token_grid.hpp"

namespace hico {

enum class DropMethod { uniform, attention };

struct DropEntry {
    std::size_t layer = 0;
    DropMethod method = DropMethod::uniform;
    double keep_ratio = 1.0;

    friend bool operator==(const DropEntry&, const DropEntry&) = default;
};

// Drops are applied before the named layer runs.
struct DropSchedule {
    std::vector<DropEntry> entries;

    // Layers strictly increasing, ratios in (0, 1]. Throws ConfigError.
    void validate() const;
    bool empty() const { return entries.empty(); }

    friend bool operator==(const DropSchedule&, const DropSchedule&) = default;
};

// Parses "uni:4:0.75,attn:18:0.25". An empty string is the empty schedule.
DropSchedule parse_schedule(const std::string& text);
std::string to_string(const DropSchedule& schedule);

// Number of tokens surviving a keep ratio: ceil(ratio * count), at least 1.
std::size_t kept_count(std::size_t count, double keep_ratio);

// m = kept_count(count, ratio) evenly strided indices floor(j * count / m).
std::vector<std::size_t> uniform_drop(std::size_t count, double keep_ratio);

// Indices of the kept_count highest scores (ties toward the lower index), ascending.
std::vector<std::size_t> attention_select(std::span<const double> scores, double keep_ratio);

// Visual token count seen by each of `total_layers` layers.
std::vector<std::size_t> plan_schedule(std::size_t initial_count, const DropSchedule& schedule,
                                       std::size_t total_layers);

// Maps a schedule written for `from_layers` onto `to_layers` by rounding
// layer * to / from half-up; collisions are pushed to the next free layer.
DropSchedule scale_schedule(const DropSchedule& schedule, std::size_t from_layers, std::size_t to_layers);

inline constexpr std::size_t kReferenceDepth = 28;

struct DecoderShape {
    std::size_t layers = 4;
    std::size_t hidden = 64;
    std::size_t heads = 4;
    std::size_t ffn = 128;
    std::size_t vocab = 256;

    void validate() const;
};

// Attention from the last text token to every kept visual token at one layer,
// averaged over heads. text_scores covers the text positions of the same row.
struct AttentionSnapshot {
    std::size_t layer = 0;
    std::vector<double> scores;
    std::vector<double> text_scores;
};

// kept[l] lists the original visual indices processed by layer l.
struct KeptSet {
    std::vector<std::vector<std::size_t>> layers;
};

struct DecoderRun {
    std::vector<double> text_states;  // final hidden states of the text positions, flattened
    std::vector<AttentionSnapshot> snapshots;
    KeptSet kept;
};

// Seeded random causal decoder over [visual..., text...]. Attention entries use the
// snapshot of the layer immediately before the drop. Bit-reproducible per seed.
DecoderRun toy_decoder_run(std::span<const std::uint32_t> text_tokens,
                           std::span<const MergedToken> visual, const DecoderShape& shape,
                           const DropSchedule& schedule, std::uint64_t seed);

}  // namespace hico
