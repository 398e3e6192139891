// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "hico/dropout.hpp"

namespace hico {

// Decoder geometry for the analytic cost model.
struct ModelShape {
    std::string name;
    std::uint64_t layers = 0;
    std::uint64_t hidden_dim = 0;
    std::uint64_t heads = 0;
    std::uint64_t kv_heads = 0;
    std::uint64_t head_dim = 0;
    std::uint64_t nonembed_params = 0;
    std::uint64_t bytes_per_param = 2;

    // heads * head_dim == hidden_dim, kv_heads divides heads, all positive.
    void validate() const;
};

// Named presets: "7b" (Qwen2-7B-like), "2b" (Qwen2-1.5B-like), "toy".
ModelShape model_preset(const std::string& name);

// Reads `key = value` lines (layers, hidden_dim, heads, kv_heads, head_dim,
// nonembed_params, bytes_per_param, optional preset = <name> as the base).
ModelShape parse_model_shape(const std::string& text);
ModelShape load_model_shape(const std::string& path);

struct CostReport {
    double flops = 0.0;
    std::uint64_t weight_bytes = 0;
    std::uint64_t kv_cache_bytes = 0;
    std::uint64_t activation_bytes = 0;
    std::uint64_t total_infer_bytes = 0;
};

inline constexpr std::uint64_t kDefaultActivationOverheadBytes = 2'000'000'000ULL;

std::uint64_t tokens_for_video(std::uint64_t frames, std::uint64_t tokens_per_frame);

// 2 * P * T + 4 * L * T^2 * d: one multiply-accumulate is two FLOPs and both
// attention products use the full T x T score matrix.
double prefill_flops(std::uint64_t tokens, const ModelShape& shape);

// Per-layer form of prefill_flops with T_l = text_tokens + kept visual tokens at layer l.
double flops_with_schedule(std::uint64_t initial_tokens, const DropSchedule& schedule,
                           const ModelShape& shape, std::uint64_t text_tokens);

CostReport memory_estimate(std::uint64_t tokens, const ModelShape& shape,
                           std::uint64_t cache_bytes_per_value,
                           std::uint64_t activation_overhead_bytes = kDefaultActivationOverheadBytes);

}  // namespace hico
