// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hico/costmodel.hpp"

#include <fstream>
#include <sstream>

#include "hico/error.hpp"
#include "hico/kv_text.hpp"

namespace hico {

namespace {

// Flops of `layer_count` layers that all see `tokens` tokens. prefill_flops is the
// layer_count == layers case, so the two paths agree bit for bit on an empty schedule.
double segment_flops(double tokens, double layer_count, const ModelShape& shape) {
    const double params = static_cast<double>(shape.nonembed_params) * layer_count /
                          static_cast<double>(shape.layers);
    return 2.0 * params * tokens + 4.0 * layer_count * tokens * tokens * static_cast<double>(shape.hidden_dim);
}

}  // namespace

void ModelShape::validate() const {
    if (!layers || !hidden_dim || !heads || !kv_heads || !head_dim || !nonembed_params || !bytes_per_param) {
        throw ConfigError("model shape '" + name + "': all fields must be positive");
    }
    if (heads * head_dim != hidden_dim) {
        throw ConfigError("model shape '" + name + "': heads * head_dim must equal hidden_dim");
    }
    if (heads % kv_heads != 0) {
        throw ConfigError("model shape '" + name + "': kv_heads must divide heads");
    }
}

ModelShape model_preset(const std::string& name) {
    ModelShape s;
    s.name = name;
    if (name == "7b") {
        // 7.62e9 total minus one 152k x 3584 embedding table.
        s.layers = 28;
        s.hidden_dim = 3584;
        s.heads = 28;
        s.kv_heads = 4;
        s.head_dim = 128;
        s.nonembed_params = 7'070'000'000ULL;
        s.bytes_per_param = 2;
    } else if (name == "2b") {
        // 1.54e9 total minus one 152k x 1536 embedding table.
        s.layers = 28;
        s.hidden_dim = 1536;
        s.heads = 12;
        s.kv_heads = 2;
        s.head_dim = 128;
        s.nonembed_params = 1'310'000'000ULL;
        s.bytes_per_param = 2;
    } else if (name == "toy") {
        // Matches the default toy decoder: 4 x (4 * 64^2 + 2 * 64 * 128).
        s.layers = 4;
        s.hidden_dim = 64;
        s.heads = 4;
        s.kv_heads = 4;
        s.head_dim = 16;
        s.nonembed_params = 131'072ULL;
        s.bytes_per_param = 4;
    } else {
        throw ConfigError("unknown model preset '" + name + "' (expected 7b, 2b or toy)");
    }
    return s;
}

ModelShape parse_model_shape(const std::string& text) {
    const auto kv = parse_kv_text(text);
    ModelShape s;
    if (auto it = kv.find("preset"); it != kv.end()) s = model_preset(it->second);
    for (const auto& [key, value] : kv) {
        if (key == "preset") continue;
        if (key == "name") {
            s.name = value;
            continue;
        }
        const std::uint64_t v = parse_u64(key, value);
        if (key == "layers") s.layers = v;
        else if (key == "hidden_dim") s.hidden_dim = v;
        else if (key == "heads") s.heads = v;
        else if (key == "kv_heads") s.kv_heads = v;
        else if (key == "head_dim") s.head_dim = v;
        else if (key == "nonembed_params") s.nonembed_params = v;
        else if (key == "bytes_per_param") s.bytes_per_param = v;
        else throw ConfigError("unknown model shape key '" + key + "'");
    }
    if (s.name.empty()) s.name = "custom";
    s.validate();
    return s;
}

ModelShape load_model_shape(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model shape file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model_shape(ss.str());
}

std::uint64_t tokens_for_video(std::uint64_t frames, std::uint64_t tokens_per_frame) {
    if (frames == 0 || tokens_per_frame == 0) throw DomainError("frames and tokens per frame must be positive");
    return frames * tokens_per_frame;
}

double prefill_flops(std::uint64_t tokens, const ModelShape& shape) {
    shape.validate();
    return segment_flops(static_cast<double>(tokens), static_cast<double>(shape.layers), shape);
}

double flops_with_schedule(std::uint64_t initial_tokens, const DropSchedule& schedule,
                           const ModelShape& shape, std::uint64_t text_tokens) {
    shape.validate();
    const auto counts = plan_schedule(initial_tokens, schedule, shape.layers);
    double total = 0.0;
    std::size_t start = 0;
    for (std::size_t l = 1; l <= counts.size(); ++l) {
        if (l == counts.size() || counts[l] != counts[start]) {
            const double tokens = static_cast<double>(text_tokens + counts[start]);
            total += segment_flops(tokens, static_cast<double>(l - start), shape);
            start = l;
        }
    }
    return total;
}

CostReport memory_estimate(std::uint64_t tokens, const ModelShape& shape,
                           std::uint64_t cache_bytes_per_value, std::uint64_t activation_overhead_bytes) {
    shape.validate();
    if (cache_bytes_per_value == 0) throw DomainError("cache bytes per value must be positive");
    CostReport r;
    r.flops = prefill_flops(tokens, shape);
    r.weight_bytes = shape.nonembed_params * shape.bytes_per_param;
    r.kv_cache_bytes = 2 * shape.layers * shape.kv_heads * shape.head_dim * tokens * cache_bytes_per_value;
    r.activation_bytes = activation_overhead_bytes;
    r.total_infer_bytes = r.weight_bytes + r.kv_cache_bytes + r.activation_bytes;
    return r;
}

}  // namespace hico
