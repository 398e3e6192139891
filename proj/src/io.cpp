// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hico/io.hpp"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hico/error.hpp"
#include "hico/kv_text.hpp"
#include "hico/rng.hpp"

namespace hico {

namespace {

void put_u16(std::vector<std::byte>& out, std::uint16_t v) {
    out.push_back(static_cast<std::byte>(v & 0xFF));
    out.push_back(static_cast<std::byte>(v >> 8));
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::byte>((v >> s) & 0xFF));
}

std::uint16_t get_u16(std::span<const std::byte> b, std::size_t at) {
    return static_cast<std::uint16_t>(std::to_integer<unsigned>(b[at]) | (std::to_integer<unsigned>(b[at + 1]) << 8));
}

std::uint32_t get_u32(std::span<const std::byte> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(b[at + static_cast<std::size_t>(i)]);
    return v;
}

std::string temp_path_for(const std::string& path) {
    static std::atomic<std::uint64_t> counter{0};
    return path + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
}

void write_bytes_atomically(const std::string& path, const char* data, std::size_t size) {
    const std::string tmp = temp_path_for(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out.write(data, static_cast<std::streamsize>(size));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw IoError("write to '" + tmp + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

}  // namespace

std::vector<std::byte> encode_embeddings(const TokenGrid& grid) {
    if (grid.empty() || grid.dim() == 0) throw DomainError("cannot encode an empty grid");
    if (!grid.all_finite()) throw DomainError("cannot encode non-finite values");
    for (std::size_t d : {grid.frames(), grid.rows(), grid.cols(), grid.dim()}) {
        if (d > UINT32_MAX) throw DomainError("grid dimension exceeds u32");
    }
    std::vector<std::byte> out;
    out.reserve(kEmbeddingHeaderBytes + grid.data().size() * 4);
    for (char c : kEmbeddingMagic) out.push_back(static_cast<std::byte>(c));
    put_u16(out, kEmbeddingVersion);
    put_u32(out, static_cast<std::uint32_t>(grid.frames()));
    put_u32(out, static_cast<std::uint32_t>(grid.rows()));
    put_u32(out, static_cast<std::uint32_t>(grid.cols()));
    put_u32(out, static_cast<std::uint32_t>(grid.dim()));
    for (float v : grid.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

TokenGrid decode_embeddings(std::span<const std::byte> bytes) {
    const std::size_t magic_seen = std::min<std::size_t>(bytes.size(), 4);
    for (std::size_t i = 0; i < magic_seen; ++i) {
        if (bytes[i] != static_cast<std::byte>(kEmbeddingMagic[i])) {
            throw ParseError(ParseErrorKind::bad_magic, "embedding file: bad magic");
        }
    }
    if (bytes.size() < kEmbeddingHeaderBytes) {
        throw ParseError(ParseErrorKind::truncated, "embedding file: truncated header");
    }
    const std::uint16_t version = get_u16(bytes, 4);
    if (version != kEmbeddingVersion) {
        throw ParseError(ParseErrorKind::bad_version, "embedding file: unsupported version " + std::to_string(version));
    }
    const std::uint64_t frames = get_u32(bytes, 6);
    const std::uint64_t rows = get_u32(bytes, 10);
    const std::uint64_t cols = get_u32(bytes, 14);
    const std::uint64_t dim = get_u32(bytes, 18);
    if (!frames || !rows || !cols || !dim) {
        throw ParseError(ParseErrorKind::bad_shape, "embedding file: zero-sized dimension");
    }

    // Compare against the bytes actually present before allocating anything.
    const std::uint64_t available = (bytes.size() - kEmbeddingHeaderBytes) / 4;
    const std::uint64_t remainder = (bytes.size() - kEmbeddingHeaderBytes) % 4;
    unsigned __int128 count = static_cast<unsigned __int128>(frames) * rows;
    count *= cols;
    count *= dim;
    if (count > available) throw ParseError(ParseErrorKind::truncated, "embedding file: payload truncated");
    if (count < available || remainder != 0) {
        throw ParseError(ParseErrorKind::size_mismatch, "embedding file: trailing bytes after payload");
    }

    std::vector<float> data(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const float v = std::bit_cast<float>(get_u32(bytes, kEmbeddingHeaderBytes + 4 * i));
        if (!std::isfinite(v)) {
            throw ParseError(ParseErrorKind::non_finite, "embedding file: non-finite value at element " + std::to_string(i));
        }
        data[i] = v;
    }
    return TokenGrid(frames, rows, cols, dim, std::move(data));
}

TokenGrid read_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file '" + path + "'");
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read error on '" + path + "'");
    return decode_embeddings(std::as_bytes(std::span<const char>(raw)));
}

void write_embeddings(const TokenGrid& grid, const std::string& path) {
    const auto bytes = encode_embeddings(grid);
    write_bytes_atomically(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    write_bytes_atomically(path, text.data(), text.size());
}

SynthKind parse_synth_kind(const std::string& text) {
    if (text == "constant") return SynthKind::constant;
    if (text == "clusters") return SynthKind::clusters;
    if (text == "gaussian") return SynthKind::gaussian;
    throw ConfigError("unknown synth kind '" + text + "' (expected constant, clusters or gaussian)");
}

std::vector<std::vector<double>> synth_centroids(std::size_t k, std::size_t dim, std::uint64_t seed, double scale) {
    Rng rng(derive_seed(seed, 2));
    std::vector<std::vector<double>> centroids(k, std::vector<double>(dim, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
        if (c < 2 * dim) {
            centroids[c][c % dim] = c < dim ? scale : -scale;
            continue;
        }
        double n2 = 0.0;
        for (double& v : centroids[c]) {
            v = rng.normal();
            n2 += v * v;
        }
        const double inv = n2 > 0.0 ? scale / std::sqrt(n2) : 0.0;
        for (double& v : centroids[c]) v *= inv;
    }
    return centroids;
}

TokenGrid synth_grid(SynthKind kind, const GridShape& shape, std::uint64_t seed, const SynthOptions& options) {
    if (!shape.frames || !shape.rows || !shape.cols || !shape.dim) throw DomainError("synth_grid: dimensions must be >= 1");
    TokenGrid grid(shape.frames, shape.rows, shape.cols, shape.dim);
    const std::size_t n = grid.token_count();
    switch (kind) {
        case SynthKind::constant: {
            Rng rng(seed);
            std::vector<float> value(shape.dim);
            for (float& v : value) v = static_cast<float>(rng.normal());
            for (std::size_t i = 0; i < n; ++i) std::copy(value.begin(), value.end(), grid.token(i).begin());
            break;
        }
        case SynthKind::gaussian: {
            Rng rng(seed);
            for (float& v : grid.data()) v = static_cast<float>(rng.normal());
            break;
        }
        case SynthKind::clusters: {
            if (options.clusters < 1 || options.clusters > n) {
                throw DomainError("synth_grid: cluster count must be in [1, token count]");
            }
            const auto centroids = synth_centroids(options.clusters, shape.dim, seed, options.centroid_scale);
            Rng rng(derive_seed(seed, 1));
            for (std::size_t i = 0; i < n; ++i) {
                const auto& c = centroids[i * options.clusters / n];
                auto t = grid.token(i);
                for (std::size_t d = 0; d < shape.dim; ++d) {
                    t[d] = static_cast<float>(c[d] + options.noise * rng.normal());
                }
            }
            break;
        }
    }
    return grid;
}

ResamplerWeights read_resampler_weights(const std::string& path) {
    const TokenGrid g = read_embeddings(path);
    if (g.frames() != 1 || g.rows() != 3 || g.cols() != g.dim()) {
        throw ParseError(ParseErrorKind::bad_shape, "resampler weights must have shape 1 x 3 x dim x dim");
    }
    const std::size_t dim = g.dim();
    auto matrix = [&](std::size_t slot) {
        Matrix m{dim, dim, std::vector<double>(dim * dim)};
        for (std::size_t r = 0; r < dim; ++r) {
            auto row = g.at(0, slot, r);
            std::copy(row.begin(), row.end(), m.data.begin() + static_cast<std::ptrdiff_t>(r * dim));
        }
        return m;
    };
    return ResamplerWeights{matrix(0), matrix(1), matrix(2)};
}

ModelShape ToolConfig::model() const {
    if (model_override) return *model_override;
    return hico::model_preset(model_preset);
}

ToolConfig parse_config(const std::string& text, ToolConfig cfg) {
    const auto kv = parse_kv_text(text);
    std::string model_text;
    bool model_fields = false;

    for (const auto& [key, value] : kv) {
        auto u64 = [&] { return parse_u64(key, value); };
        auto real = [&] { return parse_double(key, value); };

        if (key == "seed") cfg.seed = u64();
        else if (key == "sampler.t_min") cfg.sampling.t_min = u64();
        else if (key == "sampler.t_max") cfg.sampling.t_max = u64();
        else if (key == "sampler.fps") cfg.fps = real();
        else if (key == "connector.kind") cfg.connector.kind = parse_connector_kind(value);
        else if (key == "connector.clip_len") cfg.connector.clip_len = u64();
        else if (key == "connector.budget") cfg.connector.budget = u64();
        else if (key == "connector.st_mix_temperature") cfg.connector.st_mix_temperature = real();
        else if (key == "connector.spatial_factor") cfg.connector.spatial_factor = u64();
        else if (key == "connector.uneven_first") cfg.connector.uneven_first = u64();
        else if (key == "connector.uneven_rest") cfg.connector.uneven_rest = u64();
        else if (key == "connector.resampler_queries") cfg.connector.resampler_queries = u64();
        else if (key == "connector.resampler_temperature") cfg.connector.resampler_temperature = real();
        else if (key == "connector.resampler_weights") cfg.connector.resampler_weights = read_resampler_weights(value);
        else if (key == "dropout.schedule") cfg.schedule = parse_schedule(value);
        else if (key == "dropout.plan_layers") cfg.plan_layers = u64();
        else if (key == "dropout.layers") cfg.decoder.layers = u64();
        else if (key == "dropout.hidden") cfg.decoder.hidden = u64();
        else if (key == "dropout.heads") cfg.decoder.heads = u64();
        else if (key == "dropout.ffn") cfg.decoder.ffn = u64();
        else if (key == "dropout.vocab") cfg.decoder.vocab = u64();
        else if (key == "model.preset") cfg.model_preset = value;
        else if (key == "model.cache_bytes_per_value") cfg.cache_bytes_per_value = u64();
        else if (key == "model.activation_overhead_bytes") cfg.activation_overhead_bytes = u64();
        else if (key == "model.text_tokens") cfg.text_tokens = u64();
        else if (key.rfind("model.", 0) == 0) {
            model_text += key.substr(6) + " = " + value + "\n";
            model_fields = true;
        }
        else if (key == "niah.haystack_len") cfg.niah.haystack_len = u64();
        else if (key == "niah.hops") cfg.niah.hops = u64();
        else if (key == "niah.distractors") cfg.niah.distractors = u64();
        else if (key == "niah.ascending") cfg.niah.ascending = parse_bool(key, value);
        else if (key == "niah.library_size") cfg.library_size = u64();
        else if (key == "niah.clue_template") cfg.templates.clue = value;
        else if (key == "niah.start_template") cfg.templates.start = value;
        else throw ConfigError("unknown config key '" + key + "'");
    }

    if (model_fields) {
        cfg.model_override = parse_model_shape("preset = " + cfg.model_preset + "\n" + model_text);
    }

    try {
        cfg.sampling.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (!(cfg.fps > 0.0)) throw ConfigError("sampler.fps must be positive");
    if (cfg.connector.clip_len < 1) throw ConfigError("connector.clip_len must be >= 1");
    cfg.schedule.validate();
    cfg.decoder.validate();
    cfg.model().validate();
    cfg.templates.validate();
    if (cfg.niah.hops < 1) throw ConfigError("niah.hops must be >= 1");
    return cfg;
}

ToolConfig load_config(const std::string& path, ToolConfig base) {
    return parse_config(read_text_file(path), std::move(base));
}

}  // namespace hico
