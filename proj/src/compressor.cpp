// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hico/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "hico/error.hpp"
#include "hico/rng.hpp"

namespace hico {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool source_order(const MergedToken& a, const MergedToken& b) {
    return a.min_source() < b.min_source();
}

void require_clip(const Clip& clip) {
    if (clip.grid.empty() || clip.grid.dim() == 0) throw DomainError("clip is empty");
    if (!clip.grid.all_finite()) throw DomainError("clip contains non-finite values");
}

std::vector<double> project(const std::optional<Matrix>& w, std::span<const double> x) {
    if (!w) return {x.begin(), x.end()};
    std::vector<double> out(w->rows, 0.0);
    for (std::size_t r = 0; r < w->rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < w->cols; ++c) sum += (*w)(r, c) * x[c];
        out[r] = sum;
    }
    return out;
}

void check_square(const std::optional<Matrix>& w, std::size_t dim, const char* name) {
    if (w && (w->rows != dim || w->cols != dim || w->data.size() != dim * dim)) {
        throw DomainError(std::string("resampler projection ") + name + " does not match token dim");
    }
}

// In-place softmax over logits.
void softmax(std::vector<double>& logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& v : logits) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : logits) v /= total;
}

void accumulate_input(const std::vector<MergedToken>& inputs, CompressedClip& out) {
    const std::size_t dim = inputs.front().vector.size();
    out.input_sum.assign(dim, 0.0);
    out.input_mass = 0.0;
    for (const auto& t : inputs) {
        for (std::size_t d = 0; d < dim; ++d) out.input_sum[d] += t.vector[d];
        out.input_mass += norm(t.vector);
    }
}

}  // namespace

ConnectorKind parse_connector_kind(const std::string& text) {
    if (text == "merge") return ConnectorKind::merge;
    if (text == "spatial") return ConnectorKind::spatial;
    if (text == "uneven") return ConnectorKind::uneven;
    if (text == "resampler") return ConnectorKind::resampler;
    throw ConfigError("unknown connector kind '" + text + "'");
}

std::string to_string(ConnectorKind kind) {
    switch (kind) {
        case ConnectorKind::merge: return "merge";
        case ConnectorKind::spatial: return "spatial";
        case ConnectorKind::uneven: return "uneven";
        case ConnectorKind::resampler: return "resampler";
    }
    return "unknown";
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m{n, n, std::vector<double>(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) m.data[i * n + i] = 1.0;
    return m;
}

void ConnectorConfig::validate(const TokenGrid& grid) const {
    if (clip_len < 1) throw DomainError("clip_len must be >= 1");
    const std::size_t rows = grid.rows();
    const std::size_t cols = grid.cols();
    auto divides = [&](std::size_t f) { return f >= 1 && rows % f == 0 && cols % f == 0; };
    switch (kind) {
        case ConnectorKind::merge:
            if (budget < 1) throw DomainError("merge budget must be >= 1");
            if (budget > clip_len * rows * cols) {
                throw DomainError("merge budget exceeds the token count of a full clip");
            }
            if (st_mix_temperature && !(*st_mix_temperature > 0.0)) {
                throw DomainError("st_mix temperature must be positive");
            }
            break;
        case ConnectorKind::spatial:
            if (!divides(spatial_factor)) throw DomainError("spatial factor must divide rows and cols");
            break;
        case ConnectorKind::uneven:
            if (!divides(uneven_first) || !divides(uneven_rest)) {
                throw DomainError("uneven factors must divide rows and cols");
            }
            if (uneven_first > uneven_rest) throw DomainError("uneven requires f_first <= f_rest");
            break;
        case ConnectorKind::resampler:
            if (resampler_queries < 1) throw DomainError("resampler needs at least one query");
            if (!(resampler_temperature > 0.0)) throw DomainError("resampler temperature must be positive");
            check_square(resampler_weights.wq, grid.dim(), "wq");
            check_square(resampler_weights.wk, grid.dim(), "wk");
            check_square(resampler_weights.wv, grid.dim(), "wv");
            if (!resampler_query_vectors.empty()) {
                if (resampler_query_vectors.size() != resampler_queries) {
                    throw DomainError("resampler query file count differs from resampler_queries");
                }
                for (const auto& q : resampler_query_vectors) {
                    if (q.size() != grid.dim()) throw DomainError("resampler query dim mismatch");
                }
            }
            break;
    }
}

std::vector<Clip> segment_clips(const TokenGrid& grid, std::size_t clip_len) {
    if (clip_len < 1) throw DomainError("clip_len must be >= 1");
    if (grid.empty()) throw DomainError("cannot segment an empty grid");
    std::vector<Clip> clips;
    for (std::size_t start = 0, index = 0; start < grid.frames(); start += clip_len, ++index) {
        const std::size_t end = std::min(grid.frames(), start + clip_len);
        clips.push_back(Clip{index, grid.slice_frames(start, end), {start, end}});
    }
    return clips;
}

Clip st_mix(const Clip& clip, double temperature) {
    require_clip(clip);
    if (!(temperature > 0.0)) throw DomainError("st_mix temperature must be positive");
    const TokenGrid& in = clip.grid;
    const std::size_t n = in.token_count();
    const std::size_t dim = in.dim();

    std::vector<std::vector<double>> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto t = in.token(i);
        x[i].assign(t.begin(), t.end());
    }

    Clip out = clip;
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) weights[j] = dot(x[i], x[j]) / temperature;
        softmax(weights);
        std::vector<double> mixed(dim, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t d = 0; d < dim; ++d) mixed[d] += weights[j] * x[j][d];
        }
        auto dst = out.grid.token(i);
        for (std::size_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(mixed[d]);
    }
    if (!out.grid.all_finite()) throw DomainError("st_mix produced non-finite values");
    return out;
}

std::vector<MergedToken> clip_tokens(const Clip& clip) {
    const TokenGrid& g = clip.grid;
    std::vector<MergedToken> tokens;
    tokens.reserve(g.token_count());
    for (std::size_t f = 0; f < g.frames(); ++f) {
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) {
                auto v = g.at(f, r, c);
                tokens.push_back(MergedToken{
                    std::vector<double>(v.begin(), v.end()), 1,
                    {Source{static_cast<std::uint32_t>(clip.frame_span.first + f),
                            static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)}}});
            }
        }
    }
    return tokens;
}

MergedToken merge_tokens(std::span<const MergedToken> tokens) {
    if (tokens.empty()) throw DomainError("merge_tokens: nothing to merge");
    const std::size_t dim = tokens.front().vector.size();
    MergedToken out;
    out.vector.assign(dim, 0.0);
    out.size = 0;
    for (const auto& t : tokens) {
        if (t.vector.size() != dim) throw DomainError("merge_tokens: dimension mismatch");
        for (std::size_t d = 0; d < dim; ++d) out.vector[d] += t.size * t.vector[d];
        out.size += t.size;
        out.sources.insert(out.sources.end(), t.sources.begin(), t.sources.end());
    }
    for (double& v : out.vector) v /= out.size;
    std::sort(out.sources.begin(), out.sources.end());
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

std::vector<MergedToken> tome_merge(std::vector<MergedToken> tokens, std::size_t target) {
    if (target < 1) throw DomainError("tome_merge: target must be >= 1");
    if (target > tokens.size()) throw DomainError("tome_merge: target exceeds token count");
    const std::size_t dim = tokens.front().vector.size();
    for (const auto& t : tokens) {
        if (t.sources.empty()) throw DomainError("tome_merge: token without provenance");
        if (t.vector.size() != dim) throw DomainError("tome_merge: dimension mismatch");
        for (double v : t.vector) {
            if (!std::isfinite(v)) throw DomainError("tome_merge: non-finite feature");
        }
    }
    std::stable_sort(tokens.begin(), tokens.end(), source_order);

    while (tokens.size() > target) {
        const std::size_t n = tokens.size();
        const std::size_t a_count = (n + 1) / 2;
        const std::size_t b_count = n / 2;
        const std::size_t r = std::min({a_count, n - target, n / 2});

        struct Match {
            double similarity;
            std::size_t a;  // position in tokens (even)
            std::size_t b;  // position in tokens (odd)
        };
        std::vector<Match> matches;
        matches.reserve(a_count);
        for (std::size_t ai = 0; ai < a_count; ++ai) {
            const std::size_t a = 2 * ai;
            Match best{-2.0, a, 1};
            for (std::size_t bi = 0; bi < b_count; ++bi) {
                const std::size_t b = 2 * bi + 1;
                const double s = cosine_similarity(tokens[a].vector, tokens[b].vector);
                if (s > best.similarity) best = {s, a, b};
            }
            matches.push_back(best);
        }
        std::stable_sort(matches.begin(), matches.end(), [](const Match& x, const Match& y) {
            return x.similarity > y.similarity;
        });
        matches.resize(r);

        // Group absorbed A-tokens by destination; B order is preserved via the map key.
        std::map<std::size_t, std::vector<std::size_t>> absorbed;
        std::vector<bool> consumed(n, false);
        for (const auto& m : matches) {
            absorbed[m.b].push_back(m.a);
            consumed[m.a] = true;
        }

        std::vector<MergedToken> next;
        next.reserve(n - r);
        for (std::size_t i = 0; i < n; ++i) {
            if (consumed[i]) continue;
            auto it = absorbed.find(i);
            if (it == absorbed.end()) {
                next.push_back(std::move(tokens[i]));
                continue;
            }
            std::vector<MergedToken> group;
            group.push_back(tokens[i]);
            for (std::size_t a : it->second) group.push_back(tokens[a]);
            next.push_back(merge_tokens(group));
        }
        std::stable_sort(next.begin(), next.end(), source_order);
        tokens = std::move(next);
    }
    return tokens;
}

std::vector<MergedToken> downsample_frame(const Clip& clip, std::size_t frame, std::size_t factor) {
    const TokenGrid& g = clip.grid;
    if (frame >= g.frames()) throw DomainError("downsample_frame: frame out of range");
    if (factor < 1 || g.rows() % factor != 0 || g.cols() % factor != 0) {
        throw DomainError("downsample factor must divide rows and cols");
    }
    const std::size_t dim = g.dim();
    const auto abs_frame = static_cast<std::uint32_t>(clip.frame_span.first + frame);
    std::vector<MergedToken> out;
    out.reserve((g.rows() / factor) * (g.cols() / factor));
    for (std::size_t br = 0; br < g.rows(); br += factor) {
        for (std::size_t bc = 0; bc < g.cols(); bc += factor) {
            MergedToken t;
            t.vector.assign(dim, 0.0);
            t.size = static_cast<std::uint32_t>(factor * factor);
            for (std::size_t r = br; r < br + factor; ++r) {
                for (std::size_t c = bc; c < bc + factor; ++c) {
                    auto v = g.at(frame, r, c);
                    for (std::size_t d = 0; d < dim; ++d) t.vector[d] += v[d];
                    t.sources.push_back(
                        {abs_frame, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
                }
            }
            for (double& v : t.vector) v /= static_cast<double>(t.size);
            std::sort(t.sources.begin(), t.sources.end());
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::vector<MergedToken> spatial_downsample(const Clip& clip, std::size_t factor) {
    return uneven_downsample(clip, factor, factor);
}

std::vector<MergedToken> uneven_downsample(const Clip& clip, std::size_t f_first, std::size_t f_rest) {
    if (f_first > f_rest) throw DomainError("uneven_downsample requires f_first <= f_rest");
    std::vector<MergedToken> out;
    for (std::size_t f = 0; f < clip.grid.frames(); ++f) {
        auto part = downsample_frame(clip, f, f == 0 ? f_first : f_rest);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

std::vector<std::vector<double>> seeded_queries(std::size_t count, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> queries(count, std::vector<double>(dim));
    for (auto& q : queries) {
        for (double& v : q) v = rng.normal();
        const double n = norm(q);
        if (n > 0.0) {
            for (double& v : q) v /= n;
        }
    }
    return queries;
}

std::vector<MergedToken> resampler_forward(std::span<const MergedToken> tokens,
                                           const std::vector<std::vector<double>>& queries,
                                           const ResamplerWeights& weights, double temperature) {
    if (tokens.empty()) throw DomainError("resampler_forward: no input tokens");
    if (queries.empty()) throw DomainError("resampler_forward: no queries");
    if (!(temperature > 0.0)) throw DomainError("resampler_forward: temperature must be positive");
    const std::size_t dim = tokens.front().vector.size();
    check_square(weights.wq, dim, "wq");
    check_square(weights.wk, dim, "wk");
    check_square(weights.wv, dim, "wv");

    std::vector<std::vector<double>> keys;
    std::vector<std::vector<double>> values;
    keys.reserve(tokens.size());
    values.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (t.vector.size() != dim) throw DomainError("resampler_forward: token dim mismatch");
        keys.push_back(project(weights.wk, t.vector));
        values.push_back(project(weights.wv, t.vector));
    }

    const double scale = 1.0 / (std::sqrt(static_cast<double>(dim)) * temperature);
    std::vector<MergedToken> out;
    out.reserve(queries.size());
    std::vector<double> logits(tokens.size());
    for (const auto& q_raw : queries) {
        if (q_raw.size() != dim) throw DomainError("resampler_forward: query dim mismatch");
        const auto q = project(weights.wq, q_raw);
        for (std::size_t j = 0; j < keys.size(); ++j) logits[j] = dot(q, keys[j]) * scale;
        softmax(logits);
        MergedToken t;
        t.vector.assign(dim, 0.0);
        for (std::size_t j = 0; j < values.size(); ++j) {
            for (std::size_t d = 0; d < dim; ++d) t.vector[d] += logits[j] * values[j][d];
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::size_t effective_budget(std::size_t budget, std::size_t frames, std::size_t clip_len) {
    if (clip_len < 1) throw DomainError("clip_len must be >= 1");
    return (budget * frames + clip_len - 1) / clip_len;
}

std::size_t expected_token_count(const ConnectorConfig& config, std::size_t frames,
                                 std::size_t rows, std::size_t cols) {
    auto per_frame = [&](std::size_t f) { return (rows / f) * (cols / f); };
    switch (config.kind) {
        case ConnectorKind::merge:
            return effective_budget(config.budget, frames, config.clip_len);
        case ConnectorKind::spatial:
            return frames * per_frame(config.spatial_factor);
        case ConnectorKind::uneven:
            return per_frame(config.uneven_first) + (frames - 1) * per_frame(config.uneven_rest);
        case ConnectorKind::resampler:
            return config.resampler_queries;
    }
    return 0;
}

CompressedClip compress_clip(const Clip& clip, const ConnectorConfig& config) {
    require_clip(clip);
    config.validate(clip.grid);

    CompressedClip out;
    out.clip_index = clip.clip_index;
    out.source_tokens = clip.grid.token_count();

    switch (config.kind) {
        case ConnectorKind::merge: {
            auto inputs = config.st_mix_temperature ? clip_tokens(st_mix(clip, *config.st_mix_temperature))
                                                    : clip_tokens(clip);
            accumulate_input(inputs, out);
            out.budget = effective_budget(config.budget, clip.grid.frames(), config.clip_len);
            out.tokens = tome_merge(std::move(inputs), out.budget);
            break;
        }
        case ConnectorKind::spatial:
            accumulate_input(clip_tokens(clip), out);
            out.tokens = spatial_downsample(clip, config.spatial_factor);
            out.budget = out.tokens.size();
            break;
        case ConnectorKind::uneven:
            accumulate_input(clip_tokens(clip), out);
            out.tokens = uneven_downsample(clip, config.uneven_first, config.uneven_rest);
            out.budget = out.tokens.size();
            break;
        case ConnectorKind::resampler: {
            const auto inputs = clip_tokens(clip);
            accumulate_input(inputs, out);
            const auto queries = config.resampler_query_vectors.empty()
                                     ? seeded_queries(config.resampler_queries, clip.grid.dim(),
                                                      config.resampler_seed)
                                     : config.resampler_query_vectors;
            out.tokens = resampler_forward(inputs, queries, config.resampler_weights,
                                           config.resampler_temperature);
            out.budget = config.resampler_queries;
            out.has_provenance = false;
            break;
        }
    }
    return out;
}

VisualContext concat_context(std::vector<CompressedClip> clips) {
    VisualContext ctx;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        if (i > 0 && clips[i].clip_index <= clips[i - 1].clip_index) {
            throw DomainError("concat_context: clips must be ordered by clip_index");
        }
        ctx.clip_offsets.push_back(ctx.tokens.size());
        ctx.source_tokens += clips[i].source_tokens;
        ctx.has_provenance = ctx.has_provenance && clips[i].has_provenance;
        if (ctx.input_sum.empty()) ctx.input_sum.assign(clips[i].input_sum.size(), 0.0);
        for (std::size_t d = 0; d < clips[i].input_sum.size() && d < ctx.input_sum.size(); ++d) {
            ctx.input_sum[d] += clips[i].input_sum[d];
        }
        ctx.input_mass += clips[i].input_mass;
        std::move(clips[i].tokens.begin(), clips[i].tokens.end(), std::back_inserter(ctx.tokens));
    }
    return ctx;
}

VisualContext compress_video(const TokenGrid& grid, const ConnectorConfig& config, std::size_t threads) {
    config.validate(grid);
    const auto clips = segment_clips(grid, config.clip_len);
    std::vector<CompressedClip> compressed(clips.size());
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, clips.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < clips.size(); ++i) compressed[i] = compress_clip(clips[i], config);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < clips.size(); i += workers) {
                        compressed[i] = compress_clip(clips[i], config);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return concat_context(std::move(compressed));
}

double conservation_residual(const TokenGrid& grid, std::span<const MergedToken> tokens) {
    const std::size_t dim = grid.dim();
    std::vector<double> diff(dim, 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.token_count(); ++i) {
        auto v = grid.token(i);
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            diff[d] -= v[d];
            sq += static_cast<double>(v[d]) * v[d];
        }
        mass += std::sqrt(sq);
    }
    for (const auto& t : tokens) {
        for (std::size_t d = 0; d < dim; ++d) diff[d] += t.size * t.vector[d];
    }
    return mass > 0.0 ? norm(diff) / mass : norm(diff);
}

double conservation_residual(const VisualContext& context) {
    std::vector<double> diff = context.input_sum;
    for (double& v : diff) v = -v;
    for (const auto& t : context.tokens) {
        for (std::size_t d = 0; d < diff.size(); ++d) diff[d] += t.size * t.vector[d];
    }
    return context.input_mass > 0.0 ? norm(diff) / context.input_mass : norm(diff);
}

}  // namespace hico
