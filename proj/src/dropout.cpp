// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hico/dropout.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hico/error.hpp"
#include "hico/rng.hpp"

namespace hico {

namespace {

void require_ratio(double keep_ratio) {
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
        throw DomainError("keep ratio must be in (0, 1]");
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Dense row-major matrix used by the toy decoder.
struct Dense {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> w;

    static Dense random(std::size_t rows, std::size_t cols, Rng& rng) {
        Dense d{rows, cols, std::vector<double>(rows * cols)};
        const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
        for (double& v : d.w) v = rng.normal() * scale;
        return d;
    }

    // y = W x, x has `cols` entries.
    void apply(const double* x, double* y) const {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = &w[r * cols];
            double sum = 0.0;
            for (std::size_t c = 0; c < cols; ++c) sum += row[c] * x[c];
            y[r] = sum;
        }
    }
};

struct Layer {
    Dense wq, wk, wv, wo, w1, w2;
};

void rms_norm(const double* x, double* y, std::size_t n) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += x[i] * x[i];
    const double inv = 1.0 / std::sqrt(sq / static_cast<double>(n) + 1e-6);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * inv;
}

}  // namespace

void DropSchedule::validate() const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (!(e.keep_ratio > 0.0 && e.keep_ratio <= 1.0)) {
            throw ConfigError("schedule keep ratio must be in (0, 1]");
        }
        if (i > 0 && e.layer <= entries[i - 1].layer) {
            throw ConfigError("schedule layers must be strictly increasing");
        }
    }
}

DropSchedule parse_schedule(const std::string& text) {
    DropSchedule schedule;
    if (trim(text).empty()) return schedule;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const auto p1 = item.find(':');
        const auto p2 = p1 == std::string::npos ? p1 : item.find(':', p1 + 1);
        if (p2 == std::string::npos) throw ConfigError("bad schedule entry '" + item + "'");
        const std::string method = item.substr(0, p1);
        const std::string layer = item.substr(p1 + 1, p2 - p1 - 1);
        const std::string ratio = item.substr(p2 + 1);

        DropEntry entry;
        if (method == "uni") {
            entry.method = DropMethod::uniform;
        } else if (method == "attn") {
            entry.method = DropMethod::attention;
        } else {
            throw ConfigError("unknown drop method '" + method + "' (expected uni or attn)");
        }
        auto [lp, lec] = std::from_chars(layer.data(), layer.data() + layer.size(), entry.layer);
        if (lec != std::errc{} || lp != layer.data() + layer.size() || layer.empty()) {
            throw ConfigError("bad schedule layer '" + layer + "'");
        }
        std::size_t consumed = 0;
        try {
            entry.keep_ratio = std::stod(ratio, &consumed);
        } catch (const std::exception&) {
            throw ConfigError("bad schedule ratio '" + ratio + "'");
        }
        if (consumed != ratio.size()) throw ConfigError("bad schedule ratio '" + ratio + "'");
        schedule.entries.push_back(entry);
    }
    schedule.validate();
    return schedule;
}

std::string to_string(const DropSchedule& schedule) {
    std::ostringstream os;
    for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
        const auto& e = schedule.entries[i];
        if (i) os << ',';
        os << (e.method == DropMethod::uniform ? "uni" : "attn") << ':' << e.layer << ':' << e.keep_ratio;
    }
    return os.str();
}

std::size_t kept_count(std::size_t count, double keep_ratio) {
    require_ratio(keep_ratio);
    if (count < 1) throw DomainError("kept_count: count must be >= 1");
    // The tolerance absorbs representation error such as 0.1 * 30 = 3.0000000000000004.
    const double exact = keep_ratio * static_cast<double>(count);
    const auto m = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
    return std::clamp<std::size_t>(m, 1, count);
}

std::vector<std::size_t> uniform_drop(std::size_t count, double keep_ratio) {
    if (count < 1) throw DomainError("uniform_drop: count must be >= 1");
    const std::size_t m = kept_count(count, keep_ratio);
    std::vector<std::size_t> out(m);
    for (std::size_t j = 0; j < m; ++j) out[j] = j * count / m;
    return out;
}

std::vector<std::size_t> attention_select(std::span<const double> scores, double keep_ratio) {
    if (scores.empty()) throw DomainError("attention_select: no scores");
    for (double s : scores) {
        if (std::isnan(s)) throw DomainError("attention_select: NaN score");
    }
    const std::size_t m = kept_count(scores.size(), keep_ratio);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                      });
    order.resize(m);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::size_t> plan_schedule(std::size_t initial_count, const DropSchedule& schedule,
                                       std::size_t total_layers) {
    schedule.validate();
    for (const auto& e : schedule.entries) {
        if (e.layer >= total_layers) throw ConfigError("schedule layer beyond model depth");
    }
    std::vector<std::size_t> counts(total_layers);
    std::size_t current = initial_count;
    auto next = schedule.entries.begin();
    for (std::size_t layer = 0; layer < total_layers; ++layer) {
        while (next != schedule.entries.end() && next->layer == layer) {
            if (current > 0) current = kept_count(current, next->keep_ratio);
            ++next;
        }
        counts[layer] = current;
    }
    return counts;
}

DropSchedule scale_schedule(const DropSchedule& schedule, std::size_t from_layers, std::size_t to_layers) {
    schedule.validate();
    if (from_layers < 1 || to_layers < 1) throw ConfigError("scale_schedule: depths must be >= 1");
    DropSchedule out;
    std::size_t next_free = 0;
    for (const auto& e : schedule.entries) {
        DropEntry scaled = e;
        scaled.layer = (2 * e.layer * to_layers + from_layers) / (2 * from_layers);
        scaled.layer = std::max(scaled.layer, next_free);
        if (scaled.layer >= to_layers) {
            throw ConfigError("schedule does not fit into " + std::to_string(to_layers) + " layers");
        }
        next_free = scaled.layer + 1;
        out.entries.push_back(scaled);
    }
    return out;
}

void DecoderShape::validate() const {
    if (layers < 1 || hidden < 1 || heads < 1 || ffn < 1 || vocab < 1) {
        throw ConfigError("decoder shape fields must be positive");
    }
    if (hidden % heads != 0) throw ConfigError("decoder hidden size must be divisible by heads");
}

DecoderRun toy_decoder_run(std::span<const std::uint32_t> text_tokens,
                           std::span<const MergedToken> visual, const DecoderShape& shape,
                           const DropSchedule& schedule, std::uint64_t seed) {
    shape.validate();
    schedule.validate();
    if (text_tokens.empty()) throw DomainError("toy decoder needs at least one text token");
    if (visual.empty()) throw DomainError("toy decoder needs a visual context");
    const std::size_t visual_dim = visual.front().vector.size();
    for (const auto& t : visual) {
        if (t.vector.size() != visual_dim) throw DomainError("visual tokens differ in dimension");
    }
    for (auto id : text_tokens) {
        if (id >= shape.vocab) throw DomainError("text token id outside the toy vocabulary");
    }
    for (const auto& e : schedule.entries) {
        if (e.layer >= shape.layers) throw ConfigError("schedule layer beyond decoder depth");
        if (e.method == DropMethod::attention && e.layer == 0) {
            throw ConfigError("attention drop at layer 0 has no preceding attention snapshot");
        }
    }

    const std::size_t h = shape.hidden;
    const std::size_t head_dim = h / shape.heads;

    Rng weight_rng(derive_seed(seed, 0));
    const Dense embed = Dense::random(shape.vocab, h, weight_rng);
    const Dense project = Dense::random(h, visual_dim, weight_rng);
    std::vector<Layer> layers;
    layers.reserve(shape.layers);
    for (std::size_t l = 0; l < shape.layers; ++l) {
        layers.push_back(Layer{Dense::random(h, h, weight_rng), Dense::random(h, h, weight_rng),
                               Dense::random(h, h, weight_rng), Dense::random(h, h, weight_rng),
                               Dense::random(shape.ffn, h, weight_rng),
                               Dense::random(h, shape.ffn, weight_rng)});
    }

    // Visual states then text states, each `h` wide.
    std::vector<std::vector<double>> vis(visual.size(), std::vector<double>(h));
    for (std::size_t i = 0; i < visual.size(); ++i) project.apply(visual[i].vector.data(), vis[i].data());
    std::vector<std::vector<double>> txt(text_tokens.size(), std::vector<double>(h));
    for (std::size_t i = 0; i < text_tokens.size(); ++i) {
        std::copy_n(&embed.w[text_tokens[i] * h], h, txt[i].begin());
    }

    std::vector<std::size_t> kept(visual.size());
    std::iota(kept.begin(), kept.end(), 0);

    DecoderRun run;
    auto entry = schedule.entries.begin();
    for (std::size_t l = 0; l < shape.layers; ++l) {
        if (entry != schedule.entries.end() && entry->layer == l) {
            const auto positions = entry->method == DropMethod::uniform
                                       ? uniform_drop(kept.size(), entry->keep_ratio)
                                       : attention_select(run.snapshots.back().scores, entry->keep_ratio);
            std::vector<std::size_t> next_kept;
            std::vector<std::vector<double>> next_vis;
            for (std::size_t p : positions) {
                next_kept.push_back(kept[p]);
                next_vis.push_back(std::move(vis[p]));
            }
            kept = std::move(next_kept);
            vis = std::move(next_vis);
            ++entry;
        }
        run.kept.layers.push_back(kept);

        const Layer& layer = layers[l];
        const std::size_t nv = vis.size();
        const std::size_t n = nv + txt.size();
        auto state = [&](std::size_t i) -> std::vector<double>& { return i < nv ? vis[i] : txt[i - nv]; };

        std::vector<double> q(n * h), k(n * h), v(n * h), normed(h);
        for (std::size_t i = 0; i < n; ++i) {
            rms_norm(state(i).data(), normed.data(), h);
            layer.wq.apply(normed.data(), &q[i * h]);
            layer.wk.apply(normed.data(), &k[i * h]);
            layer.wv.apply(normed.data(), &v[i * h]);
        }

        AttentionSnapshot snap;
        snap.layer = l;
        snap.scores.assign(nv, 0.0);
        snap.text_scores.assign(txt.size(), 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
        std::vector<double> attn_out(n * h, 0.0);
        std::vector<double> weights(n);
        for (std::size_t head = 0; head < shape.heads; ++head) {
            const std::size_t off = head * head_dim;
            for (std::size_t i = 0; i < n; ++i) {
                // Causal: position i attends to 0..i.
                double peak = -INFINITY;
                for (std::size_t j = 0; j <= i; ++j) {
                    double s = 0.0;
                    for (std::size_t d = 0; d < head_dim; ++d) s += q[i * h + off + d] * k[j * h + off + d];
                    weights[j] = s * scale;
                    peak = std::max(peak, weights[j]);
                }
                double total = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    weights[j] = std::exp(weights[j] - peak);
                    total += weights[j];
                }
                for (std::size_t j = 0; j <= i; ++j) {
                    weights[j] /= total;
                    for (std::size_t d = 0; d < head_dim; ++d) {
                        attn_out[i * h + off + d] += weights[j] * v[j * h + off + d];
                    }
                }
                if (i == n - 1) {
                    for (std::size_t j = 0; j < nv; ++j) snap.scores[j] += weights[j] / shape.heads;
                    for (std::size_t j = nv; j < n; ++j) snap.text_scores[j - nv] += weights[j] / shape.heads;
                }
            }
        }
        run.snapshots.push_back(std::move(snap));

        std::vector<double> projected(h), hidden(shape.ffn), ffn_out(h);
        for (std::size_t i = 0; i < n; ++i) {
            auto& x = state(i);
            layer.wo.apply(&attn_out[i * h], projected.data());
            for (std::size_t d = 0; d < h; ++d) x[d] += projected[d];
            rms_norm(x.data(), normed.data(), h);
            layer.w1.apply(normed.data(), hidden.data());
            for (double& a : hidden) a = std::max(0.0, a);
            layer.w2.apply(hidden.data(), ffn_out.data());
            for (std::size_t d = 0; d < h; ++d) x[d] += ffn_out[d];
        }
    }

    for (const auto& t : txt) run.text_states.insert(run.text_states.end(), t.begin(), t.end());
    return run;
}

}  // namespace hico
