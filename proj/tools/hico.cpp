// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// hico: command-line front end.
//
// Exit codes: 0 success, 2 domain/config error (including bad flags), 3 I/O error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hico/compressor.hpp"
#include "hico/costmodel.hpp"
#include "hico/dropout.hpp"
#include "hico/error.hpp"
#include "hico/io.hpp"
#include "hico/niah.hpp"
#include "hico/rng.hpp"
#include "hico/sampler.hpp"

namespace fs = std::filesystem;
using namespace hico;

namespace {

constexpr int kExitDomain = 2;
constexpr int kExitIo = 3;

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

// Emits text to a file, or stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
    }
}

std::vector<std::size_t> split_indices(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("bad integer list entry '" + item + "'");
        }
    }
    return out;
}

std::vector<MergedToken> grid_tokens(const TokenGrid& grid) {
    return clip_tokens(Clip{0, grid, {0, grid.frames()}});
}

// Instance files named on the command line; directories contribute their *.json
// files except library.json, in name order.
std::vector<std::string> expand_instances(const std::vector<std::string>& inputs) {
    std::vector<std::string> out;
    for (const auto& in : inputs) {
        std::error_code ec;
        if (fs::is_directory(in, ec)) {
            std::vector<std::string> found;
            for (const auto& entry : fs::directory_iterator(in)) {
                const auto name = entry.path().filename().string();
                if (entry.path().extension() == ".json" && name != "library.json") found.push_back(entry.path().string());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(in);
        }
    }
    if (out.empty()) throw ConfigError("no instance files given");
    return out;
}

niah::ItemLibrary load_library(const std::string& path, const ToolConfig& cfg, std::uint64_t library_seed) {
    if (path.empty()) return niah::synth_library(cfg.library_size, library_seed);
    try {
        return niah::library_from_json(niah::Json::parse(read_text_file(path)));
    } catch (const niah::Json::exception& e) {
        throw ParseError(ParseErrorKind::format, "library '" + path + "': " + e.what());
    }
}

std::vector<niah::NiahInstance> load_instances(const std::vector<std::string>& files) {
    std::vector<niah::NiahInstance> out;
    for (const auto& f : files) out.push_back(niah::deserialize_instance(read_text_file(f)));
    return out;
}

void write_instances(const std::string& dir, const std::vector<niah::NiahInstance>& instances) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "instance-%05zu.json", i);
        write_text_file((fs::path(dir) / name).string(), niah::serialize(instances[i]));
    }
}

std::string context_meta(const VisualContext& ctx, const ConnectorConfig& connector) {
    niah::Json tokens = niah::Json::array();
    for (const auto& t : ctx.tokens) {
        niah::Json sources = niah::Json::array();
        for (const auto& s : t.sources) sources.push_back({s.frame, s.row, s.col});
        tokens.push_back(niah::Json{{"size", t.size}, {"sources", std::move(sources)}});
    }
    niah::Json meta{{"connector", to_string(connector.kind)},
                    {"source_tokens", ctx.source_tokens},
                    {"output_tokens", ctx.tokens.size()},
                    {"has_provenance", ctx.has_provenance},
                    {"clip_offsets", ctx.clip_offsets},
                    {"tokens", std::move(tokens)}};
    return meta.dump(2) + "\n";
}

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

ToolConfig resolve_config(const Globals& g) {
    std::string path = g.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("HICO_CONFIG"); env && *env) path = env;
    }
    ToolConfig cfg = path.empty() ? ToolConfig{} : load_config(path);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HiCo video-token compression toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals globals;
    app.add_option("--config", globals.config_path, "key = value config file (default: $HICO_CONFIG)");
    app.add_option("--seed", globals.seed, "Seed override");

    // sample
    auto* sample = app.add_subcommand("sample", "Frame count, indices and timestamp prompt for a video");
    double duration = 0.0;
    std::optional<std::size_t> t_min, t_max;
    std::optional<double> fps;
    sample->add_option("--duration", duration, "Video duration in seconds")->required();
    sample->add_option("--tmin", t_min, "Minimum frame count");
    sample->add_option("--tmax", t_max, "Maximum frame count");
    sample->add_option("--fps", fps, "Source frame rate");

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic embedding file");
    std::string synth_kind = "gaussian", synth_out;
    GridShape synth_shape{4, 16, 16, 8};
    SynthOptions synth_opts;
    synth->add_option("--kind", synth_kind, "constant | clusters | gaussian");
    synth->add_option("--frames", synth_shape.frames);
    synth->add_option("--rows", synth_shape.rows);
    synth->add_option("--cols", synth_shape.cols);
    synth->add_option("--dim", synth_shape.dim);
    synth->add_option("--clusters", synth_opts.clusters);
    synth->add_option("--noise", synth_opts.noise);
    synth->add_option("--out", synth_out, "Output embedding file")->required();

    // compress
    auto* compress = app.add_subcommand("compress", "Compress an embedding file with a connector");
    std::string compress_in, compress_out, compress_meta;
    std::optional<std::string> connector_kind;
    std::optional<std::size_t> budget, clip_len, factor, uneven_first, uneven_rest, queries;
    std::optional<double> st_mix_temp;
    std::size_t threads = 1;
    compress->add_option("--in", compress_in, "Input embedding file")->required();
    compress->add_option("--out", compress_out, "Output embedding file (1 x 1 x tokens x dim)");
    compress->add_option("--meta", compress_meta, "Write token sizes and provenance as JSON");
    compress->add_option("--connector", connector_kind, "merge | spatial | uneven | resampler");
    compress->add_option("--budget", budget, "Merge budget per full clip");
    compress->add_option("--clip-len", clip_len, "Frames per clip");
    compress->add_option("--factor", factor, "Spatial downsampling factor");
    compress->add_option("--uneven-first", uneven_first, "Uneven factor for the first frame");
    compress->add_option("--uneven-rest", uneven_rest, "Uneven factor for later frames");
    compress->add_option("--queries", queries, "Resampler query count");
    compress->add_option("--st-mix", st_mix_temp, "Pre-mix temperature for merge");
    compress->add_option("--threads", threads, "Clips compressed concurrently");

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Prefill FLOPs and inference memory");
    std::vector<std::uint64_t> est_frames;
    std::uint64_t tokens_per_frame = 16;
    std::optional<std::string> est_shape, est_schedule, est_model_file;
    std::optional<std::uint64_t> est_text;
    estimate->add_option("--frames", est_frames, "Frame counts")->required()->delimiter(',');
    estimate->add_option("--tokens-per-frame", tokens_per_frame, "Visual tokens per frame");
    estimate->add_option("--shape", est_shape, "Model preset: 7b | 2b | toy");
    estimate->add_option("--model", est_model_file, "Model shape file (key = value)");
    estimate->add_option("--schedule", est_schedule, "Drop schedule, e.g. uni:4:0.75,attn:18:0.25");
    estimate->add_option("--text-tokens", est_text, "Text tokens added to every layer");

    // dropout
    auto* dropout = app.add_subcommand("dropout", "Per-layer kept counts and a toy decoder run");
    std::string drop_in, drop_out;
    std::optional<std::string> drop_schedule;
    std::string drop_text = "1,2,3,4,5,6,7,8";
    dropout->add_option("--in", drop_in, "Visual tokens as an embedding file")->required();
    dropout->add_option("--schedule", drop_schedule, "Drop schedule written for the reference depth");
    dropout->add_option("--text", drop_text, "Comma-separated toy text token ids");
    dropout->add_option("--out", drop_out, "Kept-index dump (JSON); stdout when omitted");

    // niah
    auto* niah_cmd = app.add_subcommand("niah", "Needle-in-a-video-haystack instances");
    niah_cmd->require_subcommand(1);
    std::string library_path;
    std::uint64_t library_seed = 0;
    auto add_library = [&](CLI::App* cmd) {
        cmd->add_option("--library", library_path, "Item library JSON (default: synthetic)");
        cmd->add_option("--library-seed", library_seed, "Seed of the synthetic library");
    };

    auto* niah_lib = niah_cmd->add_subcommand("library", "Write the synthetic item library");
    std::string lib_out;
    niah_lib->add_option("--out", lib_out, "Output JSON")->required();
    niah_lib->add_option("--library-seed", library_seed);

    auto* niah_gen = niah_cmd->add_subcommand("gen", "Generate multi-hop instances");
    std::string gen_out;
    std::size_t gen_count = 1;
    std::optional<std::size_t> gen_len, gen_hops, gen_distractors;
    bool gen_ascending = false;
    add_library(niah_gen);
    niah_gen->add_option("--out", gen_out, "Output directory")->required();
    niah_gen->add_option("--count", gen_count, "Number of instances");
    niah_gen->add_option("--length", gen_len, "Haystack length in frames");
    niah_gen->add_option("--hops", gen_hops);
    niah_gen->add_option("--distractors", gen_distractors);
    niah_gen->add_flag("--ascending", gen_ascending, "Force increasing hop positions");

    auto* niah_val = niah_cmd->add_subcommand("validate", "Check instances; exit 2 if any fails");
    std::vector<std::string> val_inputs;
    add_library(niah_val);
    niah_val->add_option("inputs", val_inputs, "Instance files or directories")->required();

    auto* niah_solve = niah_cmd->add_subcommand("solve", "Oracle responses as JSON lines");
    std::vector<std::string> solve_inputs;
    std::string solve_out;
    add_library(niah_solve);
    niah_solve->add_option("inputs", solve_inputs, "Instance files or directories")->required();
    niah_solve->add_option("--out", solve_out, "Responses JSONL; stdout when omitted");

    auto* niah_score = niah_cmd->add_subcommand("score", "CAP and QA of a response file");
    std::vector<std::string> score_inputs;
    std::string score_responses;
    niah_score->add_option("inputs", score_inputs, "Instance files or directories")->required();
    niah_score->add_option("--responses", score_responses, "Responses JSONL")->required();

    auto* niah_heat = niah_cmd->add_subcommand("heatmap", "Single-hop length x depth grid");
    std::vector<std::size_t> heat_lengths;
    std::vector<double> heat_depths;
    std::string heat_out, heat_responses, heat_csv;
    add_library(niah_heat);
    niah_heat->add_option("--lengths", heat_lengths)->required()->delimiter(',');
    niah_heat->add_option("--depths", heat_depths)->required()->delimiter(',');
    niah_heat->add_option("--out", heat_out, "Directory for the cell instances");
    niah_heat->add_option("--responses", heat_responses, "Responses JSONL to score");
    niah_heat->add_option("--csv", heat_csv, "Heatmap CSV; stdout when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitDomain;
    }

    try {
        ToolConfig cfg = resolve_config(globals);

        if (*sample) {
            if (t_min) cfg.sampling.t_min = *t_min;
            if (t_max) cfg.sampling.t_max = *t_max;
            if (fps) cfg.fps = *fps;
            const auto meta = VideoMeta::from_duration(duration, cfg.fps);
            const auto plan = build_plan(meta, cfg.sampling);
            std::ostringstream os;
            os << "frames " << plan.indices.size() << "\n";
            os << "density " << niah::format_number(sampling_density(duration, cfg.sampling)) << "\n";
            os << "indices";
            for (auto i : plan.indices) os << ' ' << i;
            os << "\ntimestamps";
            for (double t : plan.timestamps) os << ' ' << fmt("%.3f", t);
            os << "\nprompt " << timestamp_prompt(duration, plan.indices.size()) << "\n";
            std::cout << os.str();
        } else if (*synth) {
            write_embeddings(synth_grid(parse_synth_kind(synth_kind), synth_shape, cfg.seed, synth_opts), synth_out);
        } else if (*compress) {
            auto& c = cfg.connector;
            if (connector_kind) c.kind = parse_connector_kind(*connector_kind);
            if (budget) c.budget = *budget;
            if (clip_len) c.clip_len = *clip_len;
            if (factor) c.spatial_factor = *factor;
            if (uneven_first) c.uneven_first = *uneven_first;
            if (uneven_rest) c.uneven_rest = *uneven_rest;
            if (queries) c.resampler_queries = *queries;
            if (st_mix_temp) c.st_mix_temperature = *st_mix_temp;
            if (c.kind == ConnectorKind::resampler) c.resampler_seed = cfg.seed;

            const auto grid = read_embeddings(compress_in);
            const auto ctx = compress_video(grid, c, std::max<std::size_t>(threads, 1));
            const std::size_t dim = ctx.tokens.front().vector.size();
            if (!compress_out.empty()) {
                TokenGrid out(1, 1, ctx.tokens.size(), dim);
                for (std::size_t i = 0; i < ctx.tokens.size(); ++i) {
                    auto dst = out.token(i);
                    for (std::size_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(ctx.tokens[i].vector[d]);
                }
                write_embeddings(out, compress_out);
            }
            if (!compress_meta.empty()) write_text_file(compress_meta, context_meta(ctx, c));

            std::ostringstream os;
            os << "connector " << to_string(c.kind) << "\n";
            os << "clips " << ctx.clip_offsets.size() << "\n";
            os << "input_tokens " << ctx.source_tokens << "\n";
            os << "output_tokens " << ctx.tokens.size() << "\n";
            os << "ratio "
               << fmt("%.2f", 100.0 * static_cast<double>(ctx.tokens.size()) / static_cast<double>(ctx.source_tokens))
               << "%\n";
            os << "residual " << (ctx.has_provenance ? fmt("%.3e", conservation_residual(ctx)) : "n/a") << "\n";
            std::cout << os.str();
        } else if (*estimate) {
            ModelShape shape = cfg.model();
            if (est_shape) shape = model_preset(*est_shape);
            if (est_model_file) shape = load_model_shape(*est_model_file);
            if (est_schedule) cfg.schedule = parse_schedule(*est_schedule);
            if (est_text) cfg.text_tokens = *est_text;

            std::ostringstream os;
            os << "model " << shape.name << "\n";
            os << "frames tokens tflops";
            if (!cfg.schedule.empty()) os << " tflops_scheduled";
            os << " weights_gb kv_cache_gb activation_gb total_gb\n";
            for (auto frames : est_frames) {
                const auto visual = tokens_for_video(frames, tokens_per_frame);
                const auto report = memory_estimate(visual + cfg.text_tokens, shape, cfg.cache_bytes_per_value,
                                                    cfg.activation_overhead_bytes);
                os << frames << ' ' << visual << ' '
                   << fmt("%.2f", prefill_flops(visual + cfg.text_tokens, shape) / 1e12);
                if (!cfg.schedule.empty()) {
                    os << ' ' << fmt("%.2f", flops_with_schedule(visual, cfg.schedule, shape, cfg.text_tokens) / 1e12);
                }
                os << ' ' << fmt("%.3f", static_cast<double>(report.weight_bytes) / 1e9) << ' '
                   << fmt("%.3f", static_cast<double>(report.kv_cache_bytes) / 1e9) << ' '
                   << fmt("%.3f", static_cast<double>(report.activation_bytes) / 1e9) << ' '
                   << fmt("%.3f", static_cast<double>(report.total_infer_bytes) / 1e9) << "\n";
            }
            std::cout << os.str();
        } else if (*dropout) {
            if (drop_schedule) cfg.schedule = parse_schedule(*drop_schedule);
            const auto visual = grid_tokens(read_embeddings(drop_in));
            std::vector<std::uint32_t> text;
            for (auto id : split_indices(drop_text)) text.push_back(static_cast<std::uint32_t>(id));

            std::ostringstream os;
            os << "layer kept\n";
            const auto plan = plan_schedule(visual.size(), cfg.schedule, cfg.plan_layers);
            for (std::size_t l = 0; l < plan.size(); ++l) os << l << ' ' << plan[l] << "\n";

            const auto scaled = scale_schedule(cfg.schedule, cfg.plan_layers, cfg.decoder.layers);
            const auto run = toy_decoder_run(text, visual, cfg.decoder, scaled, cfg.seed);
            os << "toy_schedule " << (scaled.empty() ? "none" : to_string(scaled)) << "\n";
            os << "toy_layer kept\n";
            for (std::size_t l = 0; l < run.kept.layers.size(); ++l) {
                os << l << ' ' << run.kept.layers[l].size() << "\n";
            }
            std::cout << os.str();

            niah::Json dump{{"schedule", to_string(cfg.schedule)},
                            {"toy_schedule", to_string(scaled)},
                            {"seed", cfg.seed},
                            {"kept", run.kept.layers}};
            if (drop_out.empty()) {
                std::cout << dump.dump() << "\n";
            } else {
                write_text_file(drop_out, dump.dump(2) + "\n");
            }
        } else if (*niah_cmd) {
            if (*niah_lib) {
                write_text_file(lib_out, niah::library_to_json(niah::synth_library(cfg.library_size, library_seed)).dump(2) + "\n");
            } else if (*niah_gen) {
                auto params = cfg.niah;
                if (gen_len) params.haystack_len = *gen_len;
                if (gen_hops) params.hops = *gen_hops;
                if (gen_distractors) params.distractors = *gen_distractors;
                if (gen_ascending) params.ascending = true;
                const auto lib = load_library(library_path, cfg, library_seed);
                std::vector<niah::NiahInstance> instances;
                for (std::size_t i = 0; i < gen_count; ++i) {
                    instances.push_back(niah::gen_multi_hop(params, lib, derive_seed(cfg.seed, i), cfg.templates));
                }
                write_instances(gen_out, instances);
                write_text_file((fs::path(gen_out) / "library.json").string(), niah::library_to_json(lib).dump(2) + "\n");
            } else if (*niah_val) {
                const auto lib = load_library(library_path, cfg, library_seed);
                bool all_ok = true;
                std::ostringstream os;
                for (const auto& f : expand_instances(val_inputs)) {
                    const auto report = niah::validate_instance(niah::deserialize_instance(read_text_file(f)), lib,
                                                                cfg.templates);
                    os << f << (report.ok() ? " ok" : " FAIL");
                    for (const auto& issue : report.issues) os << ' ' << issue.code;
                    os << "\n";
                    all_ok = all_ok && report.ok();
                }
                std::cout << os.str();
                if (!all_ok) return kExitDomain;
            } else if (*niah_solve) {
                const auto lib = load_library(library_path, cfg, library_seed);
                std::vector<niah::Response> responses;
                for (const auto& inst : load_instances(expand_instances(solve_inputs))) {
                    const auto a = niah::oracle_solve(inst, lib, cfg.templates);
                    responses.push_back({inst.id, a.needle_id, a.answer});
                }
                emit(solve_out, niah::responses_to_jsonl(responses));
            } else if (*niah_score) {
                const auto instances = load_instances(expand_instances(score_inputs));
                const auto s = niah::score(instances, niah::parse_responses_jsonl(read_text_file(score_responses)));
                std::cout << "count " << s.count << "\ncap " << fmt("%.4f", s.cap) << "\nqa " << fmt("%.4f", s.qa)
                          << "\n";
            } else if (*niah_heat) {
                const auto lib = load_library(library_path, cfg, library_seed);
                const auto cells = niah::heatmap_grid(heat_lengths, heat_depths, lib, cfg.seed, cfg.templates);
                if (!heat_out.empty()) {
                    std::vector<niah::NiahInstance> instances;
                    for (const auto& c : cells) instances.push_back(c.instance);
                    write_instances(heat_out, instances);
                    write_text_file((fs::path(heat_out) / "library.json").string(),
                                    niah::library_to_json(lib).dump(2) + "\n");
                }
                if (!heat_responses.empty()) {
                    const auto rows = niah::heatmap_accuracy(cells, niah::parse_responses_jsonl(read_text_file(heat_responses)));
                    emit(heat_csv, niah::heatmap_csv(rows));
                } else if (heat_out.empty()) {
                    throw ConfigError("heatmap needs --out, --responses, or both");
                }
            }
        }
    } catch (const IoError& e) {
        std::cerr << "hico: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "hico: " << e.what() << "\n";
        return kExitIo;
    } catch (const DomainError& e) {
        std::cerr << "hico: " << e.what() << "\n";
        return kExitDomain;
    } catch (const ConfigError& e) {
        std::cerr << "hico: " << e.what() << "\n";
        return kExitDomain;
    } catch (const CapacityError& e) {
        std::cerr << "hico: " << e.what() << "\n";
        return kExitDomain;
    }
    return 0;
}
