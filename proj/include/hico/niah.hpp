// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace hico::niah {

using Json = nlohmann::ordered_json;

struct NeedleItem {
    std::string id;
    std::string caption;
    std::string question;
    std::string answer;
};

// Item library with unique ids and unique captions.
class ItemLibrary {
public:
    ItemLibrary() = default;
    explicit ItemLibrary(std::vector<NeedleItem> items);

    const std::vector<NeedleItem>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    const NeedleItem* find(const std::string& id) const;
    const NeedleItem* find_by_caption(const std::string& caption) const;

private:
    std::vector<NeedleItem> items_;
    std::map<std::string, std::size_t> by_id_;
    std::map<std::string, std::size_t> by_caption_;
};

// Deterministic synthetic library of `count` items.
ItemLibrary synth_library(std::size_t count, std::uint64_t seed);

// Text templates; each contains exactly one "{caption}" placeholder.
struct Templates {
    std::string clue = "The clue in this image points to the item titled '{caption}'.";
    std::string start = "Start from the image titled '{caption}'.";

    void validate() const;
    std::string render_clue(const std::string& caption) const;
    std::string render_start(const std::string& caption) const;
    // Caption embedded in a rendered text, or nullopt when the text does not fit the template.
    std::optional<std::string> parse_clue(const std::string& text) const;
    std::optional<std::string> parse_start(const std::string& text) const;
};

struct Hop {
    std::string item_id;
    std::size_t position = 0;
    std::string clue;          // empty on the terminal hop
    std::string next_item_id;  // empty on the terminal hop
};

struct ReasoningPath {
    std::vector<Hop> hops;
    bool is_correct = false;
};

struct GroundTruth {
    std::string needle_id;
    std::string answer;
};

struct NiahInstance {
    std::string id;
    std::uint64_t seed = 0;
    std::size_t haystack_len = 0;
    std::string haystack_video;  // filler frames come from this video, by frame index
    ReasoningPath correct_path;
    std::vector<ReasoningPath> distractors;
    std::string start_hint;
    std::string q1;
    std::string q2;
    GroundTruth ground_truth;
};

struct MultiHopParams {
    std::size_t haystack_len = 10000;
    std::size_t hops = 3;
    std::size_t distractors = 1;
    bool ascending = false;  // force hop positions to increase along each path
};

// One hop at round(depth * (haystack_len - 1)), no distractors.
NiahInstance gen_single_hop(std::size_t haystack_len, double depth, const NeedleItem& needle,
                            std::uint64_t seed, const Templates& templates = {});

// Correct path plus `distractors` decoy paths, disjoint items and positions.
// Throws CapacityError when the library or haystack is too small.
NiahInstance gen_multi_hop(const MultiHopParams& params, const ItemLibrary& library, std::uint64_t seed,
                           const Templates& templates = {});

struct ValidationIssue {
    std::string code;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }
    bool has(const std::string& code) const;
};

// Codes: duplicate_position, position_out_of_range, empty_path, unknown_item,
// duplicate_item, bad_clue, bad_start_hint, broken_correct_chain,
// ground_truth_mismatch, distractor_terminal_is_needle, distractor_reaches_needle,
// distractor_start_matches_correct.
ValidationReport validate_instance(const NiahInstance& instance, const ItemLibrary& library,
                                   const Templates& templates = {});

struct OracleAnswer {
    std::string needle_id;
    std::string answer;
    std::vector<std::size_t> visited_positions;
};

// Perfect-perception solver: reads the start hint, then follows each clue by
// caption lookup among the inserted images. Throws DomainError on a broken chain.
OracleAnswer oracle_solve(const NiahInstance& instance, const ItemLibrary& library,
                          const Templates& templates = {});

struct Response {
    std::string instance_id;
    std::string needle_id;
    std::string answer;
};

struct Score {
    double cap = 0.0;
    double qa = 0.0;
    std::size_t count = 0;
};

// Case-fold, strip ASCII punctuation, trim.
std::string normalize_answer(const std::string& text);

// Exactly one response per instance, joined by instance id.
Score score(const std::vector<NiahInstance>& instances, const std::vector<Response>& responses);

struct HeatmapCell {
    std::size_t length = 0;
    double depth = 0.0;
    NiahInstance instance;
};

struct HeatmapRow {
    std::size_t length = 0;
    double depth = 0.0;
    double accuracy = 0.0;
};

std::vector<HeatmapCell> heatmap_grid(const std::vector<std::size_t>& lengths,
                                      const std::vector<double>& depths, const ItemLibrary& library,
                                      std::uint64_t seed, const Templates& templates = {});

// Per-cell QA accuracy.
std::vector<HeatmapRow> heatmap_accuracy(const std::vector<HeatmapCell>& cells,
                                         const std::vector<Response>& responses);

// "length,depth,accuracy" CSV.
std::string heatmap_csv(const std::vector<HeatmapRow>& rows);

// Shortest round-trip decimal text for a double.
std::string format_number(double value);

Json to_json(const NeedleItem& item);
Json to_json(const NiahInstance& instance);
Json to_json(const Response& response);
Json library_to_json(const ItemLibrary& library);

// Throw ParseError on missing or mistyped fields.
NiahInstance instance_from_json(const Json& json);
ItemLibrary library_from_json(const Json& json);
Response response_from_json(const Json& json);

// Serialized instance: two-space indented JSON with a trailing newline.
std::string serialize(const NiahInstance& instance);
NiahInstance deserialize_instance(const std::string& text);

std::vector<Response> parse_responses_jsonl(const std::string& text);
std::string responses_to_jsonl(const std::vector<Response>& responses);

}  // namespace hico::niah
