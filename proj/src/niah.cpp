// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hico/niah.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "hico/error.hpp"
#include "hico/rng.hpp"

namespace hico::niah {

namespace {

constexpr std::string_view kPlaceholder = "{caption}";

constexpr const char* kColors[] = {"red", "blue", "green", "yellow", "white", "black", "orange", "purple"};
constexpr const char* kObjects[] = {"bus",  "kite",     "giraffe", "umbrella", "bicycle", "clock",
                                    "dog",  "surfboard", "pizza",   "train",    "zebra",   "laptop"};
constexpr const char* kPlaces[] = {"street", "beach", "kitchen", "field", "station", "park"};

std::string render(const std::string& tmpl, const std::string& caption) {
    const auto at = tmpl.find(kPlaceholder);
    return tmpl.substr(0, at) + caption + tmpl.substr(at + kPlaceholder.size());
}

std::optional<std::string> parse(const std::string& tmpl, const std::string& text) {
    const auto at = tmpl.find(kPlaceholder);
    const std::string prefix = tmpl.substr(0, at);
    const std::string suffix = tmpl.substr(at + kPlaceholder.size());
    if (text.size() < prefix.size() + suffix.size()) return std::nullopt;
    if (text.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    if (text.compare(text.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
    return text.substr(prefix.size(), text.size() - prefix.size() - suffix.size());
}

std::string q1_text(const std::string& start_hint) {
    return start_hint + " Follow the clues from image to image until you reach the needle. Which item is the needle?";
}

// Draws `count` distinct values in [0, bound), in draw order.
std::vector<std::size_t> draw_distinct(Rng& rng, std::size_t count, std::size_t bound) {
    std::vector<std::size_t> out;
    out.reserve(count);
    if (count * 2 > bound) {
        std::vector<std::size_t> pool(bound);
        for (std::size_t i = 0; i < bound; ++i) pool[i] = i;
        for (std::size_t i = 0; i < count; ++i) {
            std::swap(pool[i], pool[i + rng.below(bound - i)]);
            out.push_back(pool[i]);
        }
        return out;
    }
    std::unordered_set<std::size_t> used;
    while (out.size() < count) {
        const auto v = static_cast<std::size_t>(rng.below(bound));
        if (used.insert(v).second) out.push_back(v);
    }
    return out;
}

ReasoningPath build_path(const ItemLibrary& library, const std::vector<std::size_t>& item_idx,
                         std::vector<std::size_t> positions, bool is_correct, bool ascending,
                         const Templates& templates) {
    if (ascending) std::sort(positions.begin(), positions.end());
    ReasoningPath path;
    path.is_correct = is_correct;
    for (std::size_t j = 0; j < item_idx.size(); ++j) {
        Hop hop;
        hop.item_id = library.items()[item_idx[j]].id;
        hop.position = positions[j];
        if (j + 1 < item_idx.size()) {
            const auto& next = library.items()[item_idx[j + 1]];
            hop.clue = templates.render_clue(next.caption);
            hop.next_item_id = next.id;
        }
        path.hops.push_back(std::move(hop));
    }
    return path;
}

// Follows clues from the hop showing `start_item`. Returns the visited hops or an
// error description. Any inserted image is reachable, as for a perfect perceiver.
struct Traversal {
    std::vector<const Hop*> visited;
    std::string error;
};

Traversal traverse(const NiahInstance& inst, const ItemLibrary& library, const Templates& templates,
                   const std::string& start_item) {
    std::map<std::string, const Hop*> by_item;
    auto index = [&](const ReasoningPath& p) {
        for (const auto& h : p.hops) by_item.emplace(h.item_id, &h);
    };
    index(inst.correct_path);
    for (const auto& d : inst.distractors) index(d);

    Traversal t;
    std::set<const Hop*> seen;
    std::string item = start_item;
    while (true) {
        auto it = by_item.find(item);
        if (it == by_item.end()) {
            t.error = "no inserted image shows item '" + item + "'";
            return t;
        }
        const Hop* hop = it->second;
        if (!seen.insert(hop).second) {
            t.error = "clue chain revisits item '" + item + "'";
            return t;
        }
        t.visited.push_back(hop);
        if (hop->clue.empty()) return t;
        const auto caption = templates.parse_clue(hop->clue);
        const NeedleItem* next = caption ? library.find_by_caption(*caption) : nullptr;
        if (!next) {
            t.error = "clue at position " + std::to_string(hop->position) + " names no library item";
            return t;
        }
        item = next->id;
    }
}

std::string require_string(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
        throw ParseError(ParseErrorKind::format, std::string("missing or non-string field '") + key + "'");
    }
    return j.at(key).get<std::string>();
}

std::uint64_t require_uint(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_number_unsigned()) {
        throw ParseError(ParseErrorKind::format, std::string("missing or non-integer field '") + key + "'");
    }
    return j.at(key).get<std::uint64_t>();
}

Json path_to_json(const ReasoningPath& path) {
    Json hops = Json::array();
    for (const auto& h : path.hops) {
        hops.push_back(Json{{"item_id", h.item_id},
                            {"position", h.position},
                            {"clue", h.clue},
                            {"next_item_id", h.next_item_id}});
    }
    return Json{{"is_correct", path.is_correct}, {"hops", std::move(hops)}};
}

ReasoningPath path_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("hops") || !j.at("hops").is_array() || !j.contains("is_correct") ||
        !j.at("is_correct").is_boolean()) {
        throw ParseError(ParseErrorKind::format, "malformed reasoning path");
    }
    ReasoningPath path;
    path.is_correct = j.at("is_correct").get<bool>();
    for (const auto& h : j.at("hops")) {
        path.hops.push_back(Hop{require_string(h, "item_id"), require_uint(h, "position"),
                                require_string(h, "clue"), require_string(h, "next_item_id")});
    }
    return path;
}

}  // namespace

ItemLibrary::ItemLibrary(std::vector<NeedleItem> items) : items_(std::move(items)) {
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& it = items_[i];
        if (it.id.empty() || it.caption.empty() || it.question.empty() || it.answer.empty()) {
            throw DomainError("library item #" + std::to_string(i) + " has an empty field");
        }
        if (!by_id_.emplace(it.id, i).second) throw DomainError("duplicate library id '" + it.id + "'");
        if (!by_caption_.emplace(it.caption, i).second) {
            throw DomainError("duplicate library caption '" + it.caption + "'");
        }
    }
}

const NeedleItem* ItemLibrary::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &items_[it->second];
}

const NeedleItem* ItemLibrary::find_by_caption(const std::string& caption) const {
    auto it = by_caption_.find(caption);
    return it == by_caption_.end() ? nullptr : &items_[it->second];
}

ItemLibrary synth_library(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<NeedleItem> items;
    items.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string color = kColors[rng.below(std::size(kColors))];
        const std::string object = kObjects[rng.below(std::size(kObjects))];
        const std::string place = kPlaces[rng.below(std::size(kPlaces))];
        char id[32];
        std::snprintf(id, sizeof id, "item-%05zu", i);
        items.push_back(NeedleItem{id, "a " + color + " " + object + " in a " + place + " (#" + std::to_string(i) + ")",
                                   "What color is the " + object + " in this image?", color});
    }
    return ItemLibrary(std::move(items));
}

void Templates::validate() const {
    for (const auto* t : {&clue, &start}) {
        const auto first = t->find(kPlaceholder);
        if (first == std::string::npos || t->find(kPlaceholder, first + 1) != std::string::npos) {
            throw ConfigError("template must contain exactly one {caption}: '" + *t + "'");
        }
    }
}

std::string Templates::render_clue(const std::string& caption) const { return render(clue, caption); }
std::string Templates::render_start(const std::string& caption) const { return render(start, caption); }
std::optional<std::string> Templates::parse_clue(const std::string& text) const { return parse(clue, text); }
std::optional<std::string> Templates::parse_start(const std::string& text) const { return parse(start, text); }

NiahInstance gen_single_hop(std::size_t haystack_len, double depth, const NeedleItem& needle,
                            std::uint64_t seed, const Templates& templates) {
    templates.validate();
    if (haystack_len < 1) throw DomainError("haystack length must be >= 1");
    if (!(depth >= 0.0 && depth <= 1.0)) throw DomainError("depth must be in [0, 1]");
    const auto position =
        static_cast<std::size_t>(std::floor(depth * static_cast<double>(haystack_len - 1) + 0.5));

    NiahInstance inst;
    inst.seed = seed;
    inst.haystack_len = haystack_len;
    inst.id = "sh-s" + std::to_string(seed) + "-l" + std::to_string(haystack_len) + "-p" + std::to_string(position);
    inst.haystack_video = "haystack-" + std::to_string(derive_seed(seed, 1) % 1000);
    inst.correct_path.is_correct = true;
    inst.correct_path.hops.push_back(Hop{needle.id, position, "", ""});
    inst.start_hint = templates.render_start(needle.caption);
    inst.q1 = q1_text(inst.start_hint);
    inst.q2 = needle.question;
    inst.ground_truth = {needle.id, needle.answer};
    return inst;
}

NiahInstance gen_multi_hop(const MultiHopParams& params, const ItemLibrary& library, std::uint64_t seed,
                           const Templates& templates) {
    templates.validate();
    if (params.hops < 1) throw DomainError("multi-hop instance needs at least one hop");
    const std::size_t need = params.hops * (1 + params.distractors);
    if (library.size() < need) {
        throw CapacityError("library has " + std::to_string(library.size()) + " items, instance needs " +
                            std::to_string(need));
    }
    if (params.haystack_len < need) {
        throw CapacityError("haystack has " + std::to_string(params.haystack_len) + " positions, instance needs " +
                            std::to_string(need));
    }

    Rng rng(seed);
    const auto items = draw_distinct(rng, need, library.size());
    const auto positions = draw_distinct(rng, need, params.haystack_len);

    auto chunk = [&](const std::vector<std::size_t>& v, std::size_t k) {
        return std::vector<std::size_t>(v.begin() + static_cast<std::ptrdiff_t>(k * params.hops),
                                        v.begin() + static_cast<std::ptrdiff_t>((k + 1) * params.hops));
    };

    NiahInstance inst;
    inst.seed = seed;
    inst.haystack_len = params.haystack_len;
    inst.id = "mh-s" + std::to_string(seed) + "-l" + std::to_string(params.haystack_len) + "-h" +
              std::to_string(params.hops) + "-d" + std::to_string(params.distractors);
    inst.haystack_video = "haystack-" + std::to_string(derive_seed(seed, 1) % 1000);
    inst.correct_path = build_path(library, chunk(items, 0), chunk(positions, 0), true, params.ascending, templates);
    for (std::size_t k = 1; k <= params.distractors; ++k) {
        inst.distractors.push_back(
            build_path(library, chunk(items, k), chunk(positions, k), false, params.ascending, templates));
    }
    const auto& first = *library.find(inst.correct_path.hops.front().item_id);
    const auto& needle = *library.find(inst.correct_path.hops.back().item_id);
    inst.start_hint = templates.render_start(first.caption);
    inst.q1 = q1_text(inst.start_hint);
    inst.q2 = needle.question;
    inst.ground_truth = {needle.id, needle.answer};
    return inst;
}

bool ValidationReport::has(const std::string& code) const {
    return std::any_of(issues.begin(), issues.end(), [&](const auto& i) { return i.code == code; });
}

ValidationReport validate_instance(const NiahInstance& inst, const ItemLibrary& library,
                                   const Templates& templates) {
    ValidationReport report;
    auto issue = [&](std::string code, std::string detail) {
        report.issues.push_back({std::move(code), std::move(detail)});
    };

    std::vector<const ReasoningPath*> paths{&inst.correct_path};
    for (const auto& d : inst.distractors) paths.push_back(&d);

    std::map<std::size_t, std::size_t> position_uses;
    std::map<std::string, std::size_t> item_uses;
    for (const auto* p : paths) {
        if (p->hops.empty()) {
            issue("empty_path", p->is_correct ? "correct path has no hops" : "a distractor path has no hops");
            continue;
        }
        for (std::size_t j = 0; j < p->hops.size(); ++j) {
            const Hop& h = p->hops[j];
            ++position_uses[h.position];
            ++item_uses[h.item_id];
            if (h.position >= inst.haystack_len) {
                issue("position_out_of_range", "position " + std::to_string(h.position));
            }
            if (!library.find(h.item_id)) {
                issue("unknown_item", "item '" + h.item_id + "'");
            }
            const bool terminal = j + 1 == p->hops.size();
            if (terminal != h.clue.empty()) {
                issue("bad_clue", "hop at position " + std::to_string(h.position) +
                                      (terminal ? " is terminal but carries a clue" : " has no clue"));
            } else if (!terminal) {
                const auto caption = templates.parse_clue(h.clue);
                const NeedleItem* next = caption ? library.find_by_caption(*caption) : nullptr;
                if (!next || next->id != p->hops[j + 1].item_id || h.next_item_id != next->id) {
                    issue("bad_clue", "clue at position " + std::to_string(h.position) +
                                          " does not name the next hop's item");
                }
            }
        }
    }
    for (const auto& [pos, n] : position_uses) {
        if (n > 1) issue("duplicate_position", "position " + std::to_string(pos) + " used " + std::to_string(n) + " times");
    }
    for (const auto& [item, n] : item_uses) {
        if (n > 1) {
            issue("duplicate_item", "item '" + item + "' inserted " + std::to_string(n) + " times");
        }
    }

    const std::string& needle = inst.ground_truth.needle_id;
    if (const NeedleItem* item = library.find(needle); !item || item->answer != inst.ground_truth.answer) {
        issue("ground_truth_mismatch", "ground truth does not match the library entry for '" + needle + "'");
    }

    // (b) correct chain from the start hint.
    const auto start_caption = templates.parse_start(inst.start_hint);
    const NeedleItem* start = start_caption ? library.find_by_caption(*start_caption) : nullptr;
    if (!start) {
        issue("bad_start_hint", "start hint does not name a library item");
    } else if (!inst.correct_path.hops.empty()) {
        const auto t = traverse(inst, library, templates, start->id);
        bool follows = t.error.empty() && t.visited.size() == inst.correct_path.hops.size();
        for (std::size_t j = 0; follows && j < t.visited.size(); ++j) {
            follows = t.visited[j] == &inst.correct_path.hops[j];
        }
        if (!follows || inst.correct_path.hops.back().item_id != needle) {
            issue("broken_correct_chain", t.error.empty() ? "chain does not follow the correct path to the needle" : t.error);
        }
    }

    // (c), (d) and start distinctness; every distractor hop is tried as a start.
    for (std::size_t k = 0; k < inst.distractors.size(); ++k) {
        const auto& d = inst.distractors[k];
        if (d.hops.empty()) continue;
        const std::string label = "distractor " + std::to_string(k);
        if (d.hops.back().item_id == needle) issue("distractor_terminal_is_needle", label);
        if (!inst.correct_path.hops.empty() && d.hops.front().item_id == inst.correct_path.hops.front().item_id) {
            issue("distractor_start_matches_correct", label);
        }
        for (const auto& h : d.hops) {
            const auto t = traverse(inst, library, templates, h.item_id);
            const bool reaches = std::any_of(t.visited.begin(), t.visited.end(),
                                             [&](const Hop* v) { return v->item_id == needle; });
            if (reaches) {
                issue("distractor_reaches_needle", label + " hop at position " + std::to_string(h.position));
                break;
            }
        }
    }
    return report;
}

OracleAnswer oracle_solve(const NiahInstance& inst, const ItemLibrary& library, const Templates& templates) {
    const auto caption = templates.parse_start(inst.start_hint);
    const NeedleItem* start = caption ? library.find_by_caption(*caption) : nullptr;
    if (!start) throw DomainError("oracle: start hint names no library item");
    const auto t = traverse(inst, library, templates, start->id);
    if (!t.error.empty()) throw DomainError("oracle: " + t.error);
    const NeedleItem* terminal = library.find(t.visited.back()->item_id);
    if (!terminal) throw DomainError("oracle: terminal item missing from library");
    OracleAnswer answer{terminal->id, terminal->answer, {}};
    for (const Hop* h : t.visited) answer.visited_positions.push_back(h->position);
    return answer;
}

std::string normalize_answer(const std::string& text) {
    std::string out;
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    const auto b = out.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = out.find_last_not_of(" \t\r\n");
    return out.substr(b, e - b + 1);
}

Score score(const std::vector<NiahInstance>& instances, const std::vector<Response>& responses) {
    std::map<std::string, const Response*> by_id;
    for (const auto& r : responses) {
        if (!by_id.emplace(r.instance_id, &r).second) {
            throw DomainError("duplicate response for instance '" + r.instance_id + "'");
        }
    }
    if (by_id.size() != instances.size()) {
        throw DomainError("expected one response per instance (" + std::to_string(instances.size()) +
                          " instances, " + std::to_string(by_id.size()) + " responses)");
    }
    Score s;
    s.count = instances.size();
    if (instances.empty()) return s;
    std::size_t found = 0;
    std::size_t answered = 0;
    for (const auto& inst : instances) {
        auto it = by_id.find(inst.id);
        if (it == by_id.end()) throw DomainError("no response for instance '" + inst.id + "'");
        if (it->second->needle_id != inst.ground_truth.needle_id) continue;
        ++found;
        if (normalize_answer(it->second->answer) == normalize_answer(inst.ground_truth.answer)) ++answered;
    }
    s.cap = static_cast<double>(found) / static_cast<double>(instances.size());
    s.qa = static_cast<double>(answered) / static_cast<double>(instances.size());
    return s;
}

std::vector<HeatmapCell> heatmap_grid(const std::vector<std::size_t>& lengths, const std::vector<double>& depths,
                                      const ItemLibrary& library, std::uint64_t seed, const Templates& templates) {
    if (lengths.empty() || depths.empty()) throw DomainError("heatmap needs at least one length and one depth");
    if (library.size() == 0) throw CapacityError("heatmap needs a non-empty library");
    std::vector<HeatmapCell> cells;
    std::uint64_t cell = 0;
    for (std::size_t length : lengths) {
        for (double depth : depths) {
            const std::uint64_t cell_seed = derive_seed(seed, cell++);
            const auto& needle = library.items()[cell_seed % library.size()];
            cells.push_back({length, depth, gen_single_hop(length, depth, needle, cell_seed, templates)});
        }
    }
    return cells;
}

std::vector<HeatmapRow> heatmap_accuracy(const std::vector<HeatmapCell>& cells, const std::vector<Response>& responses) {
    std::vector<HeatmapRow> rows;
    rows.reserve(cells.size());
    for (const auto& c : cells) {
        std::vector<Response> mine;
        std::copy_if(responses.begin(), responses.end(), std::back_inserter(mine),
                     [&](const Response& r) { return r.instance_id == c.instance.id; });
        rows.push_back({c.length, c.depth, score({c.instance}, mine).qa});
    }
    return rows;
}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string heatmap_csv(const std::vector<HeatmapRow>& rows) {
    std::string out = "length,depth,accuracy\n";
    for (const auto& r : rows) {
        char acc[32];
        std::snprintf(acc, sizeof acc, "%.4f", r.accuracy);
        out += std::to_string(r.length) + "," + format_number(r.depth) + "," + acc + "\n";
    }
    return out;
}

Json to_json(const NeedleItem& item) {
    return Json{{"id", item.id}, {"caption", item.caption}, {"question", item.question}, {"answer", item.answer}};
}

Json to_json(const NiahInstance& inst) {
    Json distractors = Json::array();
    for (const auto& d : inst.distractors) distractors.push_back(path_to_json(d));
    return Json{{"id", inst.id},
                {"seed", inst.seed},
                {"haystack_len", inst.haystack_len},
                {"haystack_video", inst.haystack_video},
                {"correct_path", path_to_json(inst.correct_path)},
                {"distractors", std::move(distractors)},
                {"start_hint", inst.start_hint},
                {"q1", inst.q1},
                {"q2", inst.q2},
                {"ground_truth", Json{{"needle_id", inst.ground_truth.needle_id}, {"answer", inst.ground_truth.answer}}}};
}

Json to_json(const Response& r) {
    return Json{{"instance_id", r.instance_id}, {"needle_id", r.needle_id}, {"answer", r.answer}};
}

Json library_to_json(const ItemLibrary& library) {
    Json arr = Json::array();
    for (const auto& it : library.items()) arr.push_back(to_json(it));
    return arr;
}

NiahInstance instance_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError(ParseErrorKind::format, "instance must be a JSON object");
    NiahInstance inst;
    inst.id = require_string(j, "id");
    inst.seed = require_uint(j, "seed");
    inst.haystack_len = require_uint(j, "haystack_len");
    inst.haystack_video = require_string(j, "haystack_video");
    if (!j.contains("correct_path")) throw ParseError(ParseErrorKind::format, "missing field 'correct_path'");
    inst.correct_path = path_from_json(j.at("correct_path"));
    if (!j.contains("distractors") || !j.at("distractors").is_array()) {
        throw ParseError(ParseErrorKind::format, "missing or non-array field 'distractors'");
    }
    for (const auto& d : j.at("distractors")) inst.distractors.push_back(path_from_json(d));
    inst.start_hint = require_string(j, "start_hint");
    inst.q1 = require_string(j, "q1");
    inst.q2 = require_string(j, "q2");
    if (!j.contains("ground_truth")) throw ParseError(ParseErrorKind::format, "missing field 'ground_truth'");
    inst.ground_truth = {require_string(j.at("ground_truth"), "needle_id"),
                         require_string(j.at("ground_truth"), "answer")};
    return inst;
}

ItemLibrary library_from_json(const Json& j) {
    if (!j.is_array()) throw ParseError(ParseErrorKind::format, "library must be a JSON array");
    std::vector<NeedleItem> items;
    for (const auto& e : j) {
        items.push_back({require_string(e, "id"), require_string(e, "caption"), require_string(e, "question"),
                         require_string(e, "answer")});
    }
    return ItemLibrary(std::move(items));
}

Response response_from_json(const Json& j) {
    return {require_string(j, "instance_id"), require_string(j, "needle_id"), require_string(j, "answer")};
}

std::string serialize(const NiahInstance& instance) { return to_json(instance).dump(2) + "\n"; }

NiahInstance deserialize_instance(const std::string& text) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(ParseErrorKind::format, "instance is not valid JSON");
    return instance_from_json(j);
}

std::vector<Response> parse_responses_jsonl(const std::string& text) {
    std::vector<Response> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError(ParseErrorKind::format, "responses line " + std::to_string(line_no) + " is not JSON");
        }
        out.push_back(response_from_json(j));
    }
    return out;
}

std::string responses_to_jsonl(const std::vector<Response>& responses) {
    std::string out;
    for (const auto& r : responses) out += to_json(r).dump() + "\n";
    return out;
}

}  // namespace hico::niah
