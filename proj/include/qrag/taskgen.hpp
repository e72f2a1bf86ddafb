#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qrag/common.hpp"
#include "qrag/core.hpp"
#include "qrag/rng.hpp"

namespace qrag {

enum class NiahKind {
    kSingle,      // one key, one value
    kMultiKey,    // several keys present, one asked
    kMultiValue,  // one key, several values, all asked
    kMultiQuery,  // several keys, all asked
};

inline const char* niah_kind_name(NiahKind kind) {
    switch (kind) {
        case NiahKind::kSingle: return "single";
        case NiahKind::kMultiKey: return "multikey";
        case NiahKind::kMultiValue: return "multivalue";
        case NiahKind::kMultiQuery: return "multiquery";
    }
    throw InvalidArgument("unknown niah kind");
}

inline NiahKind niah_kind_from_name(const std::string& name) {
    if (name == "single") return NiahKind::kSingle;
    if (name == "multikey") return NiahKind::kMultiKey;
    if (name == "multivalue") return NiahKind::kMultiValue;
    if (name == "multiquery") return NiahKind::kMultiQuery;
    throw InvalidArgument("unknown niah kind: " + name);
}

struct NiahSpec {
    NiahKind kind = NiahKind::kSingle;
    int32_t num_chunks = 64;
    int32_t needle_count = 1;
    int32_t key_alphabet = 64;    // distinct keys available
    int32_t value_alphabet = 100000;  // distinct values available
    bool thematic_filler = true;  // filler shares needle vocabulary
    uint64_t seed = 0;
};

struct FactChainSpec {
    int32_t num_chunks = 64;
    int32_t hops = 2;  // protagonist facts in the chain
    int32_t entities = 24;
    int32_t locations = 24;
    bool temporal_question = true;  // ask where-before instead of where-now
    int32_t distractor_moves = 8;
    uint64_t seed = 0;
};

namespace detail {

inline const std::vector<std::string>& adjective_pool() {
    static const std::vector<std::string> pool = {
        "amber",  "brisk",  "candid", "dapper", "eager",  "feral",  "gilded", "hollow",
        "ivory",  "jagged", "keen",   "lucid",  "mellow", "nimble", "opaque", "placid",
        "quaint", "rustic", "solemn", "tepid",  "umber",  "vivid",  "wry",    "zesty",
        "arcane", "bold",   "crisp",  "dusky",  "errant", "frugal", "grave",  "humid",
        "inky",   "jovial", "kindly", "limpid", "muted",  "noble",  "ornate", "pallid"};
    return pool;
}

inline const std::vector<std::string>& noun_pool() {
    static const std::vector<std::string> pool = {
        "anchor",  "beacon", "cipher",  "dynamo",  "ember",   "fathom", "glacier", "harbor",
        "ingot",   "jetty",  "keel",    "lantern", "meridian", "nexus",  "oracle",  "pylon",
        "quarry",  "rudder", "sextant", "trellis", "uplink",  "vault",  "windlass", "xenon",
        "yardarm", "zephyr", "atlas",   "bobbin",  "compass", "derrick", "easel",   "flume",
        "gantry",  "hopper", "isthmus", "jigsaw",  "kiln",    "lattice", "mortar",  "norm"};
    return pool;
}

inline const std::vector<std::string>& name_pool() {
    static const std::vector<std::string> pool = {
        "Mara",  "Kofi",  "Ines",  "Dmitri", "Sana",  "Tobias", "Leila", "Arjun",
        "Freya", "Mateo", "Noor",  "Elias",  "Priya", "Ronan",  "Yuki",  "Amara",
        "Silas", "Wanda", "Oskar", "Talia",  "Viggo", "Zara",   "Hugo",  "Petra"};
    return pool;
}

inline const std::vector<std::string>& location_pool() {
    static const std::vector<std::string> pool = {
        "Ardenfield", "Briarport", "Caldermoor", "Dunwich",    "Elmsworth", "Fernlake",
        "Gravenholm", "Halloway",  "Ironbridge", "Juniper",    "Kestrelton", "Larkspur",
        "Mirefield",  "Northgate", "Oakhaven",   "Pinecrest",  "Quillford", "Ravenshore",
        "Stonewick",  "Thornbury", "Umberlyn",   "Valemont",   "Westmere",  "Yarrowdale"};
    return pool;
}

inline std::string pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[rng_below(rng, pool.size())];
}

// Filler sentences built from small templates over the shared word pools, so
// distractor chunks overlap the needles' surface vocabulary without ever
// matching the needle statement patterns.
inline std::string filler_sentence(Rng& rng, bool thematic) {
    const auto& adj = adjective_pool();
    const auto& noun = noun_pool();
    const auto& loc = location_pool();
    std::ostringstream out;
    switch (rng_below(rng, thematic ? 6 : 3)) {
        case 0:
            out << "The " << pick(adj, rng) << " " << pick(noun, rng) << " rests beside the "
                << pick(adj, rng) << " " << pick(noun, rng) << ".";
            break;
        case 1:
            out << "Nobody repaired the " << pick(adj, rng) << " " << pick(noun, rng)
                << " after the storm over " << pick(loc, rng) << ".";
            break;
        case 2:
            out << "A ledger in " << pick(loc, rng) << " lists every " << pick(noun, rng)
                << " sold last spring.";
            break;
        case 3:
            out << "Rumor says the " << pick(adj, rng) << "-" << pick(noun, rng)
                << " registry burned long ago.";
            break;
        case 4:
            out << "Codes resembling a magic number circulate in " << pick(loc, rng)
                << " without any key.";
            break;
        default:
            out << "Travelers between " << pick(loc, rng) << " and " << pick(loc, rng)
                << " carry no " << pick(noun, rng) << ".";
            break;
    }
    return out.str();
}

inline std::string key_string(int32_t key_index) {
    const auto& adj = adjective_pool();
    const auto& noun = noun_pool();
    const auto a = static_cast<size_t>(key_index) % adj.size();
    const auto n = (static_cast<size_t>(key_index) / adj.size()) % noun.size();
    return adj[a] + "-" + noun[n];
}

inline std::string value_string(int64_t value_index) {
    return std::to_string(100000 + value_index);
}

// count distinct values drawn uniformly from [0, range) via partial shuffle.
inline std::vector<int32_t> sample_distinct(Rng& rng, int32_t count, int32_t range) {
    if (count > range) throw InvalidArgument("sample_distinct: count exceeds range");
    std::vector<int32_t> all(range);
    std::iota(all.begin(), all.end(), 0);
    for (int32_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<int32_t>(rng_below(rng, static_cast<uint64_t>(range - i)));
        std::swap(all[i], all[j]);
    }
    all.resize(count);
    return all;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace detail

inline TaskInstance gen_niah(const NiahSpec& spec) {
    if (spec.needle_count < 1) throw InvalidArgument("niah: needle_count must be >= 1");
    if (spec.num_chunks < spec.needle_count)
        throw InvalidArgument("niah: num_chunks must be >= needle_count");
    if (spec.kind == NiahKind::kSingle && spec.needle_count != 1)
        throw InvalidArgument("niah: single kind requires needle_count = 1");
    if (spec.key_alphabet < 1 || spec.value_alphabet < 1)
        throw InvalidArgument("niah: alphabets must be non-empty");

    const bool shared_key =
        spec.kind == NiahKind::kSingle || spec.kind == NiahKind::kMultiValue;
    if (!shared_key && spec.key_alphabet < spec.needle_count)
        throw InvalidArgument("niah: key alphabet too small for distinct needle keys");
    if (spec.value_alphabet < spec.needle_count)
        throw InvalidArgument("niah: value alphabet too small for distinct values");

    Rng rng(derive_seed(spec.seed, "niah", static_cast<uint64_t>(spec.kind),
                        static_cast<uint64_t>(spec.num_chunks)));

    std::vector<int32_t> keys;
    if (shared_key) {
        keys.assign(spec.needle_count,
                    static_cast<int32_t>(rng_below(rng, static_cast<uint64_t>(spec.key_alphabet))));
    } else {
        keys = detail::sample_distinct(rng, spec.needle_count, spec.key_alphabet);
    }
    const std::vector<int32_t> values =
        detail::sample_distinct(rng, spec.needle_count, spec.value_alphabet);

    std::vector<int32_t> positions =
        detail::sample_distinct(rng, spec.needle_count, spec.num_chunks);
    std::sort(positions.begin(), positions.end());

    TaskInstance inst;
    inst.context.resize(spec.num_chunks);
    std::vector<std::string> needle_values(spec.needle_count);
    for (int32_t i = 0; i < spec.needle_count; ++i) {
        const std::string key = detail::key_string(keys[i]);
        needle_values[i] = detail::value_string(values[i]);
        inst.context[positions[i]].text =
            "The special magic number for " + key + " is " + needle_values[i] + ".";
        inst.support_ids.insert(positions[i] + 1);
    }
    for (int32_t i = 0; i < spec.num_chunks; ++i) {
        inst.context[i].doc_index = i + 1;
        inst.context[i].is_support = inst.support_ids.count(i + 1) > 0;
        if (inst.context[i].text.empty())
            inst.context[i].text = detail::filler_sentence(rng, spec.thematic_filler);
    }

    switch (spec.kind) {
        case NiahKind::kSingle:
            inst.query = "What is the special magic number for " + detail::key_string(keys[0]) + "?";
            inst.answer = needle_values[0];
            break;
        case NiahKind::kMultiKey: {
            // all needles present, only one key asked; the rest are decoys
            const auto asked = rng_below(rng, static_cast<uint64_t>(spec.needle_count));
            inst.query =
                "What is the special magic number for " + detail::key_string(keys[asked]) + "?";
            inst.answer = needle_values[asked];
            inst.support_ids = {positions[asked] + 1};
            for (auto& chunk : inst.context)
                chunk.is_support = inst.support_ids.count(chunk.doc_index) > 0;
            break;
        }
        case NiahKind::kMultiValue:
            inst.query =
                "What are all the special magic numbers for " + detail::key_string(keys[0]) + "?";
            inst.answer = detail::join(needle_values, ", ");
            break;
        case NiahKind::kMultiQuery: {
            std::vector<std::string> key_names(spec.needle_count);
            for (int32_t i = 0; i < spec.needle_count; ++i)
                key_names[i] = detail::key_string(keys[i]);
            inst.query = "What are the special magic numbers for " +
                         detail::join(key_names, " and ") + "?";
            inst.answer = detail::join(needle_values, ", ");
            break;
        }
    }

    inst.id = std::string("niah_") + niah_kind_name(spec.kind) + "_m" +
              std::to_string(spec.num_chunks) + "_s" + std::to_string(spec.seed);
    inst.validate(true);
    return inst;
}

inline TaskInstance gen_fact_chain(const FactChainSpec& spec) {
    if (spec.hops < 1) throw InvalidArgument("fact_chain: hops must be >= 1");
    if (spec.temporal_question && spec.hops < 2)
        throw InvalidArgument("fact_chain: temporal question needs at least 2 hops");
    if (spec.distractor_moves < 0)
        throw InvalidArgument("fact_chain: distractor_moves must be >= 0");
    if (spec.num_chunks < spec.hops + spec.distractor_moves)
        throw InvalidArgument("fact_chain: num_chunks too small for facts plus distractors");
    if (spec.entities < 2 && spec.distractor_moves > 0)
        throw InvalidArgument("fact_chain: need at least 2 entities for distractors");
    if (spec.entities < 1) throw InvalidArgument("fact_chain: entities must be >= 1");
    if (spec.locations < spec.hops)
        throw InvalidArgument("fact_chain: location alphabet smaller than hops");

    const auto& names = detail::name_pool();
    const auto& locs = detail::location_pool();
    const int32_t entity_range =
        std::min<int32_t>(spec.entities, static_cast<int32_t>(names.size()));
    const int32_t location_range =
        std::min<int32_t>(spec.locations, static_cast<int32_t>(locs.size()));
    if (location_range < spec.hops)
        throw InvalidArgument("fact_chain: location pool smaller than hops");

    Rng rng(derive_seed(spec.seed, "fact_chain", static_cast<uint64_t>(spec.hops),
                        static_cast<uint64_t>(spec.num_chunks)));

    const int32_t protagonist = static_cast<int32_t>(rng_below(rng, entity_range));
    const std::string hero = names[protagonist];
    // distinct locations keep the queried stop unambiguous in the chain
    const std::vector<int32_t> route = detail::sample_distinct(rng, spec.hops, location_range);

    const int32_t fact_count = spec.hops + spec.distractor_moves;
    std::vector<int32_t> positions =
        detail::sample_distinct(rng, fact_count, spec.num_chunks);
    std::sort(positions.begin(), positions.end());
    // protagonist facts go at `hops` of the slots, in document order
    std::vector<int32_t> hero_slots = detail::sample_distinct(rng, spec.hops, fact_count);
    std::sort(hero_slots.begin(), hero_slots.end());

    TaskInstance inst;
    inst.context.resize(spec.num_chunks);
    std::vector<int32_t> hero_positions;
    size_t next_hero = 0;
    for (int32_t slot = 0; slot < fact_count; ++slot) {
        const int32_t pos = positions[slot];
        std::string who;
        std::string where;
        if (next_hero < hero_slots.size() && hero_slots[next_hero] == slot) {
            who = hero;
            where = locs[route[next_hero]];
            hero_positions.push_back(pos);
            ++next_hero;
        } else {
            int32_t other = protagonist;
            while (other == protagonist)
                other = static_cast<int32_t>(rng_below(rng, entity_range));
            who = names[other];
            where = locs[rng_below(rng, location_range)];
        }
        inst.context[pos].text = "Then " + who + " journeyed to " + where + ".";
    }
    for (int32_t i = 0; i < spec.num_chunks; ++i) {
        inst.context[i].doc_index = i + 1;
        if (inst.context[i].text.empty())
            inst.context[i].text = detail::filler_sentence(rng, true);
    }

    if (spec.temporal_question) {
        const int32_t j =
            1 + static_cast<int32_t>(rng_below(rng, static_cast<uint64_t>(spec.hops - 1)));
        inst.query = "Where was " + hero + " before journeying to " + locs[route[j]] + "?";
        inst.answer = locs[route[j - 1]];
        inst.support_ids = {hero_positions[j - 1] + 1, hero_positions[j] + 1};
    } else {
        inst.query = "Where is " + hero + " now?";
        inst.answer = locs[route[spec.hops - 1]];
        inst.support_ids = {hero_positions[spec.hops - 1] + 1};
    }
    for (auto& chunk : inst.context)
        chunk.is_support = inst.support_ids.count(chunk.doc_index) > 0;

    inst.id = std::string("chain_h") + std::to_string(spec.hops) + "_m" +
              std::to_string(spec.num_chunks) + (spec.temporal_question ? "_t" : "_p") + "_s" +
              std::to_string(spec.seed);
    inst.validate(true);
    return inst;
}

// One instance per line: {"id", "query", "chunks", "support_idx", "answer"}.
// Unknown fields are tolerated and dropped; chunks are indexed 1..m in file
// order. Malformed lines are reported with their line number.
inline std::vector<TaskInstance> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<TaskInstance> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        auto require = [&](const char* field) -> const nlohmann::json& {
            auto it = rec.find(field);
            if (it == rec.end())
                throw IoError(path + ":" + std::to_string(line_no) + ": missing field '" +
                              field + "'");
            return *it;
        };
        TaskInstance inst;
        try {
            inst.id = require("id").get<std::string>();
            inst.query = require("query").get<std::string>();
            const auto& chunks = require("chunks");
            if (!chunks.is_array())
                throw IoError(path + ":" + std::to_string(line_no) + ": 'chunks' must be an array");
            int32_t idx = 0;
            for (const auto& c : chunks)
                inst.context.push_back(Chunk{++idx, c.get<std::string>(), false});
            for (const auto& s : require("support_idx"))
                inst.support_ids.insert(s.get<int32_t>());
            inst.answer = require("answer").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": bad field type: " + e.what());
        }
        for (auto& chunk : inst.context)
            chunk.is_support = inst.support_ids.count(chunk.doc_index) > 0;
        try {
            inst.validate(false);
        } catch (const Error& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(inst));
    }
    return out;
}

inline void save_jsonl(const std::string& path, const std::vector<TaskInstance>& instances) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& inst : instances) {
        nlohmann::json rec;
        rec["id"] = inst.id;
        rec["query"] = inst.query;
        std::vector<std::string> chunks;
        chunks.reserve(inst.context.size());
        for (const auto& c : inst.context) chunks.push_back(c.text);
        rec["chunks"] = chunks;
        rec["support_idx"] = std::vector<int32_t>(inst.support_ids.begin(), inst.support_ids.end());
        rec["answer"] = inst.answer;
        out << rec.dump() << "\n";
    }
    if (!out) throw IoError("write to " + path + " failed");
}

}  // namespace qrag
