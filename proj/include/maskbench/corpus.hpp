#pragma once

// Corpus preparation: filtering raw mined methods into clean training
// material, exact deduplication, and method-grouped train/eval/test splits.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "maskbench/lexer.hpp"
#include "maskbench/parallel.hpp"
#include "maskbench/rng.hpp"

namespace maskbench::corpus {

struct RawRecord {
    std::string id;
    std::string source;
    std::string origin;  // repository or project tag; may be empty
};

enum class Mode { finetune, pretrain };

struct FilterPolicy {
    Mode mode = Mode::finetune;
    std::size_t min_lines = 3;
    std::size_t max_tokens = 100;
    std::size_t min_tokens = 0;
    bool name_filters = true;
    std::optional<std::size_t> per_origin_cap;

    static FilterPolicy finetune_defaults() { return FilterPolicy{}; }

    static FilterPolicy pretrain_defaults() {
        FilterPolicy p;
        p.mode = Mode::pretrain;
        p.max_tokens = 200;
        p.min_tokens = 15;
        p.per_origin_cap = 1500;
        return p;
    }
};

enum class RejectReason { lex_error, line_count, token_count, name_filter, origin_cap };

inline const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::lex_error: return "lex-error";
        case RejectReason::line_count: return "line-count";
        case RejectReason::token_count: return "token-count";
        case RejectReason::name_filter: return "name-filter";
        case RejectReason::origin_cap: return "origin-cap";
    }
    return "?";
}

struct Rejection {
    std::string id;
    RejectReason reason;
};

struct IngestResult {
    std::vector<lex::Method> methods;
    std::vector<Rejection> rejections;
};

class MalformedRecord : public std::runtime_error {
public:
    MalformedRecord(std::size_t index, const std::string& what)
        : std::runtime_error(what), index(index) {}
    std::size_t index;
};

class EmptyCorpus : public std::runtime_error {
public:
    EmptyCorpus() : std::runtime_error("corpus is empty") {}
};

namespace detail {

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
    return out;
}

// Splits an identifier into camel-case words; underscores and digits also
// separate words ("updateStatus" -> update, Status).
inline std::vector<std::string> camel_words(std::string_view name) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    };
    for (std::size_t i = 0; i < name.size(); ++i) {
        char c = name[i];
        if (c == '_' || c == '$') {
            flush();
            continue;
        }
        bool upper = c >= 'A' && c <= 'Z';
        if (upper) {
            bool prev_lower = i > 0 && ((name[i - 1] >= 'a' && name[i - 1] <= 'z') ||
                                        (name[i - 1] >= '0' && name[i - 1] <= '9'));
            bool next_lower = i + 1 < name.size() && name[i + 1] >= 'a' && name[i + 1] <= 'z';
            if (prev_lower || (next_lower && !cur.empty())) flush();
        }
        cur.push_back(c);
    }
    flush();
    return words;
}

inline bool has_test_annotation(const lex::Method& m) {
    for (std::size_t i = 0; i + 1 < m.tokens.size(); ++i)
        if (m.tokens[i].text == "@" && m.tokens[i + 1].text == "Test") return true;
    return false;
}

inline bool name_rejected(const lex::Method& m, const FilterPolicy& policy) {
    std::string name = lex::method_name(m);
    if (name == "toString") return true;
    if (policy.mode == Mode::finetune) {
        return to_lower(name).find("test") != std::string::npos;
    }
    for (const auto& w : camel_words(name))
        if (to_lower(w) == "test") return true;
    return has_test_annotation(m);
}

}  // namespace detail

// Lexes every record and applies the cleaning rules; each rejected record
// is logged once with the first failing rule. Order is preserved.
inline IngestResult ingest_filter(const std::vector<RawRecord>& records,
                                  const FilterPolicy& policy, std::size_t threads = 1) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].id.empty())
            throw MalformedRecord(i, "record " + std::to_string(i) + " has no id");
        if (records[i].source.empty())
            throw MalformedRecord(i, "record " + std::to_string(i) + " has no source");
    }

    struct Lexed {
        std::optional<lex::Method> method;
    };
    auto lexed = par::parallel_map<Lexed>(records.size(), threads, [&](std::size_t i) {
        Lexed l;
        try {
            l.method = lex::analyze(records[i].id, records[i].source, records[i].origin);
        } catch (const lex::LexError&) {
        }
        return l;
    });

    IngestResult result;
    std::unordered_map<std::string, std::size_t> kept_per_origin;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto reject = [&](RejectReason r) {
            result.rejections.push_back(Rejection{records[i].id, r});
        };
        if (!lexed[i].method) {
            reject(RejectReason::lex_error);
            continue;
        }
        lex::Method& m = *lexed[i].method;
        if (m.lines.size() < policy.min_lines) {
            reject(RejectReason::line_count);
            continue;
        }
        if (m.tokens.size() < policy.min_tokens || m.tokens.size() > policy.max_tokens) {
            reject(RejectReason::token_count);
            continue;
        }
        if (policy.name_filters && detail::name_rejected(m, policy)) {
            reject(RejectReason::name_filter);
            continue;
        }
        if (policy.per_origin_cap) {
            std::size_t& kept = kept_per_origin[m.origin];
            if (kept >= *policy.per_origin_cap) {
                reject(RejectReason::origin_cap);
                continue;
            }
            ++kept;
        }
        result.methods.push_back(std::move(m));
    }
    return result;
}

// Exact duplicate removal on the normalized token sequence; the first
// occurrence wins, later copies are dropped.
inline std::vector<lex::Method> dedup(std::vector<lex::Method> methods) {
    std::unordered_set<std::string> seen;
    std::vector<lex::Method> out;
    out.reserve(methods.size());
    for (auto& m : methods) {
        std::string key;
        for (const auto& t : m.tokens) {
            key += std::to_string(t.text.size());
            key += ':';
            key += t.text;
        }
        if (seen.insert(std::move(key)).second) out.push_back(std::move(m));
    }
    return out;
}

enum class Partition { train, eval, test };

inline const char* partition_name(Partition p) {
    switch (p) {
        case Partition::train: return "train";
        case Partition::eval: return "eval";
        case Partition::test: return "test";
    }
    return "?";
}

inline std::optional<Partition> partition_from_name(std::string_view s) {
    if (s == "train") return Partition::train;
    if (s == "eval") return Partition::eval;
    if (s == "test") return Partition::test;
    return std::nullopt;
}

struct SplitAssignment {
    std::unordered_map<std::string, Partition> by_method;
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    std::uint64_t seed = 0;

    Partition of(const std::string& method_id) const {
        auto it = by_method.find(method_id);
        if (it == by_method.end())
            throw std::out_of_range("method id not in split: " + method_id);
        return it->second;
    }
};

// Whole methods are assigned to exactly one partition. The assignment is a
// pure function of the sorted id set and the seed, so input order is
// irrelevant and reruns reproduce it bit for bit.
inline SplitAssignment split(const std::vector<lex::Method>& methods,
                             std::array<double, 3> ratios, std::uint64_t seed) {
    if (methods.empty()) throw EmptyCorpus();
    std::vector<std::string> ids;
    ids.reserve(methods.size());
    for (const auto& m : methods) ids.push_back(m.id);
    std::sort(ids.begin(), ids.end());

    rng::Stream stream(rng::mix(seed, 0x5eedba11));
    rng::shuffle(ids, stream);

    const double n = static_cast<double>(ids.size());
    std::size_t b1 = static_cast<std::size_t>(std::llround(n * ratios[0]));
    std::size_t b2 = static_cast<std::size_t>(std::llround(n * (ratios[0] + ratios[1])));
    b1 = std::min(b1, ids.size());
    b2 = std::min(std::max(b2, b1), ids.size());

    SplitAssignment out;
    out.ratios = ratios;
    out.seed = seed;
    out.by_method.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        Partition p = i < b1 ? Partition::train : i < b2 ? Partition::eval : Partition::test;
        out.by_method.emplace(std::move(ids[i]), p);
    }
    return out;
}

}  // namespace maskbench::corpus
