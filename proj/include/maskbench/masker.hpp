#pragma once

// Builds masked completion instances from analyzed methods at four
// granularities: token (tail of a line), construct, block and random.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskbench/corpus.hpp"
#include "maskbench/lexer.hpp"
#include "maskbench/parallel.hpp"
#include "maskbench/rng.hpp"

namespace maskbench::mask {

inline constexpr std::string_view kSentinel = "<MASK>";
inline constexpr std::size_t kMaxMaskedTokens = 10;
inline constexpr std::size_t kMaxBlockStatements = 2;

inline std::string indexed_sentinel(std::size_t k) {
    return "<MASK_" + std::to_string(k) + ">";
}

enum class Level { token, construct, block, random };

inline const char* level_name(Level l) {
    switch (l) {
        case Level::token: return "token";
        case Level::construct: return "construct";
        case Level::block: return "block";
        case Level::random: return "random";
    }
    return "?";
}

inline std::optional<Level> level_from_name(std::string_view s) {
    if (s == "token") return Level::token;
    if (s == "construct") return Level::construct;
    if (s == "block") return Level::block;
    if (s == "random") return Level::random;
    return std::nullopt;
}

struct InstanceMeta {
    std::size_t n_masked = 0;
    std::optional<lex::ConstructKind> construct_kind;
    std::optional<std::size_t> n_statements;
    std::optional<bool> is_method_body;
    std::optional<std::size_t> line_index;
    std::string origin;
};

struct MaskedInstance {
    std::string id;  // "<method_id>#<level>#<ordinal>"
    std::string method_id;
    Level level = Level::token;
    std::vector<std::string> context;  // token texts with sentinel(s) in place
    std::vector<std::string> target;   // masked token texts in order
    InstanceMeta meta;
};

class SentinelMismatch : public std::runtime_error {
public:
    explicit SentinelMismatch(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::vector<std::string> token_texts(const lex::Method& m) {
    std::vector<std::string> out;
    out.reserve(m.tokens.size());
    for (const auto& t : m.tokens) out.push_back(t.text);
    return out;
}

// Context with [first, last] replaced by a single sentinel; target gets the
// replaced texts.
inline MaskedInstance mask_span(const lex::Method& m, Level level, std::size_t first,
                                std::size_t last, std::size_t ordinal) {
    MaskedInstance inst;
    inst.method_id = m.id;
    inst.level = level;
    inst.id = m.id + "#" + level_name(level) + "#" + std::to_string(ordinal);
    inst.meta.origin = m.origin;
    inst.context.reserve(m.tokens.size() - (last - first));
    for (std::size_t i = 0; i < m.tokens.size(); ++i) {
        if (i == first) inst.context.emplace_back(kSentinel);
        if (i >= first && i <= last) inst.target.push_back(m.tokens[i].text);
        else inst.context.push_back(m.tokens[i].text);
    }
    inst.meta.n_masked = inst.target.size();
    return inst;
}

}  // namespace detail

// One instance per line with more than one token: the final x tokens of the
// line are hidden, x drawn uniformly from [1, n-1] and clamped to at most
// kMaxMaskedTokens. Draws are keyed on (seed, method id, line index), so a
// method's instances do not depend on corpus order.
inline std::vector<MaskedInstance> mask_tokens(const lex::Method& m, std::uint64_t seed) {
    std::vector<MaskedInstance> out;
    std::size_t ordinal = 0;
    for (std::size_t li = 0; li < m.lines.size(); ++li) {
        const lex::LineSpan& line = m.lines[li];
        std::size_t n = line.n_tokens();
        if (n <= 1) continue;
        rng::Stream stream(rng::mix(rng::mix(seed, rng::hash64(m.id)), li));
        std::size_t x = static_cast<std::size_t>(stream.between(1, n - 1));
        x = std::min(x, kMaxMaskedTokens);
        auto inst = detail::mask_span(m, Level::token, line.last - x + 1, line.last,
                                      ordinal++);
        inst.meta.line_index = li;
        out.push_back(std::move(inst));
    }
    return out;
}

// One instance per construct span of at most kMaxMaskedTokens tokens;
// longer spans are skipped entirely.
inline std::vector<MaskedInstance> mask_constructs(const lex::Method& m) {
    std::vector<MaskedInstance> out;
    std::size_t ordinal = 0;
    for (const auto& span : m.constructs) {
        if (span.n_tokens() > kMaxMaskedTokens) continue;
        auto inst = detail::mask_span(m, Level::construct, span.first, span.last,
                                      ordinal++);
        inst.meta.construct_kind = span.kind;
        out.push_back(std::move(inst));
    }
    return out;
}

// One instance per block with at most kMaxBlockStatements immediate
// statements; the braces are part of the masked target.
inline std::vector<MaskedInstance> mask_blocks(const lex::Method& m) {
    std::vector<MaskedInstance> out;
    std::size_t ordinal = 0;
    for (const auto& block : m.blocks) {
        if (block.n_statements > kMaxBlockStatements) continue;
        auto inst = detail::mask_span(m, Level::block, block.first, block.last,
                                      ordinal++);
        inst.meta.n_statements = block.n_statements;
        inst.meta.is_method_body = block.is_method_body;
        out.push_back(std::move(inst));
    }
    return out;
}

// floor(rate * n) distinct positions replaced by indexed sentinels, in
// position order; each sentinel hides exactly one token.
inline MaskedInstance mask_random(const lex::Method& m, double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("mask rate outside [0, 1]");
    MaskedInstance inst;
    inst.method_id = m.id;
    inst.level = Level::random;
    inst.id = m.id + "#random#0";
    inst.meta.origin = m.origin;
    std::size_t n = m.tokens.size();
    std::size_t k = static_cast<std::size_t>(rate * static_cast<double>(n));
    rng::Stream stream(rng::mix(seed, rng::hash64(m.id)));
    std::vector<std::size_t> picks = rng::sample_indices(n, k, stream);
    inst.context.reserve(n);
    std::size_t next_pick = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (next_pick < picks.size() && picks[next_pick] == i) {
            inst.context.push_back(indexed_sentinel(next_pick));
            inst.target.push_back(m.tokens[i].text);
            ++next_pick;
        } else {
            inst.context.push_back(m.tokens[i].text);
        }
    }
    inst.meta.n_masked = inst.target.size();
    return inst;
}

struct AssemblyCaps {
    std::size_t max_train_instances = 750000;
    bool drop_majority_masked = true;
    double random_rate = 0.15;
};

struct Dataset {
    Level level = Level::token;
    std::string domain;
    corpus::Partition partition = corpus::Partition::train;
    std::vector<MaskedInstance> instances;
    AssemblyCaps caps;
};

// Generates instances for every method, routes them into the method's split
// partition and applies the dataset-level caps. Methods are processed in
// sorted-id order, so results do not depend on input order or thread count.
// Only the train partition is ever subsampled.
inline std::array<Dataset, 3> assemble(const std::vector<lex::Method>& methods,
                                       Level level, const corpus::SplitAssignment& split,
                                       const AssemblyCaps& caps, std::string domain = "",
                                       std::size_t threads = 1) {
    std::vector<const lex::Method*> ordered;
    ordered.reserve(methods.size());
    for (const auto& m : methods) ordered.push_back(&m);
    std::sort(ordered.begin(), ordered.end(),
              [](const lex::Method* a, const lex::Method* b) { return a->id < b->id; });

    auto generated = par::parallel_map<std::vector<MaskedInstance>>(
        ordered.size(), threads, [&](std::size_t i) {
            const lex::Method& m = *ordered[i];
            switch (level) {
                case Level::token: return mask_tokens(m, split.seed);
                case Level::construct: return mask_constructs(m);
                case Level::block: return mask_blocks(m);
                case Level::random:
                    return std::vector<MaskedInstance>{
                        mask_random(m, caps.random_rate, split.seed)};
            }
            return std::vector<MaskedInstance>{};
        });

    std::array<Dataset, 3> out;
    for (std::size_t p = 0; p < 3; ++p) {
        out[p].level = level;
        out[p].domain = domain;
        out[p].partition = static_cast<corpus::Partition>(p);
        out[p].caps = caps;
    }
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        auto part = static_cast<std::size_t>(split.of(ordered[i]->id));
        for (auto& inst : generated[i]) {
            if (caps.drop_majority_masked &&
                inst.target.size() > inst.context.size() - 1)
                continue;
            out[part].instances.push_back(std::move(inst));
        }
    }

    auto& train = out[static_cast<std::size_t>(corpus::Partition::train)].instances;
    if (train.size() > caps.max_train_instances) {
        rng::Stream stream(rng::mix(split.seed, rng::hash64("train-cap")));
        auto keep = rng::sample_indices(train.size(), caps.max_train_instances, stream);
        std::vector<MaskedInstance> capped;
        capped.reserve(keep.size());
        for (std::size_t idx : keep) capped.push_back(std::move(train[idx]));
        train = std::move(capped);
    }
    return out;
}

// Rebuilds the full token sequence by substituting the target back into the
// context. Throws SentinelMismatch when sentinels and targets disagree.
inline std::vector<std::string> reconstruct(const MaskedInstance& inst) {
    std::vector<std::string> out;
    out.reserve(inst.context.size() + inst.target.size());
    if (inst.level == Level::random) {
        std::size_t used = 0;
        for (const auto& tok : inst.context) {
            if (used < inst.target.size() && tok == indexed_sentinel(used)) {
                out.push_back(inst.target[used]);
                ++used;
            } else if (tok.rfind("<MASK_", 0) == 0 && tok.back() == '>') {
                throw SentinelMismatch("unexpected sentinel " + tok + " in " + inst.id);
            } else {
                out.push_back(tok);
            }
        }
        if (used != inst.target.size())
            throw SentinelMismatch("instance " + inst.id + " has " +
                                   std::to_string(used) + " sentinels but " +
                                   std::to_string(inst.target.size()) + " targets");
        return out;
    }
    std::size_t sentinels = 0;
    for (const auto& tok : inst.context) {
        if (tok == kSentinel) {
            ++sentinels;
            for (const auto& t : inst.target) out.push_back(t);
        } else {
            out.push_back(tok);
        }
    }
    if (sentinels != 1)
        throw SentinelMismatch("instance " + inst.id + " has " +
                               std::to_string(sentinels) + " sentinels, expected 1");
    return out;
}

}  // namespace maskbench::mask
