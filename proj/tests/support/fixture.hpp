#pragma once

// Deterministic synthetic Java method corpus for tests. Methods are built
// from idiomatic statement templates with identifier slots drawn from small
// pools, so an n-gram model can genuinely learn the corpus: short masked
// suffixes are mostly boilerplate while long ones cross several identifier
// slots, which makes exact prediction progressively harder with length.
// Every statement template is at least eleven tokens long with identifier
// slots spread through its tail, so a masked suffix of any supported length
// can start on any line and each extra masked token adds a comparable chance
// of failure.
//
// Sources are emitted pre-spaced (one space between tokens), so the token
// stream round-trips through the lexer trivially and line structure is under
// the generator's control.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "maskbench/corpus.hpp"
#include "maskbench/jsonl.hpp"
#include "maskbench/rng.hpp"

namespace fixture {

struct Pools {
    std::vector<std::string> types;
    std::vector<std::string> vars;
    std::vector<std::string> calls;
    std::vector<std::string> consts;
};

// Two disjoint identifier dialects. Training on one and evaluating methods
// written in the other simulates project-specific naming that only a
// project-local cache corpus can supply.
inline Pools pools_a() {
    return Pools{
        {"Order", "Invoice", "Customer", "Ledger", "Parser", "Buffer", "Channel",
         "Router"},
        {"order", "invoice", "customer", "ledger", "parser", "buffer", "channel",
         "router", "count", "total", "index", "offset"},
        {"process", "submit", "render", "flush", "append", "resolve", "validate",
         "dispatch"},
        {"0", "1", "2", "8", "16", "100"},
    };
}

inline Pools pools_b() {
    return Pools{
        {"Glyph", "Tile", "Sprite", "Quad", "Mesh", "Shader", "Scene", "Camera"},
        {"glyph", "tile", "sprite", "quad", "mesh", "shader", "scene", "camera",
         "width", "height", "depth", "scale"},
        {"draw", "blit", "rotate", "project", "rasterize", "upload", "bind", "cull"},
        {"3", "4", "5", "32", "64", "255"},
    };
}

namespace detail {

inline const std::string& pick(const std::vector<std::string>& pool,
                               maskbench::rng::Stream& rng) {
    return pool[rng.below(pool.size())];
}

}  // namespace detail

// One synthetic method: a signature line, 3..6 idiomatic statement lines and
// a closing brace. Contains if/while/for conditions, call arguments, catch
// parameters, small blocks and one long generics line so every masking level
// and length bucket has material to work with.
inline std::string method_source(maskbench::rng::Stream& rng, const Pools& p) {
    using detail::pick;
    std::vector<std::string> lines;
    const std::string& ret_type = pick(p.types, rng);
    const std::string& arg_type = pick(p.types, rng);
    const std::string& arg = pick(p.vars, rng);
    const std::string& arg_type2 = pick(p.types, rng);
    const std::string& arg2 = pick(p.vars, rng);
    // camelCase name built from a verb and the argument type, e.g. processInvoice
    const std::string method_name = pick(p.calls, rng) + arg_type;
    lines.push_back("public " + ret_type + " " + method_name + " ( " + arg_type + " " +
                    arg + " , " + arg_type2 + " " + arg2 + " ) {");

    std::size_t n_body = 3 + rng.below(4);
    for (std::size_t i = 0; i < n_body; ++i) {
        const std::string& t = pick(p.types, rng);
        const std::string& t2 = pick(p.types, rng);
        const std::string& v = pick(p.vars, rng);
        const std::string& w = pick(p.vars, rng);
        const std::string& u = pick(p.vars, rng);
        const std::string& c = pick(p.calls, rng);
        const std::string& c2 = pick(p.calls, rng);
        const std::string& k = pick(p.consts, rng);
        const std::string& k2 = pick(p.consts, rng);
        // Call arguments vary in arity so separators after an argument are a
        // genuine choice, as in real code, not a fixed continuation.
        bool wide = rng.below(2) == 1;
        switch (rng.below(8)) {
            case 0:
                lines.push_back(t + " " + v + " = " + w + " . " + c + " ( " + k +
                                " , " + u + " ) ;");
                break;
            case 1:
                lines.push_back(v + " . " + c + " ( " + w + " . " + c2 +
                                (wide ? " ( " + k + " )" : " ( )") + " , " + u + " ) ;");
                break;
            case 2:
                lines.push_back("if ( " + v + " == null ) { " + v + " = new " + t +
                                " ( ) ; }");
                break;
            case 3:
                lines.push_back("while ( " + v + " < " + k + " ) { " + v + " = " + v +
                                " + " + w + " ; }");
                break;
            case 4:
                lines.push_back("try { " + v + " . close ( ) ; } catch ( Exception e ) { "
                                + c + " ( e ) ;" + " }");
                break;
            case 5:
                lines.push_back(v + " = " + w + " . " + c + " ( " + k + " , " + v +
                                " ) + " + u + " . " + c2 +
                                (wide ? " ( " + k2 + " ) ;" : " ( ) ;"));
                break;
            case 6:
                lines.push_back("Map < " + t + " , " + t2 + " > " + v + " = " + w +
                                " . " + c + (wide ? " ( " + k + " , " + u + " ) ;"
                                                  : " ( " + k + " ) ;"));
                break;
            default:
                lines.push_back("for ( int i = " + k + " ; i < " + w +
                                " ; i ++ ) { " + v + " = " + v + " + " + u + " ; }");
                break;
        }
    }
    const std::string& ret_t = pick(p.types, rng);
    const std::string& ret_v = pick(p.vars, rng);
    const std::string& ret_w = pick(p.vars, rng);
    const std::string& ret_c = pick(p.calls, rng);
    const std::string& ret_k = pick(p.consts, rng);
    lines.push_back("return new " + ret_t + " ( " + ret_v + " , " + ret_w + " . " +
                    ret_c + (rng.below(2) == 1 ? " ( " + ret_k + " ) ) ;" : " ( ) ) ;"));
    lines.push_back("}");

    std::string out;
    for (const auto& l : lines) {
        if (!out.empty()) out += '\n';
        out += l;
    }
    return out;
}

struct CorpusOptions {
    std::size_t n_methods = 1000;
    std::uint64_t seed = 1;
    std::string id_prefix = "m";
    // 0 means every method is its own origin (per-method cache corpora).
    std::size_t n_origins = 10;
    Pools pools = pools_a();
};

inline std::string padded_id(const std::string& prefix, std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    return prefix + buf;
}

inline std::vector<maskbench::corpus::RawRecord> corpus(const CorpusOptions& opt) {
    std::vector<maskbench::corpus::RawRecord> out;
    out.reserve(opt.n_methods);
    for (std::size_t i = 0; i < opt.n_methods; ++i) {
        maskbench::rng::Stream rng(
            maskbench::rng::mix(opt.seed, maskbench::rng::hash64(opt.id_prefix) + i));
        maskbench::corpus::RawRecord rec;
        rec.id = padded_id(opt.id_prefix, i);
        rec.source = method_source(rng, opt.pools);
        rec.origin = opt.n_origins == 0
                         ? rec.id
                         : "repo" + std::to_string(i % opt.n_origins);
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::vector<maskbench::lex::Method> analyzed_corpus(const CorpusOptions& opt) {
    std::vector<maskbench::lex::Method> out;
    auto raw = corpus(opt);
    out.reserve(raw.size());
    for (const auto& r : raw)
        out.push_back(maskbench::lex::analyze(r.id, r.source, r.origin));
    return out;
}

inline void save_raw(const std::string& path,
                     const std::vector<maskbench::corpus::RawRecord>& records) {
    std::vector<nlohmann::json> lines;
    lines.reserve(records.size());
    for (const auto& r : records) {
        nlohmann::json j{{"id", r.id}, {"source", r.source}};
        if (!r.origin.empty()) j["origin"] = r.origin;
        lines.push_back(std::move(j));
    }
    maskbench::jsonl::write_lines(path, lines);
}

}  // namespace fixture
