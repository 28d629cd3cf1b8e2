#pragma once

// File formats: JSON-lines corpora, datasets, predictions and split tables,
// plus JSON/CSV report serialization. One record per line everywhere, so
// stages can be piped and diffed.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskbench/confidence.hpp"
#include "maskbench/corpus.hpp"
#include "maskbench/masker.hpp"
#include "maskbench/metrics.hpp"
#include "maskbench/ngram.hpp"
#include "maskbench/stats.hpp"

namespace maskbench::jsonl {

using nlohmann::json;

class FileFormatError : public std::runtime_error {
public:
    FileFormatError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what) {}
    explicit FileFormatError(const std::string& what) : std::runtime_error(what) {}
};

inline std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileFormatError("cannot open " + path);
    std::vector<json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw FileFormatError(path, line_no, e.what());
        }
    }
    return out;
}

inline void write_lines(const std::string& path, const std::vector<json>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : records) out << r.dump() << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

inline void write_json(const std::string& path, const json& value) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << value.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return json(v).dump();
}

// Maps an origin label to the file stem used for its cache corpus:
// characters outside [A-Za-z0-9._-] become '_'.
inline std::string sanitize_origin(std::string_view origin) {
    std::string out;
    out.reserve(origin.size());
    for (char c : origin) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        out += ok ? c : '_';
    }
    return out;
}

// ----- token helpers -------------------------------------------------------

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

inline std::vector<std::string> split_tokens(const std::string& joined) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < joined.size()) {
        while (i < joined.size() && joined[i] == ' ') ++i;
        std::size_t b = i;
        while (i < joined.size() && joined[i] != ' ') ++i;
        if (i > b) out.push_back(joined.substr(b, i - b));
    }
    return out;
}

// ----- raw corpus and methods ----------------------------------------------

inline std::vector<corpus::RawRecord> load_raw_records(const std::string& path) {
    auto lines = read_jsonl(path);
    std::vector<corpus::RawRecord> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const json& r = lines[i];
        corpus::RawRecord rec;
        if (r.contains("id") && r["id"].is_string()) rec.id = r["id"].get<std::string>();
        if (r.contains("source") && r["source"].is_string())
            rec.source = r["source"].get<std::string>();
        if (r.contains("origin") && r["origin"].is_string())
            rec.origin = r["origin"].get<std::string>();
        out.push_back(std::move(rec));
    }
    return out;
}

inline void save_methods(const std::string& path, const std::vector<lex::Method>& methods) {
    std::vector<json> records;
    records.reserve(methods.size());
    for (const auto& m : methods) {
        json r{{"id", m.id}, {"source", m.source}};
        if (!m.origin.empty()) r["origin"] = m.origin;
        records.push_back(std::move(r));
    }
    write_lines(path, records);
}

inline std::vector<lex::Method> load_methods(const std::string& path) {
    auto lines = read_jsonl(path);
    std::vector<lex::Method> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const json& r = lines[i];
        if (!r.contains("id") || !r.contains("source"))
            throw FileFormatError(path, i + 1, "method record needs id and source");
        out.push_back(lex::analyze(r["id"].get<std::string>(),
                                   r["source"].get<std::string>(),
                                   r.value("origin", std::string{})));
    }
    return out;
}

inline void save_rejections(const std::string& path,
                            const std::vector<corpus::Rejection>& rejections) {
    std::vector<json> records;
    records.reserve(rejections.size());
    for (const auto& r : rejections)
        records.push_back(json{{"id", r.id}, {"reason", corpus::reject_reason_name(r.reason)}});
    write_lines(path, records);
}

// ----- split table -----------------------------------------------------------

inline void save_split(const std::string& path, const corpus::SplitAssignment& split) {
    std::vector<std::pair<std::string, corpus::Partition>> rows(split.by_method.begin(),
                                                                split.by_method.end());
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<json> records;
    records.reserve(rows.size() + 1);
    records.push_back(json{{"ratios", split.ratios}, {"seed", split.seed}});
    for (const auto& [id, part] : rows)
        records.push_back(json{{"method_id", id}, {"partition", corpus::partition_name(part)}});
    write_lines(path, records);
}

inline corpus::SplitAssignment load_split(const std::string& path) {
    auto lines = read_jsonl(path);
    if (lines.empty()) throw FileFormatError(path, 0, "empty split file");
    corpus::SplitAssignment out;
    const json& head = lines[0];
    if (!head.contains("ratios") || !head.contains("seed"))
        throw FileFormatError(path, 1, "split header needs ratios and seed");
    for (std::size_t i = 0; i < 3; ++i) out.ratios[i] = head["ratios"][i].get<double>();
    out.seed = head["seed"].get<std::uint64_t>();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const json& r = lines[i];
        auto part = corpus::partition_from_name(r.value("partition", std::string{}));
        if (!r.contains("method_id") || !part)
            throw FileFormatError(path, i + 1, "bad split row");
        out.by_method.emplace(r["method_id"].get<std::string>(), *part);
    }
    return out;
}

// ----- datasets ---------------------------------------------------------------

inline json instance_to_json(const mask::MaskedInstance& inst) {
    json meta = json::object();
    if (!inst.meta.origin.empty()) meta["origin"] = inst.meta.origin;
    if (inst.meta.construct_kind)
        meta["construct_kind"] = lex::construct_kind_name(*inst.meta.construct_kind);
    if (inst.meta.n_statements) meta["n_statements"] = *inst.meta.n_statements;
    if (inst.meta.is_method_body) meta["is_method_body"] = *inst.meta.is_method_body;
    if (inst.meta.line_index) meta["line_index"] = *inst.meta.line_index;
    return json{{"id", inst.id},
                {"method_id", inst.method_id},
                {"level", mask::level_name(inst.level)},
                {"context", join_tokens(inst.context)},
                {"target", join_tokens(inst.target)},
                {"n_masked", inst.meta.n_masked},
                {"meta", meta}};
}

inline void save_dataset(const std::string& path, const mask::Dataset& dataset) {
    std::vector<json> records;
    records.reserve(dataset.instances.size());
    for (const auto& inst : dataset.instances) {
        json r = instance_to_json(inst);
        // Every row is self-contained: carry the dataset-level labels too.
        r["partition"] = corpus::partition_name(dataset.partition);
        if (!dataset.domain.empty()) r["domain"] = dataset.domain;
        records.push_back(std::move(r));
    }
    write_lines(path, records);
}

inline mask::MaskedInstance instance_from_json(const json& r, const std::string& path,
                                               std::size_t line_no) {
    for (const char* field : {"id", "method_id", "level", "context", "target", "n_masked"})
        if (!r.contains(field))
            throw FileFormatError(path, line_no, std::string("instance needs ") + field);
    mask::MaskedInstance inst;
    inst.id = r["id"].get<std::string>();
    inst.method_id = r["method_id"].get<std::string>();
    auto level = mask::level_from_name(r["level"].get<std::string>());
    if (!level) throw FileFormatError(path, line_no, "unknown level");
    inst.level = *level;
    inst.context = split_tokens(r["context"].get<std::string>());
    inst.target = split_tokens(r["target"].get<std::string>());
    inst.meta.n_masked = r["n_masked"].get<std::size_t>();
    if (r.contains("meta")) {
        const json& meta = r["meta"];
        inst.meta.origin = meta.value("origin", std::string{});
        if (meta.contains("construct_kind"))
            inst.meta.construct_kind =
                lex::construct_kind_from_name(meta["construct_kind"].get<std::string>());
        if (meta.contains("n_statements"))
            inst.meta.n_statements = meta["n_statements"].get<std::size_t>();
        if (meta.contains("is_method_body"))
            inst.meta.is_method_body = meta["is_method_body"].get<bool>();
        if (meta.contains("line_index"))
            inst.meta.line_index = meta["line_index"].get<std::size_t>();
    }
    return inst;
}

// Loads a dataset file; level, domain and partition are taken from the first
// row. Contexts and targets come back in space-canonical token form.
inline mask::Dataset load_dataset(const std::string& path) {
    auto lines = read_jsonl(path);
    mask::Dataset out;
    out.instances.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i)
        out.instances.push_back(instance_from_json(lines[i], path, i + 1));
    if (!out.instances.empty()) {
        out.level = out.instances[0].level;
        out.domain = lines[0].value("domain", std::string{});
        if (auto p = corpus::partition_from_name(
                lines[0].value("partition", std::string{"train"})))
            out.partition = *p;
    }
    return out;
}

// ----- predictions --------------------------------------------------------------

inline void save_predictions(const std::string& path,
                             const std::vector<metrics::Prediction>& predictions) {
    std::vector<json> records;
    records.reserve(predictions.size());
    for (const auto& p : predictions) {
        json r{{"instance_id", p.instance_id}, {"tokens", p.tokens}};
        if (p.score) r["score"] = *p.score;
        records.push_back(std::move(r));
    }
    write_lines(path, records);
}

// Accepts {"tokens": [...]} or {"text": "..."} rows; text is whitespace-split.
inline std::vector<metrics::Prediction> load_predictions(const std::string& path) {
    auto lines = read_jsonl(path);
    std::vector<metrics::Prediction> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const json& r = lines[i];
        if (!r.contains("instance_id"))
            throw FileFormatError(path, i + 1, "prediction needs instance_id");
        metrics::Prediction p;
        p.instance_id = r["instance_id"].get<std::string>();
        if (r.contains("tokens")) {
            if (!r["tokens"].is_array())
                throw FileFormatError(path, i + 1, "tokens must be an array");
            for (const auto& t : r["tokens"]) p.tokens.push_back(t.get<std::string>());
        } else if (r.contains("text")) {
            p.tokens = split_tokens(r["text"].get<std::string>());
        } else {
            throw FileFormatError(path, i + 1, "prediction needs tokens or text");
        }
        if (r.contains("score") && r["score"].is_number())
            p.score = r["score"].get<double>();
        out.push_back(std::move(p));
    }
    return out;
}

// ----- evaluation reports ---------------------------------------------------------

inline json aggregate_to_json(const metrics::Aggregate& a) {
    json mean_bleu = json::array();
    for (const auto& b : a.mean_bleu) mean_bleu.push_back(b ? json(*b) : json(nullptr));
    return json{{"n", a.n},
                {"n_missing", a.n_missing},
                {"perfect_rate", a.perfect_rate},
                {"mean_bleu", mean_bleu},
                {"bleu_defined", a.bleu_defined},
                {"mean_lev", a.mean_lev}};
}

inline metrics::Aggregate aggregate_from_json(const json& j) {
    metrics::Aggregate a;
    a.n = j.value("n", std::size_t{0});
    a.n_missing = j.value("n_missing", std::size_t{0});
    a.perfect_rate = j.value("perfect_rate", 0.0);
    a.mean_lev = j.value("mean_lev", 0.0);
    if (j.contains("mean_bleu"))
        for (std::size_t k = 0; k < 4 && k < j["mean_bleu"].size(); ++k)
            if (!j["mean_bleu"][k].is_null()) a.mean_bleu[k] = j["mean_bleu"][k].get<double>();
    if (j.contains("bleu_defined"))
        for (std::size_t k = 0; k < 4 && k < j["bleu_defined"].size(); ++k)
            a.bleu_defined[k] = j["bleu_defined"][k].get<std::size_t>();
    return a;
}

inline json report_to_json(const metrics::EvalReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row{{"instance_id", r.instance_id},
                 {"perfect", r.is_perfect},
                 {"lev_norm", r.lev_norm},
                 {"n_masked", r.n_masked},
                 {"bucket", r.bucket}};
        json bleu = json::array();
        for (const auto& b : r.bleu_n) bleu.push_back(b ? json(*b) : json(nullptr));
        row["bleu"] = bleu;
        if (r.confidence) row["confidence"] = *r.confidence;
        if (r.missing) row["missing"] = true;
        rows.push_back(std::move(row));
    }
    json buckets = json::object();
    for (const auto& [bucket, agg] : report.by_bucket)
        buckets[std::to_string(bucket)] = aggregate_to_json(agg);
    return json{{"level", mask::level_name(report.level)},
                {"domain", report.domain},
                {"partition", report.partition},
                {"overall", aggregate_to_json(report.overall)},
                {"buckets", buckets},
                {"rows", rows}};
}

inline metrics::EvalReport report_from_json(const json& j, const std::string& path) {
    metrics::EvalReport report;
    auto level = mask::level_from_name(j.value("level", std::string{"token"}));
    if (!level) throw FileFormatError(path + ": unknown level");
    report.level = *level;
    report.domain = j.value("domain", std::string{});
    report.partition = j.value("partition", std::string{});
    if (j.contains("overall")) report.overall = aggregate_from_json(j["overall"]);
    if (j.contains("buckets"))
        for (auto it = j["buckets"].begin(); it != j["buckets"].end(); ++it)
            report.by_bucket.emplace(std::stoul(it.key()), aggregate_from_json(it.value()));
    if (!j.contains("rows")) throw FileFormatError(path + ": report has no rows");
    for (const auto& row : j["rows"]) {
        metrics::InstanceEval r;
        r.instance_id = row.value("instance_id", std::string{});
        r.is_perfect = row.value("perfect", false);
        r.lev_norm = row.value("lev_norm", 1.0);
        r.n_masked = row.value("n_masked", std::size_t{0});
        r.bucket = row.value("bucket", std::size_t{0});
        if (row.contains("bleu"))
            for (std::size_t k = 0; k < 4 && k < row["bleu"].size(); ++k)
                if (!row["bleu"][k].is_null()) r.bleu_n[k] = row["bleu"][k].get<double>();
        if (row.contains("confidence")) r.confidence = row["confidence"].get<double>();
        r.missing = row.value("missing", false);
        report.rows.push_back(std::move(r));
    }
    return report;
}

inline metrics::EvalReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileFormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FileFormatError(path + ": " + e.what());
    }
    return report_from_json(j, path);
}

inline void save_bucket_csv(const std::string& path, const metrics::EvalReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "bucket,n,n_missing,perfect_rate,mean_bleu1,mean_bleu2,mean_bleu3,mean_bleu4,"
           "mean_lev\n";
    for (const auto& [bucket, agg] : report.by_bucket) {
        out << bucket << ',' << agg.n << ',' << agg.n_missing << ','
            << fmt_double(agg.perfect_rate);
        for (const auto& b : agg.mean_bleu) out << ',' << (b ? fmt_double(*b) : "");
        out << ',' << fmt_double(agg.mean_lev) << '\n';
    }
}

// ----- statistical test results ------------------------------------------------------

inline json test_result_to_json(const stats::TestResult& r) {
    json j{{"test", r.test}, {"status", stats::test_status_name(r.status)}};
    if (!std::isnan(r.statistic)) j["statistic"] = r.statistic;
    if (r.p_value) j["p_value"] = *r.p_value;
    if (r.odds_ratio) {
        if (std::isinf(*r.odds_ratio)) j["odds_ratio"] = "inf";
        else j["odds_ratio"] = *r.odds_ratio;
    }
    if (r.cliffs_delta) j["cliffs_delta"] = *r.cliffs_delta;
    if (r.magnitude) j["magnitude"] = std::string(1, *r.magnitude);
    if (r.tau) j["tau"] = *r.tau;
    if (r.slope) j["slope"] = *r.slope;
    return j;
}

// ----- confidence bins -----------------------------------------------------------------

inline json bin_report_to_json(const conf::BinReport& report) {
    json bins = json::array();
    for (const auto& b : report.bins) {
        json jb{{"low", b.low}, {"high", b.high}, {"n", b.n}, {"n_perfect", b.n_perfect}};
        if (b.perfect_rate) jb["perfect_rate"] = *b.perfect_rate;
        if (b.share_of_all_perfects) jb["share_of_all_perfects"] = *b.share_of_all_perfects;
        if (b.mean_len_all) jb["mean_len_all"] = *b.mean_len_all;
        if (b.mean_len_perfect) jb["mean_len_perfect"] = *b.mean_len_perfect;
        if (b.mean_len_wrong) jb["mean_len_wrong"] = *b.mean_len_wrong;
        bins.push_back(std::move(jb));
    }
    return json{{"bins", bins},
                {"n_with_confidence", report.n_with_confidence},
                {"n_without_confidence", report.n_without_confidence},
                {"n_perfect_total", report.n_perfect_total}};
}

inline void save_bins_csv(const std::string& path, const conf::BinReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "bin_low,bin_high,n,n_perfect,perfect_rate,share_of_all_perfects,"
           "mean_len_all,mean_len_perfect,mean_len_wrong\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? fmt_double(*v) : std::string{};
    };
    for (const auto& b : report.bins) {
        out << fmt_double(b.low) << ',' << fmt_double(b.high) << ',' << b.n << ','
            << b.n_perfect << ',' << cell(b.perfect_rate) << ','
            << cell(b.share_of_all_perfects) << ',' << cell(b.mean_len_all) << ','
            << cell(b.mean_len_perfect) << ',' << cell(b.mean_len_wrong) << '\n';
    }
}

// ----- model debug export -----------------------------------------------------------------

inline json ngram_debug_json(const ngram::NGramModel& model) {
    json counts = json::array();
    for (const auto& view : model.export_counts()) {
        json entries = json::object();
        for (const auto& [token, count] : view.entries) entries[token] = count;
        counts.push_back(json{{"context", view.context},
                              {"total", view.total},
                              {"entries", entries}});
    }
    return json{{"order", model.order()},
                {"lambdas", model.lambdas()},
                {"vocab_size", model.vocab_size()},
                {"counts", counts}};
}

}  // namespace maskbench::jsonl
