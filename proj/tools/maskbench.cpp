// maskbench: command-line pipeline for building masked Java method
// completion benchmarks, training/running the n-gram baseline, and scoring
// prediction files from any model.
//
// Subcommands: ingest, mask, train-ngram, predict-ngram, eval, compare,
// confidence, report. Every stage reads and writes JSON-lines artifacts,
// validates inputs before writing anything, and is byte-deterministic for a
// fixed configuration regardless of --threads. Exit codes: 0 on success,
// 2 on any validation failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maskbench/confidence.hpp"
#include "maskbench/corpus.hpp"
#include "maskbench/jsonl.hpp"
#include "maskbench/lexer.hpp"
#include "maskbench/masker.hpp"
#include "maskbench/metrics.hpp"
#include "maskbench/ngram.hpp"
#include "maskbench/parallel.hpp"
#include "maskbench/predict.hpp"
#include "maskbench/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace maskbench;

namespace {

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw ValidationError("missing input: " + path);
}

void ensure_parent_dir(const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// The config sidecar records the semantic parameters of the run and is part
// of the deterministic artifact set. Paths, timestamps and the thread cap
// live in the manifest sidecar, which reruns are allowed to differ in.
void write_sidecars(const std::string& anchor, bool anchor_is_dir,
                    const std::string& command, const json& params,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, std::size_t threads) {
    std::string config_path =
        anchor_is_dir ? (fs::path(anchor) / "run.config.json").string()
                      : anchor + ".config.json";
    std::string manifest_path =
        anchor_is_dir ? (fs::path(anchor) / "run.manifest.json").string()
                      : anchor + ".manifest.json";
    jsonl::write_json(config_path, json{{"command", command}, {"params", params}});
    jsonl::write_json(manifest_path, json{{"command", command},
                                          {"created", utc_now()},
                                          {"inputs", inputs},
                                          {"outputs", outputs},
                                          {"threads", threads}});
}

std::array<double, 3> parse_ratios(const std::string& text) {
    std::array<double, 3> out{};
    std::size_t pos = 0, i = 0;
    while (i < 3) {
        std::size_t next = text.find(',', pos);
        std::string piece =
            next == std::string::npos ? text.substr(pos) : text.substr(pos, next - pos);
        try {
            out[i] = std::stod(piece);
        } catch (const std::exception&) {
            throw ValidationError("bad --ratios value: " + text);
        }
        ++i;
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (i != 3) throw ValidationError("--ratios needs three comma-separated numbers");
    for (double r : out)
        if (r < 0.0) throw ValidationError("--ratios must be non-negative: " + text);
    double sum = out[0] + out[1] + out[2];
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("--ratios must sum to 1.0, got " + text);
    return out;
}

std::vector<double> parse_lambdas(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t next = text.find(',', pos);
        std::string piece =
            next == std::string::npos ? text.substr(pos) : text.substr(pos, next - pos);
        if (!piece.empty()) {
            try {
                out.push_back(std::stod(piece));
            } catch (const std::exception&) {
                throw ValidationError("bad --lambdas value: " + text);
            }
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

std::vector<std::vector<std::string>> token_streams(const std::vector<lex::Method>& methods) {
    std::vector<std::vector<std::string>> streams;
    streams.reserve(methods.size());
    for (const auto& m : methods) {
        std::vector<std::string> s;
        s.reserve(m.tokens.size());
        for (const auto& t : m.tokens) s.push_back(t.text);
        streams.push_back(std::move(s));
    }
    return streams;
}

// ----- ingest ---------------------------------------------------------------

struct IngestOpts {
    std::string input, out;
    std::string mode = "finetune";
    long min_lines = -1, max_tokens = -1, min_tokens = -1, per_origin_cap = -1;
    bool no_name_filters = false;
};

int run_ingest(const IngestOpts& o, std::size_t threads) {
    require_file(o.input);
    auto records = jsonl::load_raw_records(o.input);
    if (records.empty()) throw ValidationError("empty corpus");

    corpus::FilterPolicy policy;
    if (o.mode == "finetune") policy = corpus::FilterPolicy::finetune_defaults();
    else if (o.mode == "pretrain") policy = corpus::FilterPolicy::pretrain_defaults();
    else throw ValidationError("unknown --mode: " + o.mode);
    if (o.min_lines >= 0) policy.min_lines = static_cast<std::size_t>(o.min_lines);
    if (o.max_tokens >= 0) policy.max_tokens = static_cast<std::size_t>(o.max_tokens);
    if (o.min_tokens >= 0) policy.min_tokens = static_cast<std::size_t>(o.min_tokens);
    if (o.per_origin_cap >= 0)
        policy.per_origin_cap = static_cast<std::size_t>(o.per_origin_cap);
    if (o.no_name_filters) policy.name_filters = false;

    auto result = corpus::ingest_filter(records, policy, threads);
    std::size_t before_dedup = result.methods.size();
    auto methods = corpus::dedup(std::move(result.methods));

    fs::create_directories(o.out);
    jsonl::save_methods((fs::path(o.out) / "methods.jsonl").string(), methods);
    jsonl::save_rejections((fs::path(o.out) / "rejections.jsonl").string(),
                           result.rejections);

    std::map<std::string, std::size_t> by_reason;
    for (const auto& r : result.rejections) ++by_reason[corpus::reject_reason_name(r.reason)];
    json summary{{"input_records", records.size()},
                 {"kept", methods.size()},
                 {"rejected", result.rejections.size()},
                 {"rejected_by_reason", by_reason},
                 {"duplicates_removed", before_dedup - methods.size()}};
    jsonl::write_json((fs::path(o.out) / "ingest.summary.json").string(), summary);

    json params{{"mode", o.mode},
                {"min_lines", policy.min_lines},
                {"max_tokens", policy.max_tokens},
                {"min_tokens", policy.min_tokens},
                {"name_filters", policy.name_filters}};
    if (policy.per_origin_cap) params["per_origin_cap"] = *policy.per_origin_cap;
    write_sidecars(o.out, true, "ingest", params, {o.input},
                   {"methods.jsonl", "rejections.jsonl", "ingest.summary.json"}, threads);
    std::cerr << "ingest: kept " << methods.size() << " of " << records.size()
              << " records\n";
    return 0;
}

// ----- mask -----------------------------------------------------------------

struct MaskOpts {
    std::string methods, out;
    std::string level = "token";
    std::string ratios = "0.8,0.1,0.1";
    std::string domain = "default";
    std::uint64_t seed = 1;
    long cap_train = 750000;
    double rate = 0.15;
    bool keep_majority_masked = false;
};

int run_mask(const MaskOpts& o, std::size_t threads) {
    require_file(o.methods);
    auto level = mask::level_from_name(o.level);
    if (!level) throw ValidationError("unknown --level: " + o.level);
    auto ratios = parse_ratios(o.ratios);
    auto methods = jsonl::load_methods(o.methods);
    if (methods.empty()) throw ValidationError("empty corpus");

    auto split = corpus::split(methods, ratios, o.seed);
    mask::AssemblyCaps caps;
    caps.max_train_instances = static_cast<std::size_t>(o.cap_train);
    caps.drop_majority_masked = !o.keep_majority_masked;
    caps.random_rate = o.rate;
    auto datasets = mask::assemble(methods, *level, split, caps, o.domain, threads);

    fs::create_directories(o.out);
    json partitions = json::object();
    std::size_t total_instances = 0;
    for (const auto& ds : datasets) {
        const char* name = corpus::partition_name(ds.partition);
        jsonl::save_dataset((fs::path(o.out) / (std::string(name) + ".jsonl")).string(), ds);
        std::size_t masked_tokens = 0, n_methods = 0;
        for (const auto& [id, part] : split.by_method)
            if (part == ds.partition) ++n_methods;
        for (const auto& inst : ds.instances) masked_tokens += inst.target.size();
        partitions[name] = json{{"methods", n_methods},
                                {"instances", ds.instances.size()},
                                {"masked_tokens", masked_tokens}};
        total_instances += ds.instances.size();
    }
    jsonl::save_split((fs::path(o.out) / "split.jsonl").string(), split);
    jsonl::write_json((fs::path(o.out) / "mask.summary.json").string(),
                      json{{"level", o.level},
                           {"domain", o.domain},
                           {"seed", o.seed},
                           {"partitions", partitions}});
    if (total_instances == 0)
        std::cerr << "warning: no instances generated at level " << o.level << "\n";

    json params{{"level", o.level},
                {"seed", o.seed},
                {"ratios", ratios},
                {"domain", o.domain},
                {"cap_train", caps.max_train_instances},
                {"drop_majority_masked", caps.drop_majority_masked},
                {"rate", caps.random_rate}};
    write_sidecars(o.out, true, "mask", params, {o.methods},
                   {"train.jsonl", "eval.jsonl", "test.jsonl", "split.jsonl",
                    "mask.summary.json"},
                   threads);
    std::cerr << "mask: " << total_instances << " instances at level " << o.level << "\n";
    return 0;
}

// ----- train-ngram ------------------------------------------------------------

struct TrainOpts {
    std::string methods, out;
    std::string split_path, debug_json;
    std::string partition = "train";
    std::string lambdas;
    std::size_t order = 3;
};

int run_train(const TrainOpts& o, std::size_t threads) {
    require_file(o.methods);
    auto methods = jsonl::load_methods(o.methods);
    if (!o.split_path.empty()) {
        require_file(o.split_path);
        auto split = jsonl::load_split(o.split_path);
        auto want = corpus::partition_from_name(o.partition);
        if (!want) throw ValidationError("unknown --partition: " + o.partition);
        std::vector<lex::Method> kept;
        for (auto& m : methods) {
            auto it = split.by_method.find(m.id);
            if (it == split.by_method.end())
                throw ValidationError("method not covered by split: " + m.id);
            if (it->second == *want) kept.push_back(std::move(m));
        }
        methods = std::move(kept);
    }
    if (methods.empty()) throw ValidationError("no training methods");

    std::vector<double> lambdas = parse_lambdas(o.lambdas);
    auto model = ngram::NGramModel::train(token_streams(methods), o.order, lambdas, threads);
    ensure_parent_dir(o.out);
    model.save(o.out);
    if (!o.debug_json.empty()) {
        ensure_parent_dir(o.debug_json);
        jsonl::write_json(o.debug_json, jsonl::ngram_debug_json(model));
    }

    json params{{"order", o.order},
                {"lambdas", model.lambdas()},
                {"partition", o.split_path.empty() ? json(nullptr) : json(o.partition)}};
    write_sidecars(o.out, false, "train-ngram", params, {o.methods}, {o.out}, threads);
    std::cerr << "train-ngram: order " << model.order() << ", vocab "
              << model.vocab_size() << ", " << methods.size() << " methods\n";
    return 0;
}

// ----- predict-ngram -----------------------------------------------------------

struct PredictOpts {
    std::string model, dataset, out;
    std::string cache_dir;
    double cache_lambda = 0.3;
};

int run_predict(const PredictOpts& o, std::size_t threads) {
    require_file(o.model);
    require_file(o.dataset);
    auto model = ngram::NGramModel::load(o.model);
    auto dataset = jsonl::load_dataset(o.dataset);

    std::vector<metrics::Prediction> predictions(dataset.instances.size());
    if (o.cache_dir.empty()) {
        predictions = predict::predict_dataset(model, dataset, threads);
    } else {
        if (!fs::is_directory(o.cache_dir))
            throw ValidationError("missing input: " + o.cache_dir);
        // Group instances by origin so each cache corpus is trained once.
        std::map<std::string, std::vector<std::size_t>> by_origin;
        for (std::size_t i = 0; i < dataset.instances.size(); ++i)
            by_origin[dataset.instances[i].meta.origin].push_back(i);
        for (const auto& [origin, indices] : by_origin) {
            fs::path cache_file =
                fs::path(o.cache_dir) / (jsonl::sanitize_origin(origin) + ".jsonl");
            bool have_cache = !origin.empty() && fs::exists(cache_file);
            if (!have_cache && !origin.empty())
                std::cerr << "warning: no cache corpus for origin " << origin
                          << ", using global model\n";
            auto run_group = [&](const auto& m) {
                auto rows = par::parallel_map<metrics::Prediction>(
                    indices.size(), threads, [&](std::size_t k) {
                        return predict::predict_instance(m, dataset.instances[indices[k]]);
                    });
                for (std::size_t k = 0; k < indices.size(); ++k)
                    predictions[indices[k]] = std::move(rows[k]);
            };
            if (have_cache) {
                auto cache_methods = jsonl::load_methods(cache_file.string());
                auto blend = ngram::blend_cache(model, token_streams(cache_methods),
                                                o.cache_lambda, threads);
                run_group(blend);
            } else {
                run_group(model);
            }
        }
    }

    ensure_parent_dir(o.out);
    jsonl::save_predictions(o.out, predictions);
    json params{{"cache_lambda", o.cache_dir.empty() ? json(nullptr) : json(o.cache_lambda)},
                {"cache", !o.cache_dir.empty()}};
    write_sidecars(o.out, false, "predict-ngram", params, {o.model, o.dataset}, {o.out},
                   threads);
    std::cerr << "predict-ngram: " << predictions.size() << " predictions\n";
    return 0;
}

// ----- eval ----------------------------------------------------------------------

struct EvalOpts {
    std::string dataset, predictions, out, csv;
};

int run_eval(const EvalOpts& o, std::size_t threads) {
    require_file(o.dataset);
    require_file(o.predictions);
    auto dataset = jsonl::load_dataset(o.dataset);
    auto predictions = jsonl::load_predictions(o.predictions);
    auto report = metrics::evaluate(dataset, predictions, threads);
    ensure_parent_dir(o.out);
    jsonl::write_json(o.out, jsonl::report_to_json(report));
    if (!o.csv.empty()) {
        ensure_parent_dir(o.csv);
        jsonl::save_bucket_csv(o.csv, report);
    }
    write_sidecars(o.out, false, "eval", json::object(), {o.dataset, o.predictions},
                   {o.out}, threads);
    std::cerr << "eval: " << report.overall.n << " instances, perfect rate "
              << jsonl::fmt_double(report.overall.perfect_rate) << "\n";
    return 0;
}

// ----- compare --------------------------------------------------------------------

struct CompareOpts {
    std::string a, b, out;
    std::string mode = "paired";
};

json battery_to_json(std::vector<stats::TestResult> battery) {
    // BH-adjust across every test in the battery that produced a p-value.
    std::vector<double> ps;
    for (const auto& t : battery)
        if (t.p_value) ps.push_back(*t.p_value);
    auto adjusted = stats::bh_adjust(ps);
    json rows = json::array();
    std::size_t k = 0;
    for (const auto& t : battery) {
        json row = jsonl::test_result_to_json(t);
        if (t.p_value) row["adjusted_p"] = adjusted[k++];
        rows.push_back(std::move(row));
    }
    return rows;
}

int run_compare(const CompareOpts& o, std::size_t) {
    require_file(o.a);
    require_file(o.b);
    auto ra = jsonl::load_report(o.a);
    auto rb = jsonl::load_report(o.b);
    static const char* kMetric[] = {"bleu1", "bleu2", "bleu3", "bleu4"};
    std::vector<stats::TestResult> battery;
    json meta{{"mode", o.mode}, {"n_a", ra.rows.size()}, {"n_b", rb.rows.size()}};

    if (o.mode == "paired") {
        std::map<std::string, const metrics::InstanceEval*> ia, ib;
        for (const auto& r : ra.rows) ia.emplace(r.instance_id, &r);
        for (const auto& r : rb.rows) ib.emplace(r.instance_id, &r);
        if (ia.size() != ra.rows.size() || ib.size() != rb.rows.size())
            throw ValidationError("duplicate instance ids in report");
        if (ia.size() != ib.size())
            throw ValidationError("reports cover different instances");
        std::uint64_t b_only = 0, c_only = 0;
        for (const auto& [id, rowa] : ia) {
            auto it = ib.find(id);
            if (it == ib.end())
                throw ValidationError("reports cover different instances");
            if (rowa->is_perfect && !it->second->is_perfect) ++b_only;
            else if (!rowa->is_perfect && it->second->is_perfect) ++c_only;
        }
        battery.push_back(stats::mcnemar_counts(b_only, c_only));
        auto paired_values = [&](auto&& get) {
            std::pair<std::vector<double>, std::vector<double>> out;
            for (const auto& [id, rowa] : ia) {
                auto va = get(*rowa), vb = get(*ib.at(id));
                if (va && vb) {
                    out.first.push_back(*va);
                    out.second.push_back(*vb);
                }
            }
            return out;
        };
        for (std::size_t n = 0; n < 4; ++n) {
            auto [xa, xb] = paired_values([n](const metrics::InstanceEval& r) {
                return r.bleu_n[n];
            });
            auto t = stats::wilcoxon_signed_rank(xa, xb);
            t.test = std::string("signed-rank-") + kMetric[n];
            battery.push_back(t);
            auto d = stats::cliffs_delta(xa, xb, /*paired=*/true);
            d.test = std::string("cliffs-delta-") + kMetric[n];
            battery.push_back(d);
        }
        auto [la, lb] = paired_values([](const metrics::InstanceEval& r) {
            return std::optional<double>(r.lev_norm);
        });
        auto t = stats::wilcoxon_signed_rank(la, lb);
        t.test = "signed-rank-lev";
        battery.push_back(t);
        auto d = stats::cliffs_delta(la, lb, /*paired=*/true);
        d.test = "cliffs-delta-lev";
        battery.push_back(d);
        meta["n_pairs"] = ia.size();
    } else if (o.mode == "unpaired") {
        auto perfect_counts = [](const metrics::EvalReport& r) {
            std::pair<std::uint64_t, std::uint64_t> out{0, 0};
            for (const auto& row : r.rows)
                row.is_perfect ? ++out.first : ++out.second;
            return out;
        };
        auto [a1, a0] = perfect_counts(ra);
        auto [b1, b0] = perfect_counts(rb);
        battery.push_back(stats::fisher_exact(a1, a0, b1, b0));
        auto values = [](const metrics::EvalReport& r, auto&& get) {
            std::vector<double> out;
            for (const auto& row : r.rows)
                if (auto v = get(row)) out.push_back(*v);
            return out;
        };
        for (std::size_t n = 0; n < 4; ++n) {
            auto get = [n](const metrics::InstanceEval& r) { return r.bleu_n[n]; };
            auto xa = values(ra, get), xb = values(rb, get);
            auto t = stats::wilcoxon_rank_sum(xa, xb);
            t.test = std::string("rank-sum-") + kMetric[n];
            battery.push_back(t);
            auto d = stats::cliffs_delta(xa, xb, /*paired=*/false);
            d.test = std::string("cliffs-delta-") + kMetric[n];
            battery.push_back(d);
        }
        auto get_lev = [](const metrics::InstanceEval& r) {
            return std::optional<double>(r.lev_norm);
        };
        auto xa = values(ra, get_lev), xb = values(rb, get_lev);
        auto t = stats::wilcoxon_rank_sum(xa, xb);
        t.test = "rank-sum-lev";
        battery.push_back(t);
        auto d = stats::cliffs_delta(xa, xb, /*paired=*/false);
        d.test = "cliffs-delta-lev";
        battery.push_back(d);
    } else {
        throw ValidationError("unknown --mode: " + o.mode);
    }

    meta["tests"] = battery_to_json(std::move(battery));
    ensure_parent_dir(o.out);
    jsonl::write_json(o.out, meta);
    write_sidecars(o.out, false, "compare", json{{"mode", o.mode}}, {o.a, o.b}, {o.out},
                   1);
    std::cerr << "compare: wrote " << o.out << "\n";
    return 0;
}

// ----- confidence ----------------------------------------------------------------------

struct ConfidenceOpts {
    std::string report, out_csv, out_json;
};

int run_confidence(const ConfidenceOpts& o, std::size_t) {
    require_file(o.report);
    auto report = jsonl::load_report(o.report);
    conf::BinReport bins;
    try {
        bins = conf::bin_confidence(report);
    } catch (const conf::NoConfidenceData&) {
        throw ValidationError("no confidence data");
    }
    ensure_parent_dir(o.out_csv);
    jsonl::save_bins_csv(o.out_csv, bins);
    if (!o.out_json.empty()) {
        std::vector<double> confs, lens;
        std::vector<char> flags;
        for (const auto& r : report.rows)
            if (r.confidence) {
                confs.push_back(*r.confidence);
                lens.push_back(static_cast<double>(r.n_masked));
                flags.push_back(r.is_perfect ? 1 : 0);
            }
        auto outcome = std::make_unique<bool[]>(flags.size());
        bool any_true = false, any_false = false;
        for (std::size_t i = 0; i < flags.size(); ++i) {
            outcome[i] = flags[i] != 0;
            (outcome[i] ? any_true : any_false) = true;
        }
        std::vector<stats::TestResult> tests;
        if (any_true && any_false) {
            tests.push_back(stats::logit_or(
                confs, std::span<const bool>(outcome.get(), flags.size())));
        } else {
            stats::TestResult degenerate;
            degenerate.test = "logit-or";
            degenerate.status = stats::TestStatus::perfect_separation;
            tests.push_back(degenerate);
        }
        tests.push_back(stats::kendall_tau(confs, lens));
        tests.back().test = "kendall-tau-confidence-vs-length";
        json j = jsonl::bin_report_to_json(bins);
        json rows = json::array();
        for (const auto& t : tests) rows.push_back(jsonl::test_result_to_json(t));
        j["tests"] = rows;
        ensure_parent_dir(o.out_json);
        jsonl::write_json(o.out_json, j);
    }
    write_sidecars(o.out_csv, false, "confidence", json::object(), {o.report},
                   {o.out_csv}, 1);
    std::cerr << "confidence: " << bins.n_with_confidence << " scored rows\n";
    return 0;
}

// ----- report ----------------------------------------------------------------------------

struct ReportOpts {
    std::vector<std::string> inputs;
    std::string out;
};

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", v * 100.0);
    return buf;
}

int run_report(const ReportOpts& o, std::size_t) {
    if (o.inputs.empty()) throw ValidationError("report needs at least one --input");
    std::vector<metrics::EvalReport> reports;
    for (const auto& path : o.inputs) {
        require_file(path);
        reports.push_back(jsonl::load_report(path));
    }
    fs::create_directories(o.out);

    std::ofstream summary((fs::path(o.out) / "summary.csv").string(), std::ios::trunc);
    summary << "level,domain,partition,n,n_missing,perfect_rate,mean_bleu1,mean_bleu2,"
               "mean_bleu3,mean_bleu4,mean_lev\n";
    std::ofstream by_len((fs::path(o.out) / "perfect_by_length.csv").string(),
                         std::ios::trunc);
    by_len << "level,domain,partition,bucket,n,perfect_rate\n";
    std::ofstream conf_csv((fs::path(o.out) / "confidence_bins.csv").string(),
                           std::ios::trunc);
    conf_csv << "level,domain,partition,bin_low,bin_high,n,n_perfect,perfect_rate\n";
    std::ofstream md((fs::path(o.out) / "report.md").string(), std::ios::trunc);
    md << "# Masked completion results\n";

    for (const auto& r : reports) {
        std::string key = std::string(mask::level_name(r.level)) + "," + r.domain + "," +
                          r.partition;
        const auto& a = r.overall;
        summary << key << ',' << a.n << ',' << a.n_missing << ','
                << jsonl::fmt_double(a.perfect_rate);
        for (const auto& b : a.mean_bleu)
            summary << ',' << (b ? jsonl::fmt_double(*b) : "");
        summary << ',' << jsonl::fmt_double(a.mean_lev) << '\n';

        for (const auto& [bucket, agg] : r.by_bucket)
            by_len << key << ',' << bucket << ',' << agg.n << ','
                   << jsonl::fmt_double(agg.perfect_rate) << '\n';

        md << "\n## " << mask::level_name(r.level) << " / " << r.domain << " / "
           << r.partition << "\n\n";
        md << "| instances | missing | perfect | BLEU-1 | BLEU-2 | BLEU-3 | BLEU-4 | "
              "norm. Levenshtein |\n";
        md << "|---:|---:|---:|---:|---:|---:|---:|---:|\n";
        md << "| " << a.n << " | " << a.n_missing << " | " << pct(a.perfect_rate);
        for (const auto& b : a.mean_bleu)
            md << " | " << (b ? jsonl::fmt_double(*b) : "—");
        md << " | " << jsonl::fmt_double(a.mean_lev) << " |\n";

        md << "\nPerfect predictions by masked length:\n\n";
        md << "| length bucket | n | perfect |\n|---:|---:|---:|\n";
        for (const auto& [bucket, agg] : r.by_bucket)
            md << "| " << bucket << " | " << agg.n << " | " << pct(agg.perfect_rate)
               << " |\n";

        try {
            auto bins = conf::bin_confidence(r);
            md << "\nPerfect rate by confidence decile:\n\n";
            md << "| bin | n | perfect |\n|---|---:|---:|\n";
            for (const auto& b : bins.bins) {
                conf_csv << key << ',' << jsonl::fmt_double(b.low) << ','
                         << jsonl::fmt_double(b.high) << ',' << b.n << ',' << b.n_perfect
                         << ',' << (b.perfect_rate ? jsonl::fmt_double(*b.perfect_rate) : "")
                         << '\n';
                md << "| [" << jsonl::fmt_double(b.low) << ", " << jsonl::fmt_double(b.high)
                   << (b.high == 1.0 ? "]" : ")") << " | " << b.n << " | "
                   << (b.perfect_rate ? pct(*b.perfect_rate) : "—") << " |\n";
            }
        } catch (const conf::NoConfidenceData&) {
            // External predictions without scores: skip the confidence table.
        }
    }
    summary.close();
    by_len.close();
    conf_csv.close();
    md.close();

    write_sidecars(o.out, true, "report", json{{"n_reports", reports.size()}}, o.inputs,
                   {"report.md", "summary.csv", "perfect_by_length.csv",
                    "confidence_bins.csv"},
                   1);
    std::cerr << "report: merged " << reports.size() << " reports into " << o.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maskbench: masked Java method completion benchmark toolkit"};
    app.require_subcommand(1);
    // Subcommands created below inherit this, so global options such as
    // --threads are accepted on either side of the subcommand name.
    app.fallthrough();
    std::size_t threads = 0;
    app.add_option("--threads", threads,
                   "worker thread cap (0 = hardware); outputs do not depend on it")
        ->envname("MASKBENCH_THREADS");

    IngestOpts ingest;
    auto* s_ingest = app.add_subcommand("ingest", "filter a raw corpus into methods");
    s_ingest->add_option("--input", ingest.input, "raw corpus JSONL")->required();
    s_ingest->add_option("--mode", ingest.mode, "finetune|pretrain");
    s_ingest->add_option("--out", ingest.out, "output directory")->required();
    s_ingest->add_option("--min-lines", ingest.min_lines, "override minimum line count");
    s_ingest->add_option("--max-tokens", ingest.max_tokens, "override maximum token count");
    s_ingest->add_option("--min-tokens", ingest.min_tokens, "override minimum token count");
    s_ingest->add_option("--per-origin-cap", ingest.per_origin_cap,
                         "override per-origin method cap");
    s_ingest->add_flag("--no-name-filters", ingest.no_name_filters,
                       "disable test/toString name filters");

    MaskOpts mask_opts;
    auto* s_mask = app.add_subcommand("mask", "build masked datasets and a split");
    s_mask->add_option("--methods", mask_opts.methods, "methods JSONL")->required();
    s_mask->add_option("--level", mask_opts.level, "token|construct|block|random");
    s_mask->add_option("--seed", mask_opts.seed, "split and masking seed");
    s_mask->add_option("--out", mask_opts.out, "output directory")->required();
    s_mask->add_option("--ratios", mask_opts.ratios, "train,eval,test ratios");
    s_mask->add_option("--cap-train", mask_opts.cap_train, "max train instances");
    s_mask->add_option("--rate", mask_opts.rate, "random-level masking rate");
    s_mask->add_option("--domain", mask_opts.domain, "label carried into reports");
    s_mask->add_flag("--keep-majority-masked", mask_opts.keep_majority_masked,
                     "keep instances whose target outweighs their context");

    TrainOpts train;
    auto* s_train = app.add_subcommand("train-ngram", "train the n-gram baseline");
    s_train->add_option("--methods", train.methods, "methods JSONL")->required();
    s_train->add_option("--out", train.out, "model file")->required();
    s_train->add_option("--order", train.order, "n-gram order (2..15)");
    s_train->add_option("--lambdas", train.lambdas,
                        "comma-separated interpolation weights, lowest order first");
    s_train->add_option("--split", train.split_path, "split JSONL to filter methods by");
    s_train->add_option("--partition", train.partition, "partition to train on");
    s_train->add_option("--debug-json", train.debug_json, "write raw counts as JSON");

    PredictOpts predict_opts;
    auto* s_predict = app.add_subcommand("predict-ngram", "complete masked instances");
    s_predict->add_option("--model", predict_opts.model, "model file")->required();
    s_predict->add_option("--dataset", predict_opts.dataset, "dataset JSONL")->required();
    s_predict->add_option("--out", predict_opts.out, "predictions JSONL")->required();
    s_predict->add_option("--cache-dir", predict_opts.cache_dir,
                          "directory of per-origin cache corpora");
    s_predict->add_option("--cache-lambda", predict_opts.cache_lambda,
                          "weight of the origin-local model in the blend");

    EvalOpts eval;
    auto* s_eval = app.add_subcommand("eval", "score predictions against a dataset");
    s_eval->add_option("--dataset", eval.dataset, "dataset JSONL")->required();
    s_eval->add_option("--predictions", eval.predictions, "predictions JSONL")->required();
    s_eval->add_option("--out", eval.out, "report JSON")->required();
    s_eval->add_option("--csv", eval.csv, "also write per-bucket CSV");

    CompareOpts compare;
    auto* s_compare = app.add_subcommand("compare", "statistical comparison of two reports");
    s_compare->add_option("--a", compare.a, "first report JSON")->required();
    s_compare->add_option("--b", compare.b, "second report JSON")->required();
    s_compare->add_option("--mode", compare.mode, "paired|unpaired");
    s_compare->add_option("--out", compare.out, "comparison JSON")->required();

    ConfidenceOpts confidence;
    auto* s_conf = app.add_subcommand("confidence", "bin predictions by confidence");
    s_conf->add_option("--report", confidence.report, "report JSON")->required();
    s_conf->add_option("--out-csv", confidence.out_csv, "bins CSV")->required();
    s_conf->add_option("--out-json", confidence.out_json,
                       "bins + confidence/correctness tests JSON");

    ReportOpts report;
    auto* s_report = app.add_subcommand("report", "merge reports into markdown and CSV");
    s_report->add_option("--input", report.inputs, "report JSON (repeatable)")->required();
    s_report->add_option("--out", report.out, "output directory")->required();

    try {
        app.parse(argc, argv);
        std::size_t n_threads = par::resolve_threads(threads);
        if (s_ingest->parsed()) return run_ingest(ingest, n_threads);
        if (s_mask->parsed()) return run_mask(mask_opts, n_threads);
        if (s_train->parsed()) return run_train(train, n_threads);
        if (s_predict->parsed()) return run_predict(predict_opts, n_threads);
        if (s_eval->parsed()) return run_eval(eval, n_threads);
        if (s_compare->parsed()) return run_compare(compare, n_threads);
        if (s_conf->parsed()) return run_confidence(confidence, n_threads);
        if (s_report->parsed()) return run_report(report, n_threads);
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
