#pragma once

// Prediction quality measures and per-dataset evaluation reports: exact
// match, cumulative BLEU-n, normalized token Levenshtein distance, and
// masked-length bucket aggregates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "maskbench/masker.hpp"
#include "maskbench/parallel.hpp"

namespace maskbench::metrics {

struct Prediction {
    std::string instance_id;
    std::vector<std::string> tokens;
    std::optional<double> score;  // log-likelihood, <= 0
};

class UnknownInstanceId : public std::runtime_error {
public:
    explicit UnknownInstanceId(const std::string& id)
        : std::runtime_error("prediction for unknown instance id: " + id) {}
};

inline bool perfect(std::span<const std::string> pred, std::span<const std::string> ref) {
    return pred.size() == ref.size() && std::equal(pred.begin(), pred.end(), ref.begin());
}

namespace detail {

inline void count_ngrams(std::span<const std::string> toks, std::size_t n,
                         std::unordered_map<std::string, std::size_t>& out) {
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            key += std::to_string(toks[i + j].size());
            key += ':';
            key += toks[i + j];
        }
        ++out[key];
    }
}

}  // namespace detail

// Cumulative BLEU-n with a single reference: brevity penalty times the
// geometric mean of the modified k-gram precisions for k = 1..n. Undefined
// (nullopt) when either sequence is shorter than n; zero k-gram overlap
// anywhere keeps the score at zero.
inline std::optional<double> bleu(std::span<const std::string> pred,
                                  std::span<const std::string> ref, std::size_t n) {
    if (n == 0) throw std::invalid_argument("bleu order must be positive");
    if (pred.size() < n || ref.size() < n) return std::nullopt;
    double log_sum = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        std::unordered_map<std::string, std::size_t> pred_counts, ref_counts;
        detail::count_ngrams(pred, k, pred_counts);
        detail::count_ngrams(ref, k, ref_counts);
        std::size_t clipped = 0, total = 0;
        for (const auto& [gram, count] : pred_counts) {
            total += count;
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) clipped += std::min(count, it->second);
        }
        if (clipped == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }
    double bp = pred.size() >= ref.size()
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(ref.size()) /
                                         static_cast<double>(pred.size()));
    return bp * std::exp(log_sum / static_cast<double>(n));
}

// Edit distance divided by the longer length; 0 for two empty sequences.
inline double levenshtein_norm(std::span<const std::string> a,
                               std::span<const std::string> b) {
    const std::size_t na = a.size(), nb = b.size();
    if (na == 0 && nb == 0) return 0.0;
    std::vector<std::size_t> prev(nb + 1), cur(nb + 1);
    for (std::size_t j = 0; j <= nb; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= na; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= nb; ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[nb]) / static_cast<double>(std::max(na, nb));
}

// exp(log-likelihood), clamped into [0, 1].
inline double confidence_from_score(double score) {
    double c = std::exp(score);
    return c < 0.0 ? 0.0 : c > 1.0 ? 1.0 : c;
}

// Tokens in space-canonical form: joining with single spaces and splitting
// again. Literals containing spaces compare by their rendered text.
inline std::vector<std::string> canonical_tokens(std::span<const std::string> tokens) {
    std::string joined;
    for (const auto& t : tokens) {
        if (!joined.empty()) joined += ' ';
        joined += t;
    }
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

struct InstanceEval {
    std::string instance_id;
    bool is_perfect = false;
    std::array<std::optional<double>, 4> bleu_n;  // BLEU-1..4
    double lev_norm = 1.0;
    std::size_t n_masked = 0;
    std::size_t bucket = 0;
    std::optional<double> confidence;
    bool missing = false;
};

struct Aggregate {
    std::size_t n = 0;
    std::size_t n_missing = 0;
    double perfect_rate = 0.0;
    std::array<std::optional<double>, 4> mean_bleu;
    std::array<std::size_t, 4> bleu_defined{};
    double mean_lev = 1.0;
};

struct EvalReport {
    mask::Level level = mask::Level::token;
    std::string domain;
    std::string partition;
    std::vector<InstanceEval> rows;
    Aggregate overall;
    std::map<std::size_t, Aggregate> by_bucket;
};

// Length bucket: width 1 for token/construct/random, width 5 for block;
// a block bucket is labeled by its upper edge (7 tokens -> bucket 10).
inline std::size_t length_bucket(mask::Level level, std::size_t n_masked) {
    if (level == mask::Level::block) return (n_masked + 4) / 5 * 5;
    return n_masked;
}

namespace detail {

inline Aggregate aggregate_rows(const std::vector<const InstanceEval*>& rows) {
    Aggregate agg;
    agg.n = rows.size();
    if (rows.empty()) return agg;
    std::size_t perfects = 0;
    double lev_sum = 0.0;
    std::array<double, 4> bleu_sum{};
    for (const auto* r : rows) {
        perfects += r->is_perfect ? 1 : 0;
        agg.n_missing += r->missing ? 1 : 0;
        lev_sum += r->lev_norm;
        for (std::size_t k = 0; k < 4; ++k) {
            if (r->bleu_n[k]) {
                bleu_sum[k] += *r->bleu_n[k];
                ++agg.bleu_defined[k];
            }
        }
    }
    agg.perfect_rate = static_cast<double>(perfects) / static_cast<double>(rows.size());
    agg.mean_lev = lev_sum / static_cast<double>(rows.size());
    for (std::size_t k = 0; k < 4; ++k)
        if (agg.bleu_defined[k] > 0)
            agg.mean_bleu[k] = bleu_sum[k] / static_cast<double>(agg.bleu_defined[k]);
    return agg;
}

}  // namespace detail

// Scores predictions against a dataset. Instances without a prediction are
// counted as wrong with maximal edit distance and flagged missing. Rows where
// BLEU-n is undefined are excluded from that mean, with the denominator
// reported.
inline EvalReport evaluate(const mask::Dataset& dataset,
                           const std::vector<Prediction>& predictions,
                           std::size_t threads = 1) {
    std::unordered_map<std::string, const Prediction*> by_id;
    by_id.reserve(predictions.size());
    std::unordered_map<std::string, const mask::MaskedInstance*> known;
    known.reserve(dataset.instances.size());
    for (const auto& inst : dataset.instances) known.emplace(inst.id, &inst);
    for (const auto& p : predictions) {
        if (!known.count(p.instance_id)) throw UnknownInstanceId(p.instance_id);
        by_id.emplace(p.instance_id, &p);  // first occurrence wins
    }

    EvalReport report;
    report.level = dataset.level;
    report.domain = dataset.domain;
    report.partition = corpus::partition_name(dataset.partition);
    report.rows = par::parallel_map<InstanceEval>(
        dataset.instances.size(), threads, [&](std::size_t i) {
            const mask::MaskedInstance& inst = dataset.instances[i];
            InstanceEval row;
            row.instance_id = inst.id;
            row.n_masked = inst.meta.n_masked;
            row.bucket = length_bucket(dataset.level, inst.meta.n_masked);
            auto ref = canonical_tokens(inst.target);
            auto it = by_id.find(inst.id);
            if (it == by_id.end()) {
                row.missing = true;
                row.lev_norm = 1.0;
                return row;
            }
            const Prediction& pred = *it->second;
            auto hyp = canonical_tokens(pred.tokens);
            row.is_perfect = perfect(hyp, ref);
            for (std::size_t k = 0; k < 4; ++k) row.bleu_n[k] = bleu(hyp, ref, k + 1);
            row.lev_norm = levenshtein_norm(hyp, ref);
            if (pred.score) row.confidence = confidence_from_score(*pred.score);
            return row;
        });

    std::vector<const InstanceEval*> all;
    all.reserve(report.rows.size());
    std::map<std::size_t, std::vector<const InstanceEval*>> buckets;
    for (const auto& row : report.rows) {
        all.push_back(&row);
        buckets[row.bucket].push_back(&row);
    }
    report.overall = detail::aggregate_rows(all);
    for (const auto& [bucket, rows] : buckets)
        report.by_bucket.emplace(bucket, detail::aggregate_rows(rows));
    return report;
}

}  // namespace maskbench::metrics
