#pragma once

// Reliability analysis of model confidence: decile bins over [0, 1] with
// per-bin accuracy, share of all perfect predictions, and masked-length
// means split by correctness.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "maskbench/metrics.hpp"

namespace maskbench::conf {

class NoConfidenceData : public std::runtime_error {
public:
    NoConfidenceData() : std::runtime_error("no row carries a confidence value") {}
};

struct Bin {
    double low = 0.0;
    double high = 0.0;  // exclusive except for the final bin
    std::size_t n = 0;
    std::size_t n_perfect = 0;
    std::optional<double> perfect_rate;
    std::optional<double> share_of_all_perfects;
    std::optional<double> mean_len_all;
    std::optional<double> mean_len_perfect;
    std::optional<double> mean_len_wrong;
};

struct BinReport {
    std::array<Bin, 10> bins;
    std::size_t n_with_confidence = 0;
    std::size_t n_without_confidence = 0;
    std::size_t n_perfect_total = 0;  // among rows with confidence
};

// Bin index for a confidence in [0, 1]; the final bin includes 1.0.
inline std::size_t bin_index(double confidence) {
    auto idx = static_cast<std::size_t>(confidence * 10.0);
    return idx > 9 ? 9 : idx;
}

// Buckets every confident row into the ten bins. Rows without confidence
// are excluded and counted; when none remain the analysis is impossible.
inline BinReport bin_confidence(const metrics::EvalReport& report) {
    BinReport out;
    for (std::size_t i = 0; i < 10; ++i) {
        out.bins[i].low = static_cast<double>(i) / 10.0;
        out.bins[i].high = static_cast<double>(i + 1) / 10.0;
    }
    std::array<double, 10> len_sum{}, len_perfect_sum{}, len_wrong_sum{};
    std::array<std::size_t, 10> n_wrong{};
    for (const auto& row : report.rows) {
        if (!row.confidence) {
            ++out.n_without_confidence;
            continue;
        }
        ++out.n_with_confidence;
        std::size_t i = bin_index(*row.confidence);
        Bin& bin = out.bins[i];
        ++bin.n;
        len_sum[i] += static_cast<double>(row.n_masked);
        if (row.is_perfect) {
            ++bin.n_perfect;
            ++out.n_perfect_total;
            len_perfect_sum[i] += static_cast<double>(row.n_masked);
        } else {
            ++n_wrong[i];
            len_wrong_sum[i] += static_cast<double>(row.n_masked);
        }
    }
    if (out.n_with_confidence == 0) throw NoConfidenceData();
    for (std::size_t i = 0; i < 10; ++i) {
        Bin& bin = out.bins[i];
        if (bin.n > 0) {
            bin.perfect_rate = static_cast<double>(bin.n_perfect) /
                               static_cast<double>(bin.n);
            bin.mean_len_all = len_sum[i] / static_cast<double>(bin.n);
        }
        if (out.n_perfect_total > 0 && bin.n > 0)
            bin.share_of_all_perfects = static_cast<double>(bin.n_perfect) /
                                        static_cast<double>(out.n_perfect_total);
        if (bin.n_perfect > 0)
            bin.mean_len_perfect =
                len_perfect_sum[i] / static_cast<double>(bin.n_perfect);
        if (n_wrong[i] > 0)
            bin.mean_len_wrong = len_wrong_sum[i] / static_cast<double>(n_wrong[i]);
    }
    return out;
}

struct LengthTriple {
    std::optional<double> all;
    std::optional<double> perfect;
    std::optional<double> wrong;
};

// Mean masked length per confidence bin, overall and split by correctness.
inline std::array<LengthTriple, 10> length_by_confidence(const metrics::EvalReport& report) {
    BinReport bins = bin_confidence(report);
    std::array<LengthTriple, 10> out;
    for (std::size_t i = 0; i < 10; ++i) {
        out[i].all = bins.bins[i].mean_len_all;
        out[i].perfect = bins.bins[i].mean_len_perfect;
        out[i].wrong = bins.bins[i].mean_len_wrong;
    }
    return out;
}

}  // namespace maskbench::conf
