#pragma once

// Paired and unpaired significance tests, effect sizes and multiple-test
// correction used to compare completion approaches: McNemar, Fisher exact,
// Wilcoxon signed-rank and rank-sum, Cliff's delta, Kendall tau-b,
// Benjamini-Hochberg and a one-covariate logistic regression.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskbench::stats {

enum class TestStatus {
    ok,
    no_discordant_pairs,
    all_zero_differences,
    zero_variance,
    perfect_separation,
};

inline const char* test_status_name(TestStatus s) {
    switch (s) {
        case TestStatus::ok: return "ok";
        case TestStatus::no_discordant_pairs: return "no-discordant-pairs";
        case TestStatus::all_zero_differences: return "all-zero-differences";
        case TestStatus::zero_variance: return "zero-variance";
        case TestStatus::perfect_separation: return "perfect-separation";
    }
    return "?";
}

struct TestResult {
    std::string test;
    double statistic = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> p_value;       // in [0, 1] when present
    std::optional<double> odds_ratio;    // may be +infinity
    std::optional<double> cliffs_delta;
    std::optional<char> magnitude;       // N, S, M, L
    std::optional<double> tau;
    std::optional<double> slope;         // logit beta1
    TestStatus status = TestStatus::ok;
};

namespace detail {

inline double two_sided_from_z(double z) {
    double p = std::erfc(std::fabs(z) / std::sqrt(2.0));
    return p > 1.0 ? 1.0 : p;
}

// Survival function of chi-square with one degree of freedom.
inline double chi2_sf_1df(double x) {
    return std::erfc(std::sqrt(x / 2.0));
}

inline double ln_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Ranks with ties averaged; also reports the tie group sizes.
inline std::vector<double> average_ranks(std::span<const double> values,
                                         std::vector<std::size_t>* tie_sizes = nullptr) {
    const std::size_t n = values.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        if (tie_sizes && j > i) tie_sizes->push_back(j - i + 1);
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

// ----- McNemar -----------------------------------------------------------

// b and c are the discordant pair counts (only-first-correct and
// only-second-correct). Continuity-corrected chi-square when b+c >= 25,
// exact two-sided binomial below that.
inline TestResult mcnemar_counts(std::uint64_t b, std::uint64_t c) {
    TestResult r;
    r.test = "mcnemar";
    if (b == 0 && c == 0) {
        r.status = TestStatus::no_discordant_pairs;
        r.statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    if (c == 0) r.odds_ratio = std::numeric_limits<double>::infinity();
    else r.odds_ratio = static_cast<double>(b) / static_cast<double>(c);
    const std::uint64_t n = b + c;
    if (n >= 25) {
        double diff = b > c ? static_cast<double>(b - c) : static_cast<double>(c - b);
        double adj = std::max(diff - 1.0, 0.0);
        double chi2 = adj * adj / static_cast<double>(n);
        r.statistic = chi2;
        r.p_value = detail::chi2_sf_1df(chi2);
    } else {
        std::uint64_t m = std::min(b, c);
        double tail = 0.0;
        double comb = 1.0;  // C(n, 0)
        for (std::uint64_t i = 0; i <= m; ++i) {
            if (i > 0) comb = comb * static_cast<double>(n - i + 1) / static_cast<double>(i);
            tail += comb;
        }
        double p = 2.0 * tail * std::pow(0.5, static_cast<double>(n));
        r.statistic = static_cast<double>(m);
        r.p_value = p > 1.0 ? 1.0 : p;
    }
    return r;
}

inline TestResult mcnemar(std::span<const bool> first, std::span<const bool> second) {
    if (first.size() != second.size())
        throw std::invalid_argument("mcnemar needs paired outcomes of equal length");
    std::uint64_t b = 0, c = 0;
    for (std::size_t i = 0; i < first.size(); ++i) {
        if (first[i] && !second[i]) ++b;
        else if (!first[i] && second[i]) ++c;
    }
    return mcnemar_counts(b, c);
}

// ----- Fisher exact ------------------------------------------------------

// Two-sided Fisher exact test on [[a, b], [c, d]]: the sum of all
// hypergeometric tables with the observed margins that are no more likely
// than the observed one.
inline TestResult fisher_exact(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                               std::uint64_t d) {
    TestResult r;
    r.test = "fisher-exact";
    const double ad = static_cast<double>(a) * static_cast<double>(d);
    const double bc = static_cast<double>(b) * static_cast<double>(c);
    if (bc > 0.0) r.odds_ratio = ad / bc;
    else if (ad > 0.0) r.odds_ratio = std::numeric_limits<double>::infinity();
    const double r1 = static_cast<double>(a + b);
    const double c1 = static_cast<double>(a + c);
    const double n = static_cast<double>(a + b + c + d);
    if (n == 0.0) {
        r.p_value = 1.0;
        return r;
    }
    auto log_pmf = [&](double k) {
        return detail::ln_choose(r1, k) + detail::ln_choose(n - r1, c1 - k) -
               detail::ln_choose(n, c1);
    };
    const double lo = std::max(0.0, r1 + c1 - n);
    const double hi = std::min(r1, c1);
    const double obs = log_pmf(static_cast<double>(a));
    const double cutoff = obs + 1e-7;
    double p = 0.0;
    for (double k = lo; k <= hi + 0.5; k += 1.0) {
        double lp = log_pmf(k);
        if (lp <= cutoff) p += std::exp(lp);
    }
    r.statistic = r.odds_ratio.value_or(std::numeric_limits<double>::quiet_NaN());
    r.p_value = p > 1.0 ? 1.0 : p;
    return r;
}

// ----- Wilcoxon signed-rank ----------------------------------------------

namespace detail {

// Exact two-sided p for the signed-rank statistic given doubled ranks.
// Enumerates the 2^n sign assignments by dynamic programming.
inline double signed_rank_exact_p(const std::vector<std::uint64_t>& ranks2,
                                  std::uint64_t w2) {
    std::uint64_t total = 0;
    for (auto v : ranks2) total += v;
    std::vector<double> ways(total + 1, 0.0);
    ways[0] = 1.0;
    for (auto v : ranks2)
        for (std::size_t s = total; s + 1 > v; --s)
            if (ways[s - v] > 0.0) ways[s] += ways[s - v];
    const std::uint64_t lo = std::min(w2, total - w2);
    const std::uint64_t hi = std::max(w2, total - w2);
    double below = 0.0, above = 0.0, all = 0.0;
    for (std::size_t s = 0; s <= total; ++s) {
        all += ways[s];
        if (s <= lo) below += ways[s];
        if (s >= hi) above += ways[s];
    }
    double p = (below + above) / all;
    return p > 1.0 ? 1.0 : p;
}

}  // namespace detail

// Paired test on the signed differences; zero differences are dropped.
// Normal approximation with tie correction for 20 or more remaining pairs,
// exact enumeration below that.
inline TestResult wilcoxon_signed_rank(std::span<const double> x,
                                       std::span<const double> y) {
    if (x.size() != y.size())
        throw std::invalid_argument("signed-rank needs paired samples of equal length");
    std::vector<double> diffs;
    diffs.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != y[i]) diffs.push_back(x[i] - y[i]);
    TestResult r;
    r.test = "wilcoxon-signed-rank";
    const std::size_t n = diffs.size();
    if (n == 0) {
        r.status = TestStatus::all_zero_differences;
        r.statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    std::vector<double> abs_diffs(n);
    for (std::size_t i = 0; i < n; ++i) abs_diffs[i] = std::fabs(diffs[i]);
    std::vector<std::size_t> ties;
    std::vector<double> ranks = detail::average_ranks(abs_diffs, &ties);
    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (diffs[i] > 0) w_plus += ranks[i];
    r.statistic = w_plus;
    const double dn = static_cast<double>(n);
    if (n >= 20) {
        double mu = dn * (dn + 1.0) / 4.0;
        double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0;
        for (std::size_t t : ties) {
            double td = static_cast<double>(t);
            var -= (td * td * td - td) / 48.0;
        }
        if (var <= 0.0) {
            r.p_value = 1.0;
            return r;
        }
        r.p_value = detail::two_sided_from_z((w_plus - mu) / std::sqrt(var));
    } else {
        std::vector<std::uint64_t> ranks2(n);
        for (std::size_t i = 0; i < n; ++i)
            ranks2[i] = static_cast<std::uint64_t>(std::llround(ranks[i] * 2.0));
        auto w2 = static_cast<std::uint64_t>(std::llround(w_plus * 2.0));
        r.p_value = detail::signed_rank_exact_p(ranks2, w2);
    }
    return r;
}

// ----- Wilcoxon rank-sum (Mann-Whitney) ----------------------------------

namespace detail {

// Exact two-sided p for the Mann-Whitney U statistic without ties.
inline double rank_sum_exact_p(std::size_t n1, std::size_t n2, double u) {
    const std::size_t umax = n1 * n2;
    // ways[m][u]: subsets of size m with U-sum u, built value by value.
    std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(umax + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t v = 1; v <= n1 + n2; ++v) {
        for (std::size_t m = std::min(v, n1); m >= 1; --m) {
            // Choosing value v as the m-th member contributes v - m to U.
            std::size_t add = v - m;
            if (add > umax) continue;
            for (std::size_t s = umax; s + 1 > add; --s)
                if (ways[m - 1][s - add] > 0.0) ways[m][s] += ways[m - 1][s - add];
        }
    }
    double all = 0.0;
    for (double w : ways[n1]) all += w;
    const double lo = std::min(u, static_cast<double>(umax) - u);
    const double hi = std::max(u, static_cast<double>(umax) - u);
    double below = 0.0, above = 0.0;
    for (std::size_t s = 0; s <= umax; ++s) {
        if (static_cast<double>(s) <= lo + 1e-9) below += ways[n1][s];
        if (static_cast<double>(s) >= hi - 1e-9) above += ways[n1][s];
    }
    double p = (below + above) / all;
    return p > 1.0 ? 1.0 : p;
}

}  // namespace detail

// Unpaired comparison of two samples. Exact enumeration for small
// tie-free inputs, otherwise normal approximation with tie correction.
inline TestResult wilcoxon_rank_sum(std::span<const double> x,
                                    std::span<const double> y) {
    TestResult r;
    r.test = "wilcoxon-rank-sum";
    const std::size_t n1 = x.size(), n2 = y.size();
    if (n1 == 0 || n2 == 0)
        throw std::invalid_argument("rank-sum needs two non-empty samples");
    std::vector<double> combined;
    combined.reserve(n1 + n2);
    combined.insert(combined.end(), x.begin(), x.end());
    combined.insert(combined.end(), y.begin(), y.end());
    std::vector<std::size_t> ties;
    std::vector<double> ranks = detail::average_ranks(combined, &ties);
    double rank_sum1 = 0.0;
    for (std::size_t i = 0; i < n1; ++i) rank_sum1 += ranks[i];
    const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2);
    const double u = rank_sum1 - dn1 * (dn1 + 1.0) / 2.0;
    r.statistic = u;
    const bool has_ties = !ties.empty();
    if (!has_ties && std::min(n1, n2) <= 8 && n1 * n2 <= 2000) {
        r.p_value = detail::rank_sum_exact_p(n1, n2, u);
        return r;
    }
    const double nn = dn1 + dn2;
    double tie_term = 0.0;
    for (std::size_t t : ties) {
        double td = static_cast<double>(t);
        tie_term += td * td * td - td;
    }
    double var = dn1 * dn2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) {
        r.p_value = 1.0;
        r.status = TestStatus::zero_variance;
        return r;
    }
    r.p_value = detail::two_sided_from_z((u - dn1 * dn2 / 2.0) / std::sqrt(var));
    return r;
}

// ----- Cliff's delta ------------------------------------------------------

inline char cliffs_magnitude(double d) {
    double a = std::fabs(d);
    if (a < 0.147) return 'N';
    if (a < 0.33) return 'S';
    if (a < 0.474) return 'M';
    return 'L';
}

// Effect size only; negligible/small/medium/large by the usual thresholds.
inline TestResult cliffs_delta(std::span<const double> x, std::span<const double> y,
                               bool paired) {
    TestResult r;
    r.test = paired ? "cliffs-delta-paired" : "cliffs-delta";
    if (x.empty() || y.empty())
        throw std::invalid_argument("cliffs delta needs non-empty samples");
    double d;
    if (paired) {
        if (x.size() != y.size())
            throw std::invalid_argument("paired cliffs delta needs equal lengths");
        long long wins = 0, losses = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > y[i]) ++wins;
            else if (x[i] < y[i]) ++losses;
        }
        d = static_cast<double>(wins - losses) / static_cast<double>(x.size());
    } else {
        std::vector<double> sorted_y(y.begin(), y.end());
        std::sort(sorted_y.begin(), sorted_y.end());
        long long wins = 0, losses = 0;
        for (double xv : x) {
            auto lb = std::lower_bound(sorted_y.begin(), sorted_y.end(), xv);
            auto ub = std::upper_bound(sorted_y.begin(), sorted_y.end(), xv);
            wins += lb - sorted_y.begin();
            losses += sorted_y.end() - ub;
        }
        d = static_cast<double>(wins - losses) /
            (static_cast<double>(x.size()) * static_cast<double>(y.size()));
    }
    r.statistic = d;
    r.cliffs_delta = d;
    r.magnitude = cliffs_magnitude(d);
    return r;
}

// ----- Kendall tau-b ------------------------------------------------------

namespace detail {

// Strict inversions counted by merge sort.
inline std::uint64_t count_inversions(std::vector<double>& a) {
    std::vector<double> buf(a.size());
    std::uint64_t inv = 0;
    for (std::size_t width = 1; width < a.size(); width *= 2) {
        for (std::size_t lo = 0; lo + width < a.size(); lo += 2 * width) {
            std::size_t mid = lo + width;
            std::size_t hi = std::min(lo + 2 * width, a.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (a[j] < a[i]) {
                    inv += mid - i;
                    buf[k++] = a[j++];
                } else {
                    buf[k++] = a[i++];
                }
            }
            while (i < mid) buf[k++] = a[i++];
            while (j < hi) buf[k++] = a[j++];
            std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
                      buf.begin() + static_cast<std::ptrdiff_t>(hi),
                      a.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    }
    return inv;
}

}  // namespace detail

// Tau-b with tie corrections and a normal-approximation p-value. When either
// variable is constant the coefficient is undefined and reported as such.
inline TestResult kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw std::invalid_argument("kendall tau needs paired samples of equal length");
    TestResult r;
    r.test = "kendall-tau";
    const std::size_t n = x.size();
    if (n < 2) {
        r.status = TestStatus::zero_variance;
        r.p_value = 1.0;
        return r;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });
    const double tot = static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0;
    // Tie bookkeeping over x groups and joint (x, y) groups.
    double n1 = 0.0, n3 = 0.0, vt = 0.0, v1x = 0.0, v2x = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        double t = static_cast<double>(j - i + 1);
        n1 += t * (t - 1.0) / 2.0;
        vt += t * (t - 1.0) * (2.0 * t + 5.0);
        v1x += t * (t - 1.0);
        v2x += t * (t - 1.0) * (t - 2.0);
        std::size_t a = i;
        while (a <= j) {
            std::size_t b = a;
            while (b + 1 <= j && y[idx[b + 1]] == y[idx[a]]) ++b;
            double jt = static_cast<double>(b - a + 1);
            n3 += jt * (jt - 1.0) / 2.0;
            a = b + 1;
        }
        i = j + 1;
    }
    double n2 = 0.0, vu = 0.0, v1y = 0.0, v2y = 0.0;
    {
        std::vector<double> ys(y.begin(), y.end());
        std::sort(ys.begin(), ys.end());
        std::size_t a = 0;
        while (a < n) {
            std::size_t b = a;
            while (b + 1 < n && ys[b + 1] == ys[a]) ++b;
            double t = static_cast<double>(b - a + 1);
            n2 += t * (t - 1.0) / 2.0;
            vu += t * (t - 1.0) * (2.0 * t + 5.0);
            v1y += t * (t - 1.0);
            v2y += t * (t - 1.0) * (t - 2.0);
            a = b + 1;
        }
    }
    if (tot - n1 <= 0.0 || tot - n2 <= 0.0) {
        r.status = TestStatus::zero_variance;
        return r;
    }
    std::vector<double> y_in_x_order(n);
    for (std::size_t k = 0; k < n; ++k) y_in_x_order[k] = y[idx[k]];
    const double swaps = static_cast<double>(detail::count_inversions(y_in_x_order));
    const double s = tot - n1 - n2 + n3 - 2.0 * swaps;
    const double tau = s / std::sqrt((tot - n1) * (tot - n2));
    r.tau = tau;
    r.statistic = tau;
    const double dn = static_cast<double>(n);
    double var = (dn * (dn - 1.0) * (2.0 * dn + 5.0) - vt - vu) / 18.0 +
                 v1x * v1y / (2.0 * dn * (dn - 1.0));
    if (n > 2) var += v2x * v2y / (9.0 * dn * (dn - 1.0) * (dn - 2.0));
    if (var <= 0.0) {
        r.p_value = 1.0;
        return r;
    }
    r.p_value = detail::two_sided_from_z(s / std::sqrt(var));
    return r;
}

// ----- Benjamini-Hochberg --------------------------------------------------

// Step-up adjusted p-values, monotone and clamped to 1, in input order.
inline std::vector<double> bh_adjust(std::span<const double> p_values) {
    const std::size_t m = p_values.size();
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t i = m; i > 0; --i) {
        std::size_t rank = i;  // 1-based
        double v = p_values[idx[i - 1]] * static_cast<double>(m) / static_cast<double>(rank);
        running = std::min(running, v);
        adjusted[idx[i - 1]] = std::min(running, 1.0);
    }
    return adjusted;
}

// ----- Logistic regression -------------------------------------------------

// Intercept-plus-slope logistic fit by iteratively reweighted least squares.
// Reports exp(slope) as the odds ratio and a Wald two-sided p-value.
inline TestResult logit_or(std::span<const double> covariate,
                           std::span<const bool> outcome) {
    if (covariate.size() != outcome.size())
        throw std::invalid_argument("logit needs matching covariate/outcome lengths");
    const std::size_t n = covariate.size();
    bool any_true = false, any_false = false;
    for (bool o : outcome) (o ? any_true : any_false) = true;
    if (!any_true || !any_false)
        throw std::invalid_argument("logit needs both outcome classes present");

    TestResult r;
    r.test = "logit-or";
    double b0 = 0.0, b1 = 0.0;
    bool converged = false;
    double i00 = 0.0, i01 = 0.0, i11 = 0.0;  // information matrix
    for (int iter = 0; iter < 50; ++iter) {
        double g0 = 0.0, g1 = 0.0;
        i00 = i01 = i11 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double eta = b0 + b1 * covariate[i];
            double p = 1.0 / (1.0 + std::exp(-eta));
            double w = p * (1.0 - p);
            double resid = (outcome[i] ? 1.0 : 0.0) - p;
            g0 += resid;
            g1 += resid * covariate[i];
            i00 += w;
            i01 += w * covariate[i];
            i11 += w * covariate[i] * covariate[i];
        }
        double det = i00 * i11 - i01 * i01;
        if (det <= 0.0 || !std::isfinite(det)) break;
        double d0 = (i11 * g0 - i01 * g1) / det;
        double d1 = (i00 * g1 - i01 * g0) / det;
        b0 += d0;
        b1 += d1;
        if (std::max(std::fabs(d0), std::fabs(d1)) < 1e-10) {
            converged = true;
            break;
        }
    }
    r.statistic = b1;
    r.slope = b1;
    if (!converged || std::fabs(b1) > 30.0 || std::fabs(b0) > 30.0) {
        r.status = TestStatus::perfect_separation;
        return r;
    }
    double det = i00 * i11 - i01 * i01;
    double se1 = std::sqrt(i00 / det);
    r.odds_ratio = std::exp(b1);
    r.p_value = detail::two_sided_from_z(b1 / se1);
    return r;
}

}  // namespace maskbench::stats
