#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mlia/dataset.hpp"
#include "mlia/error.hpp"
#include "mlia/parallel.hpp"
#include "mlia/special_functions.hpp"

namespace mlia::stats {

// ---------------------------------------------------------------------------
// Significance levels

enum class Stars { none, one, two, three };

inline constexpr double kSignificanceLevels[3] = {0.05, 0.01, 0.001};

/// Strict inequalities: 0.05 is not significant, 0.001 earns two stars.
inline Stars stars(double p) {
    if (p < kSignificanceLevels[2]) return Stars::three;
    if (p < kSignificanceLevels[1]) return Stars::two;
    if (p < kSignificanceLevels[0]) return Stars::one;
    return Stars::none;
}

inline std::string to_string(Stars s) {
    switch (s) {
        case Stars::one: return "*";
        case Stars::two: return "**";
        case Stars::three: return "***";
        default: return "";
    }
}

// ---------------------------------------------------------------------------
// Descriptive statistics

inline double mean(std::span<const double> x) {
    if (x.empty()) return std::nan("");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double median(std::span<const double> x) {
    if (x.empty()) return std::nan("");
    std::vector<double> v(x.begin(), x.end());
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return x.empty() ? std::nan("") : 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

/// 1-based mid-ranks of `x` in original order.
inline std::vector<double> midranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
        i = j + 1;
    }
    return r;
}

/// Sizes of tied runs (only runs of length > 1).
inline std::vector<std::size_t> tie_sizes(std::span<const double> x) {
    std::vector<double> v(x.begin(), x.end());
    std::sort(v.begin(), v.end());
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
        if (j > i) ties.push_back(j - i + 1);
        i = j + 1;
    }
    return ties;
}

// ---------------------------------------------------------------------------
// Results

enum class TestKind { wilcoxon, kruskal_wallis, anova };

inline std::string to_string(TestKind k) {
    switch (k) {
        case TestKind::wilcoxon: return "wilcoxon";
        case TestKind::kruskal_wallis: return "kruskal_wallis";
        default: return "anova";
    }
}

enum class Method { automatic, exact, normal };

struct TestResult {
    TestKind kind = TestKind::wilcoxon;
    double statistic = 0.0;
    double p_value = 1.0;
    Stars stars = Stars::none;
    double diff_of_means = 0.0;
    std::vector<double> group_means;
    std::vector<double> group_medians;
    std::vector<double> group_sds;
    bool exact = false;
    /// Set when the data admit no test (zero variance, all values tied).
    bool degenerate = false;
};

/// M1 - M2 for two groups. For three groups, the pairwise difference among
/// (M1-M3, M1-M2, M2-M3) with the largest magnitude, sign kept.
inline double difference_of_means(std::span<const double> means) {
    if (means.size() == 2) return means[0] - means[1];
    if (means.size() != 3) throw DomainError("difference_of_means: need 2 or 3 groups");
    const double candidates[3] = {means[0] - means[2], means[0] - means[1], means[1] - means[2]};
    double best = candidates[0];
    for (double c : candidates)
        if (std::abs(c) > std::abs(best)) best = c;
    return best;
}

namespace detail {

inline void describe(TestResult& r, const std::vector<std::span<const double>>& groups) {
    for (const auto& g : groups) {
        r.group_means.push_back(mean(g));
        r.group_medians.push_back(median(g));
        r.group_sds.push_back(sample_sd(g));
    }
    if (groups.size() == 2 || groups.size() == 3) r.diff_of_means = difference_of_means(r.group_means);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Wilcoxon rank-sum / Mann-Whitney U

struct RankSumOptions {
    Method method = Method::automatic;
    /// Exact distribution is used when min(|a|,|b|) is at most this and no ties occur.
    std::size_t exact_max_min_group = 10;
    bool continuity = true;
};

/// Exact two-sided p of the rank-sum of the first `n1` entries of `ranks`
/// under random relabelling. Works on doubled mid-ranks so ties are exact too.
inline double rank_sum_exact_p(std::span<const double> ranks, std::size_t n1) {
    const std::size_t n = ranks.size();
    std::vector<std::int64_t> doubled(n);
    for (std::size_t i = 0; i < n; ++i) doubled[i] = std::llround(2.0 * ranks[i]);
    std::int64_t observed = 0;
    for (std::size_t i = 0; i < n1; ++i) observed += doubled[i];

    // Use the smaller side for the subset-count table.
    std::size_t k = n1;
    if (n - n1 < n1) {
        k = n - n1;
        const std::int64_t total = std::accumulate(doubled.begin(), doubled.end(), std::int64_t{0});
        observed = total - observed;
    }
    std::vector<std::int64_t> sorted = doubled;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::int64_t max_sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), std::int64_t{0});

    // ways[j][s]: number of j-subsets with doubled-rank sum s
    const std::size_t width = static_cast<std::size_t>(max_sum) + 1;
    std::vector<double> ways((k + 1) * width, 0.0);
    ways[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(doubled[i]);
        for (std::size_t j = std::min(k, i + 1); j >= 1; --j) {
            double* dst = &ways[j * width];
            const double* src = &ways[(j - 1) * width];
            for (std::size_t s = width; s-- > r;) dst[s] += src[s - r];
        }
    }
    double total = 0.0, lower = 0.0, upper = 0.0;
    const double* row = &ways[k * width];
    for (std::size_t s = 0; s < width; ++s) {
        total += row[s];
        if (static_cast<std::int64_t>(s) <= observed) lower += row[s];
        if (static_cast<std::int64_t>(s) >= observed) upper += row[s];
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

/// Two-sided rank-sum test. The statistic is U of the first sample.
inline TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, const RankSumOptions& opt = {}) {
    if (a.empty() || b.empty()) throw EmptyGroup("wilcoxon_rank_sum: both groups must be non-empty");
    if (a.size() + b.size() < 3) throw EmptyGroup("wilcoxon_rank_sum: need at least 3 observations");

    TestResult r;
    r.kind = TestKind::wilcoxon;
    detail::describe(r, {a, b});

    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);
    const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size()), n = n1 + n2;
    const double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
    const double u = r1 - n1 * (n1 + 1.0) / 2.0;
    r.statistic = u;

    const auto ties = tie_sizes(pooled);
    bool exact = false;
    switch (opt.method) {
        case Method::exact: exact = true; break;
        case Method::normal: exact = false; break;
        default: exact = ties.empty() && std::min(a.size(), b.size()) <= opt.exact_max_min_group;
    }

    if (exact) {
        r.p_value = rank_sum_exact_p(ranks, a.size());
        r.exact = true;
    } else {
        double tie_term = 0.0;
        for (std::size_t t : ties) tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
        const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
        if (var <= 0.0) {
            r.p_value = 1.0;
            r.degenerate = true;
        } else {
            const double dev = std::abs(u - n1 * n2 / 2.0) - (opt.continuity ? 0.5 : 0.0);
            const double z = std::max(0.0, dev) / std::sqrt(var);
            r.p_value = std::min(1.0, 2.0 * special::normal_sf(z));
        }
    }
    r.stars = stars(r.p_value);
    return r;
}

// ---------------------------------------------------------------------------
// Kruskal-Wallis

inline TestResult kruskal_wallis(const std::vector<std::span<const double>>& groups) {
    if (groups.size() < 2) throw EmptyGroup("kruskal_wallis: need at least 2 groups");
    std::vector<double> pooled;
    for (const auto& g : groups) {
        if (g.empty()) throw EmptyGroup("kruskal_wallis: empty group");
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const double n = static_cast<double>(pooled.size());
    if (pooled.size() < 4) throw EmptyGroup("kruskal_wallis: need at least 4 observations");

    TestResult r;
    r.kind = TestKind::kruskal_wallis;
    detail::describe(r, groups);

    double tie_term = 0.0;
    for (std::size_t t : tie_sizes(pooled)) tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
    const double correction = 1.0 - tie_term / (n * n * n - n);
    if (correction <= 0.0) throw AllTied("kruskal_wallis: all observations are tied");

    const auto ranks = midranks(pooled);
    const double centre = (n + 1.0) / 2.0;
    double h = 0.0;
    std::size_t offset = 0;
    for (const auto& g : groups) {
        const double sum = std::accumulate(ranks.begin() + static_cast<std::ptrdiff_t>(offset),
                                           ranks.begin() + static_cast<std::ptrdiff_t>(offset + g.size()), 0.0);
        const double ni = static_cast<double>(g.size());
        const double dev = sum / ni - centre;
        h += ni * dev * dev;
        offset += g.size();
    }
    h *= 12.0 / (n * (n + 1.0));
    h /= correction;

    r.statistic = h;
    r.p_value = special::chi_square_sf(h, static_cast<double>(groups.size() - 1));
    r.stars = stars(r.p_value);
    return r;
}

// ---------------------------------------------------------------------------
// One-way ANOVA

/// F test of equal means. Degenerate inputs are reported rather than thrown:
/// no spread within any group but different means gives F = inf, p = 0; all
/// values equal gives F = 0, p = 1.
inline TestResult anova_one_way(const std::vector<std::span<const double>>& groups) {
    if (groups.size() < 2) throw EmptyGroup("anova_one_way: need at least 2 groups");
    std::size_t total = 0;
    for (const auto& g : groups) {
        if (g.empty()) throw EmptyGroup("anova_one_way: empty group");
        total += g.size();
    }
    if (total <= groups.size()) throw DomainError("anova_one_way: need more observations than groups");

    TestResult r;
    r.kind = TestKind::anova;
    detail::describe(r, groups);

    double grand = 0.0;
    for (const auto& g : groups) grand += std::accumulate(g.begin(), g.end(), 0.0);
    grand /= static_cast<double>(total);

    double ssb = 0.0, ssw = 0.0;
    bool flat_within = true;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& g = groups[i];
        const double m = r.group_means[i];
        ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (double v : g) {
            ssw += (v - m) * (v - m);
            if (v != g[0]) flat_within = false;
        }
    }
    const double df1 = static_cast<double>(groups.size() - 1);
    const double df2 = static_cast<double>(total - groups.size());

    if (flat_within) {
        r.degenerate = true;
        bool same_means = true;
        for (const auto& g : groups)
            if (g[0] != groups[0][0]) same_means = false;
        r.statistic = same_means ? 0.0 : std::numeric_limits<double>::infinity();
        r.p_value = same_means ? 1.0 : 0.0;
    } else {
        r.statistic = (ssb / df1) / (ssw / df2);
        r.p_value = special::f_sf(r.statistic, df1, df2);
    }
    r.stars = stars(r.p_value);
    return r;
}

// ---------------------------------------------------------------------------
// Kendall tau-b

struct KendallOptions {
    Method method = Method::automatic;
    /// Exact permutation distribution for n at most this.
    std::size_t exact_max_n = 8;
    bool continuity = true;
};

struct CorrelationResult {
    double tau = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    bool exact = false;
};

namespace detail {

inline long long sign(double v) { return (v > 0.0) - (v < 0.0); }

/// S = concordant - discordant pairs.
inline long long kendall_s(std::span<const double> x, std::span<const double> y) {
    long long s = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) s += sign(x[j] - x[i]) * sign(y[j] - y[i]);
    return s;
}

/// Distribution of inversion counts over permutations of n distinct items.
inline std::vector<double> inversion_counts(std::size_t n) {
    std::vector<double> c{1.0};
    for (std::size_t m = 2; m <= n; ++m) {
        std::vector<double> next(c.size() + m - 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t add = 0; add < m; ++add) next[i + add] += c[i];
        c = std::move(next);
    }
    return c;
}

inline double kendall_exact_p(std::span<const double> x, std::span<const double> y, long long observed) {
    const std::size_t n = x.size();
    const long long target = observed < 0 ? -observed : observed;
    if (tie_sizes(x).empty() && tie_sizes(y).empty()) {
        // S = n0 - 2 * inversions for untied data.
        const auto counts = inversion_counts(n);
        const long long n0 = static_cast<long long>(n * (n - 1) / 2);
        double hit = 0.0, all = 0.0;
        for (std::size_t inv = 0; inv < counts.size(); ++inv) {
            const long long s = n0 - 2 * static_cast<long long>(inv);
            all += counts[inv];
            if ((s < 0 ? -s : s) >= target) hit += counts[inv];
        }
        return hit / all;
    }
    // Ties: walk the distinct arrangements of y; each is equally likely.
    std::vector<double> perm(y.begin(), y.end());
    std::sort(perm.begin(), perm.end());
    double hit = 0.0, all = 0.0;
    do {
        const long long s = kendall_s(x, perm);
        all += 1.0;
        if ((s < 0 ? -s : s) >= target) hit += 1.0;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return hit / all;
}

}  // namespace detail

/// Kendall's tau-b with tie correction in both variables; two-sided p from the
/// exact permutation distribution for small n, otherwise the tie-adjusted
/// normal approximation with a continuity correction of 1 on S.
inline CorrelationResult kendall_tau_b(std::span<const double> x, std::span<const double> y, const KendallOptions& opt = {}) {
    if (x.size() != y.size()) throw DomainError("kendall_tau_b: sequences differ in length");
    if (x.size() < 2) throw DomainError("kendall_tau_b: need at least 2 pairs");
    const std::size_t n = x.size();
    const double nd = static_cast<double>(n);
    const auto tx = tie_sizes(x);
    const auto ty = tie_sizes(y);

    const double n0 = nd * (nd - 1.0) / 2.0;
    double n1 = 0.0, n2 = 0.0;
    for (std::size_t t : tx) n1 += static_cast<double>(t) * (t - 1.0) / 2.0;
    for (std::size_t t : ty) n2 += static_cast<double>(t) * (t - 1.0) / 2.0;
    if (n1 == n0 || n2 == n0) throw AllTied("kendall_tau_b: a sequence is constant");

    const long long s = detail::kendall_s(x, y);
    CorrelationResult r;
    r.n = n;
    r.tau = static_cast<double>(s) / std::sqrt((n0 - n1) * (n0 - n2));

    bool exact = false;
    switch (opt.method) {
        case Method::exact: exact = true; break;
        case Method::normal: exact = false; break;
        default: exact = n <= opt.exact_max_n;
    }
    if (exact) {
        if (n > 12) throw DomainError("kendall_tau_b: exact enumeration is limited to n <= 12");
        r.p_value = detail::kendall_exact_p(x, y, s);
        r.exact = true;
        return r;
    }

    auto sum_over = [](const std::vector<std::size_t>& ts, auto f) {
        double acc = 0.0;
        for (std::size_t t : ts) acc += f(static_cast<double>(t));
        return acc;
    };
    const double v0 = nd * (nd - 1.0) * (2.0 * nd + 5.0);
    const double vt = sum_over(tx, [](double t) { return t * (t - 1.0) * (2.0 * t + 5.0); });
    const double vu = sum_over(ty, [](double t) { return t * (t - 1.0) * (2.0 * t + 5.0); });
    double v1 = 0.0, v2 = 0.0;
    if (n > 2)
        v1 = sum_over(tx, [](double t) { return t * (t - 1.0) * (t - 2.0); }) *
             sum_over(ty, [](double t) { return t * (t - 1.0) * (t - 2.0); }) / (9.0 * nd * (nd - 1.0) * (nd - 2.0));
    v2 = sum_over(tx, [](double t) { return t * (t - 1.0); }) * sum_over(ty, [](double t) { return t * (t - 1.0); }) /
         (2.0 * nd * (nd - 1.0));
    const double var = (v0 - vt - vu) / 18.0 + v1 + v2;
    const double dev = std::abs(static_cast<double>(s)) - (opt.continuity ? 1.0 : 0.0);
    const double z = std::max(0.0, dev) / std::sqrt(var);
    r.p_value = std::min(1.0, 2.0 * special::normal_sf(z));
    return r;
}

// ---------------------------------------------------------------------------
// Cosine similarity after min-max normalization and mean-centering

inline double cosine_similarity_normalized(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DomainError("cosine_similarity_normalized: sequences differ in length");
    if (x.size() < 2) throw DomainError("cosine_similarity_normalized: need at least 2 values");
    auto prepare = [](std::span<const double> v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        if (*lo == *hi) throw ConstantVector("cosine_similarity_normalized: constant sequence");
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
        const double m = mean(out);
        for (double& e : out) e -= m;
        return out;
    };
    const auto a = prepare(x);
    const auto b = prepare(y);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

// ---------------------------------------------------------------------------
// Correlation / similarity matrix

struct CorrelationCell {
    double tau = std::nan("");
    double p_value = std::nan("");
    Stars stars = Stars::none;
    double cosine = std::nan("");
    bool tau_valid = false;
    bool cosine_valid = false;
};

/// Square matrix over ES1..ES20, BQ1, BQ5, BQ6, BQ7. Cells that cannot be
/// computed (a constant variable) carry valid = false instead of failing.
struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<CorrelationCell> cells;  // row-major, names.size()^2

    std::size_t size() const noexcept { return names.size(); }
    const CorrelationCell& at(std::size_t i, std::size_t j) const { return cells[i * names.size() + j]; }
};

inline std::vector<std::pair<std::string, std::vector<double>>> correlation_variables(const Cohort& cohort) {
    std::vector<std::pair<std::string, std::vector<double>>> vars;
    for (std::size_t k = 0; k < kStatementCount; ++k) vars.emplace_back(statement_name(k), cohort.ratings(k));
    for (int b : {1, 5, 6, 7}) {
        const auto a = cohort.answers(BqId(b));
        vars.emplace_back(BqId(b).name(), std::vector<double>(a.begin(), a.end()));
    }
    return vars;
}

inline CorrelationMatrix correlation_matrix(const Cohort& cohort, unsigned threads = 1) {
    const auto vars = correlation_variables(cohort);
    const std::size_t m = vars.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) pairs.emplace_back(i, j);

    const auto computed = parallel_map(pairs.size(), threads, [&](std::size_t t) {
        const auto [i, j] = pairs[t];
        CorrelationCell c;
        try {
            const auto r = kendall_tau_b(vars[i].second, vars[j].second);
            c.tau = r.tau;
            c.p_value = r.p_value;
            c.stars = stars(r.p_value);
            c.tau_valid = true;
        } catch (const Error&) {
        }
        try {
            c.cosine = cosine_similarity_normalized(vars[i].second, vars[j].second);
            c.cosine_valid = true;
        } catch (const Error&) {
        }
        return c;
    });

    CorrelationMatrix out;
    for (const auto& v : vars) out.names.push_back(v.first);
    out.cells.resize(m * m);
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        const auto [i, j] = pairs[t];
        out.cells[i * m + j] = computed[t];
        out.cells[j * m + i] = computed[t];
    }
    return out;
}

}  // namespace mlia::stats
