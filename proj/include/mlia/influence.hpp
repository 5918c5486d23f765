#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlia/dataset.hpp"
#include "mlia/encoder.hpp"
#include "mlia/error.hpp"
#include "mlia/grouping.hpp"
#include "mlia/parallel.hpp"
#include "mlia/rng.hpp"
#include "mlia/stats.hpp"
#include "mlia/trainer.hpp"

namespace mlia {

struct GroupingAnalysis {
    GroupingRule rule;
    Grouping grouping;
    std::vector<stats::TestResult> rank_tests;   // one per ES: Wilcoxon (2 groups) or Kruskal-Wallis (3)
    std::vector<stats::TestResult> anova_tests;  // one per ES
    std::optional<ExperimentResult> experiment;
    double chance = 0.0;
    std::optional<double> delta;        // mean val_acc - chance
    std::vector<std::size_t> ranked;    // significant ES, ranked
};

/// ES indices with stars, ordered by p ascending, |diff| descending, index.
inline std::vector<std::size_t> rank_significant(const std::vector<stats::TestResult>& tests) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < tests.size(); ++k)
        if (tests[k].stars != stats::Stars::none) idx.push_back(k);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (tests[a].p_value != tests[b].p_value) return tests[a].p_value < tests[b].p_value;
        const double da = std::abs(tests[a].diff_of_means), db = std::abs(tests[b].diff_of_means);
        if (da != db) return da > db;
        return a < b;
    });
    return idx;
}

/// Ratings of statement k split by group label.
inline std::vector<std::vector<double>> ratings_by_group(const Cohort& cohort, const Grouping& g, std::size_t k) {
    std::vector<std::vector<double>> groups(g.arity());
    for (std::size_t i = 0; i < cohort.size(); ++i)
        groups[static_cast<std::size_t>(g.labels[i])].push_back(cohort.respondents[i].ratings[k]);
    return groups;
}

namespace detail {

/// Runs a test; data that admit no test (all ratings tied) yield a flagged
/// result with p = 1 instead of an exception.
template <typename Fn>
stats::TestResult guarded_test(stats::TestKind kind, const std::vector<std::span<const double>>& groups, Fn&& fn) {
    try {
        return fn();
    } catch (const Error&) {
        stats::TestResult r;
        r.kind = kind;
        for (const auto& g : groups) {
            r.group_means.push_back(stats::mean(g));
            r.group_medians.push_back(stats::median(g));
            r.group_sds.push_back(stats::sample_sd(g));
        }
        if (groups.size() == 2 || groups.size() == 3) r.diff_of_means = stats::difference_of_means(r.group_means);
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.degenerate = true;
        return r;
    }
}

}  // namespace detail

/// Per-ES rank test and ANOVA for one grouping (no training).
inline GroupingAnalysis analyze_statistics(const Cohort& cohort, const Grouping& g, const GroupingRule& rule) {
    GroupingAnalysis a;
    a.rule = rule;
    a.grouping = g;
    a.chance = chance_baseline(g);
    for (std::size_t k = 0; k < kStatementCount; ++k) {
        const auto groups = ratings_by_group(cohort, g, k);
        std::vector<std::span<const double>> spans(groups.begin(), groups.end());
        if (g.arity() == 2)
            a.rank_tests.push_back(detail::guarded_test(stats::TestKind::wilcoxon, spans,
                                                        [&] { return stats::wilcoxon_rank_sum(spans[0], spans[1]); }));
        else
            a.rank_tests.push_back(detail::guarded_test(stats::TestKind::kruskal_wallis, spans,
                                                        [&] { return stats::kruskal_wallis(spans); }));
        a.anova_tests.push_back(detail::guarded_test(stats::TestKind::anova, spans, [&] { return stats::anova_one_way(spans); }));
    }
    a.ranked = rank_significant(a.rank_tests);
    return a;
}

inline GroupingAnalysis analyze_statistics(const Cohort& cohort, const GroupingRule& rule) {
    return analyze_statistics(cohort, apply_rule(cohort, rule), rule);
}

/// Master seed of a grouping's sequences: keyed by its name so adding or
/// reordering groupings leaves the others unchanged.
inline std::uint64_t grouping_seed(std::uint64_t master, const std::string& grouping_name) {
    return derive_seed(master, fnv1a(grouping_name));
}

inline void attach_experiment(GroupingAnalysis& a, ExperimentResult r) {
    a.delta = r.aggregate.val_acc.mean - a.chance;
    a.experiment = std::move(r);
}

/// Statistics plus training for one grouping.
inline GroupingAnalysis analyze_grouping(const Cohort& cohort, const Grouping& g, const TrainConfig& cfg,
                                         const GroupingRule& rule) {
    GroupingAnalysis a = analyze_statistics(cohort, g, rule);
    TrainConfig c = cfg;
    c.seed = grouping_seed(cfg.seed, g.name());
    attach_experiment(a, run_experiment(make_image_set(cohort, g), c));
    return a;
}

inline GroupingAnalysis analyze_grouping(const Cohort& cohort, const Grouping& g, const TrainConfig& cfg) {
    return analyze_grouping(cohort, g, cfg, GroupingRule{g.bq, g.arity(), g.cuts});
}

// ---------------------------------------------------------------------------
// Figure data

namespace detail {

struct AgeBucket {
    int lo;
    std::optional<int> hi;
    std::string label() const { return "BQ9=" + std::to_string(lo) + (hi ? "-" + std::to_string(*hi) : "+"); }
    bool contains(int age) const { return age >= lo && (!hi || age < *hi); }
};

inline std::vector<AgeBucket> age_buckets() {
    return {{16, 20}, {20, 30}, {30, 40}, {40, 50}, {50, 60}, {60, 70}, {70, 80}, {80, 90}, {90, std::nullopt}};
}

}  // namespace detail

/// Rows of the three figure tables as JSON arrays.
inline nlohmann::json figure_tables(const Cohort& cohort) {
    const BqId bq1(1), bq9(9);
    std::map<int, std::vector<std::size_t>> by_bq1;
    for (std::size_t i = 0; i < cohort.size(); ++i) by_bq1[cohort.respondents[i].background[bq1]].push_back(i);

    auto mean_of = [&](std::size_t k, const std::vector<std::size_t>& members) {
        double s = 0.0;
        for (std::size_t i : members) s += cohort.respondents[i].ratings[k];
        return s / static_cast<double>(members.size());
    };

    // Rating means per BQ1 answer, with the increase over ES20 at the same answer.
    nlohmann::json fig2 = nlohmann::json::array();
    for (std::size_t k = 0; k < kStatementCount; ++k)
        for (const auto& [value, members] : by_bq1) {
            const double m = mean_of(k, members);
            fig2.push_back({{"statement", statement_name(k)}, {"bq1", value}, {"n", members.size()}, {"mean", m},
                            {"delta_vs_es20", m - mean_of(kStatementCount - 1, members)}});
        }

    // Relative frequency of each rating value per bucket.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> buckets;
    {
        std::vector<std::size_t> all(cohort.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        buckets.emplace_back("all", std::move(all));
    }
    for (const auto& [value, members] : by_bq1) buckets.emplace_back("BQ1=" + std::to_string(value), members);
    for (const auto& b : detail::age_buckets()) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < cohort.size(); ++i)
            if (b.contains(cohort.respondents[i].background[bq9])) members.push_back(i);
        if (!members.empty()) buckets.emplace_back(b.label(), std::move(members));
    }
    nlohmann::json fig3 = nlohmann::json::array();
    for (std::size_t k = 0; k < kStatementCount; ++k)
        for (const auto& [label, members] : buckets) {
            std::array<std::size_t, kRawRatingMax + 1> counts{};
            for (std::size_t i : members) ++counts[static_cast<std::size_t>(raw_rating(cohort.respondents[i].ratings[k]))];
            for (int v = 0; v <= kRawRatingMax; ++v)
                fig3.push_back({{"statement", statement_name(k)}, {"bucket", label}, {"rating", transform_rating(v)},
                                {"count", counts[static_cast<std::size_t>(v)]},
                                {"relative_frequency",
                                 static_cast<double>(counts[static_cast<std::size_t>(v)]) / static_cast<double>(members.size())}});
        }

    // Group means under the BQ1 mean split.
    nlohmann::json fig4 = nlohmann::json::array();
    try {
        const Grouping g = group_two_by_mean(cohort, bq1);
        for (std::size_t k = 0; k < kStatementCount; ++k) {
            const auto groups = ratings_by_group(cohort, g, k);
            const double m1 = stats::mean(groups[0]), m2 = stats::mean(groups[1]);
            fig4.push_back({{"statement", statement_name(k)}, {"grouping", g.description()}, {"group1_mean", m1},
                            {"group2_mean", m2}, {"diff", m1 - m2}});
        }
    } catch (const DegenerateGrouping&) {
        // a cohort with a single BQ1 answer has no split; the table stays empty
    }
    return {{"fig2", fig2}, {"fig3", fig3}, {"fig4", fig4}};
}

// ---------------------------------------------------------------------------
// Whole analysis

struct InfluenceReport {
    std::string source;
    std::size_t cohort_size = 0;
    TrainConfig config;
    bool trained = false;
    std::vector<GroupingAnalysis> groupings;
    stats::CorrelationMatrix correlations;
    nlohmann::json figures;
};

struct AnalyzeOptions {
    bool train = true;
    /// Called after each finished sequence with (grouping name, metrics).
    std::function<void(const std::string&, const SequenceMetrics&)> progress;
};

/// Steps 2-5: per-grouping tests, training, chance comparison, correlation
/// matrix and figure data. Sequences of all groupings form one task pool, so
/// the result does not depend on the worker count.
inline InfluenceReport analyze(const Cohort& cohort, const std::vector<GroupingRule>& rules, const TrainConfig& cfg,
                               const AnalyzeOptions& options = {}) {
    cfg.validate();
    InfluenceReport rep;
    rep.source = cohort.source;
    rep.cohort_size = cohort.size();
    rep.config = cfg;
    rep.trained = options.train;

    for (const auto& rule : rules) rep.groupings.push_back(analyze_statistics(cohort, rule));

    if (options.train) {
        std::vector<PreparedSet> sets;
        std::vector<TrainConfig> configs;
        for (const auto& a : rep.groupings) {
            sets.push_back(prepare(make_image_set(cohort, a.grouping)));
            detail::check_trainable(sets.back());
            TrainConfig c = cfg;
            c.seed = grouping_seed(cfg.seed, a.grouping.name());
            configs.push_back(c);
        }
        const std::size_t per = cfg.sequences;
        auto runs = parallel_map(sets.size() * per, cfg.worker_count(), [&](std::size_t t) {
            const std::size_t g = t / per, i = t % per;
            auto m = run_sequence(sets[g], configs[g], i);
            if (options.progress) options.progress(rep.groupings[g].grouping.name(), m);
            return m;
        });
        for (std::size_t g = 0; g < rep.groupings.size(); ++g) {
            ExperimentResult r;
            r.sequences.assign(std::make_move_iterator(runs.begin() + static_cast<std::ptrdiff_t>(g * per)),
                               std::make_move_iterator(runs.begin() + static_cast<std::ptrdiff_t>((g + 1) * per)));
            r.aggregate = aggregate(r.sequences);
            attach_experiment(rep.groupings[g], std::move(r));
        }
    }

    rep.correlations = stats::correlation_matrix(cohort, cfg.worker_count());
    rep.figures = figure_tables(cohort);
    return rep;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace detail

inline nlohmann::json to_json(const stats::TestResult& r) {
    nlohmann::json means = nlohmann::json::array(), medians = nlohmann::json::array(), sds = nlohmann::json::array();
    for (double v : r.group_means) means.push_back(detail::number_or_null(v));
    for (double v : r.group_medians) medians.push_back(detail::number_or_null(v));
    for (double v : r.group_sds) sds.push_back(detail::number_or_null(v));
    return {{"test", stats::to_string(r.kind)},
            {"statistic", detail::number_or_null(r.statistic)},
            {"p_value", r.p_value},
            {"stars", stats::to_string(r.stars)},
            {"diff_of_means", r.diff_of_means},
            {"group_means", means},
            {"group_medians", medians},
            {"group_sds", sds},
            {"exact", r.exact},
            {"degenerate", r.degenerate}};
}

inline nlohmann::json to_json(const stats::CorrelationMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.size(); ++j) {
            const auto& c = m.at(i, j);
            row.push_back({{"tau", c.tau_valid ? nlohmann::json(c.tau) : nlohmann::json(nullptr)},
                           {"p_value", c.tau_valid ? nlohmann::json(c.p_value) : nlohmann::json(nullptr)},
                           {"stars", stats::to_string(c.stars)},
                           {"cosine", c.cosine_valid ? nlohmann::json(c.cosine) : nlohmann::json(nullptr)}});
        }
        rows.push_back(row);
    }
    return {{"variables", m.names}, {"cells", rows}};
}

inline nlohmann::json to_json(const GroupingAnalysis& a, const TrainConfig& cfg) {
    const auto& g = a.grouping;
    nlohmann::json rank = nlohmann::json::array(), anova = nlohmann::json::array(), significant = nlohmann::json::array();
    for (const auto& t : a.rank_tests) rank.push_back(to_json(t));
    for (const auto& t : a.anova_tests) anova.push_back(to_json(t));
    for (std::size_t k : a.ranked) significant.push_back(statement_name(k));

    nlohmann::json top = nlohmann::json::array();
    for (std::size_t i = 0; i < a.ranked.size() && i < cfg.findings_top; ++i) top.push_back(statement_name(a.ranked[i]));

    nlohmann::json j{{"name", g.name()},
                     {"description", g.description()},
                     {"bq", g.bq.name()},
                     {"arity", g.arity()},
                     {"cuts", g.cuts},
                     {"automatic", a.rule.automatic()},
                     {"sizes", g.sizes},
                     {"chance", a.chance},
                     {"rank_tests", rank},
                     {"anova_tests", anova},
                     {"significant", significant}};
    if (a.experiment) {
        j["metrics"] = to_json(a.experiment->aggregate);
        nlohmann::json seqs = nlohmann::json::array();
        for (const auto& s : a.experiment->sequences) seqs.push_back(to_json(s));
        j["sequences"] = seqs;
        j["delta"] = *a.delta;
        j["findings"] = {{"delta", *a.delta},
                         {"top_significant", top},
                         {"delta_threshold", cfg.findings_delta_threshold},
                         {"above_chance", *a.delta > cfg.findings_delta_threshold}};
    } else {
        j["metrics"] = nullptr;
        j["delta"] = nullptr;
        j["findings"] = {{"delta", nullptr}, {"top_significant", top}, {"delta_threshold", cfg.findings_delta_threshold},
                         {"above_chance", nullptr}};
    }
    return j;
}

/// Canonical report document. Contains everything the renderers need.
inline nlohmann::json to_json(const InfluenceReport& rep) {
    nlohmann::json groupings = nlohmann::json::array();
    for (const auto& a : rep.groupings) groupings.push_back(to_json(a, rep.config));

    nlohmann::json index = nlohmann::json::object();
    for (std::size_t k = 0; k < kStatementCount; ++k) {
        nlohmann::json names = nlohmann::json::array();
        for (const auto& a : rep.groupings)
            if (std::find(a.ranked.begin(), a.ranked.end(), k) != a.ranked.end()) names.push_back(a.grouping.name());
        index[statement_name(k)] = names;
    }
    return {{"format", "mlia-report/1"},
            {"cohort", {{"source", rep.source}, {"size", rep.cohort_size}}},
            {"config", to_json(rep.config)},
            {"trained", rep.trained},
            {"groupings", groupings},
            {"significance_index", index},
            {"correlations", to_json(rep.correlations)},
            {"figures", rep.figures}};
}

}  // namespace mlia
