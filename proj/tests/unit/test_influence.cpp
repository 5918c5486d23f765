#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "mlia/influence.hpp"
#include "support.hpp"

using namespace mlia;

namespace {

stats::TestResult fake(double p, double diff) {
    stats::TestResult r;
    r.p_value = p;
    r.stars = stats::stars(p);
    r.diff_of_means = diff;
    return r;
}

Cohort small_cohort(std::size_t n, std::uint64_t seed) {
    auto c = testing_support::published_cohort(seed);
    c.respondents.resize(n);
    return c;
}

}  // namespace

TEST(RankSignificant, OrderAndTieBreaks) {
    std::vector<stats::TestResult> t(kStatementCount, fake(0.5, 0.0));
    t[3] = fake(0.01, 0.05);
    t[7] = fake(0.001, 0.02);
    t[9] = fake(0.01, -0.09);  // same p as ES4, larger |diff|
    t[12] = fake(0.01, 0.05);  // ties ES4 on both keys, index decides
    t[15] = fake(0.051, 0.3);  // not significant
    EXPECT_EQ(rank_significant(t), (std::vector<std::size_t>{7, 9, 3, 12}));
}

TEST(AnalyzeStatistics, MatchesDirectTests) {
    const auto cohort = testing_support::published_cohort(2);
    const GroupingRule rule{BqId(1), 2, {7}};
    const auto a = analyze_statistics(cohort, rule);
    ASSERT_EQ(a.rank_tests.size(), kStatementCount);
    EXPECT_EQ(a.grouping.sizes, (std::vector<std::size_t>{263, 410}));
    EXPECT_DOUBLE_EQ(a.chance, 410.0 / 673.0);
    for (std::size_t k = 0; k < kStatementCount; ++k) {
        const auto groups = ratings_by_group(cohort, a.grouping, k);
        const auto w = stats::wilcoxon_rank_sum(groups[0], groups[1]);
        EXPECT_EQ(a.rank_tests[k].p_value, w.p_value);
        EXPECT_EQ(a.rank_tests[k].kind, stats::TestKind::wilcoxon);
        std::vector<std::span<const double>> spans(groups.begin(), groups.end());
        EXPECT_EQ(a.anova_tests[k].p_value, stats::anova_one_way(spans).p_value);
        EXPECT_NEAR(a.rank_tests[k].diff_of_means, stats::mean(groups[0]) - stats::mean(groups[1]), 1e-15);
    }
    for (std::size_t i = 1; i < a.ranked.size(); ++i)
        EXPECT_LE(a.rank_tests[a.ranked[i - 1]].p_value, a.rank_tests[a.ranked[i]].p_value);
    EXPECT_FALSE(a.experiment.has_value());
}

TEST(AnalyzeStatistics, ThreeGroupsUseKruskalWallis) {
    const auto cohort = testing_support::published_cohort(2);
    const auto a = analyze_statistics(cohort, GroupingRule{BqId(9), 3, {40, 60}});
    EXPECT_EQ(a.grouping.sizes, (std::vector<std::size_t>{225, 231, 217}));
    for (const auto& t : a.rank_tests) EXPECT_EQ(t.kind, stats::TestKind::kruskal_wallis);
    for (const auto& t : a.anova_tests) EXPECT_EQ(t.kind, stats::TestKind::anova);
}

TEST(AnalyzeStatistics, PlantedShiftFound) {
    const auto cohort = testing_support::planted_cohort(3);
    const auto a = analyze_statistics(cohort, GroupingRule{BqId(9), 2, {51}});
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_EQ(a.rank_tests[k].stars, stats::Stars::three) << k;
        EXPECT_GT(a.rank_tests[k].diff_of_means, 0.2);  // younger group first, shifted up
    }
    std::vector<std::size_t> top(a.ranked.begin(), a.ranked.begin() + 5);
    std::sort(top.begin(), top.end());
    EXPECT_EQ(top, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(AnalyzeStatistics, TiedStatementIsFlaggedNotFatal) {
    auto cohort = small_cohort(30, 4);
    for (auto& r : cohort.respondents) r.ratings[4] = 0.5;
    const auto a = analyze_statistics(cohort, GroupingRule{BqId(9), 2, {51}});
    EXPECT_TRUE(a.rank_tests[4].degenerate);
    EXPECT_TRUE(a.anova_tests[4].degenerate);
    EXPECT_EQ(a.rank_tests[4].p_value, 1.0);
    EXPECT_EQ(a.rank_tests[4].stars, stats::Stars::none);
    EXPECT_EQ(a.rank_tests[4].group_means, (std::vector<double>{0.5, 0.5}));
    EXPECT_FALSE(a.rank_tests[3].degenerate);
}

TEST(GroupingSeed, KeyedByName) {
    EXPECT_EQ(grouping_seed(5, "BQ1, two groups"), grouping_seed(5, "BQ1, two groups"));
    EXPECT_NE(grouping_seed(5, "BQ1, two groups"), grouping_seed(5, "BQ1, three groups"));
    EXPECT_NE(grouping_seed(5, "BQ1, two groups"), grouping_seed(6, "BQ1, two groups"));
}

TEST(Figures, Tables) {
    const auto cohort = testing_support::published_cohort(1);
    const auto f = figure_tables(cohort);
    std::map<int, std::size_t> bq1;
    for (const auto& r : cohort.respondents) ++bq1[r.background[BqId(1)]];
    ASSERT_EQ(f.at("fig2").size(), kStatementCount * bq1.size());
    for (const auto& row : f.at("fig2")) EXPECT_EQ(row.at("n").get<std::size_t>(), bq1.at(row.at("bq1").get<int>()));
    // ES20 against itself is zero
    for (const auto& row : f.at("fig2"))
        if (row.at("statement") == "ES20") EXPECT_EQ(row.at("delta_vs_es20").get<double>(), 0.0);

    std::map<std::pair<std::string, std::string>, double> totals;
    for (const auto& row : f.at("fig3"))
        totals[{row.at("statement"), row.at("bucket")}] += row.at("relative_frequency").get<double>();
    for (const auto& [key, sum] : totals) EXPECT_NEAR(sum, 1.0, 1e-12) << key.first << " " << key.second;
    EXPECT_TRUE(totals.count({"ES1", "all"}));
    EXPECT_TRUE(totals.count({"ES1", "BQ9=16-20"}));

    ASSERT_EQ(f.at("fig4").size(), kStatementCount);
    for (const auto& row : f.at("fig4"))
        EXPECT_NEAR(row.at("diff").get<double>(),
                    row.at("group1_mean").get<double>() - row.at("group2_mean").get<double>(), 1e-15);
}

TEST(Analyze, StatisticsOnlyReport) {
    const auto cohort = testing_support::published_cohort(1);
    TrainConfig cfg;
    cfg.threads = 2;
    AnalyzeOptions opts;
    opts.train = false;
    const auto rep = analyze(cohort, default_grouping_rules(), cfg, opts);
    ASSERT_EQ(rep.groupings.size(), 13u);
    const auto j = to_json(rep);
    EXPECT_EQ(j.at("format"), "mlia-report/1");
    EXPECT_FALSE(j.at("trained").get<bool>());
    EXPECT_EQ(j.at("cohort").at("size"), 673);
    for (const auto& g : j.at("groupings")) {
        EXPECT_TRUE(g.at("metrics").is_null());
        EXPECT_TRUE(g.at("delta").is_null());
        EXPECT_EQ(g.at("rank_tests").size(), 20u);
    }
    // significance index is the transpose of the per-grouping lists
    std::size_t from_groupings = 0, from_index = 0;
    for (const auto& g : j.at("groupings")) from_groupings += g.at("significant").size();
    for (const auto& [es, names] : j.at("significance_index").items()) {
        from_index += names.size();
        for (const auto& name : names) {
            const auto it = std::find_if(j.at("groupings").begin(), j.at("groupings").end(),
                                         [&](const auto& g) { return g.at("name") == name; });
            ASSERT_NE(it, j.at("groupings").end());
            const auto& sig = it->at("significant");
            EXPECT_NE(std::find(sig.begin(), sig.end(), es), sig.end());
        }
    }
    EXPECT_EQ(from_groupings, from_index);
    const auto& corr = j.at("correlations");
    EXPECT_EQ(corr.at("cells").size(), corr.at("variables").size());
}

TEST(Analyze, TrainingIndependentOfThreadCount) {
    const auto cohort = small_cohort(48, 6);
    const std::vector<GroupingRule> rules{{BqId(9), 2, {51}}, {BqId(1), 3, {}}};
    TrainConfig cfg;
    cfg.sequences = 2;
    cfg.max_epochs = 2;
    cfg.patience = 1;
    cfg.seed = 3;
    cfg.threads = 1;
    std::size_t calls = 0;
    std::mutex mu;
    AnalyzeOptions opts;
    opts.progress = [&](const std::string&, const SequenceMetrics&) {
        std::lock_guard lock(mu);
        ++calls;
    };
    const auto one = to_json(analyze(cohort, rules, cfg, opts));
    EXPECT_EQ(calls, 4u);
    cfg.threads = 3;
    const auto three = to_json(analyze(cohort, rules, cfg));
    EXPECT_EQ(one.dump(), three.dump());

    for (const auto& g : one.at("groupings")) {
        const double mean_acc = g.at("metrics").at("val_acc").at("mean").get<double>();
        EXPECT_NEAR(g.at("delta").get<double>(), mean_acc - g.at("chance").get<double>(), 1e-15);
        EXPECT_EQ(g.at("findings").at("above_chance").get<bool>(), g.at("delta").get<double>() > 0.02);
        EXPECT_EQ(g.at("sequences").size(), 2u);
    }
    EXPECT_TRUE(one.at("groupings")[1].at("automatic").get<bool>());
}

TEST(Analyze, AddingAGroupingLeavesOthersUnchanged) {
    const auto cohort = small_cohort(40, 8);
    TrainConfig cfg;
    cfg.sequences = 1;
    cfg.max_epochs = 1;
    cfg.patience = 1;
    cfg.threads = 1;
    const GroupingRule a{BqId(9), 2, {51}}, b{BqId(1), 2, {}};
    const auto alone = to_json(analyze(cohort, {a}, cfg));
    const auto both = to_json(analyze(cohort, {b, a}, cfg));
    EXPECT_EQ(alone.at("groupings")[0].at("sequences"), both.at("groupings")[1].at("sequences"));
}
