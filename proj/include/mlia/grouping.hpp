#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlia/dataset.hpp"
#include "mlia/error.hpp"

namespace mlia {

/// A partition of a cohort into 2 or 3 groups by thresholding one answer.
/// Group k holds answers in [cuts[k-1], cuts[k]) with open outer bounds.
struct Grouping {
    BqId bq;
    std::vector<int> cuts;
    std::vector<int> labels;        // per respondent, cohort order
    std::vector<std::size_t> sizes;

    std::size_t arity() const noexcept { return cuts.size() + 1; }

    /// "BQ1, two groups"
    std::string name() const { return bq.name() + (arity() == 2 ? ", two groups" : ", three groups"); }

    /// "BQ1, two groups: x<7 (n1=263), x>=7 (n2=410)"
    std::string description() const {
        std::string s = name() + ": ";
        for (std::size_t k = 0; k < arity(); ++k) {
            if (k) s += ", ";
            std::string range;
            if (k == 0) range = "x<" + std::to_string(cuts[0]);
            else if (k + 1 == arity()) range = "x>=" + std::to_string(cuts[k - 1]);
            else range = std::to_string(cuts[k - 1]) + "<=x<" + std::to_string(cuts[k]);
            s += range + " (n" + std::to_string(k + 1) + "=" + std::to_string(sizes[k]) + ")";
        }
        return s;
    }
};

inline int group_of(int answer, const std::vector<int>& cuts) {
    return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), answer) - cuts.begin());
}

inline Grouping group_by_explicit_thresholds(const Cohort& cohort, BqId bq, std::vector<int> cuts) {
    if (cuts.empty() || cuts.size() > 2) throw DegenerateGrouping("a grouping needs 1 or 2 cuts");
    for (std::size_t i = 1; i < cuts.size(); ++i)
        if (cuts[i] <= cuts[i - 1]) throw DegenerateGrouping("cuts must be strictly ascending");

    Grouping g;
    g.bq = bq;
    g.cuts = std::move(cuts);
    g.sizes.assign(g.arity(), 0);
    g.labels.reserve(cohort.size());
    for (const auto& r : cohort.respondents) {
        const int k = group_of(r.background[bq], g.cuts);
        g.labels.push_back(k);
        ++g.sizes[static_cast<std::size_t>(k)];
    }
    for (std::size_t k = 0; k < g.arity(); ++k)
        if (g.sizes[k] == 0) throw DegenerateGrouping(g.name() + ": group " + std::to_string(k + 1) + " is empty");
    return g;
}

/// Group 1 = answers strictly below the mean answer, group 2 = the rest. With
/// integer answers the effective cut is ceil(mean); computed exactly in integers.
inline Grouping group_two_by_mean(const Cohort& cohort, BqId bq) {
    const auto answers = cohort.answers(bq);
    long long sum = 0;
    for (int a : answers) sum += a;
    const long long n = static_cast<long long>(answers.size());
    // smallest integer c with c*n >= sum
    long long cut = sum / n;
    if (cut * n < sum) ++cut;
    return group_by_explicit_thresholds(cohort, bq, {static_cast<int>(cut)});
}

/// Among all partitions into three contiguous answer ranges, the one with the
/// smallest (largest group - smallest group); ties go to the lexicographically
/// smallest cut pair. Cuts are drawn from the observed answer values.
inline Grouping group_three_most_even(const Cohort& cohort, BqId bq) {
    std::map<int, std::size_t> hist;
    for (const auto& r : cohort.respondents) ++hist[r.background[bq]];
    if (hist.size() < 3) throw DegenerateGrouping(bq.name() + ": fewer than 3 distinct answers");

    std::vector<int> values;
    std::vector<std::size_t> prefix{0};
    for (const auto& [v, c] : hist) {
        values.push_back(v);
        prefix.push_back(prefix.back() + c);
    }
    const std::size_t m = values.size();
    const std::size_t total = prefix.back();

    std::optional<std::pair<std::size_t, std::pair<int, int>>> best;
    for (std::size_t a = 1; a + 1 < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            const std::size_t s1 = prefix[a], s2 = prefix[b] - prefix[a], s3 = total - prefix[b];
            const std::size_t spread = std::max({s1, s2, s3}) - std::min({s1, s2, s3});
            const std::pair<int, int> cut{values[a], values[b]};
            if (!best || spread < best->first || (spread == best->first && cut < best->second)) best = {spread, cut};
        }
    }
    return group_by_explicit_thresholds(cohort, bq, {best->second.first, best->second.second});
}

/// Probability of being right by always predicting the largest group.
inline double chance_baseline(const Grouping& g) {
    std::size_t total = 0, largest = 0;
    for (std::size_t s : g.sizes) {
        total += s;
        largest = std::max(largest, s);
    }
    return static_cast<double>(largest) / static_cast<double>(total);
}

/// One entry of a grouping configuration: explicit cuts, or the automatic rule
/// for its arity when `cuts` is empty.
struct GroupingRule {
    BqId bq;
    std::size_t arity = 2;
    std::vector<int> cuts;

    bool automatic() const noexcept { return cuts.empty(); }
};

inline Grouping apply_rule(const Cohort& cohort, const GroupingRule& rule) {
    if (rule.automatic()) return rule.arity == 2 ? group_two_by_mean(cohort, rule.bq) : group_three_most_even(cohort, rule.bq);
    return group_by_explicit_thresholds(cohort, rule.bq, rule.cuts);
}

/// The thirteen groupings of the published influence table, with its explicit cuts.
inline std::vector<GroupingRule> default_grouping_rules() {
    return {
        {BqId(1), 2, {7}},      {BqId(1), 3, {6, 8}}, {BqId(2), 2, {2}},      {BqId(4), 2, {2}},
        {BqId(5), 2, {7}},      {BqId(5), 3, {6, 8}}, {BqId(6), 2, {7}},      {BqId(6), 3, {6, 8}},
        {BqId(7), 2, {7}},      {BqId(7), 3, {6, 8}}, {BqId(8), 2, {2}},      {BqId(9), 2, {51}},
        {BqId(9), 3, {40, 60}},
    };
}

// JSON: [ {"bq": "BQ1", "arity": 2, "cuts": [7]}, {"bq": "BQ5", "arity": 3, "cuts": "auto"}, ... ]
inline GroupingRule grouping_rule_from_json(const nlohmann::json& j) {
    try {
        GroupingRule rule;
        rule.bq = BqId::parse(j.at("bq").get<std::string>());
        rule.arity = j.at("arity").get<std::size_t>();
        if (rule.arity != 2 && rule.arity != 3) throw ValidationError("arity must be 2 or 3");
        const auto& c = j.at("cuts");
        if (c.is_string()) {
            if (c.get<std::string>() != "auto") throw ValidationError("cuts must be a list or \"auto\"");
        } else {
            rule.cuts = c.get<std::vector<int>>();
            if (rule.cuts.size() + 1 != rule.arity) throw ValidationError(rule.bq.name() + ": cut count does not match arity");
        }
        return rule;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed grouping entry: ") + e.what());
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
}

inline std::vector<GroupingRule> grouping_rules_from_json(const nlohmann::json& j) {
    std::vector<GroupingRule> rules;
    if (j.is_object()) {
        rules.push_back(grouping_rule_from_json(j));
        return rules;
    }
    if (!j.is_array()) throw ValidationError("grouping configuration must be a list");
    for (const auto& e : j) rules.push_back(grouping_rule_from_json(e));
    return rules;
}

inline nlohmann::json to_json(const GroupingRule& rule) {
    nlohmann::json j{{"bq", rule.bq.name()}, {"arity", rule.arity}};
    if (rule.automatic()) j["cuts"] = "auto";
    else j["cuts"] = rule.cuts;
    return j;
}

}  // namespace mlia
