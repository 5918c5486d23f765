#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlia/dataset.hpp"
#include "mlia/error.hpp"
#include "mlia/rng.hpp"

namespace mlia {

enum class Sampling { quota, iid };

/// Distribution over a finite set of answer values. Either exact integer
/// counts (quota mode deals them out exactly) or probabilities.
struct AnswerDistribution {
    std::vector<int> values;
    std::vector<double> weights;
    bool weights_are_counts = false;
};

/// Distribution over the 11 raw rating values 0..10.
using RatingDistribution = std::array<double, kRawRatingMax + 1>;

/// Adds `shift` (0..1 scale) to the listed statements of respondents whose
/// answer to `bq` satisfies the condition; the result is clipped to [0,1]
/// and re-quantized to the 0.1 grid.
struct PlantedEffect {
    std::vector<std::size_t> statements;
    BqId bq;
    std::optional<int> below;
    std::optional<int> at_least;
    double shift = 0.0;

    bool applies(int answer) const {
        if (below && !(answer < *below)) return false;
        if (at_least && !(answer >= *at_least)) return false;
        return true;
    }
};

struct SynthSpec {
    std::size_t size = 0;
    Sampling sampling = Sampling::quota;
    std::map<BqId, AnswerDistribution> background;
    std::array<RatingDistribution, kStatementCount> ratings{};
    std::vector<PlantedEffect> effects;
    std::string id_prefix = "R";
};

/// Probabilities of Binomial(10, mean), a convenient single-parameter rating profile.
inline RatingDistribution binomial_rating_distribution(double mean) {
    if (!(mean >= 0.0 && mean <= 1.0)) throw InvalidSpec("binomial_mean must lie in [0,1]");
    RatingDistribution p{};
    for (int k = 0; k <= kRawRatingMax; ++k) {
        const double logc = std::lgamma(11.0) - std::lgamma(k + 1.0) - std::lgamma(11.0 - k);
        const double a = k == 0 ? 0.0 : k * std::log(mean);
        const double b = k == kRawRatingMax ? 0.0 : (kRawRatingMax - k) * std::log1p(-mean);
        p[k] = (mean == 0.0 && k > 0) || (mean == 1.0 && k < kRawRatingMax) ? 0.0 : std::exp(logc + a + b);
    }
    return p;
}

/// Integer counts summing to `total`, proportional to `probs` (largest remainder,
/// ties to the lower index).
inline std::vector<std::size_t> apportion(const std::vector<double>& probs, std::size_t total) {
    std::vector<std::size_t> counts(probs.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double exact = probs[i] * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        assigned += counts[i];
        remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; assigned < total && j < remainders.size(); ++j, ++assigned) ++counts[remainders[j].second];
    return counts;
}

namespace detail {

inline void check_probabilities(const std::vector<double>& w, const std::string& what) {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0)) throw InvalidSpec(what + ": negative or NaN probability");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidSpec(what + ": probabilities sum to " + std::to_string(sum));
}

}  // namespace detail

inline void validate(const SynthSpec& spec) {
    if (spec.size < 2) throw InvalidSpec("cohort size must be at least 2");
    for (BqId id : numeric_bqs()) {
        auto it = spec.background.find(id);
        if (it == spec.background.end()) throw InvalidSpec("no distribution for " + id.name());
        const auto& d = it->second;
        if (d.values.empty() || d.values.size() != d.weights.size())
            throw InvalidSpec(id.name() + ": values and weights must be non-empty and of equal length");
        for (int v : d.values) {
            const auto hi = id.max_value();
            if (v < id.min_value() || (hi && v > *hi))
                throw InvalidSpec(id.name() + ": value " + std::to_string(v) + " out of range");
        }
        if (d.weights_are_counts) {
            double sum = 0.0;
            for (double c : d.weights) {
                if (c < 0.0 || c != std::floor(c)) throw InvalidSpec(id.name() + ": counts must be non-negative integers");
                sum += c;
            }
            if (spec.sampling == Sampling::quota && sum != static_cast<double>(spec.size))
                throw InvalidSpec(id.name() + ": counts sum to " + std::to_string(static_cast<long long>(sum)) +
                                  ", cohort size is " + std::to_string(spec.size));
            if (sum <= 0.0) throw InvalidSpec(id.name() + ": counts sum to zero");
        } else {
            detail::check_probabilities(d.weights, id.name());
        }
    }
    for (std::size_t k = 0; k < kStatementCount; ++k)
        detail::check_probabilities(std::vector<double>(spec.ratings[k].begin(), spec.ratings[k].end()),
                                    statement_name(k));
    for (const auto& e : spec.effects) {
        if (!(e.shift >= -1.0 && e.shift <= 1.0)) throw InvalidSpec("planted shift must lie in [-1,1]");
        for (std::size_t s : e.statements)
            if (s >= kStatementCount) throw InvalidSpec("planted effect names an unknown statement");
    }
}

/// Deterministic for a given (spec, seed). Each background question and each
/// statement draws from its own derived stream, so planting effects never
/// perturbs the baseline draws.
inline Cohort synthesize_cohort(const SynthSpec& spec, std::uint64_t seed) {
    validate(spec);
    const std::size_t n = spec.size;

    Cohort cohort;
    cohort.source = "synthetic(seed=" + std::to_string(seed) + ")";
    cohort.respondents.resize(n);
    const std::size_t width = std::to_string(n).size();
    for (std::size_t i = 0; i < n; ++i) {
        std::string num = std::to_string(i + 1);
        cohort.respondents[i].id = spec.id_prefix + std::string(width - num.size(), '0') + num;
    }

    for (BqId id : numeric_bqs()) {
        const auto& d = spec.background.at(id);
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(id.number())));
        std::vector<double> probs = d.weights;
        if (d.weights_are_counts) {
            const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
            for (double& p : probs) p /= sum;
        }
        if (spec.sampling == Sampling::quota) {
            std::vector<std::size_t> counts;
            if (d.weights_are_counts) {
                for (double c : d.weights) counts.push_back(static_cast<std::size_t>(c));
            } else {
                counts = apportion(probs, n);
            }
            std::vector<int> deck;
            deck.reserve(n);
            for (std::size_t v = 0; v < counts.size(); ++v) deck.insert(deck.end(), counts[v], d.values[v]);
            rng.shuffle(std::span<int>(deck));
            for (std::size_t i = 0; i < n; ++i) cohort.respondents[i].background[id] = deck[i];
        } else {
            for (auto& r : cohort.respondents) r.background[id] = d.values[rng.categorical(probs)];
        }
    }

    for (std::size_t k = 0; k < kStatementCount; ++k) {
        Rng rng(derive_seed(seed, 100 + k));
        for (auto& r : cohort.respondents) r.ratings[k] = transform_rating(static_cast<int>(rng.categorical(spec.ratings[k])));
    }

    for (const auto& e : spec.effects) {
        for (auto& r : cohort.respondents) {
            if (!e.applies(r.background[e.bq])) continue;
            for (std::size_t k : e.statements) {
                const double raw = raw_rating(r.ratings[k]) + e.shift * kRawRatingMax;
                const double q = std::clamp(std::floor(raw + 0.5 + 1e-9), 0.0, static_cast<double>(kRawRatingMax));
                r.ratings[k] = transform_rating(static_cast<int>(q));
            }
        }
    }
    return cohort;
}

// JSON form:
// { "size": 673, "sampling": "quota" | "iid",
//   "background": { "BQ1": {"values": [...], "counts": [...]} | {"values": [...], "probs": [...]}, ... },
//   "ratings": { "default": {"probs": [11]} | {"binomial_mean": m}, "ES4": {...}, ... },
//   "effects": [ {"statements": ["ES9"], "bq": "BQ8", "below": 2, "at_least": 1, "shift": 0.3} ],
//   "id_prefix": "R" }
inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    try {
        SynthSpec spec;
        spec.size = j.at("size").get<std::size_t>();
        const std::string mode = j.value("sampling", "quota");
        if (mode == "quota") spec.sampling = Sampling::quota;
        else if (mode == "iid") spec.sampling = Sampling::iid;
        else throw InvalidSpec("sampling must be 'quota' or 'iid'");
        spec.id_prefix = j.value("id_prefix", "R");

        for (const auto& [name, dj] : j.at("background").items()) {
            AnswerDistribution d;
            d.values = dj.at("values").get<std::vector<int>>();
            if (dj.contains("counts")) {
                d.weights = dj.at("counts").get<std::vector<double>>();
                d.weights_are_counts = true;
            } else {
                d.weights = dj.at("probs").get<std::vector<double>>();
            }
            spec.background[BqId::parse(name)] = std::move(d);
        }

        auto rating_dist = [](const nlohmann::json& rj) -> RatingDistribution {
            if (rj.contains("binomial_mean")) return binomial_rating_distribution(rj.at("binomial_mean").get<double>());
            const auto v = rj.at("probs").get<std::vector<double>>();
            if (v.size() != kRawRatingMax + 1) throw InvalidSpec("rating probs need 11 entries");
            RatingDistribution p{};
            std::copy(v.begin(), v.end(), p.begin());
            return p;
        };
        const auto& rj = j.at("ratings");
        if (!rj.contains("default")) {
            for (std::size_t k = 0; k < kStatementCount; ++k)
                if (!rj.contains(statement_name(k))) throw InvalidSpec("ratings need 'default' or every ES");
        }
        for (std::size_t k = 0; k < kStatementCount; ++k) {
            const auto name = statement_name(k);
            spec.ratings[k] = rating_dist(rj.contains(name) ? rj.at(name) : rj.at("default"));
        }

        if (j.contains("effects")) {
            for (const auto& ej : j.at("effects")) {
                PlantedEffect e;
                for (const auto& s : ej.at("statements")) {
                    const auto name = s.get<std::string>();
                    std::size_t k = 0;
                    while (k < kStatementCount && statement_name(k) != name) ++k;
                    if (k == kStatementCount) throw InvalidSpec("unknown statement '" + name + "'");
                    e.statements.push_back(k);
                }
                e.bq = BqId::parse(ej.at("bq").get<std::string>());
                if (ej.contains("below")) e.below = ej.at("below").get<int>();
                if (ej.contains("at_least")) e.at_least = ej.at("at_least").get<int>();
                e.shift = ej.at("shift").get<double>();
                spec.effects.push_back(std::move(e));
            }
        }
        validate(spec);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidSpec(std::string("malformed synth spec: ") + e.what());
    } catch (const DomainError& e) {
        throw InvalidSpec(e.what());
    }
}

}  // namespace mlia
