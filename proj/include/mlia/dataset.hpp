#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mlia/csv.hpp"
#include "mlia/error.hpp"

namespace mlia {

inline constexpr std::size_t kStatementCount = 20;
inline constexpr int kRawRatingMax = 10;

/// Maps a 0..10 questionnaire answer to the 0..1 analysis scale.
inline double transform_rating(int raw) {
    if (raw < 0 || raw > kRawRatingMax) throw DomainError("raw rating " + std::to_string(raw) + " outside 0..10");
    return raw / 10.0;
}

/// Inverse of transform_rating for grid values.
inline int raw_rating(double rating) { return static_cast<int>(std::lround(rating * 10.0)); }

inline std::string statement_name(std::size_t index) { return "ES" + std::to_string(index + 1); }

/// A numerically coded background question (BQ3 is free text and has no id).
class BqId {
public:
    constexpr BqId() = default;
    explicit constexpr BqId(int number) : number_(number) {
        if (number < 1 || number > 9 || number == 3) throw DomainError("BQ" + std::to_string(number) + " is not numeric-coded");
    }

    static BqId parse(std::string_view name) {
        if (name.size() == 3 && (name[0] == 'B' || name[0] == 'b') && (name[1] == 'Q' || name[1] == 'q') &&
            name[2] >= '1' && name[2] <= '9' && name[2] != '3')
            return BqId(name[2] - '0');
        throw ValidationError("unknown background question '" + std::string(name) + "'");
    }

    constexpr int number() const noexcept { return number_; }
    std::string name() const { return "BQ" + std::to_string(number_); }

    /// Admissible answer range; age has no upper bound.
    constexpr int min_value() const noexcept { return number_ == 9 ? 16 : 1; }
    constexpr std::optional<int> max_value() const noexcept {
        switch (number_) {
            case 2: case 4: case 8: return 2;
            case 9: return std::nullopt;
            default: return 9;
        }
    }

    friend constexpr bool operator==(BqId, BqId) = default;
    friend constexpr auto operator<=>(BqId, BqId) = default;

private:
    int number_ = 1;
};

/// The numeric background questions in column order.
inline const std::array<BqId, 8>& numeric_bqs() {
    static const std::array<BqId, 8> ids{BqId(1), BqId(2), BqId(4), BqId(5), BqId(6), BqId(7), BqId(8), BqId(9)};
    return ids;
}

struct BackgroundAnswers {
    std::array<int, 9> values{};  // indexed by question number - 1; slot 2 (BQ3) unused
    /// BQ3 columns kept verbatim as (column name, cell text), never analyzed.
    std::vector<std::pair<std::string, std::string>> bq3;

    int operator[](BqId id) const { return values[static_cast<std::size_t>(id.number() - 1)]; }
    int& operator[](BqId id) { return values[static_cast<std::size_t>(id.number() - 1)]; }

    friend bool operator==(const BackgroundAnswers&, const BackgroundAnswers&) = default;
};

struct Respondent {
    std::string id;
    std::array<double, kStatementCount> ratings{};
    BackgroundAnswers background;

    friend bool operator==(const Respondent&, const Respondent&) = default;
};

struct Cohort {
    std::vector<Respondent> respondents;
    std::string source;

    std::size_t size() const noexcept { return respondents.size(); }

    std::vector<int> answers(BqId id) const {
        std::vector<int> out;
        out.reserve(respondents.size());
        for (const auto& r : respondents) out.push_back(r.background[id]);
        return out;
    }

    std::vector<double> ratings(std::size_t statement) const {
        std::vector<double> out;
        out.reserve(respondents.size());
        for (const auto& r : respondents) out.push_back(r.ratings[statement]);
        return out;
    }
};

struct ParseOptions {
    /// Ages at or above this value are stored as this value ("100 years or more").
    std::optional<int> age_top_code;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline int parse_int_cell(std::string_view cell, std::size_t row, const std::string& column) {
    cell = trim(cell);
    if (cell.empty()) throw OutOfRangeValue(row, column, "missing value");
    int v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw OutOfRangeValue(row, column, "'" + std::string(cell) + "' is not an integer");
    return v;
}

inline bool is_bq3_column(std::string_view name) {
    return name == "BQ3" || name.starts_with("BQ3_") || name.starts_with("BQ3.");
}

}  // namespace detail

/// Parses the cohort CSV. Required header columns: id, ES1..ES20, BQ1, BQ2,
/// BQ4..BQ9, in any order; BQ3 columns are optional. Ratings are transformed
/// to the 0..1 scale; row order is preserved.
inline Cohort parse_cohort(std::string_view text, const ParseOptions& options = {}) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw EmptyFile();

    const auto& header = rows.front();
    std::unordered_map<std::string, std::size_t> column;
    std::vector<std::size_t> bq3_columns;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name(detail::trim(header[c]));
        if (detail::is_bq3_column(name)) bq3_columns.push_back(c);
        if (!column.emplace(name, c).second) throw ValidationError("duplicate column '" + name + "'");
    }
    auto require = [&](const std::string& name) {
        auto it = column.find(name);
        if (it == column.end()) throw MissingColumn(name);
        return it->second;
    };

    const std::size_t id_col = require("id");
    std::array<std::size_t, kStatementCount> es_col{};
    for (std::size_t k = 0; k < kStatementCount; ++k) es_col[k] = require(statement_name(k));
    std::array<std::size_t, 8> bq_col{};
    for (std::size_t b = 0; b < numeric_bqs().size(); ++b) bq_col[b] = require(numeric_bqs()[b].name());

    if (rows.size() == 1) throw EmptyFile();

    Cohort cohort;
    cohort.respondents.reserve(rows.size() - 1);
    std::unordered_set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.size() != header.size())
            throw ValidationError("row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                                  " fields, found " + std::to_string(cells.size()));
        Respondent person;
        person.id = std::string(detail::trim(cells[id_col]));
        if (person.id.empty()) throw OutOfRangeValue(r, "id", "missing value");
        if (!seen.insert(person.id).second) throw DuplicateId(r, person.id);

        for (std::size_t k = 0; k < kStatementCount; ++k) {
            const std::string name = statement_name(k);
            const int raw = detail::parse_int_cell(cells[es_col[k]], r, name);
            if (raw < 0 || raw > kRawRatingMax)
                throw OutOfRangeValue(r, name, std::to_string(raw) + " outside 0..10");
            person.ratings[k] = transform_rating(raw);
        }
        for (std::size_t b = 0; b < numeric_bqs().size(); ++b) {
            const BqId id = numeric_bqs()[b];
            int v = detail::parse_int_cell(cells[bq_col[b]], r, id.name());
            if (id.number() == 9 && options.age_top_code && v > *options.age_top_code) v = *options.age_top_code;
            const auto hi = id.max_value();
            if (v < id.min_value() || (hi && v > *hi)) {
                const std::string range = std::to_string(id.min_value()) + ".." + (hi ? std::to_string(*hi) : "");
                throw OutOfRangeValue(r, id.name(), std::to_string(v) + " outside " + range);
            }
            person.background[id] = v;
        }
        for (std::size_t c : bq3_columns) person.background.bq3.emplace_back(header[c], cells[c]);
        cohort.respondents.push_back(std::move(person));
    }
    if (cohort.size() < 2) throw ValidationError("a cohort needs at least 2 respondents");
    return cohort;
}

inline Cohort read_cohort_file(const std::string& path, const ParseOptions& options = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    Cohort c = parse_cohort(buf.str(), options);
    c.source = path;
    return c;
}

/// Canonical CSV: id, ES1..ES20 (raw 0..10), BQ1, BQ2, BQ3 columns, BQ4..BQ9.
/// BQ3 columns are taken from the first respondent.
inline std::string write_cohort(const Cohort& cohort) {
    std::vector<std::string> bq3_names;
    if (!cohort.respondents.empty())
        for (const auto& [name, value] : cohort.respondents.front().background.bq3) bq3_names.push_back(name);

    csv::Row header{"id"};
    for (std::size_t k = 0; k < kStatementCount; ++k) header.push_back(statement_name(k));
    header.push_back("BQ1");
    header.push_back("BQ2");
    for (const auto& n : bq3_names) header.push_back(n);
    for (int b : {4, 5, 6, 7, 8, 9}) header.push_back("BQ" + std::to_string(b));

    std::string out;
    csv::append_row(out, header);
    for (const auto& p : cohort.respondents) {
        if (p.background.bq3.size() != bq3_names.size())
            throw ValidationError("respondent '" + p.id + "' has a different set of BQ3 columns");
        csv::Row row{p.id};
        for (double r : p.ratings) row.push_back(std::to_string(raw_rating(r)));
        row.push_back(std::to_string(p.background[BqId(1)]));
        row.push_back(std::to_string(p.background[BqId(2)]));
        for (const auto& [name, value] : p.background.bq3) row.push_back(value);
        for (int b : {4, 5, 6, 7, 8, 9}) row.push_back(std::to_string(p.background[BqId(b)]));
        csv::append_row(out, row);
    }
    return out;
}

}  // namespace mlia
