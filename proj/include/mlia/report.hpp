#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlia/csv.hpp"
#include "mlia/error.hpp"
#include "mlia/format.hpp"

namespace mlia::report {

inline const std::string kEmptySet = "—";

namespace detail {

inline double num(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

/// "M=0.58 Mdn=0.58 SD=0.02"; the epoch median prints as an integer.
inline std::string msd(const nlohmann::json& s, bool integer_median = false) {
    std::string median;
    if (integer_median) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", num(s.at("median")));
        median = buf;
    } else {
        median = fixed(num(s.at("median")));
    }
    return "M=" + fixed(num(s.at("mean"))) + " Mdn=" + median + " SD=" + fixed(num(s.at("sd")));
}

inline std::string statement_label(std::size_t k) { return "ES" + std::to_string(k + 1); }

inline std::size_t statement_index(const std::string& name) { return std::stoul(name.substr(2)) - 1; }

}  // namespace detail

/// "ES6 (0.07)**, ES8 (0.08)**" in ranked order, or the empty-set mark.
inline std::string significant_cell(const nlohmann::json& grouping) {
    const auto& sig = grouping.at("significant");
    if (sig.empty()) return kEmptySet;
    std::string out;
    for (const auto& name : sig) {
        const auto& t = grouping.at("rank_tests").at(detail::statement_index(name.get<std::string>()));
        if (!out.empty()) out += ", ";
        out += name.get<std::string>() + " (" + fixed(detail::num(t.at("diff_of_means"))) + ")" + t.at("stars").get<std::string>();
    }
    return out;
}

inline std::string table6_csv(const nlohmann::json& rep) {
    std::vector<csv::Row> rows{{"grouping", "significant_differences", "epoch_step", "train_loss", "train_acc", "val_loss",
                                "val_acc", "chance", "delta"}};
    for (const auto& g : rep.at("groupings")) {
        csv::Row row{g.at("description").get<std::string>(), significant_cell(g)};
        const auto& m = g.at("metrics");
        if (m.is_null()) {
            for (int i = 0; i < 5; ++i) row.emplace_back();
        } else {
            row.push_back(detail::msd(m.at("epoch_step"), true));
            for (const char* key : {"train_loss", "train_acc", "val_loss", "val_acc"}) row.push_back(detail::msd(m.at(key)));
        }
        row.push_back(fixed(detail::num(g.at("chance"))));
        row.push_back(g.at("delta").is_null() ? "" : fixed(detail::num(g.at("delta"))));
        rows.push_back(std::move(row));
    }
    return csv::write(rows);
}

/// Kendall tau with stars above the diagonal, cosine below, blank diagonal.
inline std::string tableA1_csv(const nlohmann::json& rep) {
    const auto& corr = rep.at("correlations");
    const auto names = corr.at("variables").get<std::vector<std::string>>();
    csv::Row header{""};
    header.insert(header.end(), names.begin(), names.end());
    std::vector<csv::Row> rows{header};
    for (std::size_t i = 0; i < names.size(); ++i) {
        csv::Row row{names[i]};
        for (std::size_t j = 0; j < names.size(); ++j) {
            const auto& c = corr.at("cells").at(i).at(j);
            if (i == j) {
                row.emplace_back();
            } else if (j > i) {
                if (c.at("tau").is_null()) row.emplace_back("n/a");
                else {
                    const auto stars = c.at("stars").get<std::string>();
                    row.push_back(fixed(detail::num(c.at("tau"))) + (stars.empty() ? "" : " " + stars));
                }
            } else {
                row.push_back(c.at("cosine").is_null() ? "n/a" : fixed(detail::num(c.at("cosine"))));
            }
        }
        rows.push_back(std::move(row));
    }
    return csv::write(rows);
}

/// One row per grouping, one cell per ES: "M1=0.421 M2=0.353 **" and the
/// median / SD variants.
inline std::string group_summary_csv(const nlohmann::json& rep, const std::string& field, const std::string& prefix) {
    csv::Row header{"grouping"};
    for (std::size_t k = 0; k < 20; ++k) header.push_back(detail::statement_label(k));
    std::vector<csv::Row> rows{header};
    for (const auto& g : rep.at("groupings")) {
        csv::Row row{g.at("description").get<std::string>()};
        for (const auto& t : g.at("rank_tests")) {
            std::string cell;
            const auto& values = t.at(field);
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (i) cell += " ";
                cell += prefix + std::to_string(i + 1) + "=" + fixed(detail::num(values[i]), 3);
            }
            const auto stars = t.at("stars").get<std::string>();
            if (!stars.empty()) cell += " " + stars;
            row.push_back(cell);
        }
        rows.push_back(std::move(row));
    }
    return csv::write(rows);
}

/// p-value grid, "0.001105 **".
inline std::string pvalue_csv(const nlohmann::json& rep, const std::string& tests) {
    csv::Row header{"grouping"};
    for (std::size_t k = 0; k < 20; ++k) header.push_back(detail::statement_label(k));
    std::vector<csv::Row> rows{header};
    for (const auto& g : rep.at("groupings")) {
        csv::Row row{g.at("description").get<std::string>()};
        for (const auto& t : g.at(tests)) {
            const auto stars = t.at("stars").get<std::string>();
            std::string cell = pvalue_text(detail::num(t.at("p_value"))) + (stars.empty() ? "" : " " + stars);
            if (t.at("degenerate").get<bool>()) cell += " (degenerate)";
            row.push_back(cell);
        }
        rows.push_back(std::move(row));
    }
    return csv::write(rows);
}

inline std::string fig2_csv(const nlohmann::json& rep) {
    std::vector<csv::Row> rows{{"statement", "bq1", "n", "mean", "delta_vs_es20"}};
    for (const auto& r : rep.at("figures").at("fig2"))
        rows.push_back({r.at("statement").get<std::string>(), std::to_string(r.at("bq1").get<int>()),
                        std::to_string(r.at("n").get<std::size_t>()), fixed(detail::num(r.at("mean")), 4),
                        fixed(detail::num(r.at("delta_vs_es20")), 4)});
    return csv::write(rows);
}

inline std::string fig3_csv(const nlohmann::json& rep) {
    std::vector<csv::Row> rows{{"statement", "bucket", "rating", "count", "relative_frequency"}};
    for (const auto& r : rep.at("figures").at("fig3"))
        rows.push_back({r.at("statement").get<std::string>(), r.at("bucket").get<std::string>(),
                        fixed(detail::num(r.at("rating")), 1), std::to_string(r.at("count").get<std::size_t>()),
                        fixed(detail::num(r.at("relative_frequency")), 4)});
    return csv::write(rows);
}

inline std::string fig4_csv(const nlohmann::json& rep) {
    std::vector<csv::Row> rows{{"statement", "group1_mean", "group2_mean", "diff"}};
    for (const auto& r : rep.at("figures").at("fig4"))
        rows.push_back({r.at("statement").get<std::string>(), fixed(detail::num(r.at("group1_mean")), 3),
                        fixed(detail::num(r.at("group2_mean")), 3), fixed(detail::num(r.at("diff")), 3)});
    return csv::write(rows);
}

inline std::string text_report(const nlohmann::json& rep) {
    std::ostringstream out;
    const auto& cohort = rep.at("cohort");
    out << "Machine learning influence analysis\n";
    out << "cohort: " << cohort.at("source").get<std::string>() << " (n=" << cohort.at("size").get<std::size_t>() << ")\n";
    const auto& cfg = rep.at("config");
    if (rep.at("trained").get<bool>())
        out << "training: " << cfg.at("sequences").get<std::size_t>() << " sequences, seed " << cfg.at("seed").get<std::uint64_t>()
            << ", patience " << cfg.at("patience").get<std::size_t>() << "\n";
    else
        out << "training: not run\n";
    out << "\n";
    for (const auto& g : rep.at("groupings")) {
        out << g.at("description").get<std::string>() << "\n";
        out << "  significant: " << significant_cell(g) << "\n";
        const auto& m = g.at("metrics");
        if (!m.is_null()) {
            out << "  epoch step: " << detail::msd(m.at("epoch_step"), true) << "\n";
            out << "  train loss: " << detail::msd(m.at("train_loss")) << "\n";
            out << "  train acc:  " << detail::msd(m.at("train_acc")) << "\n";
            out << "  val loss:   " << detail::msd(m.at("val_loss")) << "\n";
            out << "  val acc:    " << detail::msd(m.at("val_acc")) << "\n";
        }
        out << "  chance: " << fixed(detail::num(g.at("chance")));
        if (!g.at("delta").is_null()) out << "  delta: " << fixed(detail::num(g.at("delta")));
        out << "\n";
        const auto& f = g.at("findings");
        if (!f.at("above_chance").is_null())
            out << "  finding: delta " << (f.at("above_chance").get<bool>() ? ">" : "<=") << " "
                << fixed(detail::num(f.at("delta_threshold"))) << "\n";
        out << "\n";
    }
    out << "Groupings with a significant difference, per statement\n";
    for (std::size_t k = 0; k < 20; ++k) {
        const auto& names = rep.at("significance_index").at(detail::statement_label(k));
        out << "  " << detail::statement_label(k) << ": ";
        if (names.empty()) out << kEmptySet;
        for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "; " : "") << names[i].get<std::string>();
        out << "\n";
    }
    return out.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace detail

/// Writes every derived table and the text report (not report.json).
inline void render_bundle(const nlohmann::json& rep, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "figures");
    detail::write_file(dir / "table6.csv", table6_csv(rep));
    detail::write_file(dir / "tableA1.csv", tableA1_csv(rep));
    detail::write_file(dir / "tableA2.csv", group_summary_csv(rep, "group_means", "M"));
    detail::write_file(dir / "tableA3.csv", group_summary_csv(rep, "group_medians", "Mdn"));
    detail::write_file(dir / "tableA4.csv", group_summary_csv(rep, "group_sds", "SD"));
    detail::write_file(dir / "tableA5.csv", pvalue_csv(rep, "rank_tests"));
    detail::write_file(dir / "tableA6.csv", pvalue_csv(rep, "anova_tests"));
    detail::write_file(dir / "figures" / "fig2_bq1_means.csv", fig2_csv(rep));
    detail::write_file(dir / "figures" / "fig3_rating_frequencies.csv", fig3_csv(rep));
    detail::write_file(dir / "figures" / "fig4_bq1_two_group_means.csv", fig4_csv(rep));
    detail::write_file(dir / "report.txt", text_report(rep));
}

inline std::string canonical_dump(const nlohmann::json& rep) { return rep.dump(2) + "\n"; }

inline void write_bundle(const nlohmann::json& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    detail::write_file(dir / "report.json", canonical_dump(rep));
    render_bundle(rep, dir);
}

inline nlohmann::json read_report(const std::filesystem::path& dir) {
    const auto path = dir / "report.json";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed report.json: " + std::string(e.what()));
    }
}

}  // namespace mlia::report
