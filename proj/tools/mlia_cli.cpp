// mlia: command-line frontend for the influence analysis pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlia/dataset.hpp"
#include "mlia/encoder.hpp"
#include "mlia/error.hpp"
#include "mlia/grouping.hpp"
#include "mlia/influence.hpp"
#include "mlia/report.hpp"
#include "mlia/synth.hpp"
#include "mlia/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mlia::ValidationError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw mlia::Error("cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw mlia::ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

mlia::Cohort load_cohort(const std::string& path, std::optional<int> age_top_code) {
    mlia::ParseOptions opt;
    opt.age_top_code = age_top_code;
    mlia::Cohort c = mlia::parse_cohort(read_text(path), opt);
    c.source = fs::path(path).filename().string();
    return c;
}

std::vector<mlia::GroupingRule> load_rules(const std::string& path) {
    if (path.empty()) return mlia::default_grouping_rules();
    return mlia::grouping_rules_from_json(read_json(path));
}

/// Drops groupings the cohort cannot form (an empty group) with a warning.
std::vector<mlia::GroupingRule> formable_rules(const mlia::Cohort& cohort, const std::vector<mlia::GroupingRule>& rules) {
    std::vector<mlia::GroupingRule> out;
    for (const auto& r : rules) {
        try {
            (void)mlia::apply_rule(cohort, r);
            out.push_back(r);
        } catch (const mlia::DegenerateGrouping& e) {
            std::cerr << "warning: skipping grouping: " << e.what() << "\n";
        }
    }
    return out;
}

struct TrainFlags {
    std::string config;
    std::optional<std::size_t> sequences;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;

    mlia::TrainConfig resolve() const {
        mlia::TrainConfig c = config.empty() ? mlia::TrainConfig{} : mlia::train_config_from_json(read_json(config));
        if (sequences) c.sequences = *sequences;
        if (seed) c.seed = *seed;
        if (threads) c.threads = *threads;
        c.validate();
        return c;
    }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--config", f.config, "Training configuration JSON")->check(CLI::ExistingFile);
    cmd->add_option("--sequences", f.sequences, "Number of train/validate sequences (overrides the config)");
    cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
    cmd->add_option("--threads", f.threads, "Worker threads; 0 uses every core (overrides the config)");
}

class Progress {
public:
    explicit Progress(std::size_t total) : total_(total) {}

    void tick(const std::string& label, const mlia::SequenceMetrics& m) {
        std::lock_guard lock(mu_);
        ++done_;
        std::fprintf(stderr, "[%zu/%zu] %s seq %zu: epoch_step=%zu val_acc=%.3f val_loss=%.4f\n", done_, total_,
                     label.c_str(), m.index, m.epoch_step, m.val_acc, m.val_loss);
    }

private:
    std::mutex mu_;
    std::size_t total_;
    std::size_t done_ = 0;
};

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path, std::optional<int> top) {
    const auto c = load_cohort(path, top);
    std::cout << path << ": ok, " << c.size() << " respondents\n";
    return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out, std::uint64_t seed) {
    const auto spec = mlia::synth_spec_from_json(read_json(spec_path));
    const auto cohort = mlia::synthesize_cohort(spec, seed);
    write_text(out, mlia::write_cohort(cohort));
    std::cerr << "wrote " << cohort.size() << " respondents to " << out << "\n";
    return kExitOk;
}

int cmd_stats(const std::string& cohort_path, const std::string& groupings, const std::string& out,
              std::optional<unsigned> threads, std::optional<int> top) {
    const auto cohort = load_cohort(cohort_path, top);
    const auto rules = formable_rules(cohort, load_rules(groupings));
    mlia::TrainConfig cfg;
    if (threads) cfg.threads = *threads;
    mlia::AnalyzeOptions opt;
    opt.train = false;
    const auto rep = mlia::to_json(mlia::analyze(cohort, rules, cfg, opt));
    mlia::report::write_bundle(rep, out);
    std::cerr << "wrote statistics for " << rules.size() << " groupings to " << out << "\n";
    return kExitOk;
}

int cmd_encode(const std::string& cohort_path, const std::string& grouping_path, const std::string& out,
               std::optional<int> top) {
    const auto cohort = load_cohort(cohort_path, top);
    const auto rules = load_rules(grouping_path);
    const fs::path root(out);
    for (const auto& rule : rules) {
        const auto g = mlia::apply_rule(cohort, rule);
        const auto set = mlia::make_image_set(cohort, g);
        fs::path dir = root;
        if (rules.size() > 1) {
            std::string slug = rule.bq.name() + (g.arity() == 2 ? "_two" : "_three");
            dir /= slug;
        }
        mlia::write_image_set(set, dir);
        nlohmann::json meta{{"grouping", g.name()}, {"description", g.description()}, {"rule", mlia::to_json(rule)},
                            {"sizes", g.sizes}, {"chance", mlia::chance_baseline(g)}};
        write_text(dir / "grouping.json", meta.dump(2) + "\n");
        std::cerr << "wrote " << set.size() << " images for " << g.description() << " to " << dir.string() << "\n";
    }
    return kExitOk;
}

int cmd_train(const std::string& imgdir, const TrainFlags& flags, const std::string& out, const std::string& history_dir) {
    const auto cfg = flags.resolve();
    auto set = mlia::read_image_set(imgdir);
    const fs::path meta = fs::path(imgdir) / "grouping.json";
    if (fs::exists(meta)) set.grouping = read_json(meta.string()).value("grouping", set.grouping);

    Progress progress(cfg.sequences);
    const auto result = mlia::run_experiment(set, cfg, [&](const mlia::SequenceMetrics& m) { progress.tick(set.grouping, m); });

    std::size_t largest = 0;
    for (std::size_t c : set.label_counts()) largest = std::max(largest, c);
    const double chance = static_cast<double>(largest) / static_cast<double>(set.size());

    nlohmann::json j = mlia::to_json(result);
    j["grouping"] = set.grouping;
    j["sizes"] = set.label_counts();
    j["chance"] = chance;
    j["delta"] = result.aggregate.val_acc.mean - chance;
    j["config"] = mlia::to_json(cfg);
    write_text(out, mlia::report::canonical_dump(j));

    if (!history_dir.empty()) {
        for (const auto& s : result.sequences) {
            char name[32];
            std::snprintf(name, sizeof name, "seq_%03zu.csv", s.index);
            write_text(fs::path(history_dir) / name, mlia::emit_history(s));
        }
    }
    std::cerr << "val_acc M=" << mlia::fixed(result.aggregate.val_acc.mean) << " chance=" << mlia::fixed(chance)
              << "; wrote " << out << "\n";
    return kExitOk;
}

int cmd_analyze(const std::string& cohort_path, const std::string& groupings, const TrainFlags& flags,
                const std::string& out, bool no_train, std::optional<int> top) {
    const auto cfg = flags.resolve();
    const auto cohort = load_cohort(cohort_path, top);
    const auto rules = formable_rules(cohort, load_rules(groupings));

    Progress progress(rules.size() * cfg.sequences);
    mlia::AnalyzeOptions opt;
    opt.train = !no_train;
    opt.progress = [&](const std::string& name, const mlia::SequenceMetrics& m) { progress.tick(name, m); };
    const auto rep = mlia::to_json(mlia::analyze(cohort, rules, cfg, opt));
    mlia::report::write_bundle(rep, out);
    std::cerr << "wrote report for " << rules.size() << " groupings to " << out << "\n";
    return kExitOk;
}

int cmd_report(const std::string& dir) {
    const auto rep = mlia::report::read_report(dir);
    mlia::report::render_bundle(rep, dir);
    std::cerr << "re-rendered tables in " << dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Machine learning influence analysis of rating-profile questionnaires"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "mlia 1.0");

    std::optional<int> age_top;
    app.add_option("--age-top-code", age_top, "Store ages at or above this value as this value");

    std::string cohort_path, out, spec_path, groupings, imgdir, history_dir;
    std::uint64_t synth_seed = 0;
    std::optional<unsigned> stats_threads;
    bool no_train = false;
    TrainFlags train_flags, analyze_flags;

    auto* validate = app.add_subcommand("validate", "Check a cohort CSV against the schema");
    validate->add_option("cohort", cohort_path, "Cohort CSV")->required();

    auto* synth = app.add_subcommand("synth", "Synthesize a cohort from a JSON spec");
    synth->add_option("spec", spec_path, "Synth spec JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("-o,--output", out, "Output cohort CSV")->required();
    synth->add_option("--seed", synth_seed, "Seed");

    auto* stats = app.add_subcommand("stats", "Correlation matrix and per-grouping tests");
    stats->add_option("cohort", cohort_path, "Cohort CSV")->required();
    stats->add_option("--groupings", groupings, "Grouping configuration JSON (default: the 13 standard groupings)")
        ->check(CLI::ExistingFile);
    stats->add_option("-o,--output", out, "Output directory")->required();
    stats->add_option("--threads", stats_threads, "Worker threads; 0 uses every core");

    auto* encode = app.add_subcommand("encode", "Render rating profiles as labeled PGM images");
    encode->add_option("cohort", cohort_path, "Cohort CSV")->required();
    encode->add_option("--grouping", groupings, "Grouping configuration JSON (one entry, or several for subdirectories)")
        ->required()
        ->check(CLI::ExistingFile);
    encode->add_option("-o,--output", out, "Output image directory")->required();

    auto* train = app.add_subcommand("train", "Train the classifier on an image directory");
    train->add_option("imgdir", imgdir, "Image directory with label subdirectories 0, 1[, 2]")->required();
    add_train_flags(train, train_flags);
    train->add_option("-o,--output", out, "Output metrics JSON")->required();
    train->add_option("--history", history_dir, "Directory for per-sequence epoch histories (CSV)");

    auto* analyze = app.add_subcommand("analyze", "Tests, training and chance comparison for every grouping");
    analyze->add_option("cohort", cohort_path, "Cohort CSV")->required();
    analyze->add_option("--groupings", groupings, "Grouping configuration JSON (default: the 13 standard groupings)")
        ->check(CLI::ExistingFile);
    add_train_flags(analyze, analyze_flags);
    analyze->add_option("-o,--output", out, "Output report directory")->required();
    analyze->add_flag("--no-train", no_train, "Skip training (statistics only)");

    auto* report = app.add_subcommand("report", "Re-render tables and text from report.json");
    report->add_option("reportdir", out, "Report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*validate) return cmd_validate(cohort_path, age_top);
        if (*synth) return cmd_synth(spec_path, out, synth_seed);
        if (*stats) return cmd_stats(cohort_path, groupings, out, stats_threads, age_top);
        if (*encode) return cmd_encode(cohort_path, groupings, out, age_top);
        if (*train) return cmd_train(imgdir, train_flags, out, history_dir);
        if (*analyze) return cmd_analyze(cohort_path, groupings, analyze_flags, out, no_train, age_top);
        if (*report) return cmd_report(out);
    } catch (const mlia::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}
