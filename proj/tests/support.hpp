#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mlia/dataset.hpp"
#include "mlia/synth.hpp"

namespace testing_support {

inline std::string data_path(const std::string& name) { return std::string(MLIA_DATA_DIR) + "/" + name; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline nlohmann::json load_json(const std::string& name) { return nlohmann::json::parse(slurp(data_path(name))); }

/// 673 respondents with the published background marginals dealt out exactly.
inline mlia::Cohort published_cohort(std::uint64_t seed = 1) {
    return mlia::synthesize_cohort(mlia::synth_spec_from_json(load_json("synth_published_marginals.json")), seed);
}

inline mlia::Cohort planted_cohort(std::uint64_t seed = 1) {
    return mlia::synthesize_cohort(mlia::synth_spec_from_json(load_json("synth_planted.json")), seed);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("mlia_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing_support
