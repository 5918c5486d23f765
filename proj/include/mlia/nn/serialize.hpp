#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mlia/error.hpp"
#include "mlia/nn/network.hpp"

namespace mlia::nn {

static_assert(std::endian::native == std::endian::little, "blob format assumes a little-endian host");

/// Shape manifest for a flat parameter blob: one entry per layer with its
/// weight/bias shapes and offsets (in scalars).
inline nlohmann::json parameter_manifest(const Network& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& li : net.layers()) {
        nlohmann::json j{{"name", li.name}, {"kind", to_string(li.spec.kind)},
                         {"output_shape", li.output.flat ? nlohmann::json{li.output.c}
                                                         : nlohmann::json{li.output.h, li.output.w, li.output.c}},
                         {"params", li.param_count()}};
        if (li.param_count()) {
            j["weight_shape"] = {li.weight_rows, li.weight_cols};
            j["weight_offset"] = li.weight_offset;
            j["bias_shape"] = {li.bias_count};
            j["bias_offset"] = li.bias_offset;
        }
        layers.push_back(j);
    }
    const auto& in = net.spec().input;
    return {{"format", "float64-le"},
            {"input_shape", {in.h, in.w, in.c}},
            {"total", net.param_count()},
            {"layers", layers}};
}

inline std::string parameters_to_blob(std::span<const double> params) {
    std::string out(params.size() * sizeof(double), '\0');
    std::memcpy(out.data(), params.data(), out.size());
    return out;
}

inline std::vector<double> parameters_from_blob(std::string_view blob, const nlohmann::json& manifest) {
    const auto total = manifest.at("total").get<std::size_t>();
    if (blob.size() != total * sizeof(double)) throw ShapeMismatch("parameter blob size does not match its manifest");
    std::vector<double> p(total);
    std::memcpy(p.data(), blob.data(), blob.size());
    return p;
}

}  // namespace mlia::nn
