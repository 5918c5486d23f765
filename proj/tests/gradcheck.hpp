#pragma once

// Central-difference gradient check shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mlia/nn/network.hpp"
#include "mlia/rng.hpp"

namespace gradcheck {

using mlia::nn::ForwardCache;
using mlia::nn::Mat;
using mlia::nn::Network;

struct Result {
    double worst_rel = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // perturbation crossed a rectifier or pooling kink
};

/// Which rectifiers are active and which pool inputs win: if a perturbation
/// changes this, the loss is not differentiable on [p-h, p+h].
inline std::vector<std::int32_t> kink_signature(const Network& net, const ForwardCache& cache) {
    std::vector<std::int32_t> sig;
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& li = net.layers()[i];
        const bool relu = li.spec.kind == mlia::nn::LayerKind::conv ||
                          (li.spec.kind == mlia::nn::LayerKind::dense && li.spec.activation == mlia::nn::Activation::relu);
        if (relu) {
            const Mat& out = cache.acts[i + 1];
            for (Eigen::Index k = 0; k < out.size(); ++k) sig.push_back(out.data()[k] > 0.0);
        }
        if (li.spec.kind == mlia::nn::LayerKind::maxpool)
            sig.insert(sig.end(), cache.argmax[i].begin(), cache.argmax[i].end());
    }
    return sig;
}

/// L = sum(probe .* logits), so dL/dlogits = probe and the loss code is not involved.
inline double probe_loss(const Network& net, const std::vector<double>& params, const std::vector<double>& input,
                         std::size_t batch, const Mat& probe, std::vector<std::int32_t>* sig = nullptr) {
    ForwardCache cache;
    const Mat& out = net.forward(params, input, batch, cache);
    if (sig) *sig = kink_signature(net, cache);
    return (out.array() * probe.array()).sum();
}

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    return std::abs(numeric - analytic) / denom;
}

/// Checks `indices` (all parameters when empty) of a randomly initialized
/// network on a random batch, h = 1e-5.
inline Result check(const mlia::nn::NetworkSpec& spec, std::uint64_t seed, std::size_t batch = 3, double input_lo = -1.0,
                    double input_hi = 1.0, std::vector<std::size_t> indices = {}) {
    const Network net(spec);
    mlia::Rng rng(seed);
    auto params = net.init_parameters(seed);
    for (const auto& li : net.layers())  // nonzero biases so the bias path is exercised
        for (std::size_t i = 0; i < li.bias_count; ++i) params[li.bias_offset + i] = rng.uniform(-0.1, 0.1);
    std::vector<double> input(batch * net.input_size());
    for (double& x : input) x = rng.uniform(input_lo, input_hi);
    Mat probe(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(net.output_size()));
    for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = rng.uniform(-1.0, 1.0);

    ForwardCache cache;
    net.forward(params, input, batch, cache);
    const auto base_sig = kink_signature(net, cache);
    std::vector<double> grads(net.param_count());
    net.backward(params, cache, probe, grads);

    if (indices.empty()) {
        indices.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) indices[i] = i;
    }
    constexpr double h = 1e-5;
    Result r;
    std::vector<std::int32_t> up_sig, down_sig;
    for (std::size_t i : indices) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = probe_loss(net, params, input, batch, probe, &up_sig);
        params[i] = keep - h;
        const double down = probe_loss(net, params, input, batch, probe, &down_sig);
        params[i] = keep;
        if (up_sig != base_sig || down_sig != base_sig) {
            ++r.skipped;
            continue;
        }
        r.worst_rel = std::max(r.worst_rel, relative_error(grads[i], (up - down) / (2 * h)));
        ++r.checked;
    }
    return r;
}

}  // namespace gradcheck
