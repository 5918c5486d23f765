#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "mlia/error.hpp"
#include "mlia/nn/network.hpp"

namespace mlia::nn {

struct LossResult {
    double loss = 0.0;       // mean over the batch
    std::size_t correct = 0;  // argmax(logits) == label, first maximum wins
};

/// Softmax cross-entropy on integer labels. If `dlogits` is given it receives
/// (softmax - onehot) / B.
inline LossResult softmax_xent(const Mat& logits, std::span<const int> labels, Mat* dlogits = nullptr) {
    const auto b = static_cast<std::size_t>(logits.rows());
    const auto k = static_cast<std::size_t>(logits.cols());
    if (labels.size() != b) throw ShapeMismatch("label count does not match batch");
    if (dlogits) dlogits->resize(logits.rows(), logits.cols());
    LossResult r;
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= k) throw DomainError("label out of range");
        const double* row = logits.data() + i * k;
        std::size_t arg = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (row[j] > row[arg]) arg = j;
        if (arg == static_cast<std::size_t>(label)) ++r.correct;
        const double m = row[arg];
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
        const double log_z = std::log(z);
        total += log_z - (row[label] - m);
        if (dlogits) {
            double* d = dlogits->data() + i * k;
            for (std::size_t j = 0; j < k; ++j)
                d[j] = (std::exp(row[j] - m - log_z) - (j == static_cast<std::size_t>(label) ? 1.0 : 0.0)) / static_cast<double>(b);
        }
    }
    r.loss = b ? total / static_cast<double>(b) : 0.0;
    return r;
}

}  // namespace mlia::nn
