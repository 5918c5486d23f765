#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlia/csv.hpp"
#include "mlia/encoder.hpp"
#include "mlia/error.hpp"
#include "mlia/nn/adam.hpp"
#include "mlia/nn/loss.hpp"
#include "mlia/nn/network.hpp"
#include "mlia/parallel.hpp"
#include "mlia/rng.hpp"

namespace mlia {

struct TrainConfig {
    std::size_t sequences = 100;
    double train_fraction = 0.8;
    std::size_t patience = 50;
    std::size_t max_epochs = 500;
    std::size_t batch_size = 32;
    nn::AdamConfig adam;
    std::uint64_t seed = 0;
    bool stratified = false;
    unsigned threads = 0;  // 0 = hardware concurrency
    /// Findings flag: delta above this counts as "better than chance".
    double findings_delta_threshold = 0.02;
    std::size_t findings_top = 5;

    void validate() const {
        if (sequences == 0) throw ValidationError("sequences must be at least 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must lie in (0,1)");
        if (patience == 0) throw ValidationError("patience must be at least 1");
        if (max_epochs == 0) throw ValidationError("max_epochs must be at least 1");
        if (batch_size == 0) throw ValidationError("batch_size must be at least 1");
        if (!(adam.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
            throw ValidationError("beta1 and beta2 must lie in [0,1)");
        if (!(adam.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    }

    unsigned worker_count() const { return threads ? threads : default_threads(); }
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    static const char* known[] = {"sequences", "train_fraction", "patience", "max_epochs", "batch_size",
                                  "learning_rate", "beta1", "beta2", "epsilon", "seed", "stratified", "threads",
                                  "findings_delta_threshold", "findings_top"};
    if (!j.is_object()) throw ValidationError("training configuration must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw ValidationError("unknown training configuration key '" + key + "'");
    try {
        TrainConfig c;
        c.sequences = j.value("sequences", c.sequences);
        c.train_fraction = j.value("train_fraction", c.train_fraction);
        c.patience = j.value("patience", c.patience);
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
        c.adam.beta1 = j.value("beta1", c.adam.beta1);
        c.adam.beta2 = j.value("beta2", c.adam.beta2);
        c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
        c.seed = j.value("seed", c.seed);
        c.stratified = j.value("stratified", c.stratified);
        c.threads = j.value("threads", c.threads);
        c.findings_delta_threshold = j.value("findings_delta_threshold", c.findings_delta_threshold);
        c.findings_top = j.value("findings_top", c.findings_top);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed training configuration: ") + e.what());
    }
}

/// Everything that influences results; `threads` is deliberately absent.
inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"sequences", c.sequences},
            {"train_fraction", c.train_fraction},
            {"patience", c.patience},
            {"max_epochs", c.max_epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.adam.learning_rate},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"epsilon", c.adam.epsilon},
            {"seed", c.seed},
            {"stratified", c.stratified},
            {"findings_delta_threshold", c.findings_delta_threshold},
            {"findings_top", c.findings_top}};
}

struct EpochRecord {
    double train_loss = 0.0, train_acc = 0.0, val_loss = 0.0, val_acc = 0.0;
};

struct SequenceMetrics {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::size_t epoch_step = 0;  // 1-based epoch with the lowest validation loss
    double train_loss = 0.0, train_acc = 0.0, val_loss = 0.0, val_acc = 0.0;
    std::size_t train_size = 0, val_size = 0;
    std::vector<EpochRecord> history;
};

struct Summary {
    double mean = 0.0, median = 0.0, sd = 0.0;
};

struct AggregateMetrics {
    Summary epoch_step, train_loss, train_acc, val_loss, val_acc;
    std::size_t sequences = 0;
};

struct ExperimentResult {
    AggregateMetrics aggregate;
    std::vector<SequenceMetrics> sequences;
};

// ---------------------------------------------------------------------------
// Split

struct Split {
    std::vector<std::size_t> train, validation;
};

/// Size of the training partition: ceil(fraction * n), leaving at least one
/// example for validation.
inline std::size_t train_partition_size(std::size_t n, double fraction) {
    const auto t = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(t, 1, n - 1);
}

/// Random partition of 0..n-1. Unstratified by default; the stratified variant
/// applies the same rule within each label.
inline Split split_indices(const std::vector<int>& labels, double fraction, bool stratified, Rng& rng) {
    const std::size_t n = labels.size();
    if (n < 2) throw InsufficientData("need at least 2 examples to split");
    Split s;
    if (!stratified) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        const std::size_t t = train_partition_size(n, fraction);
        s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(t));
        s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(t), order.end());
        return s;
    }
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    for (int label = 0; label < k; ++label) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == label) members.push_back(i);
        rng.shuffle(std::span<std::size_t>(members));
        const std::size_t t = members.size() < 2 ? members.size() : train_partition_size(members.size(), fraction);
        s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(t));
        s.validation.insert(s.validation.end(), members.begin() + static_cast<std::ptrdiff_t>(t), members.end());
    }
    if (s.validation.empty()) throw InsufficientData("stratified split left no validation examples");
    return s;
}

// ---------------------------------------------------------------------------
// Sequences

/// Network inputs for a whole image set, computed once and shared read-only.
struct PreparedSet {
    std::vector<double> inputs;  // n x 1500, raw replicated bytes
    std::vector<int> labels;
    std::size_t arity = 2;
    std::size_t sample_size = kImageWidth * kImageHeight * kImageChannels;

    std::size_t size() const noexcept { return labels.size(); }
};

inline PreparedSet prepare(const LabeledImageSet& set) {
    PreparedSet p;
    p.arity = set.arity;
    p.labels = set.labels;
    p.inputs.reserve(set.size() * p.sample_size);
    for (const auto& img : set.images) {
        const auto raw = to_raw_input(img);
        p.inputs.insert(p.inputs.end(), raw.begin(), raw.end());
    }
    return p;
}

namespace detail {

inline void check_trainable(const PreparedSet& data) {
    if (data.size() < 2) throw InsufficientData("need at least 2 examples");
    std::vector<std::size_t> counts(data.arity, 0);
    for (int l : data.labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= data.arity) throw DomainError("label out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    for (std::size_t k = 0; k < data.arity; ++k)
        if (counts[k] < 2)
            throw InsufficientData("label " + std::to_string(k) + " has fewer than 2 examples");
}

struct EvalBuffers {
    std::vector<double> inputs;
    std::vector<int> labels;
    nn::ForwardCache cache;
};

inline void gather(const PreparedSet& data, std::span<const std::size_t> idx, EvalBuffers& buf) {
    const std::size_t d = data.sample_size;
    buf.inputs.resize(idx.size() * d);
    buf.labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(data.inputs.begin() + static_cast<std::ptrdiff_t>(idx[i] * d), d,
                    buf.inputs.begin() + static_cast<std::ptrdiff_t>(i * d));
        buf.labels[i] = data.labels[idx[i]];
    }
}

/// Mean loss and accuracy of the current parameters over `idx`.
inline std::pair<double, double> evaluate(const nn::Network& net, std::span<const double> params, const PreparedSet& data,
                                          const std::vector<std::size_t>& idx, EvalBuffers& buf) {
    constexpr std::size_t chunk = 64;
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        const std::size_t len = std::min(chunk, idx.size() - start);
        gather(data, std::span(idx).subspan(start, len), buf);
        const auto& logits = net.forward(params, buf.inputs, len, buf.cache);
        const auto r = nn::softmax_xent(logits, buf.labels);
        loss += r.loss * static_cast<double>(len);
        correct += r.correct;
    }
    const auto n = static_cast<double>(idx.size());
    return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace detail

/// Seed of sequence `index` under master seed `master`.
inline std::uint64_t sequence_seed(std::uint64_t master, std::size_t index) { return derive_seed(master, index); }

/// One independent train/validate run: fresh split, fresh initialization,
/// early stopping on validation loss.
inline SequenceMetrics run_sequence(const PreparedSet& data, const TrainConfig& cfg, std::size_t index) {
    cfg.validate();
    detail::check_trainable(data);

    SequenceMetrics m;
    m.index = index;
    m.seed = sequence_seed(cfg.seed, index);
    Rng split_rng(derive_seed(m.seed, 1));
    Rng shuffle_rng(derive_seed(m.seed, 3));

    const Split split = split_indices(data.labels, cfg.train_fraction, cfg.stratified, split_rng);
    m.train_size = split.train.size();
    m.val_size = split.validation.size();

    const nn::Network net(nn::canonical_network(data.arity));
    std::vector<double> params = net.init_parameters(derive_seed(m.seed, 2));
    std::vector<double> grads(params.size());
    nn::AdamState adam(params.size());

    detail::EvalBuffers batch_buf, eval_buf;
    nn::Mat dlogits;
    std::vector<std::size_t> order = split.train;

    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            detail::gather(data, std::span(order).subspan(start, len), batch_buf);
            const auto& logits = net.forward(params, batch_buf.inputs, len, batch_buf.cache);
            nn::softmax_xent(logits, batch_buf.labels, &dlogits);
            net.backward(params, batch_buf.cache, dlogits, grads);
            nn::adam_step(params, grads, adam, cfg.adam);
        }

        EpochRecord rec;
        std::tie(rec.train_loss, rec.train_acc) = detail::evaluate(net, params, data, split.train, eval_buf);
        std::tie(rec.val_loss, rec.val_acc) = detail::evaluate(net, params, data, split.validation, eval_buf);
        m.history.push_back(rec);

        if (rec.val_loss < best) {
            best = rec.val_loss;
            m.epoch_step = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (m.epoch_step == 0) m.epoch_step = 1;  // validation loss never finite
    const auto& at = m.history[m.epoch_step - 1];
    m.train_loss = at.train_loss;
    m.train_acc = at.train_acc;
    m.val_loss = at.val_loss;
    m.val_acc = at.val_acc;
    return m;
}

inline SequenceMetrics run_sequence(const LabeledImageSet& set, const TrainConfig& cfg, std::size_t index) {
    return run_sequence(prepare(set), cfg, index);
}

// ---------------------------------------------------------------------------
// Aggregation

/// Mean, median and sample SD. With `integer_median` an even count takes the
/// lower middle value so the median stays integral.
inline Summary summarize(std::vector<double> v, bool integer_median = false) {
    Summary s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());  // sorted first so the result ignores input order
    const double n = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    const std::size_t mid = v.size() / 2;
    if (v.size() % 2) s.median = v[mid];
    else s.median = integer_median ? v[mid - 1] : 0.5 * (v[mid - 1] + v[mid]);
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

inline AggregateMetrics aggregate(const std::vector<SequenceMetrics>& seqs) {
    AggregateMetrics a;
    a.sequences = seqs.size();
    auto pick = [&](auto field) {
        std::vector<double> v;
        for (const auto& s : seqs) v.push_back(field(s));
        return v;
    };
    a.epoch_step = summarize(pick([](const SequenceMetrics& s) { return static_cast<double>(s.epoch_step); }), true);
    a.train_loss = summarize(pick([](const SequenceMetrics& s) { return s.train_loss; }));
    a.train_acc = summarize(pick([](const SequenceMetrics& s) { return s.train_acc; }));
    a.val_loss = summarize(pick([](const SequenceMetrics& s) { return s.val_loss; }));
    a.val_acc = summarize(pick([](const SequenceMetrics& s) { return s.val_acc; }));
    return a;
}

using SequenceProgress = std::function<void(const SequenceMetrics&)>;

/// cfg.sequences independent sequences, run on cfg.threads workers; results are
/// identical for any worker count.
inline ExperimentResult run_experiment(const LabeledImageSet& set, const TrainConfig& cfg, const SequenceProgress& progress = {}) {
    cfg.validate();
    const PreparedSet data = prepare(set);
    detail::check_trainable(data);
    ExperimentResult r;
    r.sequences = parallel_map(cfg.sequences, cfg.worker_count(), [&](std::size_t i) {
        auto m = run_sequence(data, cfg, i);
        if (progress) progress(m);
        return m;
    });
    r.aggregate = aggregate(r.sequences);
    return r;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string emit_history(const SequenceMetrics& m) {
    if (m.history.empty()) throw DomainError("empty training history");
    std::string out;
    csv::append_row(out, {"epoch", "train_loss", "train_acc", "val_loss", "val_acc", "best"});
    for (std::size_t e = 0; e < m.history.size(); ++e) {
        const auto& h = m.history[e];
        auto num = [](double x) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", x);
            return std::string(buf);
        };
        csv::append_row(out, {std::to_string(e + 1), num(h.train_loss), num(h.train_acc), num(h.val_loss), num(h.val_acc),
                              e + 1 == m.epoch_step ? "1" : "0"});
    }
    return out;
}

inline nlohmann::json to_json(const Summary& s) { return {{"mean", s.mean}, {"median", s.median}, {"sd", s.sd}}; }

inline Summary summary_from_json(const nlohmann::json& j) {
    return {j.at("mean").get<double>(), j.at("median").get<double>(), j.at("sd").get<double>()};
}

inline nlohmann::json to_json(const AggregateMetrics& a) {
    return {{"sequences", a.sequences},   {"epoch_step", to_json(a.epoch_step)}, {"train_loss", to_json(a.train_loss)},
            {"train_acc", to_json(a.train_acc)}, {"val_loss", to_json(a.val_loss)},   {"val_acc", to_json(a.val_acc)}};
}

inline AggregateMetrics aggregate_from_json(const nlohmann::json& j) {
    AggregateMetrics a;
    a.sequences = j.at("sequences").get<std::size_t>();
    a.epoch_step = summary_from_json(j.at("epoch_step"));
    a.train_loss = summary_from_json(j.at("train_loss"));
    a.train_acc = summary_from_json(j.at("train_acc"));
    a.val_loss = summary_from_json(j.at("val_loss"));
    a.val_acc = summary_from_json(j.at("val_acc"));
    return a;
}

inline nlohmann::json to_json(const SequenceMetrics& m, bool with_history = false) {
    nlohmann::json j{{"index", m.index},           {"seed", m.seed},         {"epoch_step", m.epoch_step},
                     {"epochs_run", m.history.size()}, {"train_size", m.train_size}, {"val_size", m.val_size},
                     {"train_loss", m.train_loss}, {"train_acc", m.train_acc}, {"val_loss", m.val_loss},
                     {"val_acc", m.val_acc}};
    if (with_history) {
        nlohmann::json h = nlohmann::json::array();
        for (const auto& e : m.history) h.push_back({e.train_loss, e.train_acc, e.val_loss, e.val_acc});
        j["history"] = h;
    }
    return j;
}

inline nlohmann::json to_json(const ExperimentResult& r, bool with_history = false) {
    nlohmann::json seqs = nlohmann::json::array();
    for (const auto& s : r.sequences) seqs.push_back(to_json(s, with_history));
    return {{"aggregate", to_json(r.aggregate)}, {"sequences", seqs}};
}

}  // namespace mlia
