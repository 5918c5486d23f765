#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mlia/error.hpp"
#include "mlia/rng.hpp"

namespace mlia::nn {

/// Row-major dense matrix. Spatial activations are stored as (B*H*W, C),
/// i.e. NHWC; flat activations as (B, N).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

enum class LayerKind { rescale, conv, maxpool, flatten, dense };
enum class Activation { identity, relu };

inline std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::rescale: return "rescale";
        case LayerKind::conv: return "conv";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::flatten: return "flatten";
        default: return "dense";
    }
}

/// conv is always 3x3, stride 1, same padding; maxpool is always 2x2, stride 2,
/// floor output.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t units = 0;  // filters for conv, units for dense
    Activation activation = Activation::relu;
    double factor = 1.0;    // rescale only

    static LayerSpec rescale(double factor) { return {LayerKind::rescale, 0, Activation::identity, factor}; }
    static LayerSpec conv(std::size_t filters) { return {LayerKind::conv, filters, Activation::relu, 1.0}; }
    static LayerSpec maxpool() { return {LayerKind::maxpool, 0, Activation::identity, 1.0}; }
    static LayerSpec flatten() { return {LayerKind::flatten, 0, Activation::identity, 1.0}; }
    static LayerSpec dense(std::size_t units, Activation a) { return {LayerKind::dense, units, a, 1.0}; }
};

/// Per-sample shape. Flat shapes have h = w = 1 and flat = true.
struct Shape {
    std::size_t h = 1, w = 1, c = 1;
    bool flat = false;

    std::size_t size() const noexcept { return h * w * c; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

struct NetworkSpec {
    Shape input{20, 25, 3, false};
    std::vector<LayerSpec> layers;
};

/// The published architecture: rescale, three conv+pool blocks (16/32/64
/// filters), flatten, dense 128 ReLU, dense `arity` logits. Filter and unit
/// counts can be reduced for gradient checking.
inline NetworkSpec canonical_network(std::size_t arity = 2, std::array<std::size_t, 3> filters = {16, 32, 64},
                                     std::size_t dense_units = 128, Shape input = {20, 25, 3, false}) {
    NetworkSpec s;
    s.input = input;
    s.layers = {LayerSpec::rescale(1.0 / 255.0),
                LayerSpec::conv(filters[0]),
                LayerSpec::maxpool(),
                LayerSpec::conv(filters[1]),
                LayerSpec::maxpool(),
                LayerSpec::conv(filters[2]),
                LayerSpec::maxpool(),
                LayerSpec::flatten(),
                LayerSpec::dense(dense_units, Activation::relu),
                LayerSpec::dense(arity, Activation::identity)};
    return s;
}

/// Resolved layer: shapes and where its parameters live in the flat vector.
struct LayerInfo {
    LayerSpec spec;
    std::string name;
    Shape input;
    Shape output;
    std::size_t weight_offset = 0, weight_rows = 0, weight_cols = 0;
    std::size_t bias_offset = 0, bias_count = 0;
    std::size_t fan_in = 0, fan_out = 0;

    std::size_t param_count() const noexcept { return weight_rows * weight_cols + bias_count; }
};

/// Activations kept by forward for backward.
struct ForwardCache {
    std::vector<Mat> acts;                        // acts[0] = input, acts[i+1] = output of layer i
    std::vector<Mat> cols;                        // im2col buffers, conv layers only
    std::vector<std::vector<std::int32_t>> argmax;  // flat input index per pooled output, pool layers only
    std::size_t batch = 0;
    Mat grad, next, scratch;  // backward work buffers
};

class Network {
public:
    explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
        Shape s = spec_.input;
        if (s.size() == 0) throw ShapeMismatch("empty input shape");
        std::size_t offset = 0;
        std::size_t counter[5] = {};
        for (const auto& ls : spec_.layers) {
            LayerInfo li;
            li.spec = ls;
            li.input = s;
            const auto kind_index = static_cast<std::size_t>(ls.kind);
            const std::size_t nth = counter[kind_index]++;
            li.name = to_string(ls.kind) + (nth ? "_" + std::to_string(nth) : "");
            switch (ls.kind) {
                case LayerKind::rescale: break;
                case LayerKind::conv:
                    if (s.flat) throw ShapeMismatch("conv needs a spatial input");
                    if (ls.units == 0) throw ShapeMismatch("conv needs at least one filter");
                    li.weight_rows = 9 * s.c;
                    li.weight_cols = ls.units;
                    li.bias_count = ls.units;
                    li.fan_in = 9 * s.c;
                    li.fan_out = 9 * ls.units;
                    s.c = ls.units;
                    break;
                case LayerKind::maxpool:
                    if (s.flat) throw ShapeMismatch("maxpool needs a spatial input");
                    if (s.h < 2 || s.w < 2) throw ShapeMismatch("maxpool input smaller than 2x2");
                    s.h /= 2;
                    s.w /= 2;
                    break;
                case LayerKind::flatten:
                    s = Shape{1, 1, s.size(), true};
                    break;
                case LayerKind::dense:
                    if (!s.flat) throw ShapeMismatch("dense needs a flattened input");
                    if (ls.units == 0) throw ShapeMismatch("dense needs at least one unit");
                    li.weight_rows = s.c;
                    li.weight_cols = ls.units;
                    li.bias_count = ls.units;
                    li.fan_in = s.c;
                    li.fan_out = ls.units;
                    s = Shape{1, 1, ls.units, true};
                    break;
            }
            li.weight_offset = offset;
            offset += li.weight_rows * li.weight_cols;
            li.bias_offset = offset;
            offset += li.bias_count;
            li.output = s;
            layers_.push_back(li);
        }
        if (!s.flat) throw ShapeMismatch("network must end in a dense layer");
        param_count_ = offset;
    }

    const NetworkSpec& spec() const noexcept { return spec_; }
    const std::vector<LayerInfo>& layers() const noexcept { return layers_; }
    std::size_t param_count() const noexcept { return param_count_; }
    std::size_t input_size() const noexcept { return spec_.input.size(); }
    std::size_t output_size() const noexcept { return layers_.empty() ? input_size() : layers_.back().output.size(); }

    /// Glorot-uniform weights, zero biases; deterministic per seed.
    std::vector<double> init_parameters(std::uint64_t seed) const {
        std::vector<double> p(param_count_, 0.0);
        Rng rng(seed);
        for (const auto& li : layers_) {
            if (li.weight_rows == 0) continue;
            const double limit = std::sqrt(6.0 / static_cast<double>(li.fan_in + li.fan_out));
            for (std::size_t i = 0; i < li.weight_rows * li.weight_cols; ++i)
                p[li.weight_offset + i] = rng.uniform(-limit, limit);
        }
        return p;
    }

    /// `input` holds B samples, each input_size() values in (H, W, C) order.
    /// Returns the logits (B, outputs), which live in the cache.
    const Mat& forward(std::span<const double> params, std::span<const double> input, std::size_t batch,
                       ForwardCache& cache) const {
        if (params.size() != param_count_) throw ShapeMismatch("parameter vector has the wrong length");
        if (input.size() != batch * input_size()) throw ShapeMismatch("input does not match the network input shape");
        cache.batch = batch;
        cache.acts.resize(layers_.size() + 1);
        cache.cols.resize(layers_.size());
        cache.argmax.resize(layers_.size());
        {
            const Shape& s = spec_.input;
            cache.acts[0] = ConstMatMap(input.data(), static_cast<Eigen::Index>(batch * s.h * s.w),
                                        static_cast<Eigen::Index>(s.c));
        }
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& li = layers_[i];
            const Mat& in = cache.acts[i];
            Mat& out = cache.acts[i + 1];
            switch (li.spec.kind) {
                case LayerKind::rescale: out = in * li.spec.factor; break;
                case LayerKind::conv: conv_forward(li, params, in, cache.cols[i], out, batch); break;
                case LayerKind::maxpool: pool_forward(li, in, out, cache.argmax[i], batch); break;
                case LayerKind::flatten:
                    out = ConstMatMap(in.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(li.output.c));
                    break;
                case LayerKind::dense: {
                    const ConstMatMap w(params.data() + li.weight_offset, static_cast<Eigen::Index>(li.weight_rows),
                                        static_cast<Eigen::Index>(li.weight_cols));
                    out.resize(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(li.weight_cols));
                    out.noalias() = in * w;
                    add_bias_relu(out, params.data() + li.bias_offset, li.spec.activation == Activation::relu);
                    break;
                }
            }
        }
        return cache.acts.back();
    }

    /// Gradient of the loss with respect to every parameter, given dL/dlogits.
    /// `grads` is overwritten. Rectifiers use subgradient 0 at 0; pooling routes
    /// to the first maximum in row-major scan order.
    void backward(std::span<const double> params, ForwardCache& cache, const Mat& dlogits, std::span<double> grads) const {
        if (grads.size() != param_count_) throw ShapeMismatch("gradient vector has the wrong length");
        const std::size_t batch = cache.batch;
        if (dlogits.rows() != static_cast<Eigen::Index>(batch) || dlogits.cols() != static_cast<Eigen::Index>(output_size()))
            throw ShapeMismatch("dlogits does not match the forward batch");
        std::fill(grads.begin(), grads.end(), 0.0);

        Mat& grad = cache.grad;
        Mat& next = cache.next;
        Mat& scratch = cache.scratch;
        grad = dlogits;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            const auto& li = layers_[i];
            const bool need_input_grad = i > 0;
            const Mat& in = cache.acts[i];
            const Mat& out = cache.acts[i + 1];
            switch (li.spec.kind) {
                case LayerKind::rescale:
                    if (need_input_grad) next = grad * li.spec.factor;
                    break;
                case LayerKind::conv: {
                    relu_mask(grad, out);
                    MatMap dw(grads.data() + li.weight_offset, static_cast<Eigen::Index>(li.weight_rows),
                              static_cast<Eigen::Index>(li.weight_cols));
                    Eigen::Map<Eigen::RowVectorXd> db(grads.data() + li.bias_offset, static_cast<Eigen::Index>(li.bias_count));
                    dw.noalias() = cache.cols[i].transpose() * grad;
                    column_sums(grad, db.data());
                    if (need_input_grad) conv_backward_input(li, params, grad, scratch, next, batch);
                    break;
                }
                case LayerKind::maxpool:
                    if (need_input_grad) {
                        next.setZero(in.rows(), in.cols());
                        const auto& am = cache.argmax[i];
                        for (std::size_t k = 0; k < am.size(); ++k) next.data()[am[k]] += grad.data()[k];
                    }
                    break;
                case LayerKind::flatten:
                    if (need_input_grad) next = ConstMatMap(grad.data(), in.rows(), in.cols());
                    break;
                case LayerKind::dense: {
                    if (li.spec.activation == Activation::relu) relu_mask(grad, out);
                    MatMap dw(grads.data() + li.weight_offset, static_cast<Eigen::Index>(li.weight_rows),
                              static_cast<Eigen::Index>(li.weight_cols));
                    Eigen::Map<Eigen::RowVectorXd> db(grads.data() + li.bias_offset, static_cast<Eigen::Index>(li.bias_count));
                    dw.noalias() = in.transpose() * grad;
                    column_sums(grad, db.data());
                    if (need_input_grad) {
                        const ConstMatMap w(params.data() + li.weight_offset, static_cast<Eigen::Index>(li.weight_rows),
                                            static_cast<Eigen::Index>(li.weight_cols));
                        next.resize(in.rows(), in.cols());
                        next.noalias() = grad * w.transpose();
                    }
                    break;
                }
            }
            if (need_input_grad) std::swap(grad, next);
        }
    }

private:
    static void conv_forward(const LayerInfo& li, std::span<const double> params, const Mat& in, Mat& cols, Mat& out,
                             std::size_t batch) {
        const auto h = static_cast<long>(li.input.h), w = static_cast<long>(li.input.w);
        const auto cin = static_cast<long>(li.input.c);
        cols.resize(static_cast<Eigen::Index>(batch * h * w), 9 * cin);
        double* dst = cols.data();
        const double* src = in.data();
        for (std::size_t b = 0; b < batch; ++b) {
            const double* img = src + static_cast<long>(b) * h * w * cin;
            for (long y = 0; y < h; ++y)
                for (long x = 0; x < w; ++x)
                    for (long ky = -1; ky <= 1; ++ky) {
                        const long yy = y + ky;
                        if (yy < 0 || yy >= h) {
                            std::fill(dst, dst + 3 * cin, 0.0);
                        } else {
                            // the three horizontal taps are contiguous in NHWC
                            const long x0 = std::max(x - 1, 0L), x1 = std::min(x + 1, w - 1);
                            double* d = dst;
                            if (x == 0) {
                                std::fill(d, d + cin, 0.0);
                                d += cin;
                            }
                            const double* p = img + (yy * w + x0) * cin;
                            std::copy(p, p + (x1 - x0 + 1) * cin, d);
                            if (x == w - 1) std::fill(dst + 2 * cin, dst + 3 * cin, 0.0);
                        }
                        dst += 3 * cin;
                    }
        }
        const ConstMatMap wt(params.data() + li.weight_offset, static_cast<Eigen::Index>(li.weight_rows),
                             static_cast<Eigen::Index>(li.weight_cols));
        out.resize(cols.rows(), wt.cols());
        out.noalias() = cols * wt;
        add_bias_relu(out, params.data() + li.bias_offset, true);
    }

    static void add_bias_relu(Mat& out, const double* bias, bool relu) {
        const auto rows = out.rows(), cols = out.cols();
        double* o = out.data();
        for (Eigen::Index r = 0; r < rows; ++r, o += cols)
            for (Eigen::Index c = 0; c < cols; ++c) {
                const double v = o[c] + bias[c];
                o[c] = relu ? (v > 0.0 ? v : 0.0) : v;
            }
    }

    static void column_sums(const Mat& m, double* sums) {
        const auto rows = m.rows(), cols = m.cols();
        std::fill(sums, sums + cols, 0.0);
        const double* p = m.data();
        for (Eigen::Index r = 0; r < rows; ++r, p += cols)
            for (Eigen::Index c = 0; c < cols; ++c) sums[c] += p[c];
    }

    /// grad *= (out > 0), elementwise.
    static void relu_mask(Mat& grad, const Mat& out) {
        double* g = grad.data();
        const double* o = out.data();
        for (Eigen::Index i = 0, n = grad.size(); i < n; ++i) g[i] = o[i] > 0.0 ? g[i] : 0.0;
    }

    static void conv_backward_input(const LayerInfo& li, std::span<const double> params, const Mat& grad, Mat& dcols,
                                    Mat& dinput, std::size_t batch) {
        const auto h = static_cast<long>(li.input.h), w = static_cast<long>(li.input.w);
        const auto cin = static_cast<long>(li.input.c);
        const ConstMatMap wt(params.data() + li.weight_offset, static_cast<Eigen::Index>(li.weight_rows),
                             static_cast<Eigen::Index>(li.weight_cols));
        dcols.resize(grad.rows(), wt.rows());
        dcols.noalias() = grad * wt.transpose();
        dinput.setZero(static_cast<Eigen::Index>(batch * h * w), cin);
        const double* src = dcols.data();
        for (std::size_t b = 0; b < batch; ++b) {
            double* img = dinput.data() + static_cast<long>(b) * h * w * cin;
            for (long y = 0; y < h; ++y)
                for (long x = 0; x < w; ++x)
                    for (long ky = -1; ky <= 1; ++ky) {
                        const long yy = y + ky;
                        if (yy >= 0 && yy < h) {
                            const long x0 = std::max(x - 1, 0L), x1 = std::min(x + 1, w - 1);
                            const double* s = src + (x0 - (x - 1)) * cin;
                            double* p = img + (yy * w + x0) * cin;
                            for (long i = 0, n = (x1 - x0 + 1) * cin; i < n; ++i) p[i] += s[i];
                        }
                        src += 3 * cin;
                    }
        }
    }

    static void pool_forward(const LayerInfo& li, const Mat& in, Mat& out, std::vector<std::int32_t>& argmax,
                             std::size_t batch) {
        const std::size_t h = li.input.h, w = li.input.w, c = li.input.c;
        const std::size_t oh = li.output.h, ow = li.output.w;
        out.resize(static_cast<Eigen::Index>(batch * oh * ow), static_cast<Eigen::Index>(c));
        argmax.resize(batch * oh * ow * c);
        const double* src = in.data();
        double* dst = out.data();
        std::int32_t* arg = argmax.data();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x) {
                    const std::size_t base = ((b * h + 2 * y) * w + 2 * x) * c;
                    const std::size_t offsets[4] = {0, c, w * c, w * c + c};
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        std::size_t best = base + ch;
                        for (std::size_t k = 1; k < 4; ++k)
                            if (src[base + offsets[k] + ch] > src[best]) best = base + offsets[k] + ch;
                        *dst++ = src[best];
                        *arg++ = static_cast<std::int32_t>(best);
                    }
                }
    }

    NetworkSpec spec_;
    std::vector<LayerInfo> layers_;
    std::size_t param_count_ = 0;
};

}  // namespace mlia::nn
