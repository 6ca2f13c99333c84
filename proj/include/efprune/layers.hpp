#ifndef EFPRUNE_LAYERS_HPP
#define EFPRUNE_LAYERS_HPP

#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "efprune/tensor.hpp"

namespace efprune {

enum class Mode { Train, Eval };

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index conv_output_extent(Index in, Index kernel, Index stride, Index padding) {
    Index span = in + 2 * padding - kernel;
    return span < 0 ? 0 : span / stride + 1;
}

// Unfolds x[B,C,H,W] into a [C*k*k, B*Ho*Wo] matrix so convolution becomes one GEMM.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& x, Index k, Index stride, Index pad, Index ho, Index wo) {
    const Index batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
    const Index plane = ho * wo;
    RowMatrix<Scalar> cols(channels * k * k, batch * plane);
    const Scalar* src = x.ptr();
    for (Index c = 0; c < channels; ++c)
        for (Index ki = 0; ki < k; ++ki)
            for (Index kj = 0; kj < k; ++kj) {
                Scalar* row = cols.row((c * k + ki) * k + kj).data();
                for (Index b = 0; b < batch; ++b) {
                    const Scalar* img = src + (b * channels + c) * h * w;
                    Scalar* dst = row + b * plane;
                    for (Index oy = 0; oy < ho; ++oy) {
                        const Index iy = oy * stride - pad + ki;
                        if (iy < 0 || iy >= h) {
                            for (Index ox = 0; ox < wo; ++ox) dst[oy * wo + ox] = Scalar(0);
                            continue;
                        }
                        for (Index ox = 0; ox < wo; ++ox) {
                            const Index ix = ox * stride - pad + kj;
                            dst[oy * wo + ox] = (ix >= 0 && ix < w) ? img[iy * w + ix] : Scalar(0);
                        }
                    }
                }
            }
    return cols;
}

// Adjoint of im2col: scatters-adds columns back into dx[B,C,H,W].
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, Tensor<Scalar>& dx, Index k, Index stride, Index pad, Index ho,
            Index wo) {
    const Index batch = dx.dim(0), channels = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
    const Index plane = ho * wo;
    Scalar* dst = dx.ptr();
    for (Index c = 0; c < channels; ++c)
        for (Index ki = 0; ki < k; ++ki)
            for (Index kj = 0; kj < k; ++kj) {
                const Scalar* row = cols.row((c * k + ki) * k + kj).data();
                for (Index b = 0; b < batch; ++b) {
                    Scalar* img = dst + (b * channels + c) * h * w;
                    const Scalar* srcrow = row + b * plane;
                    for (Index oy = 0; oy < ho; ++oy) {
                        const Index iy = oy * stride - pad + ki;
                        if (iy < 0 || iy >= h) continue;
                        for (Index ox = 0; ox < wo; ++ox) {
                            const Index ix = ox * stride - pad + kj;
                            if (ix >= 0 && ix < w) img[iy * w + ix] += srcrow[oy * wo + ox];
                        }
                    }
                }
            }
}

template <typename Scalar>
struct ConvCache {
    RowMatrix<Scalar> cols;
    Shape input_shape;
    Index out_h = 0, out_w = 0;
};

template <typename Scalar>
struct Conv2d {
    std::string name;
    Tensor<Scalar> weight;               // [N, C, k, k]
    std::optional<Tensor<Scalar>> bias;  // [N]
    Index stride = 1;
    Index padding = 0;
    bool prunable = false;

    Conv2d() = default;
    Conv2d(std::string layer_name, Index filters, Index channels, Index kernel, Index stride_ = 1,
           Index padding_ = 0, bool with_bias = false)
        : name(std::move(layer_name)), weight({filters, channels, kernel, kernel}), stride(stride_),
          padding(padding_) {
        if (with_bias) bias = Tensor<Scalar>({filters});
        if (stride < 1 || padding < 0) throw DimensionError(name, "stride must be >= 1 and padding >= 0");
    }

    Index filters() const { return weight.dim(0); }
    Index channels() const { return weight.dim(1); }
    Index kernel() const { return weight.dim(2); }
    Index fan_in() const { return channels() * kernel() * kernel(); }

    Shape output_shape(const Shape& chw) const {
        if (chw.size() != 3 || chw[0] != channels())
            throw DimensionError(name, "expects " + std::to_string(channels()) + " input channels, got shape " +
                                           shape_string(chw));
        const Index ho = conv_output_extent(chw[1], kernel(), stride, padding);
        const Index wo = conv_output_extent(chw[2], kernel(), stride, padding);
        if (ho < 1 || wo < 1) throw DimensionError(name, "input " + shape_string(chw) + " is smaller than the kernel");
        return {filters(), ho, wo};
    }

    Tensor<Scalar> forward(const Tensor<Scalar>& x, ConvCache<Scalar>* cache) const {
        if (x.rank() != 4) throw DimensionError(name, "expects a rank-4 [B,C,H,W] input");
        const Shape out = output_shape({x.dim(1), x.dim(2), x.dim(3)});
        const Index batch = x.dim(0), ho = out[1], wo = out[2], plane = ho * wo;
        RowMatrix<Scalar> cols = im2col(x, kernel(), stride, padding, ho, wo);
        RowMatrix<Scalar> y = weight.rows() * cols;
        if (bias) y.colwise() += bias->data();
        Tensor<Scalar> result({batch, filters(), ho, wo});
        for (Index b = 0; b < batch; ++b)
            for (Index n = 0; n < filters(); ++n)
                Eigen::Map<typename Tensor<Scalar>::Vector>(result.ptr() + (b * filters() + n) * plane, plane) =
                    y.row(n).segment(b * plane, plane).transpose();
        if (cache) {
            cache->cols = std::move(cols);
            cache->input_shape = x.shape();
            cache->out_h = ho;
            cache->out_w = wo;
        }
        return result;
    }

    // Accumulates into grad_weight / grad_bias; returns dx unless `need_input_grad` is false.
    Tensor<Scalar> backward(const Tensor<Scalar>& dy, const ConvCache<Scalar>& cache, Tensor<Scalar>& grad_weight,
                            Tensor<Scalar>* grad_bias, bool need_input_grad = true) const {
        const Index batch = dy.dim(0), plane = cache.out_h * cache.out_w;
        RowMatrix<Scalar> dmat(filters(), batch * plane);
        for (Index b = 0; b < batch; ++b)
            for (Index n = 0; n < filters(); ++n)
                dmat.row(n).segment(b * plane, plane) =
                    Eigen::Map<const typename Tensor<Scalar>::Vector>(dy.ptr() + (b * filters() + n) * plane, plane)
                        .transpose();
        grad_weight.rows().noalias() += dmat * cache.cols.transpose();
        if (grad_bias) grad_bias->data() += dmat.rowwise().sum();
        if (!need_input_grad) return {};
        RowMatrix<Scalar> dcols = weight.rows().transpose() * dmat;
        Tensor<Scalar> dx(cache.input_shape);
        col2im(dcols, dx, kernel(), stride, padding, cache.out_h, cache.out_w);
        return dx;
    }

    std::int64_t flops(const Shape& chw) const {
        const Shape out = output_shape(chw);
        return 2 * filters() * channels() * kernel() * kernel() * out[1] * out[2];
    }

    std::int64_t params() const { return weight.size() + (bias ? bias->size() : 0); }

    template <typename Rng>
    void kaiming_uniform(Rng& rng) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Index i = 0; i < weight.size(); ++i) weight[i] = static_cast<Scalar>(dist(rng));
        if (bias) bias->set_zero();
    }
};

template <typename Scalar>
struct BatchNormCache {
    Tensor<Scalar> normalized;
    typename Tensor<Scalar>::Vector inv_std;
    Mode mode = Mode::Train;
};

template <typename Scalar>
struct BatchNorm2d {
    std::string name;
    Tensor<Scalar> gamma, beta, running_mean, running_var;  // all [N]
    Scalar epsilon = Scalar(1e-5);
    Scalar momentum = Scalar(0.1);

    BatchNorm2d() = default;
    BatchNorm2d(std::string layer_name, Index channels)
        : name(std::move(layer_name)), gamma(Tensor<Scalar>::constant({channels}, Scalar(1))), beta({channels}),
          running_mean({channels}), running_var(Tensor<Scalar>::constant({channels}, Scalar(1))) {}

    Index channels() const { return gamma.size(); }
    std::int64_t params() const { return gamma.size() + beta.size(); }

    Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode, BatchNormCache<Scalar>* cache,
                           bool update_running = true) {
        if (x.rank() != 4 || x.dim(1) != channels())
            throw DimensionError(name, "expects " + std::to_string(channels()) + " channels, got " +
                                           shape_string(x.shape()));
        const Index batch = x.dim(0), chans = channels(), plane = x.dim(2) * x.dim(3);
        const Index count = batch * plane;
        Tensor<Scalar> y(x.shape());
        typename Tensor<Scalar>::Vector inv_std(chans);
        Tensor<Scalar> normalized;
        if (cache) normalized = Tensor<Scalar>(x.shape());
        for (Index c = 0; c < chans; ++c) {
            Scalar mean, var;
            if (mode == Mode::Train) {
                Scalar sum = 0;
                for (Index b = 0; b < batch; ++b)
                    sum += x.data().segment((b * chans + c) * plane, plane).sum();
                mean = sum / Scalar(count);
                Scalar sq = 0;
                for (Index b = 0; b < batch; ++b)
                    sq += (x.data().segment((b * chans + c) * plane, plane).array() - mean).square().sum();
                var = sq / Scalar(count);
                if (update_running) {
                    const Scalar unbiased = count > 1 ? sq / Scalar(count - 1) : var;
                    running_mean[c] = (Scalar(1) - momentum) * running_mean[c] + momentum * mean;
                    running_var[c] = (Scalar(1) - momentum) * running_var[c] + momentum * unbiased;
                }
            } else {
                mean = running_mean[c];
                var = running_var[c];
            }
            inv_std[c] = Scalar(1) / std::sqrt(var + epsilon);
            for (Index b = 0; b < batch; ++b) {
                const Index off = (b * chans + c) * plane;
                auto xhat = (x.data().segment(off, plane).array() - mean) * inv_std[c];
                if (cache) normalized.data().segment(off, plane) = xhat.matrix();
                y.data().segment(off, plane) = (xhat * gamma[c] + beta[c]).matrix();
            }
        }
        if (cache) {
            cache->normalized = std::move(normalized);
            cache->inv_std = std::move(inv_std);
            cache->mode = mode;
        }
        return y;
    }

    Tensor<Scalar> backward(const Tensor<Scalar>& dy, const BatchNormCache<Scalar>& cache, Tensor<Scalar>& grad_gamma,
                            Tensor<Scalar>& grad_beta) const {
        const Index batch = dy.dim(0), chans = channels(), plane = dy.dim(2) * dy.dim(3);
        const Scalar count = Scalar(batch * plane);
        Tensor<Scalar> dx(dy.shape());
        for (Index c = 0; c < chans; ++c) {
            Scalar sum_dy = 0, sum_dy_xhat = 0;
            for (Index b = 0; b < batch; ++b) {
                const Index off = (b * chans + c) * plane;
                sum_dy += dy.data().segment(off, plane).sum();
                sum_dy_xhat += dy.data().segment(off, plane).dot(cache.normalized.data().segment(off, plane));
            }
            grad_gamma[c] += sum_dy_xhat;
            grad_beta[c] += sum_dy;
            const Scalar scale = gamma[c] * cache.inv_std[c];
            for (Index b = 0; b < batch; ++b) {
                const Index off = (b * chans + c) * plane;
                if (cache.mode == Mode::Eval) {
                    dx.data().segment(off, plane) = dy.data().segment(off, plane) * scale;
                } else {
                    dx.data().segment(off, plane) =
                        ((dy.data().segment(off, plane).array() * count - sum_dy -
                          cache.normalized.data().segment(off, plane).array() * sum_dy_xhat) *
                         (scale / count))
                            .matrix();
                }
            }
        }
        return dx;
    }
};

template <typename Scalar>
struct Dense {
    std::string name;
    Tensor<Scalar> weight;  // [out, in]
    Tensor<Scalar> bias;    // [out]

    Dense() = default;
    Dense(std::string layer_name, Index in, Index out)
        : name(std::move(layer_name)), weight({out, in}), bias({out}) {}

    Index inputs() const { return weight.dim(1); }
    Index outputs() const { return weight.dim(0); }
    std::int64_t params() const { return weight.size() + bias.size(); }
    std::int64_t flops() const { return 2 * inputs() * outputs(); }

    Tensor<Scalar> forward(const Tensor<Scalar>& x) const {
        if (x.rank() != 2 || x.dim(1) != inputs())
            throw DimensionError(name, "expects [B," + std::to_string(inputs()) + "] input, got " +
                                           shape_string(x.shape()));
        RowMatrix<Scalar> y = x.rows() * weight.rows().transpose();
        y.rowwise() += bias.data().transpose();
        return Tensor<Scalar>({x.dim(0), outputs()},
                              Eigen::Map<typename Tensor<Scalar>::Vector>(y.data(), y.size()));
    }

    Tensor<Scalar> backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy, Tensor<Scalar>& grad_weight,
                            Tensor<Scalar>& grad_bias) const {
        grad_weight.rows().noalias() += dy.rows().transpose() * x.rows();
        grad_bias.data() += dy.rows().colwise().sum().transpose();
        RowMatrix<Scalar> dx = dy.rows() * weight.rows();
        return Tensor<Scalar>(x.shape(), Eigen::Map<typename Tensor<Scalar>::Vector>(dx.data(), dx.size()));
    }

    template <typename Rng>
    void kaiming_uniform(Rng& rng) {
        const double bound = std::sqrt(6.0 / static_cast<double>(inputs()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Index i = 0; i < weight.size(); ++i) weight[i] = static_cast<Scalar>(dist(rng));
        bias.set_zero();
    }
};

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
    return Tensor<Scalar>(x.shape(), x.data().cwiseMax(Scalar(0)));
}

// dy masked by the forward output (output > 0 iff input > 0).
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& dy) {
    return Tensor<Scalar>(dy.shape(),
                          (output.data().array() > Scalar(0)).select(dy.data().array(), Scalar(0)).matrix());
}

template <typename Scalar>
Tensor<Scalar> global_average_pool(const Tensor<Scalar>& x) {
    const Index batch = x.dim(0), chans = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor<Scalar> y({batch, chans});
    for (Index b = 0; b < batch; ++b)
        for (Index c = 0; c < chans; ++c)
            y.at(b, c) = x.data().segment((b * chans + c) * plane, plane).sum() / Scalar(plane);
    return y;
}

template <typename Scalar>
Tensor<Scalar> global_average_pool_backward(const Shape& input_shape, const Tensor<Scalar>& dy) {
    Tensor<Scalar> dx(input_shape);
    const Index batch = input_shape[0], chans = input_shape[1], plane = input_shape[2] * input_shape[3];
    for (Index b = 0; b < batch; ++b)
        for (Index c = 0; c < chans; ++c)
            dx.data().segment((b * chans + c) * plane, plane).setConstant(dy.at(b, c) / Scalar(plane));
    return dx;
}

// Mean softmax cross-entropy; writes d(loss)/d(logits) when `grad` is non-null.
template <typename Scalar>
Scalar softmax_cross_entropy(const Tensor<Scalar>& logits, const std::vector<int>& labels, Tensor<Scalar>* grad) {
    const Index batch = logits.dim(0), classes = logits.dim(1);
    if (static_cast<Index>(labels.size()) != batch)
        throw DimensionError("loss", "label count " + std::to_string(labels.size()) + " != batch " +
                                         std::to_string(batch));
    if (grad) *grad = Tensor<Scalar>(logits.shape());
    Scalar total = 0;
    for (Index b = 0; b < batch; ++b) {
        const int label = labels[static_cast<std::size_t>(b)];
        if (label < 0 || label >= classes)
            throw ConfigError("label " + std::to_string(label) + " outside [0," + std::to_string(classes) + ")");
        auto row = logits.rows().row(b);
        const Scalar peak = row.maxCoeff();
        const Scalar log_sum = std::log((row.array() - peak).exp().sum()) + peak;
        total += log_sum - row[label];
        if (grad) {
            auto g = grad->rows().row(b);
            g = ((row.array() - log_sum).exp() / Scalar(batch)).matrix();
            g[label] -= Scalar(1) / Scalar(batch);
        }
    }
    return total / Scalar(batch);
}

} // namespace efprune

#endif // EFPRUNE_LAYERS_HPP
