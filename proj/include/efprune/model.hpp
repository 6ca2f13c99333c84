#ifndef EFPRUNE_MODEL_HPP
#define EFPRUNE_MODEL_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "efprune/layers.hpp"

namespace efprune {

// conv -> optional batch-norm -> optional ReLU
template <typename Scalar>
struct ConvBlock {
    Conv2d<Scalar> conv;
    std::optional<BatchNorm2d<Scalar>> bn;
    bool relu = true;
    int stage = 0;
};

// conv1 -> bn1 -> relu -> conv2 -> bn2 -> (+ identity) -> relu
template <typename Scalar>
struct ResidualBlock {
    Conv2d<Scalar> conv1;
    std::optional<BatchNorm2d<Scalar>> bn1;
    Conv2d<Scalar> conv2;
    std::optional<BatchNorm2d<Scalar>> bn2;
    int stage = 0;
};

template <typename Scalar>
using Block = std::variant<ConvBlock<Scalar>, ResidualBlock<Scalar>>;

template <typename Scalar>
struct Parameter {
    std::string name;
    Tensor<Scalar>* value;
};

template <typename Scalar>
struct ConstParameter {
    std::string name;
    const Tensor<Scalar>* value;
};

template <typename Scalar>
using Gradients = std::vector<Tensor<Scalar>>;

// Sequential stack of conv / residual blocks followed by global average pooling
// and an optional dense classifier.
template <typename Scalar>
struct Model {
    std::string preset;
    Shape input_shape;  // [C, H, W]
    std::vector<Block<Scalar>> blocks;
    std::optional<Dense<Scalar>> head;

    Index input_channels() const { return input_shape.empty() ? 0 : input_shape[0]; }

    // Number of ratio entries a per-stage ratio list must carry: one per conv
    // stage plus one for the classifier.
    int stage_count() const {
        int last = -1;
        for (const auto& block : blocks)
            std::visit([&](const auto& b) { last = std::max(last, b.stage); }, block);
        return last + 2;
    }

    template <typename F>
    void for_each_conv(F&& f) {
        for (auto& block : blocks)
            std::visit(
                [&](auto& b) {
                    using B = std::decay_t<decltype(b)>;
                    if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                        f(b.conv);
                    } else {
                        f(b.conv1);
                        f(b.conv2);
                    }
                },
                block);
    }

    template <typename F>
    void for_each_conv(F&& f) const {
        const_cast<Model*>(this)->for_each_conv([&](const Conv2d<Scalar>& c) { f(c); });
    }

    std::vector<const Conv2d<Scalar>*> convs() const {
        std::vector<const Conv2d<Scalar>*> out;
        for_each_conv([&](const Conv2d<Scalar>& c) { out.push_back(&c); });
        return out;
    }

    std::vector<Conv2d<Scalar>*> prunable_convs() {
        std::vector<Conv2d<Scalar>*> out;
        for_each_conv([&](Conv2d<Scalar>& c) {
            if (c.prunable) out.push_back(&c);
        });
        return out;
    }

    std::vector<const Conv2d<Scalar>*> prunable_convs() const {
        std::vector<const Conv2d<Scalar>*> out;
        for_each_conv([&](const Conv2d<Scalar>& c) {
            if (c.prunable) out.push_back(&c);
        });
        return out;
    }

    // Fixed enumeration order shared by gradients, optimizer state and checkpoints.
    std::vector<Parameter<Scalar>> parameters() {
        std::vector<Parameter<Scalar>> out;
        auto add_conv = [&](Conv2d<Scalar>& c) {
            out.push_back({c.name + ".weight", &c.weight});
            if (c.bias) out.push_back({c.name + ".bias", &*c.bias});
        };
        auto add_bn = [&](std::optional<BatchNorm2d<Scalar>>& bn) {
            if (!bn) return;
            out.push_back({bn->name + ".gamma", &bn->gamma});
            out.push_back({bn->name + ".beta", &bn->beta});
        };
        for (auto& block : blocks)
            std::visit(
                [&](auto& b) {
                    using B = std::decay_t<decltype(b)>;
                    if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                        add_conv(b.conv);
                        add_bn(b.bn);
                    } else {
                        add_conv(b.conv1);
                        add_bn(b.bn1);
                        add_conv(b.conv2);
                        add_bn(b.bn2);
                    }
                },
                block);
        if (head) {
            out.push_back({head->name + ".weight", &head->weight});
            out.push_back({head->name + ".bias", &head->bias});
        }
        return out;
    }

    std::vector<ConstParameter<Scalar>> parameters() const;

    Gradients<Scalar> zero_gradients() {
        Gradients<Scalar> grads;
        for (auto& p : parameters()) grads.emplace_back(p.value->shape());
        return grads;
    }

    template <typename Other>
    Model<Other> cast() const;

    // Throws DimensionError naming the first layer whose channel count does not chain.
    void validate() const;
};

template <typename Scalar>
template <typename Other>
Model<Other> Model<Scalar>::cast() const {
    auto conv_cast = [](const Conv2d<Scalar>& c) {
        Conv2d<Other> o;
        o.name = c.name;
        o.weight = c.weight.template cast<Other>();
        if (c.bias) o.bias = c.bias->template cast<Other>();
        o.stride = c.stride;
        o.padding = c.padding;
        o.prunable = c.prunable;
        return o;
    };
    auto bn_cast = [](const std::optional<BatchNorm2d<Scalar>>& bn) -> std::optional<BatchNorm2d<Other>> {
        if (!bn) return std::nullopt;
        BatchNorm2d<Other> o;
        o.name = bn->name;
        o.gamma = bn->gamma.template cast<Other>();
        o.beta = bn->beta.template cast<Other>();
        o.running_mean = bn->running_mean.template cast<Other>();
        o.running_var = bn->running_var.template cast<Other>();
        o.epsilon = static_cast<Other>(bn->epsilon);
        o.momentum = static_cast<Other>(bn->momentum);
        return o;
    };
    Model<Other> out;
    out.preset = preset;
    out.input_shape = input_shape;
    for (const auto& block : blocks)
        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    out.blocks.push_back(ConvBlock<Other>{conv_cast(b.conv), bn_cast(b.bn), b.relu, b.stage});
                } else {
                    out.blocks.push_back(ResidualBlock<Other>{conv_cast(b.conv1), bn_cast(b.bn1), conv_cast(b.conv2),
                                                              bn_cast(b.bn2), b.stage});
                }
            },
            block);
    if (head) {
        Dense<Other> d;
        d.name = head->name;
        d.weight = head->weight.template cast<Other>();
        d.bias = head->bias.template cast<Other>();
        out.head = std::move(d);
    }
    return out;
}

template <typename Scalar>
void Model<Scalar>::validate() const {
    if (input_shape.size() != 3) throw DimensionError("input", "model input shape must be [C,H,W]");
    Shape shape = input_shape;
    auto check_bn = [](const std::optional<BatchNorm2d<Scalar>>& bn, const Conv2d<Scalar>& conv) {
        if (bn && bn->channels() != conv.filters())
            throw DimensionError(bn->name, "has " + std::to_string(bn->channels()) + " channels but " + conv.name +
                                               " produces " + std::to_string(conv.filters()));
    };
    for (const auto& block : blocks)
        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    shape = b.conv.output_shape(shape);
                    if (b.conv.bias && b.conv.bias->size() != b.conv.filters())
                        throw DimensionError(b.conv.name, "bias length does not match filter count");
                    check_bn(b.bn, b.conv);
                } else {
                    const Shape in = shape;
                    shape = b.conv2.output_shape(b.conv1.output_shape(shape));
                    check_bn(b.bn1, b.conv1);
                    check_bn(b.bn2, b.conv2);
                    if (shape != in)
                        throw DimensionError(b.conv2.name, "residual add needs matching shapes: identity " +
                                                               shape_string(in) + " vs branch " + shape_string(shape));
                }
            },
            block);
    if (head && head->inputs() != shape[0])
        throw DimensionError(head->name, "expects " + std::to_string(head->inputs()) + " features, previous layer has " +
                                             std::to_string(shape[0]) + " channels");
}

template <typename Scalar>
std::vector<ConstParameter<Scalar>> Model<Scalar>::parameters() const {
    std::vector<ConstParameter<Scalar>> out;
    for (auto& p : const_cast<Model*>(this)->parameters()) out.push_back({p.name, p.value});
    return out;
}

namespace detail {

template <typename Scalar>
struct ConvBlockTrace {
    Tensor<Scalar> input;
    ConvCache<Scalar> conv;
    BatchNormCache<Scalar> bn;
    Tensor<Scalar> output;
};

template <typename Scalar>
struct ResidualTrace {
    Tensor<Scalar> input;
    ConvCache<Scalar> conv1, conv2;
    BatchNormCache<Scalar> bn1, bn2;
    Tensor<Scalar> mid;  // post-ReLU output of the first half
    Tensor<Scalar> output;
};

template <typename Scalar>
struct Trace {
    std::vector<std::variant<ConvBlockTrace<Scalar>, ResidualTrace<Scalar>>> blocks;
    Shape pooled_from;
    Tensor<Scalar> features;
};

template <typename Scalar>
std::string block_name(const Block<Scalar>& block) {
    return std::visit(
        [](const auto& b) -> std::string {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, ConvBlock<Scalar>>)
                return b.conv.name;
            else
                return b.conv1.name + "/" + b.conv2.name;
        },
        block);
}

} // namespace detail

// Runs the model. In Train mode batch-norm uses batch statistics and updates its
// running estimates; `trace` (when provided) records what backward needs.
template <typename Scalar>
Tensor<Scalar> forward(Model<Scalar>& model, const Tensor<Scalar>& batch, Mode mode,
                       detail::Trace<Scalar>* trace = nullptr, bool update_running = true) {
    if (batch.rank() != 4) throw DimensionError("input", "batch must be [B,C,H,W], got " + shape_string(batch.shape()));
    if (batch.dim(1) != model.input_channels())
        throw DimensionError(model.blocks.empty() ? "input" : detail::block_name(model.blocks.front()),
                             "batch has " + std::to_string(batch.dim(1)) + " channels, model expects " +
                                 std::to_string(model.input_channels()));
    Tensor<Scalar> x = batch;
    for (auto& block : model.blocks) {
        std::visit(
            [&](auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    detail::ConvBlockTrace<Scalar> t;
                    Tensor<Scalar> y = b.conv.forward(x, trace ? &t.conv : nullptr);
                    if (b.bn) y = b.bn->forward(y, mode, trace ? &t.bn : nullptr, update_running);
                    if (b.relu) y = relu(y);
                    if (trace) {
                        t.input = std::move(x);
                        t.output = y;
                        trace->blocks.emplace_back(std::move(t));
                    }
                    x = std::move(y);
                } else {
                    detail::ResidualTrace<Scalar> t;
                    Tensor<Scalar> y = b.conv1.forward(x, trace ? &t.conv1 : nullptr);
                    if (b.bn1) y = b.bn1->forward(y, mode, trace ? &t.bn1 : nullptr, update_running);
                    y = relu(y);
                    Tensor<Scalar> z = b.conv2.forward(y, trace ? &t.conv2 : nullptr);
                    if (b.bn2) z = b.bn2->forward(z, mode, trace ? &t.bn2 : nullptr, update_running);
                    if (!z.same_shape(x))
                        throw DimensionError(b.conv2.name, "residual add shape mismatch " + shape_string(z.shape()) +
                                                               " vs " + shape_string(x.shape()));
                    z.data() += x.data();
                    z = relu(z);
                    if (trace) {
                        t.input = std::move(x);
                        t.mid = std::move(y);
                        t.output = z;
                        trace->blocks.emplace_back(std::move(t));
                    }
                    x = std::move(z);
                }
            },
            block);
    }
    if (trace) trace->pooled_from = x.shape();
    Tensor<Scalar> features = global_average_pool(x);
    if (!model.head) {
        if (trace) trace->features = features;
        return features;
    }
    Tensor<Scalar> logits = model.head->forward(features);
    if (trace) trace->features = std::move(features);
    return logits;
}

template <typename Scalar>
Tensor<Scalar> forward(const Model<Scalar>& model, const Tensor<Scalar>& batch) {
    return forward(const_cast<Model<Scalar>&>(model), batch, Mode::Eval, static_cast<detail::Trace<Scalar>*>(nullptr), false);
}

template <typename Scalar>
struct LossAndGradients {
    Scalar loss;
    Gradients<Scalar> gradients;  // aligned with model.parameters()
};

namespace detail {

template <typename Scalar>
std::string first_non_finite_layer(const Model<Scalar>& model, const Trace<Scalar>& trace) {
    for (std::size_t i = 0; i < trace.blocks.size(); ++i) {
        const bool finite = std::visit([](const auto& t) { return t.output.all_finite(); }, trace.blocks[i]);
        if (!finite) return block_name(model.blocks[i]);
    }
    if (model.head) return model.head->name;
    return "loss";
}

} // namespace detail

// Mean softmax cross-entropy over the batch and its gradient for every parameter.
// Uses Train mode (batch statistics) unless `mode` says otherwise.
template <typename Scalar>
LossAndGradients<Scalar> backward(Model<Scalar>& model, const Tensor<Scalar>& batch, const std::vector<int>& labels,
                                  Mode mode = Mode::Train, bool update_running = true) {
    detail::Trace<Scalar> trace;
    Tensor<Scalar> logits = forward(model, batch, mode, &trace, update_running);
    Tensor<Scalar> dlogits;
    const Scalar loss = softmax_cross_entropy(logits, labels, &dlogits);
    if (!std::isfinite(static_cast<double>(loss)))
        throw NumericError(detail::first_non_finite_layer(model, trace), "non-finite loss");

    Gradients<Scalar> grads = model.zero_gradients();
    // Gradients are written in reverse parameter order; walk the index backwards.
    std::size_t slot = grads.size();
    auto take = [&]() -> Tensor<Scalar>& { return grads[--slot]; };

    Tensor<Scalar> dx;
    if (model.head) {
        Tensor<Scalar>& gb = take();
        Tensor<Scalar>& gw = take();
        dx = model.head->backward(trace.features, dlogits, gw, gb);
    } else {
        dx = std::move(dlogits);
    }
    dx = global_average_pool_backward(trace.pooled_from, dx);

    auto conv_back = [&](const Conv2d<Scalar>& conv, const ConvCache<Scalar>& cache, const Tensor<Scalar>& dy,
                         bool need_dx) {
        Tensor<Scalar>* gb = conv.bias ? &take() : nullptr;
        Tensor<Scalar>& gw = take();
        return conv.backward(dy, cache, gw, gb, need_dx);
    };
    auto bn_back = [&](const std::optional<BatchNorm2d<Scalar>>& bn, const BatchNormCache<Scalar>& cache,
                       const Tensor<Scalar>& dy) {
        if (!bn) return dy;
        Tensor<Scalar>& gbeta = take();
        Tensor<Scalar>& ggamma = take();
        return bn->backward(dy, cache, ggamma, gbeta);
    };

    for (std::size_t i = model.blocks.size(); i-- > 0;) {
        const bool need_dx = i > 0;
        std::visit(
            [&](auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    const auto& t = std::get<detail::ConvBlockTrace<Scalar>>(trace.blocks[i]);
                    Tensor<Scalar> dy = b.relu ? relu_backward(t.output, dx) : dx;
                    dy = bn_back(b.bn, t.bn, dy);
                    dx = conv_back(b.conv, t.conv, dy, need_dx);
                } else {
                    const auto& t = std::get<detail::ResidualTrace<Scalar>>(trace.blocks[i]);
                    Tensor<Scalar> dz = relu_backward(t.output, dx);
                    Tensor<Scalar> dy = bn_back(b.bn2, t.bn2, dz);
                    dy = conv_back(b.conv2, t.conv2, dy, true);
                    dy = relu_backward(t.mid, dy);
                    dy = bn_back(b.bn1, t.bn1, dy);
                    Tensor<Scalar> dbranch = conv_back(b.conv1, t.conv1, dy, true);
                    dbranch.data() += dz.data();
                    dx = std::move(dbranch);
                }
            },
            model.blocks[i]);
    }
    return {loss, std::move(grads)};
}

// FLOPs for one sample: 2*N*C*k*k*Ho*Wo per conv, 2*in*out for the classifier.
template <typename Scalar>
std::int64_t count_flops(const Model<Scalar>& model, const Shape& input_chw) {
    std::int64_t total = 0;
    Shape shape = input_chw;
    for (const auto& block : model.blocks)
        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    total += b.conv.flops(shape);
                    shape = b.conv.output_shape(shape);
                } else {
                    total += b.conv1.flops(shape);
                    shape = b.conv1.output_shape(shape);
                    total += b.conv2.flops(shape);
                    shape = b.conv2.output_shape(shape);
                }
            },
            block);
    if (model.head) total += model.head->flops();
    return total;
}

template <typename Scalar>
std::int64_t count_flops(const Model<Scalar>& model) {
    return count_flops(model, model.input_shape);
}

template <typename Scalar>
std::int64_t count_params(const Model<Scalar>& model) {
    std::int64_t total = 0;
    for (const auto& p : model.parameters()) total += p.value->size();
    return total;
}

template <typename Scalar>
std::vector<int> predict(const Model<Scalar>& model, const Tensor<Scalar>& batch) {
    Tensor<Scalar> logits = forward(model, batch);
    std::vector<int> out(static_cast<std::size_t>(logits.dim(0)));
    for (Index b = 0; b < logits.dim(0); ++b) {
        Index arg;
        logits.rows().row(b).maxCoeff(&arg);
        out[static_cast<std::size_t>(b)] = static_cast<int>(arg);
    }
    return out;
}

template <typename Scalar, typename Rng>
void initialize(Model<Scalar>& model, Rng& rng) {
    model.for_each_conv([&](Conv2d<Scalar>& c) { c.kaiming_uniform(rng); });
    for (auto& block : model.blocks)
        std::visit(
            [](auto& b) {
                auto reset = [](std::optional<BatchNorm2d<Scalar>>& bn) {
                    if (!bn) return;
                    bn->gamma.data().setOnes();
                    bn->beta.set_zero();
                    bn->running_mean.set_zero();
                    bn->running_var.data().setOnes();
                };
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    reset(b.bn);
                } else {
                    reset(b.bn1);
                    reset(b.bn2);
                }
            },
            block);
    if (model.head) model.head->kaiming_uniform(rng);
}

} // namespace efprune

#endif // EFPRUNE_MODEL_HPP
