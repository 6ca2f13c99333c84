#ifndef EFPRUNE_OPTIMIZER_HPP
#define EFPRUNE_OPTIMIZER_HPP

#include <vector>

#include "efprune/model.hpp"

namespace efprune {

// SGD with heavy-ball momentum and L2 weight decay:
//   g' = g + weight_decay * w;  v = momentum * v + g';  w -= lr * v
// The first step initializes v = g'.
template <typename Scalar>
class Sgd {
public:
    Sgd() = default;
    Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

    double momentum() const noexcept { return momentum_; }
    double weight_decay() const noexcept { return weight_decay_; }

    void step(Model<Scalar>& model, const Gradients<Scalar>& gradients, double lr) {
        if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
        auto params = model.parameters();
        if (params.size() != gradients.size())
            throw DimensionError("sgd", "got " + std::to_string(gradients.size()) + " gradients for " +
                                            std::to_string(params.size()) + " parameters");
        if (velocity_.size() != params.size()) {
            velocity_.clear();
            for (const auto& p : params) velocity_.emplace_back(p.value->shape());
            initialized_ = false;
        }
        const Scalar mu = static_cast<Scalar>(momentum_);
        const Scalar decay = static_cast<Scalar>(weight_decay_);
        const Scalar rate = static_cast<Scalar>(lr);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& w = params[i].value->data();
            const auto& g = gradients[i];
            if (!g.same_shape(*params[i].value))
                throw DimensionError(params[i].name, "gradient shape " + shape_string(g.shape()) +
                                                         " != parameter shape " +
                                                         shape_string(params[i].value->shape()));
            auto& v = velocity_[i].data();
            if (!velocity_[i].same_shape(*params[i].value))
                throw DimensionError(params[i].name, "momentum buffer shape does not match parameter");
            if (momentum_ == 0.0) {
                if (weight_decay_ == 0.0)
                    w -= rate * g.data();
                else
                    w -= rate * (g.data() + decay * w);
                continue;
            }
            if (!initialized_)
                v = g.data() + decay * w;
            else
                v = mu * v + g.data() + decay * w;
            w -= rate * v;
        }
        initialized_ = true;
    }

    // Momentum buffers, aligned with model.parameters(); empty before the first step.
    const std::vector<Tensor<Scalar>>& velocity() const noexcept { return velocity_; }
    bool initialized() const noexcept { return initialized_; }

    void restore(std::vector<Tensor<Scalar>> velocity, bool initialized) {
        velocity_ = std::move(velocity);
        initialized_ = initialized;
    }

    void reset() {
        velocity_.clear();
        initialized_ = false;
    }

private:
    double momentum_ = 0.0;
    double weight_decay_ = 0.0;
    std::vector<Tensor<Scalar>> velocity_;
    bool initialized_ = false;
};

template <typename Scalar>
void sgd_step(Model<Scalar>& model, const Gradients<Scalar>& gradients, Sgd<Scalar>& optimizer, double lr) {
    optimizer.step(model, gradients, lr);
}

} // namespace efprune

#endif // EFPRUNE_OPTIMIZER_HPP
