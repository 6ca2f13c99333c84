#ifndef EFPRUNE_CHECKPOINT_HPP
#define EFPRUNE_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "efprune/model.hpp"
#include "efprune/optimizer.hpp"

namespace efprune {

// On-disk layout (little-endian):
//   "EFPCKPT\0" | u32 version | u64 config digest (FNV-1a of config json) |
//   str config json | i64 epoch | model topology + f64 weights | optimizer state
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct OptimizerState {
    double momentum = 0.0;
    double weight_decay = 0.0;
    bool initialized = false;
    std::vector<Tensor<double>> velocity;
};

struct Checkpoint {
    Model<double> model;
    std::optional<OptimizerState> optimizer;
    std::string config_json;
    std::int64_t epoch = 0;

    std::uint64_t config_digest() const;
};

std::uint64_t fnv1a64(const std::string& text);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
OptimizerState capture_optimizer(const Sgd<Scalar>& sgd) {
    OptimizerState s;
    s.momentum = sgd.momentum();
    s.weight_decay = sgd.weight_decay();
    s.initialized = sgd.initialized();
    for (const auto& v : sgd.velocity()) s.velocity.push_back(v.template cast<double>());
    return s;
}

template <typename Scalar>
Sgd<Scalar> restore_optimizer(const OptimizerState& state) {
    Sgd<Scalar> sgd(state.momentum, state.weight_decay);
    std::vector<Tensor<Scalar>> velocity;
    for (const auto& v : state.velocity) velocity.push_back(v.template cast<Scalar>());
    sgd.restore(std::move(velocity), state.initialized);
    return sgd;
}

} // namespace efprune

#endif // EFPRUNE_CHECKPOINT_HPP
