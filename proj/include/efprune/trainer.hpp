#ifndef EFPRUNE_TRAINER_HPP
#define EFPRUNE_TRAINER_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "efprune/data.hpp"
#include "efprune/electrostatics.hpp"
#include "efprune/optimizer.hpp"

namespace efprune {

// Multi-step schedule: the lr of the latest milestone whose start epoch <= epoch.
struct LrPolicy {
    std::vector<std::pair<int, double>> milestones;

    void validate() const;

    static LrPolicy p1();  // 0: 1e-1, 100: 1e-2, 150: 1e-3 (200 epochs)
    static LrPolicy p2();  // 0: 1e-2, 60: 1e-3, 90: 1e-4 (120 epochs)
    static LrPolicy constant(double lr);

    // Milestones rescaled from a `from_epochs` schedule to `to_epochs` (rounded to nearest epoch).
    LrPolicy scaled(int from_epochs, int to_epochs) const;
};

double lr_at(const LrPolicy& policy, int epoch);

// "P1", "P2", "P1@20" (P1 compressed to 20 epochs), or explicit "0:0.1,10:0.01".
LrPolicy parse_lr_policy(const std::string& text);
std::string format_lr_policy(const LrPolicy& policy);

enum class Regularizer { None, Electrostatic, L1 };
enum class RecomputeSchedule { PerStep, PerEpoch };

const char* to_string(Regularizer r);
const char* to_string(RecomputeSchedule s);
Regularizer parse_regularizer(const std::string& text);
RecomputeSchedule parse_recompute_schedule(const std::string& text);

struct TrainConfig {
    double alpha_e = 0.0;
    double k_e = kCoulombConstant;
    int epochs = 20;
    Index batch_size = 64;
    LrPolicy lr_policy = LrPolicy::p1().scaled(200, 20);
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::uint64_t seed = 1;
    Regularizer regularizer = Regularizer::None;
    double l1_rate = 0.0;
    RecomputeSchedule recompute = RecomputeSchedule::PerStep;
    std::string pretrained;  // empty = random init
    Index eval_batch_size = 500;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// Fine-tuning defaults: plain SGD(0.9, 5e-4) under the P2 schedule compressed to `epochs`.
TrainConfig finetune_config(const TrainConfig& base, int epochs);

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double penalty = 0.0;
    double test_top1 = 0.0;
    double seconds = 0.0;
};

struct MetricLog {
    std::vector<EpochMetrics> epochs;

    static constexpr const char* kHeader = "epoch,lr,train_loss,penalty,test_top1,seconds";
    void write_csv(std::ostream& os) const;
    void write_csv(const std::string& path) const;
    static MetricLog read_csv(const std::string& path);
    double total_seconds() const;
};

template <typename Scalar>
double evaluate(const Model<Scalar>& model, const Dataset& data, Index batch_size = 500) {
    if (data.size() == 0) return 0.0;
    Index correct = 0;
    std::vector<Index> idx;
    for (Index start = 0; start < data.size(); start += batch_size) {
        const Index end = std::min(start + batch_size, data.size());
        idx.resize(static_cast<std::size_t>(end - start));
        std::iota(idx.begin(), idx.end(), start);
        const auto preds = predict(model, data.gather<Scalar>(idx));
        for (std::size_t i = 0; i < idx.size(); ++i)
            correct += preds[i] == data.labels[static_cast<std::size_t>(idx[i])];
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace detail {

template <typename Scalar>
std::vector<std::size_t> prunable_weight_slots(Model<Scalar>& model) {
    std::vector<std::size_t> slots;
    const auto params = model.parameters();
    for (const auto* conv : model.prunable_convs())
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].value == &conv->weight) slots.push_back(i);
    return slots;
}

} // namespace detail

// Adds the configured regularizer's gradient to `grads` (in place). For the
// electrostatic regularizer `fields` holds one frozen field per prunable layer.
template <typename Scalar>
void add_regularizer_gradient(Model<Scalar>& model, Gradients<Scalar>& grads, const TrainConfig& config,
                              const std::vector<LayerForceField>& fields) {
    if (config.regularizer == Regularizer::None) return;
    const auto prunable = model.prunable_convs();
    const auto slots = detail::prunable_weight_slots(model);
    for (std::size_t i = 0; i < prunable.size(); ++i) {
        auto& g = grads[slots[i]].data();
        const auto& w = prunable[i]->weight.data();
        if (config.regularizer == Regularizer::Electrostatic) {
            if (config.alpha_e == 0.0) continue;
            g += penalty_gradient(*prunable[i], fields.at(i), config.alpha_e, config.k_e).data();
        } else if (config.l1_rate != 0.0) {
            const Scalar rate = static_cast<Scalar>(config.l1_rate);
            g += w.unaryExpr([rate](Scalar v) { return rate * Scalar((v > Scalar(0)) - (v < Scalar(0))); });
        }
    }
}

// One optimization step on one batch: data gradient + regularizer gradient, then SGD.
// When `fields` is null and the regularizer is electrostatic, the field is
// computed from the current weights. Returns the data loss.
template <typename Scalar>
Scalar train_step(Model<Scalar>& model, Sgd<Scalar>& optimizer, const Tensor<Scalar>& batch,
                  const std::vector<int>& labels, const TrainConfig& config, double lr,
                  const std::vector<LayerForceField>* fields = nullptr, Gradients<Scalar>* data_gradients = nullptr,
                  std::int64_t step = 0) {
    auto result = backward(model, batch, labels, Mode::Train);
    if (data_gradients) *data_gradients = result.gradients;
    if (config.regularizer == Regularizer::Electrostatic && config.alpha_e != 0.0) {
        if (fields) {
            add_regularizer_gradient(model, result.gradients, config, *fields);
        } else {
            const auto fresh = model_force_fields(model, config.k_e, step);
            add_regularizer_gradient(model, result.gradients, config, fresh);
        }
    } else {
        add_regularizer_gradient(model, result.gradients, config, {});
    }
    optimizer.step(model, result.gradients, lr);
    return result.loss;
}

template <typename Scalar>
struct TrainResult {
    MetricLog log;
    Sgd<Scalar> optimizer;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Trains `model` in place. Sample order comes from a generator seeded with
// config.seed, so identical config + seed gives identical weights.
template <typename Scalar>
TrainResult<Scalar> train(Model<Scalar>& model, const Dataset& train_set, const Dataset* test_set,
                          const TrainConfig& config, Sgd<Scalar>* resume = nullptr,
                          const EpochCallback& on_epoch = {}) {
    config.validate();
    if (train_set.sample_shape() != model.input_shape)
        throw DimensionError("input", "dataset samples are " + shape_string(train_set.sample_shape()) +
                                          " but the model expects " + shape_string(model.input_shape));
    if (config.regularizer == Regularizer::Electrostatic && model.prunable_convs().empty())
        throw ConfigError("electrostatic training needs at least one prunable layer");

    TrainResult<Scalar> result{{}, resume ? *resume : Sgd<Scalar>(config.momentum, config.weight_decay)};
    std::mt19937_64 rng(config.seed);
    std::vector<Index> order(static_cast<std::size_t>(train_set.size()));
    std::iota(order.begin(), order.end(), Index{0});
    const bool has_prunable = !model.prunable_convs().empty();
    std::int64_t step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const double lr = lr_at(config.lr_policy, epoch);
        std::shuffle(order.begin(), order.end(), rng);

        std::vector<LayerForceField> epoch_fields;
        const bool electrostatic = config.regularizer == Regularizer::Electrostatic && config.alpha_e != 0.0;
        if (electrostatic && config.recompute == RecomputeSchedule::PerEpoch)
            epoch_fields = model_force_fields(model, config.k_e, epoch);

        double loss_sum = 0.0;
        Index seen = 0;
        std::vector<Index> idx;
        for (Index begin = 0; begin < train_set.size(); begin += config.batch_size) {
            const Index end = std::min(begin + config.batch_size, train_set.size());
            idx.assign(order.begin() + begin, order.begin() + end);
            const auto batch = train_set.gather<Scalar>(idx);
            const auto labels = train_set.gather_labels(idx);
            Scalar loss;
            try {
                loss = train_step(model, result.optimizer, batch, labels, config, lr,
                                  config.recompute == RecomputeSchedule::PerEpoch ? &epoch_fields : nullptr, static_cast<Gradients<Scalar>*>(nullptr),
                                  step);
            } catch (const NumericError& e) {
                if (config.regularizer == Regularizer::Electrostatic) {
                    std::ostringstream msg;
                    msg << "non-finite loss at epoch " << epoch << " (alpha_e = " << config.alpha_e
                        << " is the likely cause; try a smaller rate)";
                    throw NumericError(e.layer(), msg.str());
                }
                throw;
            }
            loss_sum += static_cast<double>(loss) * static_cast<double>(end - begin);
            seen += end - begin;
            ++step;
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        EpochMetrics m;
        m.epoch = epoch;
        m.lr = lr;
        m.train_loss = loss_sum / static_cast<double>(seen);
        m.penalty = has_prunable ? penalty(model, config.k_e) : 0.0;
        m.test_top1 = test_set ? evaluate(model, *test_set, config.eval_batch_size) : 0.0;
        m.seconds = seconds;
        result.log.epochs.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    return result;
}

// Standard (unregularized) training of a pruned model. Zero epochs returns immediately.
template <typename Scalar>
TrainResult<Scalar> finetune(Model<Scalar>& pruned, const Dataset& train_set, const Dataset* test_set,
                             const TrainConfig& config, const EpochCallback& on_epoch = {}) {
    if (config.epochs == 0) return {{}, Sgd<Scalar>(config.momentum, config.weight_decay)};
    pruned.validate();
    TrainConfig ft = config;
    ft.regularizer = Regularizer::None;
    return train(pruned, train_set, test_set, ft, static_cast<Sgd<Scalar>*>(nullptr), on_epoch);
}

struct TrainingCost {
    double baseline_seconds = 0.0;
    double l1_seconds = 0.0;
    double electrostatic_seconds = 0.0;

    static double hours(double seconds) { return seconds / 3600.0; }
};

// Wall-clock training time of the three regimes under identical epochs, data and
// initial weights. `make_model` must return a freshly initialized model.
template <typename Scalar>
TrainingCost measure_training_cost(const std::function<Model<Scalar>()>& make_model, const TrainConfig& config,
                                   const Dataset& train_set) {
    TrainingCost cost;
    auto run = [&](Regularizer reg) {
        TrainConfig c = config;
        c.regularizer = reg;
        if (reg == Regularizer::L1 && c.l1_rate == 0.0) c.l1_rate = 1e-2;
        if (reg == Regularizer::Electrostatic && c.alpha_e == 0.0) c.alpha_e = 1e-16;
        Model<Scalar> m = make_model();
        return train(m, train_set, nullptr, c).log.total_seconds();
    };
    cost.baseline_seconds = run(Regularizer::None);
    cost.l1_seconds = run(Regularizer::L1);
    cost.electrostatic_seconds = run(Regularizer::Electrostatic);
    return cost;
}

} // namespace efprune

#endif // EFPRUNE_TRAINER_HPP
