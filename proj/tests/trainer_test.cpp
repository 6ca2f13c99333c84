#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "efprune/presets.hpp"
#include "efprune/pruner.hpp"
#include "efprune/trainer.hpp"
#include "support/oracles.hpp"

using namespace efprune;

namespace {

SyntheticSpec small_task(std::uint64_t seed, Index samples = 256) {
    SyntheticSpec s;
    s.classes = 4;
    s.samples = samples;
    s.height = s.width = 10;
    s.seed = seed;
    return s;
}

Model<double> small_model(std::uint64_t seed, Index width = 4, Shape chw = {1, 10, 10}, int classes = 4) {
    PresetOptions o;
    o.width = width;
    o.input_chw = chw;
    o.classes = classes;
    return build_preset<double>(o, seed);
}

TrainConfig quick_config(int epochs = 2) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 32;
    c.lr_policy = LrPolicy::constant(0.05);
    c.eval_batch_size = 128;
    return c;
}

bool same_weights(Model<double>& a, Model<double>& b) {
    const auto pa = a.parameters(), pb = b.parameters();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (!(*pa[i].value == *pb[i].value)) return false;
    return true;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

TEST(LrPolicy, P1Milestones) {
    const auto p1 = LrPolicy::p1();
    EXPECT_EQ(lr_at(p1, 0), 0.1);
    EXPECT_EQ(lr_at(p1, 99), 0.1);
    EXPECT_EQ(lr_at(p1, 100), 0.01);
    EXPECT_EQ(lr_at(p1, 149), 0.01);
    EXPECT_EQ(lr_at(p1, 150), 0.001);
    EXPECT_EQ(lr_at(p1, 175), 0.001);
}

TEST(LrPolicy, P2Milestones) {
    const auto p2 = LrPolicy::p2();
    EXPECT_EQ(lr_at(p2, 0), 0.01);
    EXPECT_EQ(lr_at(p2, 59), 0.01);
    EXPECT_EQ(lr_at(p2, 60), 0.001);
    EXPECT_EQ(lr_at(p2, 90), 0.0001);
}

TEST(LrPolicy, ConstantScaledAndParsed) {
    const auto c = LrPolicy::constant(0.3);
    for (int e : {0, 5, 1000}) EXPECT_EQ(lr_at(c, e), 0.3);
    const auto s = LrPolicy::p1().scaled(200, 20);
    EXPECT_EQ(lr_at(s, 9), 0.1);
    EXPECT_EQ(lr_at(s, 10), 0.01);
    EXPECT_EQ(lr_at(s, 15), 0.001);
    EXPECT_EQ(format_lr_policy(parse_lr_policy("P1@20")), format_lr_policy(s));
    EXPECT_EQ(format_lr_policy(parse_lr_policy("P2")), format_lr_policy(LrPolicy::p2()));
    const auto explicit_policy = parse_lr_policy("0:0.5,3:0.05");
    EXPECT_EQ(lr_at(explicit_policy, 2), 0.5);
    EXPECT_EQ(lr_at(explicit_policy, 3), 0.05);
    EXPECT_THROW(parse_lr_policy("1:0.1"), ConfigError);       // must start at 0
    EXPECT_THROW(parse_lr_policy("0:0.1,0:0.2"), ConfigError); // strictly increasing
    EXPECT_THROW(parse_lr_policy("0:-1"), ConfigError);
    EXPECT_THROW(parse_lr_policy("P3"), ConfigError);
}

TEST(Config, ValidationAndJson) {
    TrainConfig c;
    c.alpha_e = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.epochs = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);

    TrainConfig d;
    d.alpha_e = 1e-16;
    d.regularizer = Regularizer::Electrostatic;
    d.recompute = RecomputeSchedule::PerEpoch;
    d.seed = 42;
    const auto back = TrainConfig::from_json(d.to_json());
    EXPECT_EQ(back.alpha_e, 1e-16);
    EXPECT_EQ(back.regularizer, Regularizer::Electrostatic);
    EXPECT_EQ(back.recompute, RecomputeSchedule::PerEpoch);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.to_json(), d.to_json());
}

TEST(Config, FinetuneDefaults) {
    const auto ft = finetune_config(TrainConfig{}, 12);
    EXPECT_EQ(ft.momentum, 0.9);
    EXPECT_EQ(ft.weight_decay, 5e-4);
    EXPECT_EQ(ft.regularizer, Regularizer::None);
    EXPECT_EQ(lr_at(ft.lr_policy, 0), 0.01);
    EXPECT_EQ(ft.epochs, 12);
}

TEST(Train, AlphaZeroReproducesBaseline) {
    const auto data = synthetic_task(small_task(1), Split::Train);
    auto base = small_model(3), elec = small_model(3);
    TrainConfig c = quick_config();
    train(base, data, nullptr, c);
    c.regularizer = Regularizer::Electrostatic;
    c.alpha_e = 0.0;
    train(elec, data, nullptr, c);
    EXPECT_TRUE(same_weights(base, elec));
}

TEST(Train, SeededDeterminism) {
    const auto data = synthetic_task(small_task(2), Split::Train);
    TrainConfig c = quick_config();
    c.regularizer = Regularizer::Electrostatic;
    c.alpha_e = 1e-12;
    auto a = small_model(5), b = small_model(5);
    const auto la = train(a, data, nullptr, c).log;
    const auto lb = train(b, data, nullptr, c).log;
    EXPECT_TRUE(same_weights(a, b));
    ASSERT_EQ(la.epochs.size(), lb.epochs.size());
    for (std::size_t i = 0; i < la.epochs.size(); ++i) EXPECT_EQ(la.epochs[i].train_loss, lb.epochs[i].train_loss);

    c.seed = 6;
    auto d = small_model(5);
    train(d, data, nullptr, c);
    EXPECT_FALSE(same_weights(a, d));
}

// Momentum 0: the observed weight change must equal
// -lr * (data gradient + alpha_e * k_e * |q1| / r^2 * sign(w)) computed independently.
TEST(Train, SingleStepReplay) {
    for (int trial = 0; trial < 5; ++trial) {
        auto m = small_model(static_cast<std::uint64_t>(20 + trial));
        const auto before = m;
        const auto data = synthetic_task(small_task(static_cast<std::uint64_t>(trial)), Split::Train);
        std::vector<Index> idx(16);
        std::iota(idx.begin(), idx.end(), Index{0});
        const auto x = data.gather<double>(idx);
        const auto y = data.gather_labels(idx);

        TrainConfig c;
        c.regularizer = Regularizer::Electrostatic;
        c.alpha_e = 1e-12;
        c.momentum = 0.0;
        const double lr = 0.03;
        Sgd<double> opt(0.0, 0.0);
        Gradients<double> data_grad;
        train_step(m, opt, x, y, c, lr, nullptr, &data_grad);

        // Independent penalty term from the pre-step weights.
        auto pre = before;
        const auto params_before = pre.parameters();
        const auto params_after = m.parameters();
        std::vector<Tensor<double>> penalty_term;
        for (const auto& g : data_grad) penalty_term.emplace_back(g.shape());
        for (const auto* conv : before.prunable_convs()) {
            std::vector<double> q, l1;
            for (Index n = 0; n < conv->filters(); ++n) {
                const auto row = conv->weight.rows().row(n);
                const std::vector<double> w(row.data(), row.data() + row.size());
                q.push_back(oracle::brute_charge(w));
                l1.push_back(oracle::brute_l1(w));
            }
            std::size_t src = 0;
            oracle::brute_forces(q, l1, kCoulombConstant, &src);
            const double q1 = std::abs(q[src]);
            const double r_min = 1e-3 * std::max(q1, 1.0);
            std::size_t slot = 0;
            while (params_before[slot].name != conv->name + ".weight") ++slot;
            for (Index n = 0; n < conv->filters(); ++n) {
                if (static_cast<std::size_t>(n) == src || q[static_cast<std::size_t>(n)] == 0.0) continue;
                const double r = std::max(std::abs(q[src] - q[static_cast<std::size_t>(n)]), r_min);
                for (Index i = 0; i < conv->weight.rows().cols(); ++i) {
                    const double w = conv->weight.rows()(n, i);
                    penalty_term[slot].rows()(n, i) = c.alpha_e * kCoulombConstant * q1 / (r * r) * ((w > 0) - (w < 0));
                }
            }
        }
        for (std::size_t p = 0; p < params_before.size(); ++p)
            for (Index i = 0; i < params_before[p].value->size(); ++i) {
                const double observed = (*params_after[p].value)[i] - (*params_before[p].value)[i];
                const double expected = -lr * (data_grad[p][i] + penalty_term[p][i]);
                EXPECT_LE(oracle::relative_error(observed, expected, 1e-12), 1e-10)
                    << params_before[p].name << "[" << i << "]";
            }
    }
}

TEST(Train, L1RegularizerAddsSignTerm) {
    auto m = small_model(4);
    const auto before = m;
    const auto data = synthetic_task(small_task(4), Split::Train);
    std::vector<Index> idx{0, 1, 2, 3};
    TrainConfig c;
    c.regularizer = Regularizer::L1;
    c.l1_rate = 1e-2;
    Sgd<double> opt(0.0, 0.0);
    Gradients<double> g;
    train_step(m, opt, data.gather<double>(idx), data.gather_labels(idx), c, 0.1, nullptr, &g);
    const auto pb = before.parameters();
    const auto pa = m.parameters();
    for (std::size_t p = 0; p < pb.size(); ++p) {
        const bool prunable_weight = pb[p].name == "conv1.weight" || pb[p].name == "conv2.weight";
        for (Index i = 0; i < pb[p].value->size(); ++i) {
            const double w = (*pb[p].value)[i];
            const double reg = prunable_weight ? 1e-2 * ((w > 0) - (w < 0)) : 0.0;
            EXPECT_NEAR((*pa[p].value)[i] - w, -0.1 * (g[p][i] + reg), 1e-14) << pb[p].name;
        }
    }
}

TEST(Train, PerEpochScheduleFreezesField) {
    const auto data = synthetic_task(small_task(3), Split::Train);
    TrainConfig c = quick_config(1);
    c.regularizer = Regularizer::Electrostatic;
    c.alpha_e = 1e-12;
    auto step = small_model(7), epoch = small_model(7);
    train(step, data, nullptr, c);
    c.recompute = RecomputeSchedule::PerEpoch;
    train(epoch, data, nullptr, c);
    // Both schedules are valid; they agree only while the field is unchanged.
    EXPECT_FALSE(same_weights(step, epoch));
}

TEST(Train, LogsEveryEpoch) {
    const auto train_set = synthetic_task(small_task(5), Split::Train);
    const auto test_set = synthetic_task(small_task(5, 128), Split::Test);
    auto m = small_model(8);
    TrainConfig c = quick_config(3);
    c.lr_policy = parse_lr_policy("0:0.05,2:0.01");
    int callbacks = 0;
    const auto log = train(m, train_set, &test_set, c, static_cast<Sgd<double>*>(nullptr),
                           [&](const EpochMetrics&) { ++callbacks; })
                         .log;
    ASSERT_EQ(log.epochs.size(), 3u);
    EXPECT_EQ(callbacks, 3);
    EXPECT_EQ(log.epochs[2].lr, 0.01);
    for (const auto& e : log.epochs) {
        EXPECT_TRUE(std::isfinite(e.train_loss));
        EXPECT_GE(e.penalty, 0.0);
        EXPECT_GE(e.test_top1, 0.0);
        EXPECT_LE(e.test_top1, 1.0);
        EXPECT_GE(e.seconds, 0.0);
    }
    EXPECT_DOUBLE_EQ(log.epochs.back().penalty, penalty(m));

    const auto path = (std::filesystem::temp_directory_path() / "efprune_metrics_test.csv").string();
    log.write_csv(path);
    const auto back = MetricLog::read_csv(path);
    ASSERT_EQ(back.epochs.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.epochs[i].epoch, log.epochs[i].epoch);
        EXPECT_EQ(back.epochs[i].train_loss, log.epochs[i].train_loss);
        EXPECT_EQ(back.epochs[i].penalty, log.epochs[i].penalty);
        EXPECT_EQ(back.epochs[i].test_top1, log.epochs[i].test_top1);
    }
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "epoch,lr,train_loss,penalty,test_top1,seconds");
    std::remove(path.c_str());
}

TEST(Train, RejectsMismatchAndDivergence) {
    const auto data = synthetic_task(small_task(1), Split::Train);
    auto wrong = small_model(1, 4, {1, 12, 12});
    EXPECT_THROW(train(wrong, data, nullptr, quick_config()), DimensionError);

    // A non-finite weight makes the loss non-finite on the first step.
    auto m = small_model(1);
    m.prunable_convs()[0]->weight[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig c = quick_config(1);
    c.regularizer = Regularizer::Electrostatic;
    c.alpha_e = 1e-13;
    try {
        train(m, data, nullptr, c);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("alpha_e"), std::string::npos) << e.what();
        EXPECT_FALSE(e.layer().empty());
    }
}

TEST(Finetune, ZeroEpochsLeavesModelUnchanged) {
    const auto data = synthetic_task(small_task(1), Split::Train);
    auto m = small_model(2);
    const auto before = m;
    const auto r = finetune(m, data, nullptr, finetune_config(TrainConfig{}, 0));
    EXPECT_TRUE(r.log.epochs.empty());
    auto copy = before;
    EXPECT_TRUE(same_weights(m, copy));
}

TEST(Finetune, RecoversPrunedAccuracy) {
    std::vector<double> gains;
    for (std::uint64_t seed : {1, 2, 3}) {
        SyntheticSpec spec = small_task(seed, 512);
        const auto train_set = synthetic_task(spec, Split::Train);
        spec.samples = 256;
        const auto test_set = synthetic_task(spec, Split::Test);
        auto m = small_model(seed, 8);
        TrainConfig c = quick_config(6);
        c.lr_policy = LrPolicy::constant(0.05);
        train(m, train_set, nullptr, c);
        auto pruned = apply_plan(m, build_plan(m, LayerRatios{{{1, 0.75}, {2, 0.75}}}));
        const double before = evaluate(pruned, test_set);
        TrainConfig ft = finetune_config(c, 3);
        ft.lr_policy = LrPolicy::constant(0.02);
        finetune(pruned, train_set, nullptr, ft);
        gains.push_back(evaluate(pruned, test_set) - before);
    }
    EXPECT_GT(median(gains), 0.0);
}

// Mean L1 of non-source filters sharing the source's sign.
namespace {
double repelled_mean_l1(const Model<double>& m) {
    double total = 0.0;
    int count = 0;
    for (const auto* conv : m.prunable_convs()) {
        const auto f = layer_force_field(*conv);
        const int s = f.charges[static_cast<std::size_t>(f.source_index)].sign;
        for (std::size_t n = 0; n < f.charges.size(); ++n)
            if (static_cast<Index>(n) != f.source_index && s != 0 && f.charges[n].sign == s) {
                total += f.charges[n].magnitude;
                ++count;
            }
    }
    return count ? total / count : 0.0;
}
} // namespace

TEST(Train, PenaltyShrinksRepelledFilters) {
    std::vector<double> baseline, electro;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto data = synthetic_task(small_task(seed), Split::Train);
        TrainConfig c = quick_config(3);
        c.seed = seed;
        auto a = small_model(seed), b = small_model(seed);
        train(a, data, nullptr, c);
        c.regularizer = Regularizer::Electrostatic;
        c.alpha_e = 1e-13;
        train(b, data, nullptr, c);
        baseline.push_back(repelled_mean_l1(a));
        electro.push_back(repelled_mean_l1(b));
    }
    EXPECT_LT(median(electro), median(baseline));
}

TEST(Cost, ElectrostaticNotCheaperThanBaseline) {
    SyntheticSpec spec = small_task(1, 256);
    spec.height = spec.width = 4;
    const auto data = synthetic_task(spec, Split::Train);
    TrainConfig c = quick_config(2);
    c.batch_size = 4;
    auto make = [] { return small_model(1, 32, {1, 4, 4}); };
    // Best of three runs per regime to damp scheduler noise.
    TrainingCost best{1e30, 1e30, 1e30};
    for (int rep = 0; rep < 3; ++rep) {
        const auto cost = measure_training_cost<double>(make, c, data);
        best.baseline_seconds = std::min(best.baseline_seconds, cost.baseline_seconds);
        best.l1_seconds = std::min(best.l1_seconds, cost.l1_seconds);
        best.electrostatic_seconds = std::min(best.electrostatic_seconds, cost.electrostatic_seconds);
    }
    RecordProperty("baseline_seconds", std::to_string(best.baseline_seconds));
    RecordProperty("electrostatic_seconds", std::to_string(best.electrostatic_seconds));
    EXPECT_GE(best.electrostatic_seconds, best.baseline_seconds);
}

TEST(Cost, FieldComputationScalesWithFilterCount) {
    auto time_fields = [](Index width) {
        const auto m = small_model(1, width);
        const auto start = std::chrono::steady_clock::now();
        double sink = 0.0;
        for (int i = 0; i < 50; ++i) sink += model_force_fields(m).size();
        const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
        EXPECT_GT(sink, 0.0);
        return d.count();
    };
    // Widening 4x multiplies prunable filters by 4 and their fan-in by up to 4.
    EXPECT_GT(time_fields(32), time_fields(8));
}
