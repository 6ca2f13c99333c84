#ifndef EFPRUNE_TESTS_EXPERIMENT_HPP
#define EFPRUNE_TESTS_EXPERIMENT_HPP

// Baseline vs electrostatic training of mnist-cnn, pruned at ratio 0.5 without
// fine-tuning. Shared by the MNIST acceptance tests and the synthetic stand-in.

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"

namespace experiment {

using namespace efprune;

struct Run {
    double alpha_e = 0.0;
    std::uint64_t seed = 0;
    bool diverged = false;
    double top1 = 0.0;         // unpruned
    double pruned_top1 = 0.0;  // ratio 0.5 on every prunable layer, no fine-tuning
    double sparse_fraction = 0.0;  // prunable filters with normalized L1 < 0.05
    double seconds = 0.0;
};

struct Protocol {
    int epochs = 20;
    std::vector<double> alpha_grid{1e-14, 3e-14, 1e-13};
    std::uint64_t calibration_seed = 0;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    double accuracy_floor = 0.97;
    std::optional<double> fixed_alpha;  // skips calibration when set
};

struct Result {
    double alpha_e = 0.0;
    std::vector<Run> calibration, baseline, electrostatic;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Run train_and_prune(const Dataset& train_set, const Dataset& test_set, double alpha_e, std::uint64_t seed,
                           int epochs) {
    Run run;
    run.alpha_e = alpha_e;
    run.seed = seed;
    PresetOptions preset;
    preset.name = "mnist-cnn";
    preset.input_chw = train_set.sample_shape();
    preset.classes = train_set.classes;
    auto model = build_preset<float>(preset, seed);
    TrainConfig config;
    config.epochs = epochs;
    config.seed = seed;
    config.lr_policy = LrPolicy::p1().scaled(200, epochs);
    if (alpha_e > 0.0) {
        config.regularizer = Regularizer::Electrostatic;
        config.alpha_e = alpha_e;
    }
    try {
        const auto log = train(model, train_set, nullptr, config).log;
        run.seconds = log.total_seconds();
    } catch (const NumericError&) {
        run.diverged = true;
        return run;
    }
    const auto exact = model.cast<double>();
    run.top1 = evaluate(exact, test_set);
    const auto pruned = apply_plan(exact, build_plan(exact, cli::uniform_ratios(exact, 0.5)));
    run.pruned_top1 = evaluate(pruned, test_set);
    const auto rows = cli::inspect_model(exact, kCoulombConstant);
    std::size_t small = 0;
    for (const auto& r : rows) small += r.normalized_l1 < 0.05;
    run.sparse_fraction = rows.empty() ? 0.0 : static_cast<double>(small) / static_cast<double>(rows.size());
    return run;
}

// Largest grid rate that trains without divergence and reaches the accuracy floor;
// the smallest grid rate when none does.
inline double pick_alpha(const std::vector<Run>& calibration, double floor) {
    double best = 0.0;
    for (const auto& r : calibration)
        if (!r.diverged && r.top1 >= floor) best = std::max(best, r.alpha_e);
    if (best > 0.0) return best;
    double smallest = calibration.front().alpha_e;
    for (const auto& r : calibration) smallest = std::min(smallest, r.alpha_e);
    return smallest;
}

inline Result run(const Dataset& train_set, const Dataset& test_set, const Protocol& p) {
    Result result;
    if (p.fixed_alpha) {
        result.alpha_e = *p.fixed_alpha;
    } else {
        for (double a : p.alpha_grid) result.calibration.push_back(train_and_prune(train_set, test_set, a, p.calibration_seed, p.epochs));
        result.alpha_e = pick_alpha(result.calibration, p.accuracy_floor);
    }
    for (auto seed : p.seeds) {
        result.baseline.push_back(train_and_prune(train_set, test_set, 0.0, seed, p.epochs));
        result.electrostatic.push_back(train_and_prune(train_set, test_set, result.alpha_e, seed, p.epochs));
    }
    return result;
}

inline std::vector<double> column(const std::vector<Run>& runs, double Run::*field) {
    std::vector<double> out;
    for (const auto& r : runs) out.push_back(r.diverged ? 0.0 : r.*field);
    return out;
}

// Both regimes reach the accuracy floor unpruned on every seed, and the median
// pruned top-1 of the electrostatic runs is at least the baseline median.
inline bool pruned_accuracy_holds(const Result& r, double floor) {
    for (const auto* runs : {&r.baseline, &r.electrostatic})
        for (const auto& run : *runs)
            if (run.diverged || run.top1 < floor) return false;
    return median(column(r.electrostatic, &Run::pruned_top1)) >= median(column(r.baseline, &Run::pruned_top1));
}

inline bool sparsity_shift_holds(const Result& r) {
    for (const auto& run : r.electrostatic)
        if (run.diverged) return false;
    return median(column(r.electrostatic, &Run::sparse_fraction)) > median(column(r.baseline, &Run::sparse_fraction));
}

inline std::string describe(const Run& r) {
    std::ostringstream os;
    os << "alpha_e=" << r.alpha_e << " seed=" << r.seed;
    if (r.diverged) {
        os << " diverged";
    } else {
        os << " top1=" << r.top1 << " pruned_top1=" << r.pruned_top1 << " sparse=" << r.sparse_fraction;
    }
    return os.str();
}

inline std::string summary(const Result& r) {
    std::ostringstream os;
    os << "chosen alpha_e=" << r.alpha_e << "; median pruned top1 baseline="
       << median(column(r.baseline, &Run::pruned_top1))
       << " electrostatic=" << median(column(r.electrostatic, &Run::pruned_top1))
       << "; median sparse fraction baseline=" << median(column(r.baseline, &Run::sparse_fraction))
       << " electrostatic=" << median(column(r.electrostatic, &Run::sparse_fraction));
    return os.str();
}

} // namespace experiment

#endif // EFPRUNE_TESTS_EXPERIMENT_HPP
