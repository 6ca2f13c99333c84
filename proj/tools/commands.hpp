#ifndef EFPRUNE_TOOLS_COMMANDS_HPP
#define EFPRUNE_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "efprune/checkpoint.hpp"
#include "efprune/data.hpp"
#include "efprune/presets.hpp"
#include "efprune/pruner.hpp"
#include "efprune/trainer.hpp"

namespace efprune::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kNumericError = 4 };

// Output directory used when --out is not given: $EFPRUNE_OUT_DIR, else ".".
std::filesystem::path default_output_dir();

struct DataOptions {
    std::string source = "synthetic";  // synthetic | mnist | cifar10
    std::string mnist_dir;             // defaults to $EFPRUNE_MNIST_DIR
    std::string cifar_dir;
    SyntheticSpec synthetic;
    Index synthetic_test_samples = 1000;
    Index train_limit = 0;  // 0 = use every sample
    Index test_limit = 0;
};

Dataset load_split(const DataOptions& options, Split split);

struct TrainOptions {
    PresetOptions model;
    DataOptions data;
    TrainConfig config;
    std::string precision = "f32";
    std::filesystem::path out_dir;
    std::string checkpoint_name = "checkpoint.bin";
    std::string metrics_name = "metrics.csv";
};

struct TrainOutcome {
    std::filesystem::path checkpoint;
    std::filesystem::path metrics;
    MetricLog log;
};

TrainOutcome run_train(const TrainOptions& options, std::ostream& out);

struct PruneOptions {
    std::filesystem::path checkpoint;
    std::string ratios;
    std::string expect_model;  // optional preset-name check
    std::filesystem::path out_dir;
    std::string output_name = "pruned.bin";
};

struct PruneReportRow {
    std::string layer;
    Index filters_before = 0;
    Index kept = 0;
    Index pruned = 0;
    bool exempt = false;
};

struct PruneReport {
    std::vector<PruneReportRow> layers;
    std::int64_t params_before = 0, params_after = 0;
    std::int64_t flops_before = 0, flops_after = 0;
    double speedup = 1.0;
    std::filesystem::path pruned_checkpoint;
    PruningPlan plan;

    void print(std::ostream& os) const;
};

PruneReport prune_checkpoint(const Checkpoint& ckpt, const PruningRatios& ratios);
PruneReport run_prune(const PruneOptions& options, std::ostream& out);

struct FinetuneOptions {
    std::filesystem::path checkpoint;
    DataOptions data;
    int epochs = 12;
    std::string lr_policy;  // empty = P2 compressed to `epochs`
    Index batch_size = 64;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 1;
    std::string precision = "f32";
    std::filesystem::path out_dir;
    std::string output_name = "finetuned.bin";
};

TrainOutcome run_finetune(const FinetuneOptions& options, std::ostream& out);

struct EvalOptions {
    std::filesystem::path checkpoint;
    DataOptions data;
    std::string precision = "f64";
};

double run_eval(const EvalOptions& options, std::ostream& out);

struct SweepOptions {
    std::filesystem::path checkpoint;
    std::string ratio_grid = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
    DataOptions data;
    std::string precision = "f64";
    std::filesystem::path out_dir;
    std::string output_name = "sweep.csv";
};

struct SweepRow {
    double ratio = 0.0;
    double speedup = 1.0;
    std::int64_t params = 0;
    std::int64_t flops = 0;
    double top1_no_ft = 0.0;
};

inline constexpr const char* kSweepHeader = "ratio,speedup,params,flops,top1_no_ft";

// The same ratio on every prunable layer, expressed as a per-layer map.
template <typename Scalar>
PruningRatios uniform_ratios(const Model<Scalar>& model, double ratio) {
    LayerRatios out;
    int index = 0;
    model.for_each_conv([&](const Conv2d<Scalar>& c) {
        if (c.prunable) out.values[index] = ratio;
        ++index;
    });
    return out;
}

std::vector<double> parse_grid(const std::string& text);
std::vector<SweepRow> run_sweep(const SweepOptions& options, std::ostream& out);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

struct InspectOptions {
    std::filesystem::path checkpoint;
    double k_e = kCoulombConstant;
    std::filesystem::path out_dir;
    std::string output_name = "norms.csv";
};

struct InspectRow {
    std::string layer;
    Index filter_index = 0;
    double l1 = 0.0;
    double normalized_l1 = 0.0;
    int sign = 0;
    double charge = 0.0;
    double distance = 0.0;
    double force = 0.0;
    bool is_source = false;
};

inline constexpr const char* kInspectHeader = "layer,filter_index,l1,normalized_l1,sign,charge,distance,force,is_source";

std::vector<InspectRow> inspect_model(const Model<double>& model, double k_e);
std::vector<InspectRow> run_inspect(const InspectOptions& options, std::ostream& out);
void write_inspect_csv(const std::vector<InspectRow>& rows, const std::filesystem::path& path);
std::vector<InspectRow> read_inspect_csv(const std::filesystem::path& path);

// Full command-line entry point; returns the process exit code.
int main(int argc, char** argv);

} // namespace efprune::cli

#endif // EFPRUNE_TOOLS_COMMANDS_HPP
