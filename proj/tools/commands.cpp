#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace efprune::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path default_output_dir() {
    if (const char* env = std::getenv("EFPRUNE_OUT_DIR"); env && *env) return env;
    return ".";
}

namespace {

fs::path resolve_out(const fs::path& out_dir) {
    fs::path dir = out_dir.empty() ? default_output_dir() : out_dir;
    fs::create_directories(dir);
    return dir;
}

void require_file(const fs::path& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is required");
    if (!fs::exists(path)) throw DataError(DataErrorKind::NotFound, what + " " + path.string() + " does not exist");
}

json data_json(const DataOptions& d) {
    json j;
    j["source"] = d.source;
    if (d.source == "synthetic") {
        j["classes"] = d.synthetic.classes;
        j["samples"] = d.synthetic.samples;
        j["test_samples"] = d.synthetic_test_samples;
        j["shape"] = {d.synthetic.channels, d.synthetic.height, d.synthetic.width};
        j["separation"] = d.synthetic.separation;
        j["seed"] = d.synthetic.seed;
    }
    j["train_limit"] = d.train_limit;
    j["test_limit"] = d.test_limit;
    return j;
}

template <typename Scalar>
Checkpoint make_checkpoint(const Model<Scalar>& model, const Sgd<Scalar>* sgd, const std::string& config_json,
                           std::int64_t epoch) {
    Checkpoint ckpt;
    ckpt.model = model.template cast<double>();
    if (sgd) ckpt.optimizer = capture_optimizer(*sgd);
    ckpt.config_json = config_json;
    ckpt.epoch = epoch;
    return ckpt;
}

void print_epoch(std::ostream& out, const EpochMetrics& m) {
    out << "epoch " << m.epoch << "  lr " << m.lr << "  loss " << std::setprecision(5) << m.train_loss << "  penalty "
        << m.penalty << "  top1 " << m.test_top1 << "  (" << std::setprecision(3) << m.seconds << " s)\n"
        << std::setprecision(6);
}

template <typename Scalar>
TrainOutcome train_impl(const TrainOptions& options, std::ostream& out) {
    const Dataset train_set = load_split(options.data, Split::Train);
    const Dataset test_set = load_split(options.data, Split::Test);

    Model<Scalar> model;
    std::optional<Sgd<Scalar>> resume;
    if (!options.config.pretrained.empty()) {
        require_file(options.config.pretrained, "pretrained checkpoint");
        const Checkpoint pre = load_checkpoint(options.config.pretrained);
        if (!options.model.name.empty() && pre.model.preset != options.model.name)
            throw ConfigError("pretrained checkpoint holds a " + pre.model.preset + " model, not " +
                              options.model.name);
        model = pre.model.template cast<Scalar>();
    } else {
        PresetOptions preset = options.model;
        preset.input_chw = train_set.sample_shape();
        preset.classes = train_set.classes;
        model = build_preset<Scalar>(preset, options.config.seed);
    }

    json cfg;
    cfg["train"] = json::parse(options.config.to_json());
    cfg["model"] = {{"preset", model.preset}, {"width", options.model.width}, {"depth", options.model.depth}};
    cfg["data"] = data_json(options.data);
    cfg["precision"] = options.precision;

    auto result = train(model, train_set, &test_set, options.config, static_cast<Sgd<Scalar>*>(nullptr),
                        [&](const EpochMetrics& m) { print_epoch(out, m); });

    const fs::path dir = resolve_out(options.out_dir);
    TrainOutcome outcome;
    outcome.checkpoint = dir / options.checkpoint_name;
    outcome.metrics = dir / options.metrics_name;
    save_checkpoint(make_checkpoint(model, &result.optimizer, cfg.dump(), options.config.epochs), outcome.checkpoint);
    result.log.write_csv(outcome.metrics.string());
    outcome.log = std::move(result.log);
    out << "wrote " << outcome.checkpoint.string() << " and " << outcome.metrics.string() << '\n';
    return outcome;
}

template <typename Scalar>
TrainOutcome finetune_impl(const FinetuneOptions& options, std::ostream& out) {
    require_file(options.checkpoint, "checkpoint");
    const Checkpoint ckpt = load_checkpoint(options.checkpoint);
    const Dataset train_set = load_split(options.data, Split::Train);
    const Dataset test_set = load_split(options.data, Split::Test);
    Model<Scalar> model = ckpt.model.template cast<Scalar>();

    TrainConfig base;
    base.batch_size = options.batch_size;
    base.seed = options.seed;
    TrainConfig ft = finetune_config(base, options.epochs);
    ft.momentum = options.momentum;
    ft.weight_decay = options.weight_decay;
    if (!options.lr_policy.empty()) ft.lr_policy = parse_lr_policy(options.lr_policy);

    auto result = finetune(model, train_set, &test_set, ft, [&](const EpochMetrics& m) { print_epoch(out, m); });

    json cfg;
    cfg["finetune"] = json::parse(ft.to_json());
    cfg["source_checkpoint"] = options.checkpoint.string();
    cfg["data"] = data_json(options.data);
    const fs::path dir = resolve_out(options.out_dir);
    TrainOutcome outcome;
    outcome.checkpoint = dir / options.output_name;
    outcome.metrics = dir / (fs::path(options.output_name).stem().string() + "_metrics.csv");
    save_checkpoint(make_checkpoint(model, &result.optimizer, cfg.dump(), ckpt.epoch + options.epochs),
                    outcome.checkpoint);
    result.log.write_csv(outcome.metrics.string());
    outcome.log = std::move(result.log);
    out << "wrote " << outcome.checkpoint.string() << '\n';
    return outcome;
}

template <typename Scalar>
double eval_model(const Model<double>& model, const Dataset& data) {
    if (data.sample_shape() != model.input_shape)
        throw DimensionError(model.blocks.empty() ? "input" : model.convs().front()->name,
                             "dataset samples are " + shape_string(data.sample_shape()) + " but the model expects " +
                                 shape_string(model.input_shape));
    if constexpr (std::is_same_v<Scalar, double>)
        return evaluate(model, data);
    else
        return evaluate(model.template cast<Scalar>(), data);
}

double eval_with_precision(const std::string& precision, const Model<double>& model, const Dataset& data) {
    if (precision == "f64") return eval_model<double>(model, data);
    if (precision == "f32") return eval_model<float>(model, data);
    throw ConfigError("precision must be f32 or f64");
}

std::string csv_bool(bool b) { return b ? "1" : "0"; }

} // namespace

Dataset load_split(const DataOptions& options, Split split) {
    Dataset ds;
    if (options.source == "synthetic") {
        SyntheticSpec spec = options.synthetic;
        if (split == Split::Test) spec.samples = options.synthetic_test_samples;
        ds = synthetic_task(spec, split);
    } else if (options.source == "mnist") {
        std::string dir = options.mnist_dir;
        if (dir.empty())
            if (const char* env = std::getenv("EFPRUNE_MNIST_DIR")) dir = env;
        if (dir.empty()) throw ConfigError("--mnist-dir (or EFPRUNE_MNIST_DIR) is required for --data mnist");
        ds = load_mnist_dir(dir, split);
    } else if (options.source == "cifar10") {
        if (options.cifar_dir.empty()) throw ConfigError("--cifar-dir is required for --data cifar10");
        ds = load_cifar10_binary(options.cifar_dir, split);
    } else {
        throw ConfigError("unknown data source '" + options.source + "' (expected synthetic, mnist or cifar10)");
    }
    const Index limit = split == Split::Train ? options.train_limit : options.test_limit;
    if (limit > 0 && limit < ds.size()) ds = ds.head(limit);
    return ds;
}

TrainOutcome run_train(const TrainOptions& options, std::ostream& out) {
    options.config.validate();
    if (options.precision == "f32") return train_impl<float>(options, out);
    if (options.precision == "f64") return train_impl<double>(options, out);
    throw ConfigError("precision must be f32 or f64");
}

TrainOutcome run_finetune(const FinetuneOptions& options, std::ostream& out) {
    if (options.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (options.precision == "f32") return finetune_impl<float>(options, out);
    if (options.precision == "f64") return finetune_impl<double>(options, out);
    throw ConfigError("precision must be f32 or f64");
}

PruneReport prune_checkpoint(const Checkpoint& ckpt, const PruningRatios& ratios) {
    const Model<double>& base = ckpt.model;
    PruneReport report;
    report.plan = build_plan(base, ratios);
    const Model<double> pruned = apply_plan(base, report.plan);
    base.for_each_conv([&](const Conv2d<double>& c) {
        PruneReportRow row;
        row.layer = c.name;
        row.filters_before = c.filters();
        row.exempt = !c.prunable;
        const auto* lp = report.plan.find(c.name);
        row.kept = lp ? static_cast<Index>(lp->keep.size()) : c.filters();
        row.pruned = row.filters_before - row.kept;
        report.layers.push_back(row);
    });
    report.params_before = count_params(base);
    report.params_after = count_params(pruned);
    report.flops_before = count_flops(base);
    report.flops_after = count_flops(pruned);
    report.speedup = speedup(base, pruned);
    return report;
}

void PruneReport::print(std::ostream& os) const {
    os << "layer,filters_before,kept,pruned,exempt\n";
    for (const auto& r : layers)
        os << r.layer << ',' << r.filters_before << ',' << r.kept << ',' << r.pruned << ',' << csv_bool(r.exempt)
           << '\n';
    os << "params_before," << params_before << "\nparams_after," << params_after << "\nflops_before," << flops_before
       << "\nflops_after," << flops_after << "\nspeedup," << std::setprecision(17) << speedup << '\n'
       << std::setprecision(6);
}

PruneReport run_prune(const PruneOptions& options, std::ostream& out) {
    const PruningRatios ratios = parse_ratios(options.ratios);
    require_file(options.checkpoint, "checkpoint");
    const Checkpoint ckpt = load_checkpoint(options.checkpoint);
    if (!options.expect_model.empty() && ckpt.model.preset != options.expect_model)
        throw StructureError("checkpoint holds a " + ckpt.model.preset + " model, not " + options.expect_model);
    PruneReport report = prune_checkpoint(ckpt, ratios);

    const fs::path dir = resolve_out(options.out_dir);
    json cfg;
    cfg["pruned_from"] = options.checkpoint.string();
    cfg["ratios"] = format_ratios(ratios);
    cfg["source_config"] = ckpt.config_json;
    Checkpoint pruned;
    pruned.model = apply_plan(ckpt.model, report.plan);
    pruned.config_json = cfg.dump();
    pruned.epoch = ckpt.epoch;
    report.pruned_checkpoint = dir / options.output_name;
    save_checkpoint(pruned, report.pruned_checkpoint);

    const std::string stem = fs::path(options.output_name).stem().string();
    std::ofstream(dir / (stem + "_plan.txt")) << serialize_plan(report.plan);
    std::ofstream report_file(dir / (stem + "_report.csv"));
    report.print(report_file);
    report.print(out);
    out << "wrote " << report.pruned_checkpoint.string() << '\n';
    return report;
}

double run_eval(const EvalOptions& options, std::ostream& out) {
    require_file(options.checkpoint, "checkpoint");
    const Checkpoint ckpt = load_checkpoint(options.checkpoint);
    const Dataset test_set = load_split(options.data, Split::Test);
    const double top1 = eval_with_precision(options.precision, ckpt.model, test_set);
    out << "top1 " << std::setprecision(6) << top1 << '\n';
    json record{{"checkpoint", options.checkpoint.string()},
                {"model", ckpt.model.preset},
                {"split", "test"},
                {"samples", test_set.size()},
                {"top1", top1}};
    out << record.dump() << '\n';
    return top1;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ConfigError("bad ratio grid entry '" + item + "'");
        }
        if (!(v >= 0.0 && v < 1.0)) throw ConfigError("ratio grid values must lie in [0, 1)");
        grid.push_back(v);
    }
    if (grid.empty()) throw ConfigError("empty ratio grid");
    return grid;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << kSweepHeader << '\n' << std::setprecision(17);
    for (const auto& r : rows)
        os << r.ratio << ',' << r.speedup << ',' << r.params << ',' << r.flops << ',' << r.top1_no_ft << '\n';
}

std::vector<SweepRow> run_sweep(const SweepOptions& options, std::ostream& out) {
    const auto grid = parse_grid(options.ratio_grid);
    require_file(options.checkpoint, "checkpoint");
    const Checkpoint ckpt = load_checkpoint(options.checkpoint);
    const Dataset test_set = load_split(options.data, Split::Test);
    std::vector<SweepRow> rows;
    for (double ratio : grid) {
        const auto plan = build_plan(ckpt.model, uniform_ratios(ckpt.model, ratio));
        const Model<double> pruned = apply_plan(ckpt.model, plan);
        SweepRow row;
        row.ratio = ratio;
        row.params = count_params(pruned);
        row.flops = count_flops(pruned);
        row.speedup = speedup(ckpt.model, pruned);
        row.top1_no_ft = eval_with_precision(options.precision, pruned, test_set);
        out << "ratio " << ratio << "  speedup " << row.speedup << "  params " << row.params << "  top1 "
            << row.top1_no_ft << '\n';
        rows.push_back(row);
    }
    const fs::path dir = resolve_out(options.out_dir);
    write_sweep_csv(rows, dir / options.output_name);
    out << "wrote " << (dir / options.output_name).string() << '\n';
    return rows;
}

std::vector<InspectRow> inspect_model(const Model<double>& model, double k_e) {
    std::vector<InspectRow> rows;
    for (const auto* conv : model.prunable_convs()) {
        const auto field = layer_force_field(*conv, k_e);
        const double max_l1 = field.max_l1();
        for (std::size_t n = 0; n < field.charges.size(); ++n) {
            InspectRow r;
            r.layer = conv->name;
            r.filter_index = static_cast<Index>(n);
            r.l1 = field.charges[n].magnitude;
            r.normalized_l1 = max_l1 > 0.0 ? r.l1 / max_l1 : 0.0;
            r.sign = field.charges[n].sign;
            r.charge = field.charges[n].charge;
            r.distance = field.distances[n];
            r.force = field.forces[n];
            r.is_source = static_cast<Index>(n) == field.source_index;
            rows.push_back(r);
        }
    }
    return rows;
}

void write_inspect_csv(const std::vector<InspectRow>& rows, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << kInspectHeader << '\n' << std::setprecision(17);
    for (const auto& r : rows)
        os << r.layer << ',' << r.filter_index << ',' << r.l1 << ',' << r.normalized_l1 << ',' << r.sign << ','
           << r.charge << ',' << r.distance << ',' << r.force << ',' << csv_bool(r.is_source) << '\n';
}

std::vector<InspectRow> read_inspect_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorKind::NotFound, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kInspectHeader) throw DataError(DataErrorKind::BadFormat, path.string() + ": unexpected header");
    std::vector<InspectRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
        if (f.size() != 9) throw DataError(DataErrorKind::BadFormat, path.string() + ": bad row '" + line + "'");
        InspectRow r;
        r.layer = f[0];
        r.filter_index = std::stoll(f[1]);
        r.l1 = std::stod(f[2]);
        r.normalized_l1 = std::stod(f[3]);
        r.sign = std::stoi(f[4]);
        r.charge = std::stod(f[5]);
        r.distance = std::stod(f[6]);
        r.force = std::stod(f[7]);
        r.is_source = f[8] == "1";
        rows.push_back(r);
    }
    return rows;
}

std::vector<InspectRow> run_inspect(const InspectOptions& options, std::ostream& out) {
    require_file(options.checkpoint, "checkpoint");
    const Checkpoint ckpt = load_checkpoint(options.checkpoint);
    if (ckpt.model.prunable_convs().empty()) throw ConfigError("checkpoint has no prunable layers to inspect");
    const auto rows = inspect_model(ckpt.model, options.k_e);
    const fs::path dir = resolve_out(options.out_dir);
    write_inspect_csv(rows, dir / options.output_name);
    double total = 0.0;
    for (const auto& r : rows) total += r.force;
    out << "penalty " << std::setprecision(17) << total << std::setprecision(6) << '\n';
    out << "wrote " << (dir / options.output_name).string() << '\n';
    return rows;
}

namespace {

void add_data_flags(CLI::App* cmd, DataOptions& d) {
    cmd->add_option("--data", d.source, "synthetic | mnist | cifar10")->check(
        CLI::IsMember({"synthetic", "mnist", "cifar10"}));
    cmd->add_option("--mnist-dir", d.mnist_dir, "Directory with the MNIST IDX files (default $EFPRUNE_MNIST_DIR)");
    cmd->add_option("--cifar-dir", d.cifar_dir, "Directory with the CIFAR-10 binary batches");
    cmd->add_option("--synthetic-classes", d.synthetic.classes);
    cmd->add_option("--synthetic-samples", d.synthetic.samples);
    cmd->add_option("--synthetic-test-samples", d.synthetic_test_samples);
    cmd->add_option("--synthetic-channels", d.synthetic.channels);
    cmd->add_option_function<Index>(
        "--synthetic-size", [&d](const Index& side) { d.synthetic.height = d.synthetic.width = side; },
        "Image side length");
    cmd->add_option("--synthetic-separation", d.synthetic.separation);
    cmd->add_option("--synthetic-seed", d.synthetic.seed);
    cmd->add_option("--train-limit", d.train_limit, "Use only the first N training samples");
    cmd->add_option("--test-limit", d.test_limit, "Use only the first N test samples");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Electrostatic-force filter pruning toolkit"};
    app.require_subcommand(1);

    TrainOptions train_opts;
    std::string reg = "none", lr_policy, recompute = "per-step";
    auto* train_cmd = app.add_subcommand("train", "Train a model (optionally with the electrostatic regularizer)");
    train_cmd->add_option("--model", train_opts.model.name, "mnist-cnn | toy-resnet | toy-vgg")
        ->check(CLI::IsMember(preset_names()));
    train_cmd->add_option("--width", train_opts.model.width, "Base width override");
    train_cmd->add_option("--depth", train_opts.model.depth, "Depth override");
    train_cmd->add_option("--reg", reg, "none | electrostatic | l1");
    train_cmd->add_option("--alpha-e", train_opts.config.alpha_e, "Electrostatic force rate");
    train_cmd->add_option("--k-e", train_opts.config.k_e, "Coulomb constant");
    train_cmd->add_option("--l1-rate", train_opts.config.l1_rate);
    train_cmd->add_option("--epochs", train_opts.config.epochs);
    train_cmd->add_option("--batch-size", train_opts.config.batch_size);
    train_cmd->add_option("--lr-policy", lr_policy, "P1, P2, P1@20 or '0:0.1,10:0.01' (default P1@epochs)");
    train_cmd->add_option("--momentum", train_opts.config.momentum);
    train_cmd->add_option("--weight-decay", train_opts.config.weight_decay);
    train_cmd->add_option("--seed", train_opts.config.seed);
    train_cmd->add_option("--recompute", recompute, "per-step | per-epoch");
    train_cmd->add_option("--pretrained", train_opts.config.pretrained, "Start from this checkpoint");
    train_cmd->add_option("--precision", train_opts.precision, "f32 | f64");
    train_cmd->add_option("--out", train_opts.out_dir, "Output directory (default $EFPRUNE_OUT_DIR or .)");
    train_cmd->add_option("--checkpoint-name", train_opts.checkpoint_name);
    train_cmd->add_option("--metrics-name", train_opts.metrics_name);
    add_data_flags(train_cmd, train_opts.data);

    PruneOptions prune_opts;
    auto* prune_cmd = app.add_subcommand("prune", "Remove the lowest-L1 filters of a trained checkpoint");
    prune_cmd->add_option("--checkpoint", prune_opts.checkpoint)->required();
    prune_cmd->add_option("--ratios", prune_opts.ratios, "'0,0.5,0.5,0' per stage or '0:0,1-15:0.65' per layer")
        ->required();
    prune_cmd->add_option("--model", prune_opts.expect_model, "Reject checkpoints of another preset");
    prune_cmd->add_option("--out", prune_opts.out_dir);
    prune_cmd->add_option("--name", prune_opts.output_name);

    FinetuneOptions ft_opts;
    auto* ft_cmd = app.add_subcommand("finetune", "Fine-tune a pruned checkpoint");
    ft_cmd->add_option("--checkpoint", ft_opts.checkpoint)->required();
    ft_cmd->add_option("--epochs", ft_opts.epochs);
    ft_cmd->add_option("--lr-policy", ft_opts.lr_policy, "Default: P2 compressed to --epochs");
    ft_cmd->add_option("--batch-size", ft_opts.batch_size);
    ft_cmd->add_option("--momentum", ft_opts.momentum);
    ft_cmd->add_option("--weight-decay", ft_opts.weight_decay);
    ft_cmd->add_option("--seed", ft_opts.seed);
    ft_cmd->add_option("--precision", ft_opts.precision);
    ft_cmd->add_option("--out", ft_opts.out_dir);
    ft_cmd->add_option("--name", ft_opts.output_name);
    add_data_flags(ft_cmd, ft_opts.data);

    EvalOptions eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "Top-1 accuracy of a checkpoint on the test split");
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint)->required();
    eval_cmd->add_option("--precision", eval_opts.precision);
    add_data_flags(eval_cmd, eval_opts.data);

    SweepOptions sweep_opts;
    auto* sweep_cmd = app.add_subcommand("sweep", "Prune one checkpoint over a ratio grid without retraining");
    sweep_cmd->add_option("--checkpoint", sweep_opts.checkpoint)->required();
    sweep_cmd->add_option("--ratio-grid", sweep_opts.ratio_grid);
    sweep_cmd->add_option("--precision", sweep_opts.precision);
    sweep_cmd->add_option("--out", sweep_opts.out_dir);
    sweep_cmd->add_option("--name", sweep_opts.output_name);
    add_data_flags(sweep_cmd, sweep_opts.data);

    InspectOptions inspect_opts;
    auto* inspect_cmd = app.add_subcommand("inspect", "Per-filter charges, distances and forces as CSV");
    inspect_cmd->add_option("--checkpoint", inspect_opts.checkpoint)->required();
    inspect_cmd->add_option("--k-e", inspect_opts.k_e);
    inspect_cmd->add_option("--out", inspect_opts.out_dir);
    inspect_cmd->add_option("--name", inspect_opts.output_name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*train_cmd) {
            train_opts.config.regularizer = parse_regularizer(reg);
            train_opts.config.recompute = parse_recompute_schedule(recompute);
            train_opts.config.lr_policy = lr_policy.empty()
                                              ? LrPolicy::p1().scaled(200, std::max(train_opts.config.epochs, 1))
                                              : parse_lr_policy(lr_policy);
            run_train(train_opts, std::cout);
        } else if (*prune_cmd) {
            run_prune(prune_opts, std::cout);
        } else if (*ft_cmd) {
            run_finetune(ft_opts, std::cout);
        } else if (*eval_cmd) {
            run_eval(eval_opts, std::cout);
        } else if (*sweep_cmd) {
            run_sweep(sweep_opts, std::cout);
        } else if (*inspect_cmd) {
            run_inspect(inspect_opts, std::cout);
        }
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumericError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kOk;
}

} // namespace efprune::cli
