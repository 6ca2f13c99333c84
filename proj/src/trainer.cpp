#include "efprune/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace efprune {

void LrPolicy::validate() const {
    if (milestones.empty()) throw ConfigError("learning-rate policy has no milestones");
    if (milestones.front().first != 0) throw ConfigError("learning-rate policy must start at epoch 0");
    for (std::size_t i = 0; i < milestones.size(); ++i) {
        if (!(milestones[i].second > 0.0)) throw ConfigError("learning rates must be > 0");
        if (i > 0 && milestones[i].first <= milestones[i - 1].first)
            throw ConfigError("learning-rate milestones must have strictly increasing epochs");
    }
}

LrPolicy LrPolicy::p1() { return {{{0, 1e-1}, {100, 1e-2}, {150, 1e-3}}}; }
LrPolicy LrPolicy::p2() { return {{{0, 1e-2}, {60, 1e-3}, {90, 1e-4}}}; }
LrPolicy LrPolicy::constant(double lr) { return {{{0, lr}}}; }

LrPolicy LrPolicy::scaled(int from_epochs, int to_epochs) const {
    if (from_epochs <= 0 || to_epochs <= 0) throw ConfigError("schedule lengths must be positive");
    LrPolicy out;
    for (const auto& [epoch, lr] : milestones) {
        const int e = static_cast<int>(std::lround(static_cast<double>(epoch) * to_epochs / from_epochs));
        if (!out.milestones.empty() && e <= out.milestones.back().first) {
            out.milestones.back().second = lr;  // collapsed onto the previous milestone
            continue;
        }
        out.milestones.emplace_back(e, lr);
    }
    return out;
}

double lr_at(const LrPolicy& policy, int epoch) {
    if (epoch < 0) throw ConfigError("epoch must be >= 0");
    policy.validate();
    double lr = policy.milestones.front().second;
    for (const auto& [start, rate] : policy.milestones)
        if (start <= epoch) lr = rate;
    return lr;
}

LrPolicy parse_lr_policy(const std::string& text) {
    std::string name = text;
    int target = 0;
    if (const auto at = text.find('@'); at != std::string::npos) {
        name = text.substr(0, at);
        try {
            target = std::stoi(text.substr(at + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad schedule length in lr policy '" + text + "'");
        }
    }
    if (name == "P1" || name == "p1") return target ? LrPolicy::p1().scaled(200, target) : LrPolicy::p1();
    if (name == "P2" || name == "p2") return target ? LrPolicy::p2().scaled(120, target) : LrPolicy::p2();
    LrPolicy policy;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("lr policy entry '" + item + "' is not 'epoch:lr'");
        try {
            policy.milestones.emplace_back(std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
        } catch (const std::exception&) {
            throw ConfigError("lr policy entry '" + item + "' is not 'epoch:lr'");
        }
    }
    policy.validate();
    return policy;
}

std::string format_lr_policy(const LrPolicy& policy) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < policy.milestones.size(); ++i)
        os << (i ? "," : "") << policy.milestones[i].first << ':' << policy.milestones[i].second;
    return os.str();
}

const char* to_string(Regularizer r) {
    switch (r) {
    case Regularizer::None: return "none";
    case Regularizer::Electrostatic: return "electrostatic";
    case Regularizer::L1: return "l1";
    }
    return "none";
}

const char* to_string(RecomputeSchedule s) { return s == RecomputeSchedule::PerStep ? "per-step" : "per-epoch"; }

Regularizer parse_regularizer(const std::string& text) {
    if (text == "none") return Regularizer::None;
    if (text == "electrostatic") return Regularizer::Electrostatic;
    if (text == "l1") return Regularizer::L1;
    throw ConfigError("unknown regularizer '" + text + "' (expected none, electrostatic or l1)");
}

RecomputeSchedule parse_recompute_schedule(const std::string& text) {
    if (text == "per-step") return RecomputeSchedule::PerStep;
    if (text == "per-epoch") return RecomputeSchedule::PerEpoch;
    throw ConfigError("unknown recompute schedule '" + text + "' (expected per-step or per-epoch)");
}

void TrainConfig::validate() const {
    if (!(alpha_e >= 0.0)) throw ConfigError("alpha_e must be >= 0");
    if (!(k_e > 0.0)) throw ConfigError("k_e must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(l1_rate >= 0.0)) throw ConfigError("l1 rate must be >= 0");
    if (eval_batch_size < 1) throw ConfigError("eval batch size must be >= 1");
    lr_policy.validate();
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["alpha_e"] = alpha_e;
    j["k_e"] = k_e;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr_policy"] = format_lr_policy(lr_policy);
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["seed"] = seed;
    j["regularizer"] = to_string(regularizer);
    j["l1_rate"] = l1_rate;
    j["recompute"] = to_string(recompute);
    j["pretrained"] = pretrained;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    TrainConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.alpha_e = j.at("alpha_e").get<double>();
        c.k_e = j.at("k_e").get<double>();
        c.epochs = j.at("epochs").get<int>();
        c.batch_size = j.at("batch_size").get<Index>();
        c.lr_policy = parse_lr_policy(j.at("lr_policy").get<std::string>());
        c.momentum = j.at("momentum").get<double>();
        c.weight_decay = j.at("weight_decay").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.regularizer = parse_regularizer(j.at("regularizer").get<std::string>());
        c.l1_rate = j.at("l1_rate").get<double>();
        c.recompute = parse_recompute_schedule(j.at("recompute").get<std::string>());
        c.pretrained = j.value("pretrained", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed training config: ") + e.what());
    }
    return c;
}

TrainConfig finetune_config(const TrainConfig& base, int epochs) {
    TrainConfig ft = base;
    ft.regularizer = Regularizer::None;
    ft.alpha_e = 0.0;
    ft.l1_rate = 0.0;
    ft.momentum = 0.9;
    ft.weight_decay = 5e-4;
    ft.epochs = epochs;
    ft.lr_policy = epochs > 0 ? LrPolicy::p2().scaled(120, epochs) : LrPolicy::p2();
    return ft;
}

void MetricLog::write_csv(std::ostream& os) const {
    os << kHeader << '\n' << std::setprecision(17);
    for (const auto& m : epochs)
        os << m.epoch << ',' << m.lr << ',' << m.train_loss << ',' << m.penalty << ',' << m.test_top1 << ','
           << m.seconds << '\n';
}

void MetricLog::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    write_csv(out);
}

MetricLog MetricLog::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorKind::NotFound, "cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != kHeader) throw DataError(DataErrorKind::BadFormat, path + ": unexpected metrics header");
    MetricLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        EpochMetrics m;
        char comma;
        ss >> m.epoch >> comma >> m.lr >> comma >> m.train_loss >> comma >> m.penalty >> comma >> m.test_top1 >>
            comma >> m.seconds;
        if (!ss) throw DataError(DataErrorKind::BadFormat, path + ": malformed row '" + line + "'");
        log.epochs.push_back(m);
    }
    return log;
}

double MetricLog::total_seconds() const {
    double s = 0.0;
    for (const auto& m : epochs) s += m.seconds;
    return s;
}

} // namespace efprune
