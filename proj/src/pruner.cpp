#include "efprune/pruner.hpp"

#include <iomanip>

namespace efprune {

namespace {

double parse_ratio(const std::string& text) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("'" + text + "' is not a number");
    }
    if (used != text.size()) throw ConfigError("'" + text + "' is not a number");
    return value;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t[]");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t[]");
    return s.substr(b, e - b + 1);
}

} // namespace

PruningRatios parse_ratios(const std::string& text) {
    const std::string body = trim(text);
    if (body.empty()) throw ConfigError("empty ratio list");
    std::vector<std::string> items;
    std::stringstream ss(body);
    for (std::string item; std::getline(ss, item, ',');) items.push_back(trim(item));

    if (body.find(':') == std::string::npos) {
        StageRatios stages;
        for (const auto& item : items) stages.values.push_back(parse_ratio(item));
        return stages;
    }
    LayerRatios layers;
    for (const auto& item : items) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("layer ratio entry '" + item + "' is not 'index:ratio'");
        const std::string range = trim(item.substr(0, colon));
        const double ratio = parse_ratio(trim(item.substr(colon + 1)));
        int first = 0, last = 0;
        try {
            const auto dash = range.find('-');
            first = std::stoi(range.substr(0, dash));
            last = dash == std::string::npos ? first : std::stoi(range.substr(dash + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad layer range '" + range + "'");
        }
        if (first < 0 || last < first) throw ConfigError("bad layer range '" + range + "'");
        for (int i = first; i <= last; ++i) layers.values[i] = ratio;
    }
    return layers;
}

std::string format_ratios(const PruningRatios& ratios) {
    std::ostringstream os;
    if (const auto* stages = std::get_if<StageRatios>(&ratios)) {
        for (std::size_t i = 0; i < stages->values.size(); ++i) os << (i ? "," : "") << stages->values[i];
    } else {
        bool first = true;
        for (const auto& [index, ratio] : std::get<LayerRatios>(ratios).values) {
            os << (first ? "" : ",") << index << ':' << ratio;
            first = false;
        }
    }
    return os.str();
}

std::string serialize_plan(const PruningPlan& plan) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& lp : plan.layers) {
        os << lp.layer << ' ' << lp.filters_before << ' ' << lp.ratio << " :";
        for (Index k : lp.keep) os << ' ' << k;
        os << '\n';
    }
    for (const auto& d : plan.dependencies) os << "# " << d.consumer << " <- " << d.producer << '\n';
    return os.str();
}

} // namespace efprune
