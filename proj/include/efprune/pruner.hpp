#ifndef EFPRUNE_PRUNER_HPP
#define EFPRUNE_PRUNER_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "efprune/electrostatics.hpp"
#include "efprune/model.hpp"

namespace efprune {

// ResNet-style: one ratio per stage (stem, conv stages..., classifier).
struct StageRatios {
    std::vector<double> values;
};

// VGG-style: conv-layer index (in forward order) -> ratio; unlisted layers keep everything.
struct LayerRatios {
    std::map<int, double> values;
};

using PruningRatios = std::variant<StageRatios, LayerRatios>;

// Accepts "0,0.5,0.5,0" (per stage) or "0:0,1-15:0.65" (per conv layer, ranges inclusive).
PruningRatios parse_ratios(const std::string& text);
std::string format_ratios(const PruningRatios& ratios);

struct RankedFilter {
    Index index;
    double l1;
};

// Ascending by L1 norm; equal norms keep index order.
template <typename Scalar>
std::vector<RankedFilter> rank_filters(const Conv2d<Scalar>& layer) {
    std::vector<RankedFilter> ranked;
    const auto rows = layer.weight.rows();
    for (Index n = 0; n < layer.filters(); ++n) ranked.push_back({n, filter_magnitude(rows.row(n))});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedFilter& a, const RankedFilter& b) { return a.l1 < b.l1; });
    return ranked;
}

struct LayerPlan {
    std::string layer;
    Index filters_before = 0;
    double ratio = 0.0;
    std::vector<Index> keep;           // strictly increasing, non-empty
    std::vector<RankedFilter> ranking; // provenance: the L1 ranking the keep-set came from

    Index pruned() const { return filters_before - static_cast<Index>(keep.size()); }
};

// A layer whose input channels must follow a pruned producer.
struct ChannelDependency {
    std::string consumer;
    std::string producer;
    std::vector<Index> keep;
};

struct PruningPlan {
    std::vector<LayerPlan> layers;
    std::vector<ChannelDependency> dependencies;

    const LayerPlan* find(const std::string& layer) const {
        for (const auto& l : layers)
            if (l.layer == layer) return &l;
        return nullptr;
    }
    bool is_identity() const {
        return std::all_of(layers.begin(), layers.end(), [](const LayerPlan& l) { return l.pruned() == 0; });
    }
};

// Plain-text audit form: one "layer filters_before ratio : kept indices" line per layer.
std::string serialize_plan(const PruningPlan& plan);

inline Index pruned_count(double ratio, Index filters) {
    // The epsilon keeps products like 0.29 * 100 from flooring one short.
    return static_cast<Index>(std::floor(ratio * static_cast<double>(filters) + 1e-9));
}

namespace detail {

struct ConvSite {
    int index;
    int stage;
    std::string name;
    bool prunable;
};

template <typename Scalar>
std::vector<ConvSite> conv_sites(const Model<Scalar>& model) {
    std::vector<ConvSite> sites;
    int index = 0;
    for (const auto& block : model.blocks)
        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    sites.push_back({index++, b.stage, b.conv.name, b.conv.prunable});
                } else {
                    sites.push_back({index++, b.stage, b.conv1.name, b.conv1.prunable});
                    sites.push_back({index++, b.stage, b.conv2.name, b.conv2.prunable});
                }
            },
            block);
    return sites;
}

inline void check_ratio(double r, const std::string& where) {
    if (!(r >= 0.0 && r < 1.0)) {
        std::ostringstream os;
        os << "pruning ratio " << r << " for " << where << " is outside [0, 1)";
        throw ConfigError(os.str());
    }
}

// Keeps the listed leading-axis slabs (filters, or vector entries).
template <typename Scalar>
Tensor<Scalar> select_leading(const Tensor<Scalar>& t, const std::vector<Index>& keep) {
    Shape shape = t.shape();
    shape[0] = static_cast<Index>(keep.size());
    Tensor<Scalar> out(shape);
    const Index slab = t.size() / t.dim(0);
    for (std::size_t i = 0; i < keep.size(); ++i)
        out.data().segment(static_cast<Index>(i) * slab, slab) = t.data().segment(keep[i] * slab, slab);
    return out;
}

// Keeps the listed axis-1 slices (input channels of a conv weight, input columns of a dense weight).
template <typename Scalar>
Tensor<Scalar> select_second(const Tensor<Scalar>& t, const std::vector<Index>& keep) {
    Shape shape = t.shape();
    const Index inner = t.size() / (t.dim(0) * t.dim(1));
    shape[1] = static_cast<Index>(keep.size());
    Tensor<Scalar> out(shape);
    for (Index o = 0; o < t.dim(0); ++o)
        for (std::size_t i = 0; i < keep.size(); ++i)
            out.data().segment((o * shape[1] + static_cast<Index>(i)) * inner, inner) =
                t.data().segment((o * t.dim(1) + keep[i]) * inner, inner);
    return out;
}

template <typename Scalar>
void keep_filters(Conv2d<Scalar>& conv, std::optional<BatchNorm2d<Scalar>>& bn, const std::vector<Index>& keep) {
    conv.weight = select_leading(conv.weight, keep);
    if (conv.bias) conv.bias = select_leading(*conv.bias, keep);
    if (bn) {
        bn->gamma = select_leading(bn->gamma, keep);
        bn->beta = select_leading(bn->beta, keep);
        bn->running_mean = select_leading(bn->running_mean, keep);
        bn->running_var = select_leading(bn->running_var, keep);
    }
}

} // namespace detail

template <typename Scalar>
std::vector<double> layer_ratios(const Model<Scalar>& model, const PruningRatios& ratios) {
    const auto sites = detail::conv_sites(model);
    std::vector<double> out(sites.size(), 0.0);
    if (const auto* stages = std::get_if<StageRatios>(&ratios)) {
        const int count = model.stage_count();
        if (static_cast<int>(stages->values.size()) != count)
            throw ConfigError("ratio list has " + std::to_string(stages->values.size()) + " entries, model has " +
                              std::to_string(count) + " stages (stem, conv stages, classifier)");
        for (std::size_t s = 0; s < stages->values.size(); ++s)
            detail::check_ratio(stages->values[s], "stage " + std::to_string(s));
        if (stages->values.front() != 0.0) throw ConfigError("stage 0 (first convolution) must have ratio 0");
        if (stages->values.back() != 0.0) throw ConfigError("the classifier stage must have ratio 0");
        for (std::size_t i = 0; i < sites.size(); ++i)
            if (sites[i].prunable) out[i] = stages->values[static_cast<std::size_t>(sites[i].stage)];
    } else {
        for (const auto& [index, ratio] : std::get<LayerRatios>(ratios).values) {
            if (index < 0 || index >= static_cast<int>(sites.size()))
                throw ConfigError("ratio given for conv layer " + std::to_string(index) + " but the model has " +
                                  std::to_string(sites.size()) + " conv layers");
            detail::check_ratio(ratio, "conv layer " + std::to_string(index));
            const auto& site = sites[static_cast<std::size_t>(index)];
            if (!site.prunable && ratio != 0.0)
                throw ConfigError(site.name + " (conv layer " + std::to_string(index) + ") is exempt from pruning");
            out[static_cast<std::size_t>(index)] = ratio;
        }
    }
    return out;
}

template <typename Scalar>
PruningPlan build_plan(const Model<Scalar>& model, const PruningRatios& ratios) {
    const auto per_layer = layer_ratios(model, ratios);
    const auto convs = model.convs();
    PruningPlan plan;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        const auto& conv = *convs[i];
        if (!conv.prunable) continue;
        LayerPlan lp;
        lp.layer = conv.name;
        lp.filters_before = conv.filters();
        lp.ratio = per_layer[i];
        const Index drop = pruned_count(lp.ratio, lp.filters_before);
        if (drop >= lp.filters_before)
            throw ConfigError("ratio " + std::to_string(lp.ratio) + " would remove all " +
                              std::to_string(lp.filters_before) + " filters of " + conv.name);
        lp.ranking = rank_filters(conv);
        for (std::size_t r = static_cast<std::size_t>(drop); r < lp.ranking.size(); ++r)
            lp.keep.push_back(lp.ranking[r].index);
        std::sort(lp.keep.begin(), lp.keep.end());
        plan.layers.push_back(std::move(lp));
    }

    // Record who consumes each pruned producer's channels.
    const std::string* producer = nullptr;
    const std::vector<Index>* producer_keep = nullptr;
    for (const auto& block : model.blocks)
        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    if (producer) plan.dependencies.push_back({b.conv.name, *producer, *producer_keep});
                    producer = nullptr;
                    if (const auto* lp = plan.find(b.conv.name)) {
                        producer = &lp->layer;
                        producer_keep = &lp->keep;
                    }
                } else {
                    if (producer)
                        throw StructureError(b.conv1.name + " reads a residual stream produced by pruned layer " +
                                             *producer);
                    if (const auto* lp = plan.find(b.conv1.name))
                        plan.dependencies.push_back({b.conv2.name, lp->layer, lp->keep});
                    if (plan.find(b.conv2.name))
                        throw StructureError(b.conv2.name + " feeds the identity add of its block and cannot be pruned");
                }
            },
            block);
    if (producer && model.head) plan.dependencies.push_back({model.head->name, *producer, *producer_keep});
    return plan;
}

// Builds a new, physically smaller model; `model` is left untouched.
template <typename Scalar>
Model<Scalar> apply_plan(const Model<Scalar>& model, const PruningPlan& plan) {
    for (const auto& lp : plan.layers) {
        const Conv2d<Scalar>* conv = nullptr;
        for (const auto* c : model.convs())
            if (c->name == lp.layer) conv = c;
        if (!conv) throw StructureError("plan names layer " + lp.layer + " which the model does not have");
        if (!conv->prunable) throw StructureError("plan prunes exempt layer " + lp.layer);
        if (conv->filters() != lp.filters_before)
            throw StructureError("plan was built for " + std::to_string(lp.filters_before) + " filters in " +
                                 lp.layer + ", model has " + std::to_string(conv->filters()));
        if (lp.keep.empty()) throw StructureError("plan keeps no filters of " + lp.layer);
        for (std::size_t i = 0; i < lp.keep.size(); ++i)
            if (lp.keep[i] < 0 || lp.keep[i] >= lp.filters_before || (i > 0 && lp.keep[i] <= lp.keep[i - 1]))
                throw StructureError("keep-indices of " + lp.layer + " must be strictly increasing and in range");
    }
    auto dependency_check = [&](const std::string& consumer, const std::string& producer,
                                const std::vector<Index>& keep) {
        for (const auto& d : plan.dependencies)
            if (d.consumer == consumer && (d.producer != producer || d.keep != keep))
                throw StructureError("dependency mismatch: " + consumer + " expects channels of " + d.producer +
                                     " but is fed by " + producer);
    };

    Model<Scalar> out = model;
    std::optional<std::vector<Index>> incoming;
    std::string incoming_from;
    for (auto& block : out.blocks)
        std::visit(
            [&](auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<Scalar>>) {
                    if (incoming) {
                        dependency_check(b.conv.name, incoming_from, *incoming);
                        b.conv.weight = detail::select_second(b.conv.weight, *incoming);
                    }
                    incoming.reset();
                    if (const auto* lp = plan.find(b.conv.name)) {
                        detail::keep_filters(b.conv, b.bn, lp->keep);
                        incoming = lp->keep;
                        incoming_from = lp->layer;
                    }
                } else {
                    if (incoming)
                        throw StructureError("dependency mismatch: residual block " + b.conv1.name +
                                             " cannot consume pruned channels of " + incoming_from);
                    if (plan.find(b.conv2.name))
                        throw StructureError("dependency mismatch: " + b.conv2.name + " feeds the identity add of " +
                                             b.conv1.name + "'s block");
                    if (const auto* lp = plan.find(b.conv1.name)) {
                        dependency_check(b.conv2.name, lp->layer, lp->keep);
                        detail::keep_filters(b.conv1, b.bn1, lp->keep);
                        b.conv2.weight = detail::select_second(b.conv2.weight, lp->keep);
                    }
                }
            },
            block);
    if (incoming && out.head) {
        dependency_check(out.head->name, incoming_from, *incoming);
        out.head->weight = detail::select_second(out.head->weight, *incoming);
    }
    out.validate();
    return out;
}

template <typename Scalar>
double speedup(const Model<Scalar>& base, const Model<Scalar>& pruned, const Shape& input_chw) {
    const auto pruned_flops = count_flops(pruned, input_chw);
    if (pruned_flops == 0) throw StructureError("pruned model has zero FLOPs; speedup undefined");
    return static_cast<double>(count_flops(base, input_chw)) / static_cast<double>(pruned_flops);
}

template <typename Scalar>
double speedup(const Model<Scalar>& base, const Model<Scalar>& pruned) {
    return speedup(base, pruned, base.input_shape);
}

} // namespace efprune

#endif // EFPRUNE_PRUNER_HPP
