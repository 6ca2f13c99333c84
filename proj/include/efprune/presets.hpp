#ifndef EFPRUNE_PRESETS_HPP
#define EFPRUNE_PRESETS_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "efprune/model.hpp"

namespace efprune {

// Desk-scale model families. Zero width/depth selects the family default.
struct PresetOptions {
    std::string name = "mnist-cnn";  // mnist-cnn | toy-resnet | toy-vgg
    Shape input_chw = {1, 28, 28};
    int classes = 10;
    Index width = 0;
    int depth = 0;
};

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"mnist-cnn", "toy-resnet", "toy-vgg"};
    return names;
}

namespace detail {

template <typename Scalar>
ConvBlock<Scalar> conv_block(const std::string& name, Index in, Index out, Index stride, bool bn, bool bias,
                             int stage, bool prunable) {
    ConvBlock<Scalar> b;
    b.conv = Conv2d<Scalar>(name, out, in, 3, stride, 1, bias);
    b.conv.prunable = prunable;
    if (bn) b.bn = BatchNorm2d<Scalar>(name + ".bn", out);
    b.stage = stage;
    return b;
}

template <typename Scalar>
ResidualBlock<Scalar> basic_block(const std::string& name, Index width, int stage) {
    ResidualBlock<Scalar> b;
    b.conv1 = Conv2d<Scalar>(name + ".conv1", width, width, 3, 1, 1, false);
    b.conv1.prunable = true;
    b.bn1 = BatchNorm2d<Scalar>(name + ".bn1", width);
    b.conv2 = Conv2d<Scalar>(name + ".conv2", width, width, 3, 1, 1, false);
    b.bn2 = BatchNorm2d<Scalar>(name + ".bn2", width);
    b.stage = stage;
    return b;
}

} // namespace detail

// mnist-cnn: `depth` (3) biased 3x3 convs without batch-norm, widths w, 2w, 2w, ...
//            (w = 16), stride 2 on the second and third conv.
// toy-vgg:   `depth` (6) conv+BN layers, width doubling every two layers from w = 8.
// toy-resnet: stem conv, two stages of `depth` (2) basic blocks at widths w, 2w
//            (w = 8); stage 2 opens with a stride-2 transition conv.
// In every family the first conv is exempt from pruning; in toy-resnet only the
// first conv of each basic block is prunable.
template <typename Scalar>
Model<Scalar> build_preset(const PresetOptions& opt, std::uint64_t seed) {
    if (opt.input_chw.size() != 3) throw ConfigError("preset input shape must be [C,H,W]");
    if (opt.classes < 2) throw ConfigError("a classifier needs at least 2 classes");
    Model<Scalar> m;
    m.preset = opt.name;
    m.input_shape = opt.input_chw;
    const Index in = opt.input_chw[0];
    Index features = 0;
    if (opt.name == "mnist-cnn") {
        const Index w = opt.width > 0 ? opt.width : 16;
        const int depth = opt.depth > 0 ? opt.depth : 3;
        Index prev = in;
        for (int i = 0; i < depth; ++i) {
            const Index out = i == 0 ? w : 2 * w;
            const Index stride = (i == 1 || i == 2) ? 2 : 1;
            m.blocks.push_back(
                detail::conv_block<Scalar>("conv" + std::to_string(i), prev, out, stride, false, true, i, i > 0));
            prev = out;
        }
        features = prev;
    } else if (opt.name == "toy-vgg") {
        const Index w = opt.width > 0 ? opt.width : 8;
        const int depth = opt.depth > 0 ? opt.depth : 6;
        Index prev = in;
        for (int i = 0; i < depth; ++i) {
            const Index out = w << (i / 2);
            const Index stride = (i > 0 && i % 2 == 0) ? 2 : 1;
            m.blocks.push_back(
                detail::conv_block<Scalar>("conv" + std::to_string(i), prev, out, stride, true, false, i, i > 0));
            prev = out;
        }
        features = prev;
    } else if (opt.name == "toy-resnet") {
        const Index w = opt.width > 0 ? opt.width : 8;
        const int depth = opt.depth > 0 ? opt.depth : 2;
        m.blocks.push_back(detail::conv_block<Scalar>("stem", in, w, 1, true, false, 0, false));
        Index width = w;
        for (int stage = 1; stage <= 2; ++stage) {
            const std::string prefix = "stage" + std::to_string(stage);
            if (stage > 1) {
                m.blocks.push_back(
                    detail::conv_block<Scalar>(prefix + ".down", width, 2 * width, 2, true, false, stage, false));
                width *= 2;
            }
            for (int b = 0; b < depth; ++b)
                m.blocks.push_back(detail::basic_block<Scalar>(prefix + ".block" + std::to_string(b), width, stage));
        }
        features = width;
    } else {
        throw ConfigError("unknown model preset '" + opt.name + "' (expected mnist-cnn, toy-resnet or toy-vgg)");
    }
    m.head = Dense<Scalar>("fc", features, opt.classes);
    m.validate();
    std::mt19937_64 rng(seed);
    initialize(m, rng);
    return m;
}

} // namespace efprune

#endif // EFPRUNE_PRESETS_HPP
