#ifndef EFPRUNE_DATA_HPP
#define EFPRUNE_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "efprune/tensor.hpp"

namespace efprune {

enum class Split { Train, Test };

// Immutable labelled image set. Images are stored normalized:
//   stored = (raw - mean[c]) / std[c], raw in [0, 1].
struct Dataset {
    Tensor<float> images;  // [N, C, H, W]
    std::vector<int> labels;
    Split split = Split::Train;
    int classes = 0;
    std::vector<float> mean;
    std::vector<float> std;

    Index size() const { return static_cast<Index>(labels.size()); }
    Shape sample_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }

    // Inverse of the load-time normalization for sample i.
    Tensor<float> denormalized(Index i) const;

    template <typename Scalar>
    Tensor<Scalar> gather(const std::vector<Index>& indices) const {
        const Index per = images.size() / images.dim(0);
        Tensor<Scalar> batch({static_cast<Index>(indices.size()), images.dim(1), images.dim(2), images.dim(3)});
        for (std::size_t i = 0; i < indices.size(); ++i)
            batch.data().segment(static_cast<Index>(i) * per, per) =
                images.data().segment(indices[i] * per, per).template cast<Scalar>();
        return batch;
    }

    std::vector<int> gather_labels(const std::vector<Index>& indices) const {
        std::vector<int> out;
        out.reserve(indices.size());
        for (Index i : indices) out.push_back(labels[static_cast<std::size_t>(i)]);
        return out;
    }

    // First `count` samples (order preserved).
    Dataset head(Index count) const;
};

inline constexpr float kMnistMean = 0.1307f;
inline constexpr float kMnistStd = 0.3081f;
inline constexpr std::uint32_t kIdxImageMagic = 2051;  // 0x00000803
inline constexpr std::uint32_t kIdxLabelMagic = 2049;  // 0x00000801

Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                       Split split = Split::Train);

// Resolves the conventional file names (train-images-idx3-ubyte, t10k-..., optionally .gz-less) inside `dir`.
Dataset load_mnist_dir(const std::filesystem::path& dir, Split split);

inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordsPerFile = 10000;

// data_batch_1..5.bin for Train, test_batch.bin for Test.
Dataset load_cifar10_binary(const std::filesystem::path& dir, Split split = Split::Train);

struct SyntheticSpec {
    int classes = 10;
    Index samples = 2000;
    Index channels = 1;
    Index height = 12;
    Index width = 12;
    // Amplitude of the class texture relative to unit Gaussian noise.
    double separation = 1.0;
    std::uint64_t seed = 1;
};

// Class-conditional textures plus Gaussian noise. Every class owns an oriented
// grating (orientation and spatial frequency drawn from `seed`); each sample
// draws a random phase so the class signal is translation-invariant.
Dataset synthetic_task(const SyntheticSpec& spec, Split split = Split::Train);

} // namespace efprune

#endif // EFPRUNE_DATA_HPP
