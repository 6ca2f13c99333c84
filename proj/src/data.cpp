#include "efprune/data.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "efprune/errors.hpp"

namespace efprune {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError(DataErrorKind::NotFound, path.string() + " does not exist");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrorKind::NotFound, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void require_bytes(const std::vector<unsigned char>& bytes, std::size_t needed, const std::filesystem::path& path) {
    if (bytes.size() < needed)
        throw DataError(DataErrorKind::Truncated, path.string() + " has " + std::to_string(bytes.size()) +
                                                      " bytes, expected at least " + std::to_string(needed));
}

} // namespace

Tensor<float> Dataset::denormalized(Index i) const {
    const Index chans = images.dim(1), plane = images.dim(2) * images.dim(3);
    Tensor<float> out({chans, images.dim(2), images.dim(3)});
    for (Index c = 0; c < chans; ++c)
        out.data().segment(c * plane, plane) =
            (images.data().segment((i * chans + c) * plane, plane).array() * std[static_cast<std::size_t>(c)] +
             mean[static_cast<std::size_t>(c)])
                .matrix();
    return out;
}

Dataset Dataset::head(Index count) const {
    count = std::min(count, size());
    Dataset out;
    Shape shape = images.shape();
    shape[0] = count;
    const Index per = images.size() / images.dim(0);
    out.images = Tensor<float>(shape, images.data().head(count * per));
    out.labels.assign(labels.begin(), labels.begin() + count);
    out.split = split;
    out.classes = classes;
    out.mean = mean;
    out.std = std;
    return out;
}

Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                       Split split) {
    const auto image_bytes = read_file(images_path);
    const auto label_bytes = read_file(labels_path);

    require_bytes(image_bytes, 16, images_path);
    if (read_be32(image_bytes, 0) != kIdxImageMagic)
        throw DataError(DataErrorKind::BadMagic, images_path.string() + ": image magic " +
                                                     std::to_string(read_be32(image_bytes, 0)) + " != 2051");
    require_bytes(label_bytes, 8, labels_path);
    if (read_be32(label_bytes, 0) != kIdxLabelMagic)
        throw DataError(DataErrorKind::BadMagic, labels_path.string() + ": label magic " +
                                                     std::to_string(read_be32(label_bytes, 0)) + " != 2049");

    const std::size_t count = read_be32(image_bytes, 4);
    const std::size_t rows = read_be32(image_bytes, 8);
    const std::size_t cols = read_be32(image_bytes, 12);
    const std::size_t label_count = read_be32(label_bytes, 4);
    if (rows != 28 || cols != 28)
        throw DataError(DataErrorKind::BadFormat, images_path.string() + ": expected 28x28 images, got " +
                                                      std::to_string(rows) + "x" + std::to_string(cols));
    if (count != label_count)
        throw DataError(DataErrorKind::CountMismatch, std::to_string(count) + " images but " +
                                                          std::to_string(label_count) + " labels");
    const std::size_t plane = rows * cols;
    require_bytes(image_bytes, 16 + count * plane, images_path);
    require_bytes(label_bytes, 8 + count, labels_path);
    if (image_bytes.size() != 16 + count * plane)
        throw DataError(DataErrorKind::SizeMismatch, images_path.string() + " has trailing bytes");
    if (label_bytes.size() != 8 + count)
        throw DataError(DataErrorKind::SizeMismatch, labels_path.string() + " has trailing bytes");
    if (count == 0) throw DataError(DataErrorKind::BadFormat, "IDX files contain no samples");

    Dataset ds;
    ds.split = split;
    ds.classes = 10;
    ds.mean = {kMnistMean};
    ds.std = {kMnistStd};
    ds.images = Tensor<float>({static_cast<Index>(count), 1, static_cast<Index>(rows), static_cast<Index>(cols)});
    float* dst = ds.images.ptr();
    for (std::size_t i = 0; i < count * plane; ++i)
        dst[i] = (static_cast<float>(image_bytes[16 + i]) / 255.0f - kMnistMean) / kMnistStd;
    ds.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = label_bytes[8 + i];
        if (label > 9)
            throw DataError(DataErrorKind::BadFormat, labels_path.string() + ": label " + std::to_string(label) +
                                                          " at index " + std::to_string(i) + " outside [0,9]");
        ds.labels[i] = label;
    }
    return ds;
}

Dataset load_mnist_dir(const std::filesystem::path& dir, Split split) {
    if (!std::filesystem::is_directory(dir))
        throw DataError(DataErrorKind::NotFound, "MNIST directory " + dir.string() + " does not exist");
    const std::string prefix = split == Split::Train ? "train" : "t10k";
    // Some mirrors ship "train-images.idx3-ubyte" instead of "train-images-idx3-ubyte".
    auto pick = [&](const std::string& stem) {
        std::string dotted = stem;
        dotted.replace(dotted.rfind("-idx"), 1, ".");
        if (!std::filesystem::exists(dir / stem) && std::filesystem::exists(dir / dotted)) return dir / dotted;
        return dir / stem;
    };
    return load_mnist_idx(pick(prefix + "-images-idx3-ubyte"), pick(prefix + "-labels-idx1-ubyte"), split);
}

Dataset load_cifar10_binary(const std::filesystem::path& dir, Split split) {
    if (!std::filesystem::is_directory(dir))
        throw DataError(DataErrorKind::NotFound, "CIFAR-10 directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    if (split == Split::Train)
        for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    else
        files.push_back(dir / "test_batch.bin");

    constexpr std::array<float, 3> mean{0.4914f, 0.4822f, 0.4465f};
    constexpr std::array<float, 3> stdev{0.2470f, 0.2435f, 0.2616f};
    const std::size_t total = files.size() * kCifarRecordsPerFile;
    Dataset ds;
    ds.split = split;
    ds.classes = 10;
    ds.mean.assign(mean.begin(), mean.end());
    ds.std.assign(stdev.begin(), stdev.end());
    ds.images = Tensor<float>({static_cast<Index>(total), 3, 32, 32});
    ds.labels.reserve(total);
    float* dst = ds.images.ptr();
    for (const auto& file : files) {
        const auto bytes = read_file(file);
        if (bytes.size() != kCifarRecordBytes * kCifarRecordsPerFile)
            throw DataError(DataErrorKind::SizeMismatch, file.string() + " has " + std::to_string(bytes.size()) +
                                                             " bytes, expected " +
                                                             std::to_string(kCifarRecordBytes * kCifarRecordsPerFile));
        for (std::size_t r = 0; r < kCifarRecordsPerFile; ++r) {
            const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
            if (rec[0] > 9)
                throw DataError(DataErrorKind::BadFormat, file.string() + ": label " + std::to_string(rec[0]) +
                                                              " outside [0,9]");
            ds.labels.push_back(rec[0]);
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < 1024; ++p)
                    *dst++ = (static_cast<float>(rec[1 + c * 1024 + p]) / 255.0f - mean[c]) / stdev[c];
        }
    }
    return ds;
}

Dataset synthetic_task(const SyntheticSpec& spec, Split split) {
    if (spec.classes < 2) throw ConfigError("synthetic task needs at least 2 classes");
    if (spec.samples < 1) throw ConfigError("synthetic task needs at least 1 sample");

    std::mt19937_64 proto_rng(spec.seed);
    std::uniform_real_distribution<double> jitter(-0.25, 0.25);
    std::uniform_real_distribution<double> freq(0.12, 0.30);
    std::vector<double> angle(static_cast<std::size_t>(spec.classes)), frequency(angle.size());
    for (int c = 0; c < spec.classes; ++c) {
        angle[static_cast<std::size_t>(c)] = std::numbers::pi * (c + 0.5 * jitter(proto_rng)) / spec.classes;
        frequency[static_cast<std::size_t>(c)] = freq(proto_rng);
    }

    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + (split == Split::Train ? 1 : 2));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    Dataset ds;
    ds.split = split;
    ds.classes = spec.classes;
    ds.mean.assign(static_cast<std::size_t>(spec.channels), 0.0f);
    ds.std.assign(static_cast<std::size_t>(spec.channels), 1.0f);
    ds.images = Tensor<float>({spec.samples, spec.channels, spec.height, spec.width});
    ds.labels.resize(static_cast<std::size_t>(spec.samples));
    float* dst = ds.images.ptr();
    for (Index i = 0; i < spec.samples; ++i) {
        const int label = static_cast<int>(i % spec.classes);
        ds.labels[static_cast<std::size_t>(i)] = label;
        const double theta = angle[static_cast<std::size_t>(label)];
        const double f = 2.0 * std::numbers::pi * frequency[static_cast<std::size_t>(label)];
        const double cx = std::cos(theta), sy = std::sin(theta);
        for (Index c = 0; c < spec.channels; ++c) {
            const double phi = phase(rng);
            for (Index y = 0; y < spec.height; ++y)
                for (Index x = 0; x < spec.width; ++x)
                    *dst++ = static_cast<float>(spec.separation * std::cos(f * (x * cx + y * sy) + phi) +
                                                noise(rng));
        }
    }
    return ds;
}

} // namespace efprune
