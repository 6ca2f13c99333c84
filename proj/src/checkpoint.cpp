#include "efprune/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace efprune {

namespace {

constexpr std::array<char, 8> kMagic{'E', 'F', 'P', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    template <typename T>
    void pod(T value) {
        os_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }
    void str(const std::string& s) {
        pod<std::uint64_t>(s.size());
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void tensor(const Tensor<double>& t) {
        pod<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (Index d : t.shape()) pod<std::int64_t>(d);
        os_.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

    template <typename T>
    T pod() {
        T value{};
        is_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (!is_) truncated();
        return value;
    }
    std::string str() {
        const auto n = pod<std::uint64_t>();
        if (n > (1u << 26)) throw DataError(DataErrorKind::BadFormat, source_ + ": implausible string length");
        std::string s(n, '\0');
        is_.read(s.data(), static_cast<std::streamsize>(n));
        if (!is_) truncated();
        return s;
    }
    Tensor<double> tensor() {
        const auto rank = pod<std::uint32_t>();
        if (rank == 0 || rank > 8) throw DataError(DataErrorKind::BadFormat, source_ + ": bad tensor rank");
        Shape shape(rank);
        for (auto& d : shape) {
            d = pod<std::int64_t>();
            if (d < 1 || d > (1 << 28)) throw DataError(DataErrorKind::BadFormat, source_ + ": bad tensor extent");
        }
        Tensor<double> t(shape);
        is_.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!is_) truncated();
        return t;
    }

private:
    [[noreturn]] void truncated() const {
        throw DataError(DataErrorKind::Truncated, source_ + ": checkpoint ends unexpectedly");
    }
    std::istream& is_;
    std::string source_;
};

void write_conv(Writer& w, const Conv2d<double>& c) {
    w.str(c.name);
    w.pod<std::int64_t>(c.stride);
    w.pod<std::int64_t>(c.padding);
    w.pod<std::uint8_t>(c.prunable);
    w.tensor(c.weight);
    w.pod<std::uint8_t>(c.bias.has_value());
    if (c.bias) w.tensor(*c.bias);
}

Conv2d<double> read_conv(Reader& r) {
    Conv2d<double> c;
    c.name = r.str();
    c.stride = r.pod<std::int64_t>();
    c.padding = r.pod<std::int64_t>();
    c.prunable = r.pod<std::uint8_t>() != 0;
    c.weight = r.tensor();
    if (r.pod<std::uint8_t>()) c.bias = r.tensor();
    return c;
}

void write_bn(Writer& w, const std::optional<BatchNorm2d<double>>& bn) {
    w.pod<std::uint8_t>(bn.has_value());
    if (!bn) return;
    w.str(bn->name);
    w.pod<double>(bn->epsilon);
    w.pod<double>(bn->momentum);
    w.tensor(bn->gamma);
    w.tensor(bn->beta);
    w.tensor(bn->running_mean);
    w.tensor(bn->running_var);
}

std::optional<BatchNorm2d<double>> read_bn(Reader& r) {
    if (!r.pod<std::uint8_t>()) return std::nullopt;
    BatchNorm2d<double> bn;
    bn.name = r.str();
    bn.epsilon = r.pod<double>();
    bn.momentum = r.pod<double>();
    bn.gamma = r.tensor();
    bn.beta = r.tensor();
    bn.running_mean = r.tensor();
    bn.running_var = r.tensor();
    return bn;
}

} // namespace

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t Checkpoint::config_digest() const { return fnv1a64(config_json); }

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write checkpoint " + path.string());
    Writer w(os);
    os.write(kMagic.data(), kMagic.size());
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.pod<std::uint64_t>(ckpt.config_digest());
    w.str(ckpt.config_json);
    w.pod<std::int64_t>(ckpt.epoch);

    const auto& m = ckpt.model;
    w.str(m.preset);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(m.input_shape.size()));
    for (Index d : m.input_shape) w.pod<std::int64_t>(d);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(m.blocks.size()));
    for (const auto& block : m.blocks)
        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ConvBlock<double>>) {
                    w.pod<std::uint8_t>(0);
                    w.pod<std::int32_t>(b.stage);
                    write_conv(w, b.conv);
                    write_bn(w, b.bn);
                    w.pod<std::uint8_t>(b.relu);
                } else {
                    w.pod<std::uint8_t>(1);
                    w.pod<std::int32_t>(b.stage);
                    write_conv(w, b.conv1);
                    write_bn(w, b.bn1);
                    write_conv(w, b.conv2);
                    write_bn(w, b.bn2);
                }
            },
            block);
    w.pod<std::uint8_t>(m.head.has_value());
    if (m.head) {
        w.str(m.head->name);
        w.tensor(m.head->weight);
        w.tensor(m.head->bias);
    }

    w.pod<std::uint8_t>(ckpt.optimizer.has_value());
    if (ckpt.optimizer) {
        w.pod<double>(ckpt.optimizer->momentum);
        w.pod<double>(ckpt.optimizer->weight_decay);
        w.pod<std::uint8_t>(ckpt.optimizer->initialized);
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.optimizer->velocity.size()));
        for (const auto& v : ckpt.optimizer->velocity) w.tensor(v);
    }
    if (!os) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw DataError(DataErrorKind::NotFound, "checkpoint " + path.string() + " does not exist");
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(DataErrorKind::NotFound, "cannot open checkpoint " + path.string());
    Reader r(is, path.string());
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw DataError(DataErrorKind::BadMagic, path.string() + " is not a checkpoint");
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw DataError(DataErrorKind::BadFormat, path.string() + ": unsupported checkpoint version " +
                                                      std::to_string(version));
    const auto digest = r.pod<std::uint64_t>();
    Checkpoint ckpt;
    ckpt.config_json = r.str();
    if (fnv1a64(ckpt.config_json) != digest)
        throw DataError(DataErrorKind::BadFormat, path.string() + ": config digest mismatch");
    ckpt.epoch = r.pod<std::int64_t>();

    auto& m = ckpt.model;
    m.preset = r.str();
    m.input_shape.resize(r.pod<std::uint32_t>());
    for (auto& d : m.input_shape) d = r.pod<std::int64_t>();
    const auto blocks = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < blocks; ++i) {
        const auto kind = r.pod<std::uint8_t>();
        const auto stage = r.pod<std::int32_t>();
        if (kind == 0) {
            ConvBlock<double> b;
            b.stage = stage;
            b.conv = read_conv(r);
            b.bn = read_bn(r);
            b.relu = r.pod<std::uint8_t>() != 0;
            m.blocks.push_back(std::move(b));
        } else if (kind == 1) {
            ResidualBlock<double> b;
            b.stage = stage;
            b.conv1 = read_conv(r);
            b.bn1 = read_bn(r);
            b.conv2 = read_conv(r);
            b.bn2 = read_bn(r);
            m.blocks.push_back(std::move(b));
        } else {
            throw DataError(DataErrorKind::BadFormat, path.string() + ": unknown block kind");
        }
    }
    if (r.pod<std::uint8_t>()) {
        Dense<double> d;
        d.name = r.str();
        d.weight = r.tensor();
        d.bias = r.tensor();
        m.head = std::move(d);
    }
    if (r.pod<std::uint8_t>()) {
        OptimizerState s;
        s.momentum = r.pod<double>();
        s.weight_decay = r.pod<double>();
        s.initialized = r.pod<std::uint8_t>() != 0;
        const auto n = r.pod<std::uint32_t>();
        for (std::uint32_t i = 0; i < n; ++i) s.velocity.push_back(r.tensor());
        ckpt.optimizer = std::move(s);
    }
    try {
        m.validate();
    } catch (const DimensionError& e) {
        throw DataError(DataErrorKind::BadFormat, path.string() + ": inconsistent model: " + e.what());
    }
    return ckpt;
}

} // namespace efprune
