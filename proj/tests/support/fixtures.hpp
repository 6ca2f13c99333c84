#ifndef EFPRUNE_TESTS_FIXTURES_HPP
#define EFPRUNE_TESTS_FIXTURES_HPP

// Writers for small on-disk dataset fixtures.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace fixture {

using Bytes = std::vector<unsigned char>;

inline void put_be32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<unsigned char>((v >> shift) & 0xff));
}

inline Bytes idx_images(std::uint32_t count, std::uint32_t magic = 2051, std::uint32_t rows = 28,
                        std::uint32_t cols = 28, std::uint64_t seed = 1) {
    Bytes b;
    put_be32(b, magic);
    put_be32(b, count);
    put_be32(b, rows);
    put_be32(b, cols);
    std::mt19937_64 rng(seed);
    for (std::uint64_t i = 0; i < std::uint64_t{count} * rows * cols; ++i) b.push_back(static_cast<unsigned char>(rng()));
    return b;
}

inline Bytes idx_labels(const std::vector<unsigned char>& labels, std::uint32_t magic = 2049) {
    Bytes b;
    put_be32(b, magic);
    put_be32(b, static_cast<std::uint32_t>(labels.size()));
    b.insert(b.end(), labels.begin(), labels.end());
    return b;
}

inline void write(const std::filesystem::path& path, const Bytes& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("efprune_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixture

#endif // EFPRUNE_TESTS_FIXTURES_HPP
