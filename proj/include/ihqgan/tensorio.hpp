#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ihqgan::tensorio {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts are not supported");

// 8-byte magic: "IHQT" + format version "0001"
inline constexpr std::array<char, 8> kMagic = {'I', 'H', 'Q', 'T', '0', '0', '0', '1'};

struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;

    std::uint64_t element_count() const {
        return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1},
                               [](std::uint64_t a, std::uint64_t b) { return a * b; });
    }
};

/// Layout: magic(8) | rank u32 | dims u64[rank] | payload f64[prod(dims)],
/// everything little-endian. Writes go to a temp file first and rename into
/// place so readers never observe a torn checkpoint.
inline void save_tensor(const std::filesystem::path& path, std::span<const std::uint64_t> dims,
                        std::span<const double> data) {
    std::uint64_t expect = 1;
    for (std::uint64_t d : dims) expect *= d;
    if (expect != data.size()) {
        throw std::invalid_argument("tensorio: dims do not match payload size for " + path.string());
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("tensorio: cannot open " + tmp.string() + " for writing");
        out.write(kMagic.data(), kMagic.size());
        const std::uint32_t rank = static_cast<std::uint32_t>(dims.size());
        out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
        out.write(reinterpret_cast<const char*>(dims.data()),
                  static_cast<std::streamsize>(dims.size() * sizeof(std::uint64_t)));
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!out) throw std::runtime_error("tensorio: short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("tensorio: cannot open " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        throw std::runtime_error("tensorio: bad magic in " + path.string());
    }
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    if (!in || rank > 16) throw std::runtime_error("tensorio: bad rank in " + path.string());
    Tensor t;
    t.dims.resize(rank);
    in.read(reinterpret_cast<char*>(t.dims.data()), static_cast<std::streamsize>(rank * sizeof(std::uint64_t)));
    if (!in) throw std::runtime_error("tensorio: truncated header in " + path.string());
    const std::uint64_t n = t.element_count();
    if (n > (std::uint64_t{1} << 32)) throw std::runtime_error("tensorio: implausible element count in " + path.string());
    t.data.resize(n);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in || in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
        throw std::runtime_error("tensorio: truncated payload in " + path.string());
    }
    return t;
}

/// Loads a tensor and checks its shape against the expected dims.
inline std::vector<double> load_tensor_checked(const std::filesystem::path& path,
                                               std::span<const std::uint64_t> dims) {
    Tensor t = load_tensor(path);
    if (!std::equal(t.dims.begin(), t.dims.end(), dims.begin(), dims.end())) {
        throw std::runtime_error("tensorio: unexpected shape in " + path.string());
    }
    return std::move(t.data);
}

} // namespace ihqgan::tensorio
