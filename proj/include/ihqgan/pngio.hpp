#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ihqgan::pngio {

/// Minimal PNG support for this project's on-disk images: 8-bit grayscale,
/// non-interlaced. The writer always emits filter 0 scanlines; the reader
/// handles all five standard filters so externally produced grayscale files
/// load too.

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::vector<std::uint8_t>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + data.size())));
    put_u32_be(out, crc);
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace detail

inline constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

/// Encodes width x height 8-bit grayscale pixels (row-major) as a PNG byte
/// stream. Deterministic for a given input.
inline std::vector<std::uint8_t> encode_gray8(const std::vector<std::uint8_t>& pixels, int width,
                                              int height) {
    if (pixels.size() != static_cast<std::size_t>(width) * height) {
        throw std::invalid_argument("pngio: pixel buffer does not match dimensions");
    }
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(height) * (width + 1));
    for (int r = 0; r < height; ++r) {
        raw.push_back(0);   // filter: None
        raw.insert(raw.end(), pixels.begin() + static_cast<std::size_t>(r) * width,
                   pixels.begin() + static_cast<std::size_t>(r + 1) * width);
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw std::runtime_error("pngio: deflate failed");
    }
    comp.resize(comp_len);

    std::vector<std::uint8_t> out(std::begin(kSignature), std::end(kSignature));
    std::vector<std::uint8_t> ihdr;
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(width));
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(0);   // color type: grayscale
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    detail::append_chunk(out, "IHDR", ihdr);
    detail::append_chunk(out, "IDAT", comp);
    detail::append_chunk(out, "IEND", {});
    return out;
}

struct Gray8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

inline Gray8 decode_gray8(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
        throw FormatError("pngio: not a PNG file", 0);
    }
    std::size_t pos = 8;
    int width = 0, height = 0;
    bool seen_ihdr = false;
    std::vector<std::uint8_t> idat;
    while (pos + 12 <= bytes.size()) {
        const std::uint32_t len = detail::get_u32_be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw FormatError("pngio: truncated chunk", pos);
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* data = bytes.data() + pos + 8;
        const std::uint32_t stored_crc = detail::get_u32_be(data + len);
        const std::uint32_t crc = static_cast<std::uint32_t>(
            ::crc32(0L, bytes.data() + pos + 4, static_cast<uInt>(4 + len)));
        if (stored_crc != crc) throw FormatError("pngio: chunk CRC mismatch", pos);

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw FormatError("pngio: bad IHDR length", pos);
            width = static_cast<int>(detail::get_u32_be(data));
            height = static_cast<int>(detail::get_u32_be(data + 4));
            if (data[8] != 8 || data[9] != 0) {
                throw FormatError("pngio: only 8-bit grayscale is supported", pos);
            }
            if (data[12] != 0) throw FormatError("pngio: interlaced PNG not supported", pos);
            seen_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || width <= 0 || height <= 0) throw FormatError("pngio: missing IHDR", pos);

    const std::size_t raw_len = static_cast<std::size_t>(height) * (width + 1);
    std::vector<std::uint8_t> raw(raw_len);
    uLongf out_len = static_cast<uLongf>(raw_len);
    if (uncompress(raw.data(), &out_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        out_len != raw_len) {
        throw FormatError("pngio: inflate failed", pos);
    }

    Gray8 img;
    img.width = width;
    img.height = height;
    img.pixels.assign(static_cast<std::size_t>(width) * height, 0);
    for (int r = 0; r < height; ++r) {
        const std::uint8_t filter = raw[static_cast<std::size_t>(r) * (width + 1)];
        const std::uint8_t* src = raw.data() + static_cast<std::size_t>(r) * (width + 1) + 1;
        std::uint8_t* dst = img.pixels.data() + static_cast<std::size_t>(r) * width;
        const std::uint8_t* up = r > 0 ? dst - width : nullptr;
        for (int c = 0; c < width; ++c) {
            const int a = c > 0 ? dst[c - 1] : 0;
            const int b = up ? up[c] : 0;
            const int cc = (c > 0 && up) ? up[c - 1] : 0;
            int v = src[c];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += detail::paeth(a, b, cc); break;
                default: throw FormatError("pngio: unknown filter type", pos);
            }
            dst[c] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return img;
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("pngio: cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("pngio: short write to " + path.string());
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("pngio: cannot open " + path.string());
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw std::runtime_error("pngio: short read from " + path.string());
    return bytes;
}

} // namespace ihqgan::pngio
