#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace ihqgan {

inline constexpr int kImageSide = 32;
inline constexpr int kImagePixels = kImageSide * kImageSide;

/// 32x32 grayscale image, row-major, values in [0, 1].
struct ImageTensor {
    std::array<double, kImagePixels> pixels{};

    double& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * kImageSide + col]; }
    double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * kImageSide + col]; }

    static ImageTensor constant(double value) {
        ImageTensor img;
        img.pixels.fill(value);
        return img;
    }

    ImageTensor clamped() const {
        ImageTensor out = *this;
        for (double& p : out.pixels) p = std::clamp(p, 0.0, 1.0);
        return out;
    }

    bool finite() const {
        return std::all_of(pixels.begin(), pixels.end(), [](double p) { return std::isfinite(p); });
    }

    bool operator==(const ImageTensor&) const = default;
};

} // namespace ihqgan
