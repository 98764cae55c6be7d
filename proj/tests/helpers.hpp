#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "ihqgan/data.hpp"
#include "ihqgan/image.hpp"
#include "ihqgan/qsim.hpp"
#include "ihqgan/rng.hpp"

namespace test_helpers {

/// Central finite difference of a scalar function over a parameter vector.
/// Lives test-side only; this is the independent oracle the analytic
/// gradient paths are audited against.
inline std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                             std::vector<double> x, double h = 1e-5) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x);
        x[i] = saved - h;
        const double fm = f(x);
        x[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

inline ihqgan::qsim::StateVector random_state(ihqgan::Rng& rng, int n_qubits) {
    ihqgan::qsim::StateVector s;
    s.n_qubits = n_qubits;
    s.amplitudes.resize(std::size_t{1} << n_qubits);
    for (auto& a : s.amplitudes) a = {rng.normal(), rng.normal()};
    double n = s.norm();
    for (auto& a : s.amplitudes) a /= n;
    return s;
}

inline ihqgan::ImageTensor random_image(ihqgan::Rng& rng) {
    ihqgan::ImageTensor img;
    for (double& p : img.pixels) p = rng.uniform();
    return img;
}

inline std::vector<double> random_vector(ihqgan::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

/// Digit-like 28x28 stroke blobs standing in for MNIST in the sandboxed test
/// environment (no dataset download); content is centered like real digits
/// so the padded rows 0-7 and 26-31 stay dark.
inline ihqgan::data::Mnist synthetic_mnist(std::size_t count, std::uint64_t seed,
                                           int fixed_label = -1) {
    ihqgan::Rng rng(seed);
    ihqgan::data::Mnist m;
    m.rows = 28;
    m.cols = 28;
    m.pixels.assign(count * 28 * 28, 0);
    m.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        m.labels[i] = fixed_label >= 0 ? static_cast<std::uint8_t>(fixed_label)
                                       : static_cast<std::uint8_t>(i % 10);
        std::uint8_t* img = m.pixels.data() + i * 28 * 28;
        double r = 10.0 + rng.uniform(0.0, 8.0);
        double c = 10.0 + rng.uniform(0.0, 8.0);
        for (int step = 0; step < 60; ++step) {
            const int ri = std::clamp(static_cast<int>(r), 6, 21);
            const int ci = std::clamp(static_cast<int>(c), 6, 21);
            const std::uint8_t v = static_cast<std::uint8_t>(180 + rng.below(76));
            for (int dr = 0; dr <= 1; ++dr)
                for (int dc = 0; dc <= 1; ++dc)
                    img[(ri + dr) * 28 + ci + dc] = std::max(img[(ri + dr) * 28 + ci + dc], v);
            r += rng.uniform(-1.6, 1.6);
            c += rng.uniform(-1.6, 1.6);
        }
    }
    return m;
}

/// Writes a Mnist struct as the standard IDX pair under dir.
inline void write_idx_pair(const ihqgan::data::Mnist& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put_u32 = [](std::ofstream& out, std::uint32_t v) {
        const std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                                   static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    {
        std::ofstream out(dir / "train-images-idx3-ubyte", std::ios::binary | std::ios::trunc);
        put_u32(out, 0x00000803u);
        put_u32(out, static_cast<std::uint32_t>(m.count()));
        put_u32(out, 28);
        put_u32(out, 28);
        out.write(reinterpret_cast<const char*>(m.pixels.data()),
                  static_cast<std::streamsize>(m.pixels.size()));
    }
    {
        std::ofstream out(dir / "train-labels-idx1-ubyte", std::ios::binary | std::ios::trunc);
        put_u32(out, 0x00000801u);
        put_u32(out, static_cast<std::uint32_t>(m.count()));
        out.write(reinterpret_cast<const char*>(m.labels.data()),
                  static_cast<std::streamsize>(m.labels.size()));
    }
}

} // namespace test_helpers
