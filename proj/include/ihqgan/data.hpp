#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "pngio.hpp"
#include "rng.hpp"

namespace ihqgan::data {

inline constexpr int kMnistSide = 28;
inline constexpr int kTrainPerDomain = 1000;
inline constexpr int kTestPerDomain = 250;
inline constexpr int kImagesPerDomain = kTrainPerDomain + kTestPerDomain;

/// Raw MNIST-style archive held as bytes; pixel() applies the /255 scaling.
struct Mnist {
    int rows = kMnistSide;
    int cols = kMnistSide;
    std::vector<std::uint8_t> pixels;   // count * rows * cols
    std::vector<std::uint8_t> labels;

    std::size_t count() const { return labels.size(); }

    double pixel(std::size_t index, int r, int c) const {
        return pixels[(index * rows + r) * cols + c] / 255.0;
    }
};

namespace detail {

inline std::uint32_t read_u32_be(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
    if (offset + 4 > bytes.size()) throw FormatError("data: truncated IDX header", offset);
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("data: cannot open " + path.string());
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw DataError("data: short read from " + path.string());
    return bytes;
}

} // namespace detail

/// Parses the standard IDX pair (image magic 0x00000803, label magic
/// 0x00000801); byte counts must match the declared headers exactly.
inline Mnist load_mnist(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    const auto img_bytes = detail::read_all(images_path);
    if (detail::read_u32_be(img_bytes, 0) != 0x00000803u) {
        throw FormatError("data: bad image magic in " + images_path.string(), 0);
    }
    const std::uint32_t count = detail::read_u32_be(img_bytes, 4);
    const std::uint32_t rows = detail::read_u32_be(img_bytes, 8);
    const std::uint32_t cols = detail::read_u32_be(img_bytes, 12);
    const std::size_t expect = 16 + static_cast<std::size_t>(count) * rows * cols;
    if (img_bytes.size() != expect) {
        throw FormatError("data: image payload does not match declared count in " + images_path.string(),
                          img_bytes.size());
    }

    const auto lbl_bytes = detail::read_all(labels_path);
    if (detail::read_u32_be(lbl_bytes, 0) != 0x00000801u) {
        throw FormatError("data: bad label magic in " + labels_path.string(), 0);
    }
    const std::uint32_t lbl_count = detail::read_u32_be(lbl_bytes, 4);
    if (lbl_bytes.size() != 8 + static_cast<std::size_t>(lbl_count)) {
        throw FormatError("data: label payload does not match declared count in " + labels_path.string(),
                          lbl_bytes.size());
    }
    if (lbl_count != count) {
        throw DataError("data: image/label counts disagree (" + std::to_string(count) + " vs " +
                        std::to_string(lbl_count) + ")");
    }

    Mnist m;
    m.rows = static_cast<int>(rows);
    m.cols = static_cast<int>(cols);
    m.pixels.assign(img_bytes.begin() + 16, img_bytes.end());
    m.labels.assign(lbl_bytes.begin() + 8, lbl_bytes.end());
    return m;
}

/// Loads the standard training pair from a directory.
inline Mnist load_mnist_dir(const std::filesystem::path& dir) {
    return load_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
}

/// Centers a 28x28 image in a 32x32 frame with a 2-pixel zero border.
inline ImageTensor pad_to_32(const Mnist& mnist, std::size_t index) {
    if (mnist.rows != kMnistSide || mnist.cols != kMnistSide) {
        throw std::invalid_argument("data: pad_to_32 expects 28x28 input");
    }
    ImageTensor out{};
    for (int r = 0; r < kMnistSide; ++r) {
        for (int c = 0; c < kMnistSide; ++c) {
            out.at(r + 2, c + 2) = mnist.pixel(index, r, c);
        }
    }
    return out;
}

inline ImageTensor pad_to_32(std::span<const double> img28) {
    if (img28.size() != kMnistSide * kMnistSide) {
        throw std::invalid_argument("data: pad_to_32 expects 28x28 input");
    }
    ImageTensor out{};
    for (int r = 0; r < kMnistSide; ++r) {
        for (int c = 0; c < kMnistSide; ++c) {
            out.at(r + 2, c + 2) = img28[static_cast<std::size_t>(r) * kMnistSide + c];
        }
    }
    return out;
}

/// Inverse of pad_to_32.
inline std::array<double, kMnistSide * kMnistSide> crop_to_28(const ImageTensor& img) {
    std::array<double, kMnistSide * kMnistSide> out{};
    for (int r = 0; r < kMnistSide; ++r)
        for (int c = 0; c < kMnistSide; ++c) out[static_cast<std::size_t>(r) * kMnistSide + c] = img.at(r + 2, c + 2);
    return out;
}

struct CannyParams {
    double sigma = 1.0;        // Gaussian pre-smooth
    double low_pct = 70.0;     // hysteresis thresholds as percentiles of the
    double high_pct = 90.0;    // nonzero gradient magnitudes per image
};

namespace detail {

inline std::array<double, kImagePixels> gaussian_smooth(const ImageTensor& img, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    // separable convolution with zero padding
    std::array<double, kImagePixels> tmp{}, out{};
    for (int r = 0; r < kImageSide; ++r) {
        for (int c = 0; c < kImageSide; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int cc = c + i;
                if (cc >= 0 && cc < kImageSide) acc += kernel[i + radius] * img.at(r, cc);
            }
            tmp[static_cast<std::size_t>(r) * kImageSide + c] = acc;
        }
    }
    for (int r = 0; r < kImageSide; ++r) {
        for (int c = 0; c < kImageSide; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int rr = r + i;
                if (rr >= 0 && rr < kImageSide) acc += kernel[i + radius] * tmp[static_cast<std::size_t>(rr) * kImageSide + c];
            }
            out[static_cast<std::size_t>(r) * kImageSide + c] = acc;
        }
    }
    return out;
}

} // namespace detail

/// Canny edge map in {0,1}: Gaussian smooth, Sobel gradients, non-maximum
/// suppression, then hysteresis with per-image percentile thresholds taken
/// over the nonzero gradient magnitudes (an absolute percentile on a mostly
/// black image would sit at zero and flood the weak set).
inline ImageTensor make_edges(const ImageTensor& img, const CannyParams& params = {}) {
    const auto smooth = detail::gaussian_smooth(img, params.sigma);
    auto at = [&](int r, int c) -> double {
        if (r < 0 || r >= kImageSide || c < 0 || c >= kImageSide) return 0.0;
        return smooth[static_cast<std::size_t>(r) * kImageSide + c];
    };

    std::array<double, kImagePixels> mag{}, dir{};
    for (int r = 0; r < kImageSide; ++r) {
        for (int c = 0; c < kImageSide; ++c) {
            const double gx = -at(r - 1, c - 1) + at(r - 1, c + 1) - 2 * at(r, c - 1) + 2 * at(r, c + 1) -
                              at(r + 1, c - 1) + at(r + 1, c + 1);
            const double gy = -at(r - 1, c - 1) - 2 * at(r - 1, c) - at(r - 1, c + 1) + at(r + 1, c - 1) +
                              2 * at(r + 1, c) + at(r + 1, c + 1);
            mag[static_cast<std::size_t>(r) * kImageSide + c] = std::hypot(gx, gy);
            dir[static_cast<std::size_t>(r) * kImageSide + c] = std::atan2(gy, gx);
        }
    }

    // non-maximum suppression along the quantized gradient direction
    std::array<bool, kImagePixels> ridge{};
    auto mag_at = [&](int r, int c) -> double {
        if (r < 0 || r >= kImageSide || c < 0 || c >= kImageSide) return 0.0;
        return mag[static_cast<std::size_t>(r) * kImageSide + c];
    };
    constexpr double pi = 3.141592653589793238462643383279502884;
    for (int r = 0; r < kImageSide; ++r) {
        for (int c = 0; c < kImageSide; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * kImageSide + c;
            if (mag[i] <= 0.0) continue;
            double d = dir[i];
            if (d < 0) d += pi;   // fold opposite directions together
            double n1, n2;
            if (d < pi / 8 || d >= 7 * pi / 8) {
                n1 = mag_at(r, c - 1);
                n2 = mag_at(r, c + 1);
            } else if (d < 3 * pi / 8) {
                n1 = mag_at(r - 1, c - 1);
                n2 = mag_at(r + 1, c + 1);
            } else if (d < 5 * pi / 8) {
                n1 = mag_at(r - 1, c);
                n2 = mag_at(r + 1, c);
            } else {
                n1 = mag_at(r - 1, c + 1);
                n2 = mag_at(r + 1, c - 1);
            }
            // strictly greater on one side thins two-pixel plateaus
            ridge[i] = mag[i] >= n1 && mag[i] > n2;
        }
    }

    std::vector<double> nonzero;
    for (double m : mag)
        if (m > 1e-12) nonzero.push_back(m);
    ImageTensor out{};
    if (nonzero.size() < 2) return out;
    std::sort(nonzero.begin(), nonzero.end());
    auto percentile = [&](double p) {
        const std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * nonzero.size()));
        return nonzero[std::min(nonzero.size() - 1, std::max<std::size_t>(rank, 1) - 1)];
    };
    const double t_low = percentile(params.low_pct);
    const double t_high = percentile(params.high_pct);

    // hysteresis: grow strong seeds through weak ridge pixels, 8-connected
    std::array<std::uint8_t, kImagePixels> state{};   // 0 off, 1 weak, 2 edge
    std::deque<std::pair<int, int>> frontier;
    for (int r = 0; r < kImageSide; ++r) {
        for (int c = 0; c < kImageSide; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * kImageSide + c;
            if (!ridge[i] || mag[i] < t_low) continue;
            if (mag[i] >= t_high) {
                state[i] = 2;
                frontier.emplace_back(r, c);
            } else {
                state[i] = 1;
            }
        }
    }
    while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop_front();
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= kImageSide || cc < 0 || cc >= kImageSide) continue;
                const std::size_t j = static_cast<std::size_t>(rr) * kImageSide + cc;
                if (state[j] == 1) {
                    state[j] = 2;
                    frontier.emplace_back(rr, cc);
                }
            }
        }
    }
    for (int i = 0; i < kImagePixels; ++i) out.pixels[i] = state[i] == 2 ? 1.0 : 0.0;
    return out;
}

/// Morphological dilation with a 2x2 structuring element anchored at its
/// top-left cell: out(r,c) = max of in over [r-1..r] x [c-1..c], so a lone
/// pixel grows into the 2x2 block extending down-right from it.
inline ImageTensor make_bold(const ImageTensor& img) {
    ImageTensor out{};
    for (int r = 0; r < kImageSide; ++r) {
        for (int c = 0; c < kImageSide; ++c) {
            double m = 0.0;
            for (int dr = -1; dr <= 0; ++dr) {
                for (int dc = -1; dc <= 0; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr >= 0 && cc >= 0) m = std::max(m, img.at(rr, cc));
                }
            }
            out.at(r, c) = m;
        }
    }
    return out;
}

/// Adds seeded per-pixel Gaussian noise and clamps to [0,1].
inline ImageTensor make_noisy(const ImageTensor& img, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    ImageTensor out;
    for (int i = 0; i < kImagePixels; ++i) {
        out.pixels[i] = std::clamp(img.pixels[i] + sigma * rng.normal(), 0.0, 1.0);
    }
    return out;
}

enum class Task { EdgeDetection, FontStyleTransfer, ImageDenoising };

inline const char* task_name(Task t) {
    switch (t) {
        case Task::EdgeDetection: return "edge_detection";
        case Task::FontStyleTransfer: return "font_style_transfer";
        case Task::ImageDenoising: return "image_denoising";
    }
    return "?";
}

inline Task parse_task(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name == "edge_detection" || name == "edge" || name == "edges") return Task::EdgeDetection;
    if (name == "font_style_transfer" || name == "font" || name == "bold") return Task::FontStyleTransfer;
    if (name == "image_denoising" || name == "denoise" || name == "denoising") return Task::ImageDenoising;
    throw std::invalid_argument("data: unknown task '" + name +
                                "' (expected edge_detection, font_style_transfer, or image_denoising)");
}

inline std::vector<int> valid_labels(Task t) {
    if (t == Task::ImageDenoising) return {0, 1, 7};
    return {0, 1, 2, 3, 4, 5, 6, 7};
}

struct DataParams {
    CannyParams canny;
    double noise_sigma = 0.25;
};

/// One unpaired translation sub-dataset. Domain A holds the task-transformed
/// images (edges / bold / noisy), domain B the clean padded digits; G maps
/// A -> B. The train splits are independently shuffled so no pairing
/// survives; the test *_ref sets carry the aligned opposite-domain ground
/// truth used only for evaluation.
struct SubDataset {
    Task task = Task::EdgeDetection;
    int label = 0;
    std::uint64_t seed = 0;
    std::vector<ImageTensor> train_a, train_b;
    std::vector<ImageTensor> test_a, test_b;
    std::vector<ImageTensor> test_a_ref, test_b_ref;
};

inline SubDataset build_subdataset(const Mnist& mnist, Task task, int label, std::uint64_t seed,
                                   const DataParams& params = {}) {
    const auto labels = valid_labels(task);
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
        std::string valid;
        for (int l : labels) valid += (valid.empty() ? "" : ", ") + std::to_string(l);
        throw std::invalid_argument("data: label " + std::to_string(label) + " is not valid for task " +
                                    task_name(task) + " (valid: " + valid + ")");
    }

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < mnist.count(); ++i) {
        if (mnist.labels[i] == label) pool.push_back(i);
    }
    if (pool.size() < kImagesPerDomain) {
        throw DataError("data: only " + std::to_string(pool.size()) + " images of label " +
                        std::to_string(label) + " available, need " + std::to_string(kImagesPerDomain));
    }

    Rng rng(seed);
    rng.shuffle(pool);
    pool.resize(kImagesPerDomain);

    std::vector<ImageTensor> clean(kImagesPerDomain), transformed(kImagesPerDomain);
    for (int i = 0; i < kImagesPerDomain; ++i) {
        clean[i] = pad_to_32(mnist, pool[i]);
        switch (task) {
            case Task::EdgeDetection: transformed[i] = make_edges(clean[i], params.canny); break;
            case Task::FontStyleTransfer: transformed[i] = make_bold(clean[i]); break;
            case Task::ImageDenoising:
                transformed[i] = make_noisy(clean[i], params.noise_sigma, Rng::derive_seed(seed, i));
                break;
        }
    }

    // independent shuffles break source pairing in the train split
    std::vector<int> perm_a(kTrainPerDomain), perm_b(kTrainPerDomain);
    std::iota(perm_a.begin(), perm_a.end(), 0);
    std::iota(perm_b.begin(), perm_b.end(), 0);
    rng.shuffle(perm_a);
    rng.shuffle(perm_b);

    std::vector<int> test_perm_a(kTestPerDomain), test_perm_b(kTestPerDomain);
    std::iota(test_perm_a.begin(), test_perm_a.end(), kTrainPerDomain);
    std::iota(test_perm_b.begin(), test_perm_b.end(), kTrainPerDomain);
    rng.shuffle(test_perm_a);
    rng.shuffle(test_perm_b);

    SubDataset ds;
    ds.task = task;
    ds.label = label;
    ds.seed = seed;
    for (int i : perm_a) ds.train_a.push_back(transformed[i]);
    for (int i : perm_b) ds.train_b.push_back(clean[i]);
    for (int i : test_perm_a) {
        ds.test_a.push_back(transformed[i]);
        ds.test_a_ref.push_back(clean[i]);
    }
    for (int i : test_perm_b) {
        ds.test_b.push_back(clean[i]);
        ds.test_b_ref.push_back(transformed[i]);
    }
    return ds;
}

namespace detail {

inline std::vector<std::uint8_t> quantize(const ImageTensor& img) {
    std::vector<std::uint8_t> bytes(kImagePixels);
    for (int i = 0; i < kImagePixels; ++i) {
        bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
    }
    return bytes;
}

inline ImageTensor dequantize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() != kImagePixels) throw DataError("data: PNG is not 32x32");
    ImageTensor img;
    for (int i = 0; i < kImagePixels; ++i) img.pixels[i] = bytes[i] / 255.0;
    return img;
}

inline std::uint32_t pixel_crc(const std::vector<std::uint8_t>& bytes) {
    return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

} // namespace detail

/// Writes PNGs plus a manifest whose per-image CRCs are taken over the raw
/// quantized pixels, so identical builds are byte-identical regardless of
/// how the PNG encoder evolves.
inline void write_dataset(const SubDataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const std::pair<const char*, const std::vector<ImageTensor>*> groups[] = {
        {"trainA", &ds.train_a},     {"trainB", &ds.train_b},       {"testA", &ds.test_a},
        {"testB", &ds.test_b},       {"testA_ref", &ds.test_a_ref}, {"testB_ref", &ds.test_b_ref},
    };
    std::ostringstream manifest;
    manifest << "format=ihqgan-dataset-v1\n";
    manifest << "task=" << task_name(ds.task) << "\n";
    manifest << "label=" << ds.label << "\n";
    manifest << "seed=" << ds.seed << "\n";
    manifest << "train_per_domain=" << ds.train_a.size() << "\n";
    manifest << "test_per_domain=" << ds.test_a.size() << "\n";

    for (const auto& [name, images] : groups) {
        fs::create_directories(dir / name);
        for (std::size_t i = 0; i < images->size(); ++i) {
            const auto bytes = detail::quantize((*images)[i]);
            char file[16];
            std::snprintf(file, sizeof(file), "%04zu.png", i);
            pngio::write_file(dir / name / file, pngio::encode_gray8(bytes, kImageSide, kImageSide));
            char crc[16];
            std::snprintf(crc, sizeof(crc), "%08x", detail::pixel_crc(bytes));
            manifest << "crc32 " << name << "/" << file << " " << crc << "\n";
        }
    }
    std::ofstream out(dir / "manifest.txt", std::ios::trunc);
    if (!out) throw DataError("data: cannot write manifest in " + dir.string());
    out << manifest.str();
}

inline SubDataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(dir / "manifest.txt");
    if (!in) throw DataError("data: no manifest.txt in " + dir.string());

    std::map<std::string, std::string> kv;
    std::vector<std::pair<std::string, std::uint32_t>> crcs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("crc32 ", 0) == 0) {
            std::istringstream ls(line.substr(6));
            std::string rel, hex;
            ls >> rel >> hex;
            crcs.emplace_back(rel, static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("data: malformed manifest line '" + line + "'", 0);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (kv["format"] != "ihqgan-dataset-v1") throw DataError("data: unknown dataset format in " + dir.string());

    SubDataset ds;
    ds.task = parse_task(kv.at("task"));
    ds.label = std::stoi(kv.at("label"));
    ds.seed = std::stoull(kv.at("seed"));

    auto load_group = [&](const char* name, std::size_t expect) {
        std::vector<ImageTensor> images;
        for (std::size_t i = 0; i < expect; ++i) {
            char file[16];
            std::snprintf(file, sizeof(file), "%04zu.png", i);
            const auto png = pngio::decode_gray8(pngio::read_file(dir / name / file));
            if (png.width != kImageSide || png.height != kImageSide) {
                throw DataError("data: " + (dir / name / file).string() + " is not 32x32");
            }
            images.push_back(detail::dequantize(png.pixels));
        }
        return images;
    };
    const std::size_t n_train = std::stoul(kv.at("train_per_domain"));
    const std::size_t n_test = std::stoul(kv.at("test_per_domain"));
    ds.train_a = load_group("trainA", n_train);
    ds.train_b = load_group("trainB", n_train);
    ds.test_a = load_group("testA", n_test);
    ds.test_b = load_group("testB", n_test);
    ds.test_a_ref = load_group("testA_ref", n_test);
    ds.test_b_ref = load_group("testB_ref", n_test);

    for (const auto& [rel, crc] : crcs) {
        const auto slash = rel.find('/');
        const std::string group = rel.substr(0, slash);
        const std::size_t idx = std::stoul(rel.substr(slash + 1));
        const std::vector<ImageTensor>* images = group == "trainA"      ? &ds.train_a
                                                 : group == "trainB"    ? &ds.train_b
                                                 : group == "testA"     ? &ds.test_a
                                                 : group == "testB"     ? &ds.test_b
                                                 : group == "testA_ref" ? &ds.test_a_ref
                                                                        : &ds.test_b_ref;
        if (idx >= images->size() || detail::pixel_crc(detail::quantize((*images)[idx])) != crc) {
            throw FormatError("data: CRC mismatch for " + rel + " in " + dir.string(), idx);
        }
    }
    return ds;
}

} // namespace ihqgan::data
