#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"
#include "losses.hpp"
#include "pngio.hpp"

namespace ihqgan::metrics {

/// 10 log10(R^2 / MSE); identical images report +infinity (the CSV writer
/// emits the sentinel string "inf").
inline double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 1.0) {
    double mse = 0.0;
    for (int i = 0; i < kImagePixels; ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        mse += d * d;
    }
    mse /= kImagePixels;
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

/// Shared implementation with the training loss.
inline double ssim_metric(const ImageTensor& a, const ImageTensor& b) { return losses::ssim(a, b); }

/// Pixel-space PCA embedding standing in for a pretrained feature network;
/// Frechet values are therefore internally comparable only, never against
/// published Inception-based numbers.
struct PcaEmbedding {
    Eigen::VectorXd mean;          // 1024
    Eigen::MatrixXd components;    // dim x 1024, orthonormal rows

    int dim() const { return static_cast<int>(components.rows()); }

    static PcaEmbedding fit(std::span<const ImageTensor> samples, int max_dim = 64) {
        const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
        if (n < 2) throw std::invalid_argument("metrics: PCA needs at least 2 samples");
        Eigen::MatrixXd x(n, kImagePixels);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < kImagePixels; ++j) x(i, j) = samples[i].pixels[j];
        }
        PcaEmbedding emb;
        emb.mean = x.colwise().mean();
        x.rowwise() -= emb.mean.transpose();

        // Gram trick: n << 1024, so eigendecompose the n x n matrix
        const Eigen::MatrixXd gram = x * x.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        if (eig.info() != Eigen::Success) throw std::runtime_error("metrics: PCA eigendecomposition failed");

        const double tol = std::max(1e-10, 1e-12 * eig.eigenvalues().maxCoeff());
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = n - 1; i >= 0 && static_cast<int>(keep.size()) < max_dim; --i) {
            if (eig.eigenvalues()(i) > tol) keep.push_back(i);   // descending order
        }
        if (keep.empty()) {
            // all samples identical: a single arbitrary direction keeps the
            // summaries well-defined
            emb.components = Eigen::MatrixXd::Zero(1, kImagePixels);
            emb.components(0, 0) = 1.0;
            return emb;
        }
        emb.components.resize(static_cast<Eigen::Index>(keep.size()), kImagePixels);
        for (std::size_t r = 0; r < keep.size(); ++r) {
            const double lambda = eig.eigenvalues()(keep[r]);
            emb.components.row(static_cast<Eigen::Index>(r)) =
                (x.transpose() * eig.eigenvectors().col(keep[r])).transpose() / std::sqrt(lambda);
        }
        return emb;
    }

    Eigen::VectorXd project(const ImageTensor& img) const {
        Eigen::VectorXd v(kImagePixels);
        for (int j = 0; j < kImagePixels; ++j) v(j) = img.pixels[j];
        return components * (v - mean);
    }
};

/// Mean and (regularized) covariance of an embedded sample set.
struct GaussianSummary {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;

    static GaussianSummary fit(const std::vector<Eigen::VectorXd>& embedded, double eps = 1e-6) {
        const Eigen::Index n = static_cast<Eigen::Index>(embedded.size());
        if (n < 2) throw std::invalid_argument("metrics: Gaussian summary needs at least 2 samples");
        const Eigen::Index d = embedded.front().size();
        GaussianSummary s;
        s.mu = Eigen::VectorXd::Zero(d);
        for (const auto& e : embedded) s.mu += e;
        s.mu /= static_cast<double>(n);
        s.sigma = Eigen::MatrixXd::Zero(d, d);
        for (const auto& e : embedded) {
            const Eigen::VectorXd c = e - s.mu;
            s.sigma += c * c.transpose();
        }
        s.sigma /= static_cast<double>(n - 1);
        s.sigma += eps * Eigen::MatrixXd::Identity(d, d);
        return s;
    }
};

namespace detail {

inline Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace detail

/// ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}), the cross term
/// computed through the symmetric form (S_r^{1/2} S_g S_r^{1/2})^{1/2};
/// negative round-off is clipped at zero.
inline double frechet_gaussian(const GaussianSummary& r, const GaussianSummary& g) {
    const Eigen::MatrixXd sr = detail::sym_sqrt(r.sigma);
    const Eigen::MatrixXd inner = detail::sym_sqrt(sr * g.sigma * sr);
    const double fd = (r.mu - g.mu).squaredNorm() + r.sigma.trace() + g.sigma.trace() - 2.0 * inner.trace();
    return std::max(0.0, fd);
}

inline double frechet_distance(std::span<const ImageTensor> samples_a,
                               std::span<const ImageTensor> samples_b, const PcaEmbedding& embedding,
                               double eps = 1e-6) {
    if (samples_a.size() < 2 || samples_b.size() < 2) {
        throw std::invalid_argument("metrics: frechet_distance needs at least 2 samples per set");
    }
    std::vector<Eigen::VectorXd> ea, eb;
    ea.reserve(samples_a.size());
    eb.reserve(samples_b.size());
    for (const ImageTensor& img : samples_a) ea.push_back(embedding.project(img));
    for (const ImageTensor& img : samples_b) eb.push_back(embedding.project(img));
    return frechet_gaussian(GaussianSummary::fit(ea, eps), GaussianSummary::fit(eb, eps));
}

/// Convenience overload fitting the embedding on the union of both sets.
inline double frechet_distance(std::span<const ImageTensor> samples_a,
                               std::span<const ImageTensor> samples_b) {
    if (samples_a.size() < 2 || samples_b.size() < 2) {
        throw std::invalid_argument("metrics: frechet_distance needs at least 2 samples per set");
    }
    std::vector<ImageTensor> combined(samples_a.begin(), samples_a.end());
    combined.insert(combined.end(), samples_b.begin(), samples_b.end());
    return frechet_distance(samples_a, samples_b, PcaEmbedding::fit(combined));
}

struct ReportRow {
    std::string task;
    int label = 0;
    std::string direction;   // "A_to_B" or "B_to_A"
    double fd = 0.0;
    double ssim = 0.0;
    double psnr = 0.0;
};

namespace detail {

inline std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace detail

/// CSV with the fixed header task,label,direction,FD,SSIM,PSNR and rows in
/// canonical (task, label, direction) order.
inline std::string emit_report(std::span<const ReportRow> rows) {
    std::vector<const ReportRow*> sorted;
    for (const ReportRow& r : rows) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](const ReportRow* a, const ReportRow* b) {
        return std::tie(a->task, a->label, a->direction) < std::tie(b->task, b->label, b->direction);
    });
    std::ostringstream out;
    out << "task,label,direction,FD,SSIM,PSNR\n";
    for (const ReportRow* r : sorted) {
        out << r->task << "," << r->label << "," << r->direction << "," << detail::format_metric(r->fd)
            << "," << detail::format_metric(r->ssim) << "," << detail::format_metric(r->psnr) << "\n";
    }
    return out.str();
}

/// Tiles labeled rows of 32x32 images into one grayscale PNG (row 0 on top).
inline void write_image_grid(const std::filesystem::path& path,
                             const std::vector<std::vector<ImageTensor>>& rows) {
    if (rows.empty() || rows.front().empty()) {
        throw std::invalid_argument("metrics: empty image grid");
    }
    const std::size_t cols = rows.front().size();
    for (const auto& row : rows) {
        if (row.size() != cols) throw std::invalid_argument("metrics: ragged image grid");
    }
    const int width = static_cast<int>(cols) * kImageSide;
    const int height = static_cast<int>(rows.size()) * kImageSide;
    std::vector<std::uint8_t> canvas(static_cast<std::size_t>(width) * height, 0);
    for (std::size_t gr = 0; gr < rows.size(); ++gr) {
        for (std::size_t gc = 0; gc < cols; ++gc) {
            const ImageTensor& img = rows[gr][gc];
            for (int r = 0; r < kImageSide; ++r) {
                for (int c = 0; c < kImageSide; ++c) {
                    const double v = std::clamp(img.at(r, c), 0.0, 1.0);
                    canvas[(gr * kImageSide + r) * static_cast<std::size_t>(width) + gc * kImageSide + c] =
                        static_cast<std::uint8_t>(std::lround(v * 255.0));
                }
            }
        }
    }
    pngio::write_file(path, pngio::encode_gray8(canvas, width, height));
}

} // namespace ihqgan::metrics
