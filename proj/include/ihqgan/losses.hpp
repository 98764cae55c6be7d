#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "nets.hpp"

namespace ihqgan::losses {

/// Gradient-penalty coefficient and the three generator-loss weights.
struct LossWeights {
    double lambda = 10.0;
    double eps = 10.0;
    double eta = 20.0;
    double rho = 300.0;

    void validate() const {
        if (lambda < 0 || eps < 0 || eta < 0 || rho < 0) {
            throw std::invalid_argument("losses: loss weights must be non-negative");
        }
    }
};

/// Sign convention for the generator's adversarial term. Standard uses the
/// WGAN-GP convention -E[D(fake)]. Literal reproduces the printed training
/// algorithm, whose generator line carries the critic's own objective; its
/// extra terms are constant in the generator parameters (the penalty's
/// dependence dies through the piecewise-linear critic's zero input-Hessian),
/// so only the sign of the adversarial gradient and the reported loss value
/// differ.
enum class AdvSign { Standard, Literal };

// SSIM regularization constants for dynamic range L = 1.
inline constexpr double kSsimC1 = 1e-4;   // (0.01 L)^2
inline constexpr double kSsimC2 = 9e-4;   // (0.03 L)^2

namespace detail {

struct SsimStats {
    double mu_a = 0, mu_b = 0, var_a = 0, var_b = 0, cov = 0;
};

inline SsimStats ssim_stats(const ImageTensor& a, const ImageTensor& b) {
    SsimStats s;
    constexpr double inv_n = 1.0 / kImagePixels;
    for (int i = 0; i < kImagePixels; ++i) {
        s.mu_a += a.pixels[i];
        s.mu_b += b.pixels[i];
    }
    s.mu_a *= inv_n;
    s.mu_b *= inv_n;
    for (int i = 0; i < kImagePixels; ++i) {
        const double da = a.pixels[i] - s.mu_a;
        const double db = b.pixels[i] - s.mu_b;
        s.var_a += da * da;
        s.var_b += db * db;
        s.cov += da * db;
    }
    s.var_a *= inv_n;
    s.var_b *= inv_n;
    s.cov *= inv_n;
    return s;
}

} // namespace detail

/// Global-statistics SSIM: the whole-image means, variances, and covariance
/// (population convention, 1/n) plugged into the two-factor formula.
inline double ssim(const ImageTensor& a, const ImageTensor& b) {
    const auto s = detail::ssim_stats(a, b);
    const double a1 = 2.0 * s.mu_a * s.mu_b + kSsimC1;
    const double a2 = 2.0 * s.cov + kSsimC2;
    const double b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + kSsimC1;
    const double b2 = s.var_a + s.var_b + kSsimC2;
    return (a1 * a2) / (b1 * b2);
}

/// dSSIM(a, b)/da, closed form of the quotient rule over the four factors.
inline ImageTensor ssim_grad_a(const ImageTensor& a, const ImageTensor& b) {
    const auto s = detail::ssim_stats(a, b);
    const double a1 = 2.0 * s.mu_a * s.mu_b + kSsimC1;
    const double a2 = 2.0 * s.cov + kSsimC2;
    const double b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + kSsimC1;
    const double b2 = s.var_a + s.var_b + kSsimC2;
    const double S = (a1 * a2) / (b1 * b2);
    constexpr double inv_n = 1.0 / kImagePixels;

    ImageTensor grad;
    for (int i = 0; i < kImagePixels; ++i) {
        const double d_a1 = 2.0 * s.mu_b * inv_n;
        const double d_a2 = 2.0 * (b.pixels[i] - s.mu_b) * inv_n;
        const double d_b1 = 2.0 * s.mu_a * inv_n;
        const double d_b2 = 2.0 * (a.pixels[i] - s.mu_a) * inv_n;
        grad.pixels[i] = (d_a1 * a2 + a1 * d_a2) / (b1 * b2) - S * (d_b1 / b1 + d_b2 / b2);
    }
    return grad;
}

/// Image-quality-aware loss 1 - SSIM; zero iff structurally identical.
inline double iqa_loss(const ImageTensor& reconstructed, const ImageTensor& source) {
    return 1.0 - ssim(reconstructed, source);
}

/// Per-image L1 distance (sum over pixels), averaged over the batch.
inline double cycle_l1(std::span<const ImageTensor> reconstructed, std::span<const ImageTensor> source) {
    if (reconstructed.size() != source.size() || reconstructed.empty()) {
        throw std::invalid_argument("losses: cycle_l1 batch size mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < reconstructed.size(); ++i) {
        for (int j = 0; j < kImagePixels; ++j) {
            total += std::abs(reconstructed[i].pixels[j] - source[i].pixels[j]);
        }
    }
    return total / static_cast<double>(reconstructed.size());
}

inline double cycle_l1_single(const ImageTensor& reconstructed, const ImageTensor& source) {
    const ImageTensor batch_r[] = {reconstructed};
    const ImageTensor batch_s[] = {source};
    return cycle_l1(batch_r, batch_s);
}

/// Subgradient of the per-image L1 with respect to the reconstruction.
inline ImageTensor cycle_l1_grad(const ImageTensor& reconstructed, const ImageTensor& source) {
    ImageTensor grad;
    for (int j = 0; j < kImagePixels; ++j) {
        const double d = reconstructed.pixels[j] - source.pixels[j];
        grad.pixels[j] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    return grad;
}

/// Generator adversarial term, -E[D(fake)] under the standard convention.
inline double gen_adversarial(const nets::DenseNet& critic, std::span<const ImageTensor> fake_batch) {
    if (fake_batch.empty()) throw std::invalid_argument("losses: empty fake batch");
    double acc = 0.0;
    for (const ImageTensor& img : fake_batch) acc += nets::critic_forward(critic, img.pixels);
    return -acc / static_cast<double>(fake_batch.size());
}

struct CriticLossResult {
    double value = 0.0;                 // mean D(fake) - D(real) + lambda (||grad D(interp)|| - 1)^2
    double penalty = 0.0;               // the lambda-weighted penalty component alone
    std::vector<double> param_grads;    // d value / d critic params, flat layout
};

/// WGAN-GP critic objective over a batch, with the exact parameter gradient
/// including the second-order flow through the penalty term. One uniform
/// draw xi per batch item interpolates real and fake.
inline CriticLossResult critic_loss(const nets::DenseNet& critic, std::span<const ImageTensor> real_batch,
                                    std::span<const ImageTensor> fake_batch, double lambda,
                                    std::span<const double> xis) {
    const std::size_t m = real_batch.size();
    if (m == 0 || fake_batch.size() != m || xis.size() != m) {
        throw std::invalid_argument("losses: critic_loss batch size mismatch");
    }
    CriticLossResult res;
    res.param_grads.assign(critic.param_count(), 0.0);
    const double inv_m = 1.0 / static_cast<double>(m);

    for (std::size_t i = 0; i < m; ++i) {
        const double xi = xis[i];
        if (xi < 0.0 || xi > 1.0) throw std::invalid_argument("losses: interpolation draw outside [0,1]");

        const double d_fake = nets::critic_forward(critic, fake_batch[i].pixels);
        const double d_real = nets::critic_forward(critic, real_batch[i].pixels);

        std::vector<double> interp(kImagePixels);
        for (int j = 0; j < kImagePixels; ++j) {
            interp[j] = xi * real_batch[i].pixels[j] + (1.0 - xi) * fake_batch[i].pixels[j];
        }
        const nets::PenaltyResult pen = nets::gradient_penalty(critic, interp);

        res.value += inv_m * (d_fake - d_real + lambda * pen.value);
        res.penalty += inv_m * lambda * pen.value;

        const double up_fake[] = {inv_m};
        const double up_real[] = {-inv_m};
        const auto g_fake = nets::backprop(critic, fake_batch[i].pixels, up_fake).param_grads;
        const auto g_real = nets::backprop(critic, real_batch[i].pixels, up_real).param_grads;
        for (std::size_t p = 0; p < res.param_grads.size(); ++p) {
            res.param_grads[p] += g_fake[p] + g_real[p] + inv_m * lambda * pen.param_grads[p];
        }
    }
    if (!std::isfinite(res.value)) {
        throw NumericalError("losses: critic loss is not finite");
    }
    return res;
}

/// L^G = eps * adversarial + eta * cycle + rho * IQA.
inline double total_gen_loss(double adv, double cyc, double iqa, const LossWeights& w) {
    return w.eps * adv + w.eta * cyc + w.rho * iqa;
}

} // namespace ihqgan::losses
