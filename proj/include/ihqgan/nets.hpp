#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace ihqgan::nets {

enum class Activation { None, LeakyRelu, Tanh };

struct Layer {
    int in = 0;
    int out = 0;
    Activation act = Activation::None;
    double slope = 0.0;          // LeakyReLU negative slope
    std::vector<double> w;       // out x in, row-major
    std::vector<double> b;       // out
};

/// Plain dense network with explicit forward/backward. Parameters flatten
/// layer by layer as W then b, which is also the checkpoint payload order.
struct DenseNet {
    std::vector<Layer> layers;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const Layer& l : layers) n += l.w.size() + l.b.size();
        return n;
    }

    std::vector<double> flatten_params() const {
        std::vector<double> flat;
        flat.reserve(param_count());
        for (const Layer& l : layers) {
            flat.insert(flat.end(), l.w.begin(), l.w.end());
            flat.insert(flat.end(), l.b.begin(), l.b.end());
        }
        return flat;
    }

    void unflatten_params(std::span<const double> flat) {
        if (flat.size() != param_count()) {
            throw std::invalid_argument("nets: flat parameter size mismatch");
        }
        std::size_t pos = 0;
        for (Layer& l : layers) {
            std::copy_n(flat.begin() + pos, l.w.size(), l.w.begin());
            pos += l.w.size();
            std::copy_n(flat.begin() + pos, l.b.size(), l.b.begin());
            pos += l.b.size();
        }
    }

    bool params_finite() const {
        for (const Layer& l : layers) {
            for (double x : l.w)
                if (!std::isfinite(x)) return false;
            for (double x : l.b)
                if (!std::isfinite(x)) return false;
        }
        return true;
    }
};

namespace detail {

inline double activate(double z, Activation act, double slope) {
    switch (act) {
        case Activation::None: return z;
        case Activation::LeakyRelu: return z >= 0.0 ? z : slope * z;
        case Activation::Tanh: return std::tanh(z);
    }
    return z;
}

inline double activate_grad(double z, Activation act, double slope) {
    switch (act) {
        case Activation::None: return 1.0;
        case Activation::LeakyRelu: return z >= 0.0 ? 1.0 : slope;
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

} // namespace detail

/// Builds a dense net with uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights
/// and zero biases; `acts` gives one activation per weight layer.
inline DenseNet make_dense(std::span<const int> widths, std::span<const Activation> acts,
                           std::span<const double> slopes, Rng& rng) {
    if (widths.size() < 2 || acts.size() != widths.size() - 1 || slopes.size() != acts.size()) {
        throw std::invalid_argument("nets: inconsistent layer specification");
    }
    DenseNet net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer;
        layer.in = widths[l];
        layer.out = widths[l + 1];
        layer.act = acts[l];
        layer.slope = slopes[l];
        const double bound = std::sqrt(1.0 / layer.in);
        layer.w.resize(static_cast<std::size_t>(layer.out) * layer.in);
        for (double& x : layer.w) x = rng.uniform(-bound, bound);
        layer.b.assign(layer.out, 0.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

/// Critic: 1024 -> 512 -> 256 -> 1, LeakyReLU(0.2) on the hidden layers and
/// a linear scalar output.
inline DenseNet make_critic(Rng& rng, int input_dim = 1024) {
    const int widths[] = {input_dim, 512, 256, 1};
    const Activation acts[] = {Activation::LeakyRelu, Activation::LeakyRelu, Activation::None};
    const double slopes[] = {0.2, 0.2, 0.0};
    return make_dense(widths, acts, slopes, rng);
}

/// ACNN: a six-layer 1024 -> 512 -> 256 -> 128 -> 64 -> 512 -> 1024
/// bottleneck; LeakyReLU(0.05) everywhere except a Tanh on the final layer.
/// acnn_forward maps the Tanh range onto [0,1].
inline DenseNet make_acnn(Rng& rng, int image_dim = 1024) {
    const int widths[] = {image_dim, 512, 256, 128, 64, 512, image_dim};
    const Activation acts[] = {Activation::LeakyRelu, Activation::LeakyRelu, Activation::LeakyRelu,
                               Activation::LeakyRelu, Activation::LeakyRelu, Activation::Tanh};
    const double slopes[] = {0.05, 0.05, 0.05, 0.05, 0.05, 0.0};
    return make_dense(widths, acts, slopes, rng);
}

struct ForwardCache {
    std::vector<std::vector<double>> inputs;   // a_0 .. a_{L-1}
    std::vector<std::vector<double>> pre;      // z_1 .. z_L
};

inline std::vector<double> forward(const DenseNet& net, std::span<const double> input,
                                   ForwardCache* cache = nullptr) {
    if (static_cast<int>(input.size()) != net.input_dim()) {
        throw std::invalid_argument("nets: input size " + std::to_string(input.size()) +
                                    " does not match net input dim " + std::to_string(net.input_dim()));
    }
    std::vector<double> a(input.begin(), input.end());
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    for (const Layer& l : net.layers) {
        if (cache) cache->inputs.push_back(a);
        std::vector<double> z(l.out);
        for (int i = 0; i < l.out; ++i) {
            const double* row = l.w.data() + static_cast<std::size_t>(i) * l.in;
            double acc = l.b[i];
            for (int j = 0; j < l.in; ++j) acc += row[j] * a[j];
            z[i] = acc;
        }
        if (cache) cache->pre.push_back(z);
        for (int i = 0; i < l.out; ++i) z[i] = detail::activate(z[i], l.act, l.slope);
        a = std::move(z);
    }
    return a;
}

inline double critic_forward(const DenseNet& net, std::span<const double> image) {
    if (net.output_dim() != 1) {
        throw std::invalid_argument("nets: critic must have a single output neuron");
    }
    return forward(net, image)[0];
}

struct BackpropResult {
    std::vector<double> param_grads;   // flatten_params layout
    std::vector<double> input_grad;
};

/// Exact reverse-mode pass: given dLoss/doutput, returns dLoss/dparams and
/// dLoss/dinput.
inline BackpropResult backprop(const DenseNet& net, std::span<const double> input,
                               std::span<const double> upstream) {
    if (static_cast<int>(upstream.size()) != net.output_dim()) {
        throw std::invalid_argument("nets: upstream size does not match net output dim");
    }
    ForwardCache cache;
    forward(net, input, &cache);

    BackpropResult res;
    res.param_grads.assign(net.param_count(), 0.0);

    // per-layer offsets into the flat gradient
    std::vector<std::size_t> offsets(net.layers.size());
    std::size_t pos = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        offsets[l] = pos;
        pos += net.layers[l].w.size() + net.layers[l].b.size();
    }

    std::vector<double> delta(upstream.begin(), upstream.end());
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& l = net.layers[li];
        const std::vector<double>& z = cache.pre[li];
        const std::vector<double>& a_in = cache.inputs[li];

        std::vector<double> masked(l.out);
        for (int i = 0; i < l.out; ++i) masked[i] = delta[i] * detail::activate_grad(z[i], l.act, l.slope);

        double* gw = res.param_grads.data() + offsets[li];
        double* gb = gw + l.w.size();
        for (int i = 0; i < l.out; ++i) {
            const double m = masked[i];
            double* grow = gw + static_cast<std::size_t>(i) * l.in;
            for (int j = 0; j < l.in; ++j) grow[j] += m * a_in[j];
            gb[i] += m;
        }

        std::vector<double> next(l.in, 0.0);
        for (int i = 0; i < l.out; ++i) {
            const double m = masked[i];
            const double* row = l.w.data() + static_cast<std::size_t>(i) * l.in;
            for (int j = 0; j < l.in; ++j) next[j] += m * row[j];
        }
        delta = std::move(next);
    }
    res.input_grad = std::move(delta);
    return res;
}

/// dScore/dpixel of a scalar-output net.
inline std::vector<double> critic_input_grad(const DenseNet& net, std::span<const double> image) {
    const double one[] = {1.0};
    return backprop(net, image, one).input_grad;
}

struct PenaltyResult {
    double value = 0.0;                 // (||grad_x D(x)||_2 - 1)^2
    std::vector<double> param_grads;    // d value / d params, flat layout
};

/// The WGAN-GP penalty term and its parameter gradient.
///
/// The input-gradient chain g = W_1^T D_1 W_2^T D_2 ... W_L^T (D_l the
/// activation-derivative masks) is differentiated holding the masks fixed;
/// for piecewise-linear activations the mask derivative is zero almost
/// everywhere, so the result is exact away from the kinks and the biases get
/// zero gradient. At g = 0 the norm subgradient 0 is used.
inline PenaltyResult gradient_penalty(const DenseNet& net, std::span<const double> x) {
    if (net.output_dim() != 1) {
        throw std::invalid_argument("nets: gradient penalty needs a scalar-output net");
    }
    ForwardCache cache;
    forward(net, x, &cache);
    const std::size_t L = net.layers.size();

    // input-gradient pass, keeping the masked deltas c_l
    std::vector<std::vector<double>> c(L);
    std::vector<double> delta{1.0};
    for (std::size_t li = L; li-- > 0;) {
        const Layer& l = net.layers[li];
        c[li].resize(l.out);
        for (int i = 0; i < l.out; ++i) {
            c[li][i] = delta[i] * detail::activate_grad(cache.pre[li][i], l.act, l.slope);
        }
        std::vector<double> next(l.in, 0.0);
        for (int i = 0; i < l.out; ++i) {
            const double m = c[li][i];
            const double* row = l.w.data() + static_cast<std::size_t>(i) * l.in;
            for (int j = 0; j < l.in; ++j) next[j] += m * row[j];
        }
        delta = std::move(next);
    }
    const std::vector<double>& g = delta;

    double norm_sq = 0.0;
    for (double v : g) norm_sq += v * v;
    const double norm = std::sqrt(norm_sq);

    PenaltyResult res;
    res.value = (norm - 1.0) * (norm - 1.0);
    res.param_grads.assign(net.param_count(), 0.0);
    if (norm == 0.0) return res;

    std::vector<double> e(g.size());
    const double scale = 2.0 * (norm - 1.0) / norm;
    for (std::size_t j = 0; j < g.size(); ++j) e[j] = scale * g[j];

    std::size_t offset = 0;
    for (std::size_t li = 0; li < L; ++li) {
        const Layer& l = net.layers[li];
        double* gw = res.param_grads.data() + offset;
        for (int i = 0; i < l.out; ++i) {
            const double ci = c[li][i];
            double* grow = gw + static_cast<std::size_t>(i) * l.in;
            for (int j = 0; j < l.in; ++j) grow[j] += ci * e[j];
        }
        offset += l.w.size() + l.b.size();   // bias gradient stays zero
        if (li + 1 < L) {
            std::vector<double> we(l.out, 0.0);
            for (int i = 0; i < l.out; ++i) {
                const double* row = l.w.data() + static_cast<std::size_t>(i) * l.in;
                double acc = 0.0;
                for (int j = 0; j < l.in; ++j) acc += row[j] * e[j];
                we[i] = acc * detail::activate_grad(cache.pre[li][i], l.act, l.slope);
            }
            e = std::move(we);
        }
    }
    return res;
}

/// ACNN output: Tanh activations affinely mapped onto [0,1].
inline std::vector<double> acnn_forward(const DenseNet& net, std::span<const double> image) {
    if (net.layers.empty() || net.layers.back().act != Activation::Tanh ||
        net.output_dim() != net.input_dim()) {
        throw std::invalid_argument("nets: ACNN must be Tanh-terminated with matching input/output dims");
    }
    std::vector<double> out = forward(net, image);
    for (double& v : out) v = 0.5 * (v + 1.0);
    return out;
}

/// Backward through the [0,1] range adapter and the net.
inline BackpropResult acnn_backward(const DenseNet& net, std::span<const double> image,
                                    std::span<const double> upstream) {
    std::vector<double> scaled(upstream.size());
    for (std::size_t i = 0; i < upstream.size(); ++i) scaled[i] = 0.5 * upstream[i];
    return backprop(net, image, scaled);
}

/// Adam with bias correction; the paper's settings are beta1 = 0, beta2 = 0.9.
struct AdamState {
    double lr = 0.0002;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<double> m;
    std::vector<double> v;

    static AdamState create(std::size_t n, double lr, double beta1 = 0.0, double beta2 = 0.9) {
        AdamState s;
        s.lr = lr;
        s.beta1 = beta1;
        s.beta2 = beta2;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        return s;
    }
};

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("nets: adam_step shape mismatch");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericalError("nets: non-finite gradient at flat index " + std::to_string(i) +
                                 " in adam_step (t=" + std::to_string(state.t + 1) + ")");
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

} // namespace ihqgan::nets
