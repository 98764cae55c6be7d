#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "image.hpp"
#include "qsim.hpp"
#include "rng.hpp"
#include "tensorio.hpp"

namespace ihqgan::qgen {

inline constexpr int kPatchCount = 32;   // one circuit per image row
inline constexpr int kPatchSize = 32;    // 2^5 pixels per patch
inline constexpr int kQubits = 5;
inline constexpr int kBlocks = 12;       // S repeated rotation+entanglement blocks
inline constexpr std::size_t kAnglesPerCircuit = kBlocks * kQubits * 3;          // 180
inline constexpr std::size_t kTotalAngles = kPatchCount * kAnglesPerCircuit;     // 5760

enum class Direction { Forward, Inverse };

/// How the inverse circuit is derived from the forward one. Exact swaps the
/// Rz roles and negates, giving Rot(a,b,c)^-1 = Rot(-c,-b,-a); NegateOnly
/// negates without the swap and exists as a corrupted-inversion test hook for
/// the check-inverse negative control.
enum class InverseMode { Exact, NegateOnly };

/// How measured probabilities become pixel values.
enum class DecodeRule { MaxNorm, SumNorm };

/// The shared angle tensor of shape (circuit k, block f, qubit q, angle j),
/// flat row-major. Both generator directions read this one storage.
struct GeneratorParams {
    std::vector<double> angles;

    static GeneratorParams zeros() {
        GeneratorParams p;
        p.angles.assign(kTotalAngles, 0.0);
        return p;
    }

    static GeneratorParams random(Rng& rng, double scale = 1.0) {
        GeneratorParams p;
        p.angles.resize(kTotalAngles);
        constexpr double pi = 3.141592653589793238462643383279502884;
        for (double& a : p.angles) a = scale * rng.uniform(-pi, pi);
        return p;
    }

    static std::size_t index(int circuit, int block, int qubit, int angle) {
        return ((static_cast<std::size_t>(circuit) * kBlocks + block) * kQubits + qubit) * 3 + angle;
    }

    std::span<const double> circuit_slice(int circuit) const {
        if (circuit < 0 || circuit >= kPatchCount) {
            throw std::out_of_range("qgen: circuit index out of range");
        }
        return std::span<const double>(angles).subspan(static_cast<std::size_t>(circuit) * kAnglesPerCircuit,
                                                       kAnglesPerCircuit);
    }

    void save(const std::filesystem::path& path) const {
        const std::uint64_t dims[] = {kPatchCount, kBlocks, kQubits, 3};
        tensorio::save_tensor(path, dims, angles);
    }

    static GeneratorParams load(const std::filesystem::path& path) {
        const std::uint64_t dims[] = {kPatchCount, kBlocks, kQubits, 3};
        GeneratorParams p;
        p.angles = tensorio::load_tensor_checked(path, dims);
        return p;
    }
};

namespace detail {

inline std::size_t slice_index(int block, int qubit, int angle) {
    return (static_cast<std::size_t>(block) * kQubits + qubit) * 3 + angle;
}

inline qsim::AngleRef inverse_angle_ref(int block, int qubit, int angle, InverseMode mode) {
    if (mode == InverseMode::Exact) {
        // inverse block f reads forward block S-1-f with the Rz roles swapped
        return qsim::AngleRef{slice_index(kBlocks - 1 - block, qubit, 2 - angle), true};
    }
    return qsim::AngleRef{slice_index(kBlocks - 1 - block, qubit, angle), true};
}

inline std::vector<qsim::GateSpec> build_forward_template() {
    std::vector<qsim::GateSpec> gates;
    gates.reserve(kBlocks * (kQubits + kQubits - 1));
    for (int f = 0; f < kBlocks; ++f) {
        for (int q = 0; q < kQubits; ++q) {
            gates.push_back(qsim::GateSpec::rot(q, {slice_index(f, q, 0), false},
                                                {slice_index(f, q, 1), false},
                                                {slice_index(f, q, 2), false}));
        }
        for (int q = 0; q + 1 < kQubits; ++q) {
            gates.push_back(qsim::GateSpec::cnot(q, q + 1));
        }
    }
    return gates;
}

inline std::vector<qsim::GateSpec> build_inverse_template(InverseMode mode) {
    std::vector<qsim::GateSpec> gates;
    gates.reserve(kBlocks * (kQubits + kQubits - 1));
    for (int f = 0; f < kBlocks; ++f) {
        for (int q = kQubits - 2; q >= 0; --q) {
            gates.push_back(qsim::GateSpec::cnot(q, q + 1));
        }
        for (int q = kQubits - 1; q >= 0; --q) {
            gates.push_back(qsim::GateSpec::rot(q, inverse_angle_ref(f, q, 0, mode),
                                                inverse_angle_ref(f, q, 1, mode),
                                                inverse_angle_ref(f, q, 2, mode)));
        }
    }
    return gates;
}

} // namespace detail

/// The gate list shared by all 32 circuits of one direction; angles resolve
/// through the per-circuit slice of GeneratorParams.
inline std::span<const qsim::GateSpec> circuit_template(Direction dir, InverseMode mode = InverseMode::Exact) {
    static const std::vector<qsim::GateSpec> forward = detail::build_forward_template();
    static const std::vector<qsim::GateSpec> inverse_exact = detail::build_inverse_template(InverseMode::Exact);
    static const std::vector<qsim::GateSpec> inverse_negate = detail::build_inverse_template(InverseMode::NegateOnly);
    if (dir == Direction::Forward) return forward;
    return mode == InverseMode::Exact ? inverse_exact : inverse_negate;
}

/// Read-only view of the angles the inverse circuit for `circuit` resolves:
/// block f, qubit q, angle j maps to -angles[circuit, S-1-f, q, 2-j]. No
/// parameter values are copied or stored.
struct InverseView {
    const GeneratorParams* params;
    int circuit;

    double angle(int block, int qubit, int j, InverseMode mode = InverseMode::Exact) const {
        const qsim::AngleRef ref = detail::inverse_angle_ref(block, qubit, j, mode);
        const double v = params->circuit_slice(circuit)[ref.index];
        return ref.negate ? -v : v;
    }
};

inline InverseView inverse_view(const GeneratorParams& params, int circuit) {
    if (circuit < 0 || circuit >= kPatchCount) throw std::out_of_range("qgen: circuit index out of range");
    return InverseView{&params, circuit};
}

using Patch = std::array<double, kPatchSize>;
using PatchSet = std::array<Patch, kPatchCount>;

/// Patch k is image row k; split followed by assemble is the identity.
inline PatchSet split_patches(const ImageTensor& image) {
    PatchSet patches;
    for (int k = 0; k < kPatchCount; ++k) {
        for (int j = 0; j < kPatchSize; ++j) patches[k][j] = image.at(k, j);
    }
    return patches;
}

inline ImageTensor assemble_patches(const PatchSet& patches) {
    ImageTensor image;
    for (int k = 0; k < kPatchCount; ++k) {
        for (int j = 0; j < kPatchSize; ++j) image.at(k, j) = patches[k][j];
    }
    return image;
}

/// probs -> pixels in [0,1]. MaxNorm divides by the peak probability, so the
/// brightest pixel is exactly 1; a degenerate all-zero input yields all
/// zeros. SumNorm scales by 2^N and clamps at 1.
inline Patch decode_probs_to_pixels(std::span<const double> probs, DecodeRule rule = DecodeRule::MaxNorm) {
    if (probs.size() != kPatchSize) {
        throw std::invalid_argument("qgen: decode expects 32 probabilities");
    }
    Patch out{};
    if (rule == DecodeRule::MaxNorm) {
        double m = 0.0;
        for (double p : probs) m = std::max(m, p);
        if (m == 0.0) return out;
        for (int j = 0; j < kPatchSize; ++j) out[j] = probs[j] / m;
    } else {
        for (int j = 0; j < kPatchSize; ++j) out[j] = std::min(1.0, probs[j] * kPatchSize);
    }
    return out;
}

/// Runs one patch circuit at the statevector level (no encode/decode); the
/// Forward and Inverse directions compose to the identity by construction.
inline qsim::StateVector evolve_patch(const GeneratorParams& params, int circuit, Direction dir,
                                      qsim::StateVector state, InverseMode mode = InverseMode::Exact) {
    return qsim::run_circuit(circuit_template(dir, mode), params.circuit_slice(circuit), std::move(state));
}

/// Full image translation: per row, encode -> evolve -> measure -> decode.
inline ImageTensor translate(const ImageTensor& image, const GeneratorParams& params, Direction dir,
                             DecodeRule rule = DecodeRule::MaxNorm) {
    const PatchSet patches = split_patches(image);
    PatchSet out;
    const auto gates = circuit_template(dir);
    for (int k = 0; k < kPatchCount; ++k) {
        qsim::StateVector psi = qsim::amplitude_encode(patches[k]);
        psi = qsim::run_circuit(gates, params.circuit_slice(k), std::move(psi));
        const std::vector<double> probs = qsim::measure_probs(psi);
        out[k] = decode_probs_to_pixels(probs, rule);
    }
    return assemble_patches(out);
}

struct GeneratorGrad {
    std::vector<double> angle_grads;            // same flat layout as GeneratorParams
    std::array<double, kImagePixels> input_grads{};  // dLoss/d(input pixel)
};

namespace detail {

// upstream on decoded pixels -> upstream on probabilities.
inline std::array<double, kPatchSize> decode_backward(std::span<const double> probs,
                                                      std::span<const double> upstream, DecodeRule rule) {
    std::array<double, kPatchSize> up{};
    if (rule == DecodeRule::MaxNorm) {
        double m = 0.0;
        int argmax = 0;
        for (int j = 0; j < kPatchSize; ++j) {
            if (probs[j] > m) {   // strict: ties resolve to the lowest index
                m = probs[j];
                argmax = j;
            }
        }
        if (m == 0.0) return up;
        double dot = 0.0;
        for (int j = 0; j < kPatchSize; ++j) {
            up[j] = upstream[j] / m;
            dot += upstream[j] * probs[j];
        }
        up[argmax] -= dot / (m * m);
    } else {
        for (int j = 0; j < kPatchSize; ++j) {
            const double scaled = probs[j] * kPatchSize;
            up[j] = scaled < 1.0 ? upstream[j] * kPatchSize : 0.0;
        }
    }
    return up;
}

} // namespace detail

/// Chains the adjoint circuit pass through decode and the encoder's
/// normalization; returns gradients in the shared-parameter layout plus the
/// gradient with respect to the input image. The decode max uses an argmax
/// subgradient (ties to the lowest index); an all-zero patch contributes
/// zero input gradient.
inline GeneratorGrad generator_grad(const ImageTensor& image, const GeneratorParams& params, Direction dir,
                                    const ImageTensor& upstream, DecodeRule rule = DecodeRule::MaxNorm) {
    GeneratorGrad out;
    out.angle_grads.assign(kTotalAngles, 0.0);
    const PatchSet patches = split_patches(image);
    const PatchSet up_patches = split_patches(upstream);
    const auto gates = circuit_template(dir);
    for (int k = 0; k < kPatchCount; ++k) {
        const std::span<const double> slice = params.circuit_slice(k);
        const qsim::StateVector psi_in = qsim::amplitude_encode(patches[k]);
        const qsim::StateVector psi_out = qsim::run_circuit(gates, slice, psi_in);
        const std::vector<double> probs = qsim::measure_probs(psi_out);
        const std::array<double, kPatchSize> up_probs = detail::decode_backward(probs, up_patches[k], rule);
        const qsim::CircuitBackward bwd = qsim::circuit_backward(gates, slice, psi_in, up_probs);

        double* grads_k = out.angle_grads.data() + static_cast<std::size_t>(k) * kAnglesPerCircuit;
        for (std::size_t i = 0; i < kAnglesPerCircuit; ++i) grads_k[i] += bwd.angle_grads[i];

        // back through psi_in = x / ||x||: dL/dx_j = 2 (Re l_j - (psi . Re l) psi_j) / ||x||
        double sumsq = 0.0;
        for (double p : patches[k]) sumsq += p * p;
        if (sumsq == 0.0) continue;
        const double inv_norm = 1.0 / std::sqrt(sumsq);
        double dot = 0.0;
        for (int j = 0; j < kPatchSize; ++j) dot += bwd.input_adjoint[j].real() * psi_in.amplitudes[j].real();
        for (int j = 0; j < kPatchSize; ++j) {
            out.input_grads[static_cast<std::size_t>(k) * kPatchSize + j] =
                2.0 * (bwd.input_adjoint[j].real() - dot * psi_in.amplitudes[j].real()) * inv_norm;
        }
    }
    return out;
}

} // namespace ihqgan::qgen
