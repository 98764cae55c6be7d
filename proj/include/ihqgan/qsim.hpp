#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ihqgan::qsim {

using cplx = std::complex<double>;

/// Amplitudes of an n-qubit register. Qubit 0 is the most significant bit of
/// the basis-state index, so for 5 qubits basis state |10000> has index 16.
/// The struct itself does not force unit norm; amplitude_encode produces
/// normalized states and every gate preserves norm.
struct StateVector {
    int n_qubits = 0;
    std::vector<cplx> amplitudes;

    static StateVector zero_state(int n_qubits) {
        StateVector s;
        s.n_qubits = n_qubits;
        s.amplitudes.assign(std::size_t{1} << n_qubits, cplx{0.0, 0.0});
        s.amplitudes[0] = cplx{1.0, 0.0};
        return s;
    }

    static StateVector basis(int n_qubits, std::size_t index) {
        StateVector s = zero_state(n_qubits);
        s.amplitudes[0] = cplx{0.0, 0.0};
        s.amplitudes.at(index) = cplx{1.0, 0.0};
        return s;
    }

    std::size_t dim() const { return amplitudes.size(); }

    double norm() const {
        double sum = 0.0;
        for (const cplx& a : amplitudes) sum += std::norm(a);
        return std::sqrt(sum);
    }
};

inline double distance(const StateVector& a, const StateVector& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.amplitudes.size(); ++i) sum += std::norm(a.amplitudes[i] - b.amplitudes[i]);
    return std::sqrt(sum);
}

enum class GateKind { Rot, Cnot };

/// Reference into a flat angle slice. `negate` flips the sign at read time,
/// which is how the inverse circuit shares storage with the forward one.
struct AngleRef {
    std::size_t index = 0;
    bool negate = false;
};

/// One gate of a circuit. Rot(a, b, c) = Rz(c) Ry(b) Rz(a), i.e. Rz(a) acts
/// first; angles[0] is a, angles[1] is b, angles[2] is c.
struct GateSpec {
    GateKind kind = GateKind::Rot;
    int wire0 = 0;                  // Rot target, or CNOT control
    int wire1 = -1;                 // CNOT target
    std::array<AngleRef, 3> angles{};

    static GateSpec rot(int wire, AngleRef a, AngleRef b, AngleRef c) {
        return GateSpec{GateKind::Rot, wire, -1, {a, b, c}};
    }
    static GateSpec cnot(int control, int target) {
        return GateSpec{GateKind::Cnot, control, target, {}};
    }
};

namespace detail {

inline std::size_t wire_stride(int n_qubits, int wire) {
    if (wire < 0 || wire >= n_qubits) {
        throw std::out_of_range("qsim: wire " + std::to_string(wire) + " out of range for " +
                                std::to_string(n_qubits) + " qubits");
    }
    return std::size_t{1} << (n_qubits - 1 - wire);
}

// In-place Rz(theta) = diag(e^{-i theta/2}, e^{i theta/2}) on one wire.
inline void rz_inplace(std::vector<cplx>& amps, std::size_t stride, double theta) {
    const cplx lo = std::polar(1.0, -0.5 * theta);
    const cplx hi = std::polar(1.0, 0.5 * theta);
    const std::size_t dim = amps.size();
    for (std::size_t i = 0; i < dim; ++i) {
        amps[i] *= (i & stride) ? hi : lo;
    }
}

// In-place Ry(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]] on one wire.
inline void ry_inplace(std::vector<cplx>& amps, std::size_t stride, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const std::size_t dim = amps.size();
    for (std::size_t i0 = 0; i0 < dim; ++i0) {
        if (i0 & stride) continue;
        const std::size_t i1 = i0 | stride;
        const cplx a0 = amps[i0];
        const cplx a1 = amps[i1];
        amps[i0] = c * a0 - s * a1;
        amps[i1] = s * a0 + c * a1;
    }
}

inline void cnot_inplace(std::vector<cplx>& amps, std::size_t control_stride, std::size_t target_stride) {
    const std::size_t dim = amps.size();
    for (std::size_t i = 0; i < dim; ++i) {
        if ((i & control_stride) && !(i & target_stride)) {
            std::swap(amps[i], amps[i | target_stride]);
        }
    }
}

inline double resolve_angle(const AngleRef& ref, std::span<const double> angles) {
    if (ref.index >= angles.size()) {
        throw std::invalid_argument("qsim: angle_ref index " + std::to_string(ref.index) +
                                    " not resolvable in a slice of " + std::to_string(angles.size()));
    }
    const double v = angles[ref.index];
    return ref.negate ? -v : v;
}

enum class Axis { Y, Z };

// <lambda| P |psi> for the rotation generator P (sigma_y or sigma_z) on one
// wire; the adjoint pass turns this into the angle gradient via
// 2 Re<lambda|(-i/2)P|psi> = Im<lambda|P|psi>.
inline cplx generator_overlap(const std::vector<cplx>& lambda, const std::vector<cplx>& psi,
                              std::size_t stride, Axis axis) {
    cplx acc{0.0, 0.0};
    const std::size_t dim = psi.size();
    if (axis == Axis::Z) {
        for (std::size_t i = 0; i < dim; ++i) {
            const cplx term = std::conj(lambda[i]) * psi[i];
            acc += (i & stride) ? -term : term;
        }
    } else {
        const cplx im{0.0, 1.0};
        for (std::size_t i0 = 0; i0 < dim; ++i0) {
            if (i0 & stride) continue;
            const std::size_t i1 = i0 | stride;
            acc += std::conj(lambda[i0]) * (-im * psi[i1]);
            acc += std::conj(lambda[i1]) * (im * psi[i0]);
        }
    }
    return acc;
}

} // namespace detail

/// Rz(gamma) Ry(beta) Rz(alpha) applied to `wire`; Rz(alpha) acts first.
inline StateVector apply_rot(StateVector state, int wire, double alpha, double beta, double gamma) {
    if (!(std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma))) {
        throw std::invalid_argument("qsim: Rot angles must be finite");
    }
    const std::size_t stride = detail::wire_stride(state.n_qubits, wire);
    detail::rz_inplace(state.amplitudes, stride, alpha);
    detail::ry_inplace(state.amplitudes, stride, beta);
    detail::rz_inplace(state.amplitudes, stride, gamma);
    return state;
}

inline StateVector apply_cnot(StateVector state, int control, int target) {
    if (control == target) {
        throw std::out_of_range("qsim: CNOT control and target must differ");
    }
    const std::size_t cs = detail::wire_stride(state.n_qubits, control);
    const std::size_t ts = detail::wire_stride(state.n_qubits, target);
    detail::cnot_inplace(state.amplitudes, cs, ts);
    return state;
}

/// Loads 2^n non-negative pixel values into amplitudes by L2 normalization.
/// An all-zero patch maps to the basis state |0...0> so padded image rows
/// never crash the pipeline.
inline StateVector amplitude_encode(std::span<const double> pixels) {
    const std::size_t n = pixels.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("qsim: amplitude_encode needs a power-of-two pixel count, got " +
                                    std::to_string(n));
    }
    double sumsq = 0.0;
    for (double p : pixels) {
        if (!std::isfinite(p) || p < 0.0) {
            throw std::invalid_argument("qsim: amplitude_encode pixels must be finite and non-negative");
        }
        sumsq += p * p;
    }
    StateVector s;
    s.n_qubits = static_cast<int>(std::countr_zero(n));
    s.amplitudes.assign(n, cplx{0.0, 0.0});
    if (sumsq == 0.0) {
        s.amplitudes[0] = cplx{1.0, 0.0};
        return s;
    }
    const double inv = 1.0 / std::sqrt(sumsq);
    for (std::size_t i = 0; i < n; ++i) s.amplitudes[i] = cplx{pixels[i] * inv, 0.0};
    return s;
}

inline std::vector<double> measure_probs(const StateVector& state) {
    std::vector<double> probs(state.dim());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::norm(state.amplitudes[i]);
    return probs;
}

/// Applies the gate list in order, resolving Rot angles through `angles`.
inline StateVector run_circuit(std::span<const GateSpec> gates, std::span<const double> angles,
                               StateVector input) {
    for (const GateSpec& g : gates) {
        if (g.kind == GateKind::Rot) {
            const std::size_t stride = detail::wire_stride(input.n_qubits, g.wire0);
            detail::rz_inplace(input.amplitudes, stride, detail::resolve_angle(g.angles[0], angles));
            detail::ry_inplace(input.amplitudes, stride, detail::resolve_angle(g.angles[1], angles));
            detail::rz_inplace(input.amplitudes, stride, detail::resolve_angle(g.angles[2], angles));
        } else {
            if (g.wire0 == g.wire1) throw std::out_of_range("qsim: CNOT control and target must differ");
            detail::cnot_inplace(input.amplitudes,
                                 detail::wire_stride(input.n_qubits, g.wire0),
                                 detail::wire_stride(input.n_qubits, g.wire1));
        }
    }
    return input;
}

struct CircuitBackward {
    std::vector<double> angle_grads;   // dLoss/dangle for each slice entry
    std::vector<cplx> input_adjoint;   // dLoss/d(conj input amplitude), for chaining into the encoder
    std::vector<double> probs;         // measured probabilities of the output state
};

/// Reverse (adjoint) pass: given dLoss/dprob for each basis state of the
/// circuit output, returns dLoss/dangle for every entry of the angle slice.
///
/// The loss is treated as a real function of the output amplitudes with
/// lambda = dLoss/dpsi* = upstream .* psi_out. Walking the gates backwards,
/// each rotation U(theta) has dU/dtheta = (-i/2) P U with P in {sigma_y,
/// sigma_z}, so its gradient is 2 Re<lambda|(-i/2) P|psi> evaluated before
/// uncomputing the gate from both psi and lambda.
inline CircuitBackward circuit_backward(std::span<const GateSpec> gates, std::span<const double> angles,
                                        const StateVector& input, std::span<const double> upstream) {
    StateVector psi = run_circuit(gates, angles, input);
    if (upstream.size() != psi.dim()) {
        throw std::invalid_argument("qsim: upstream length " + std::to_string(upstream.size()) +
                                    " does not match state dimension " + std::to_string(psi.dim()));
    }

    CircuitBackward out;
    out.probs = measure_probs(psi);
    out.angle_grads.assign(angles.size(), 0.0);

    std::vector<cplx> lambda(psi.dim());
    for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] = upstream[i] * psi.amplitudes[i];

    using detail::Axis;
    auto rotation_step = [&](std::size_t stride, double theta, Axis axis, const AngleRef& ref) {
        // gradient before uncomputing: 2 Re<lambda|(-i/2)P|psi> = Im<lambda|P|psi>
        const cplx overlap = detail::generator_overlap(lambda, psi.amplitudes, stride, axis);
        const double g = overlap.imag();
        out.angle_grads[ref.index] += ref.negate ? -g : g;
        if (axis == Axis::Z) {
            detail::rz_inplace(psi.amplitudes, stride, -theta);
            detail::rz_inplace(lambda, stride, -theta);
        } else {
            detail::ry_inplace(psi.amplitudes, stride, -theta);
            detail::ry_inplace(lambda, stride, -theta);
        }
    };

    for (auto it = gates.rbegin(); it != gates.rend(); ++it) {
        const GateSpec& g = *it;
        if (g.kind == GateKind::Rot) {
            const std::size_t stride = detail::wire_stride(psi.n_qubits, g.wire0);
            rotation_step(stride, detail::resolve_angle(g.angles[2], angles), Axis::Z, g.angles[2]);
            rotation_step(stride, detail::resolve_angle(g.angles[1], angles), Axis::Y, g.angles[1]);
            rotation_step(stride, detail::resolve_angle(g.angles[0], angles), Axis::Z, g.angles[0]);
        } else {
            const std::size_t cs = detail::wire_stride(psi.n_qubits, g.wire0);
            const std::size_t ts = detail::wire_stride(psi.n_qubits, g.wire1);
            detail::cnot_inplace(psi.amplitudes, cs, ts);
            detail::cnot_inplace(lambda, cs, ts);
        }
    }
    out.input_adjoint = std::move(lambda);
    return out;
}

/// dLoss/dangle for every angle used by the circuit (see circuit_backward).
inline std::vector<double> circuit_grad(std::span<const GateSpec> gates, std::span<const double> angles,
                                        const StateVector& input, std::span<const double> upstream) {
    return circuit_backward(gates, angles, input, upstream).angle_grads;
}

} // namespace ihqgan::qsim
