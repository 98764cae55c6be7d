#include <catch2/catch_amalgamated.hpp>

#include "ihqgan/qsim.hpp"
#include "ihqgan/qgen.hpp"
#include "helpers.hpp"

using namespace ihqgan;
using namespace ihqgan::qsim;
using test_helpers::finite_difference;
using test_helpers::max_rel_error;
using test_helpers::random_state;

TEST_CASE("apply_rot identity and bit flip", "[qsim]") {
    Rng rng(11);
    StateVector s = random_state(rng, 3);
    StateVector t = apply_rot(s, 1, 0.0, 0.0, 0.0);
    REQUIRE(distance(s, t) < 1e-15);

    StateVector one = apply_rot(StateVector::zero_state(1), 0, 0.0, 3.141592653589793, 0.0);
    REQUIRE(std::norm(one.amplitudes[1]) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("apply_rot inverse is Rot(-c,-b,-a)", "[qsim]") {
    Rng rng(12);
    StateVector s = random_state(rng, 4);
    StateVector t = apply_rot(s, 2, 0.3, 0.7, -0.2);
    t = apply_rot(t, 2, 0.2, -0.7, -0.3);
    REQUIRE(distance(s, t) < 1e-12);
}

TEST_CASE("apply_rot rejects bad input", "[qsim]") {
    StateVector s = StateVector::zero_state(2);
    REQUIRE_THROWS_AS(apply_rot(s, 2, 0, 0, 0), std::out_of_range);
    REQUIRE_THROWS_AS(apply_rot(s, -1, 0, 0, 0), std::out_of_range);
    REQUIRE_THROWS_AS(apply_rot(s, 0, std::nan(""), 0, 0), std::invalid_argument);
}

TEST_CASE("apply_cnot on basis states", "[qsim]") {
    // qubit 0 is the most significant bit: |10> has index 2
    StateVector s = StateVector::basis(2, 2);
    s = apply_cnot(s, 0, 1);
    REQUIRE(std::norm(s.amplitudes[3]) == Catch::Approx(1.0));

    StateVector z = apply_cnot(StateVector::zero_state(2), 0, 1);
    REQUIRE(std::norm(z.amplitudes[0]) == Catch::Approx(1.0));
}

TEST_CASE("apply_cnot is self-inverse", "[qsim]") {
    Rng rng(13);
    StateVector s = random_state(rng, 5);
    StateVector t = apply_cnot(apply_cnot(s, 1, 3), 1, 3);
    REQUIRE(distance(s, t) < 1e-14);
    REQUIRE_THROWS_AS(apply_cnot(s, 2, 2), std::out_of_range);
    REQUIRE_THROWS_AS(apply_cnot(s, 0, 9), std::out_of_range);
}

TEST_CASE("amplitude_encode normalizes", "[qsim]") {
    std::vector<double> uniform(32, 0.5);
    StateVector s = amplitude_encode(uniform);
    for (const auto& a : s.amplitudes) {
        REQUIRE(a.real() == Catch::Approx(1.0 / std::sqrt(32.0)).epsilon(1e-12));
    }

    std::vector<double> onehot(32, 0.0);
    onehot[7] = 0.9;
    StateVector h = amplitude_encode(onehot);
    REQUIRE(h.amplitudes[7].real() == Catch::Approx(1.0));

    std::vector<double> zeros(32, 0.0);
    StateVector z = amplitude_encode(zeros);
    REQUIRE(z.amplitudes[0] == cplx{1.0, 0.0});
    REQUIRE(z.norm() == Catch::Approx(1.0));

    std::vector<double> bad(32, 0.1);
    bad[3] = -0.5;
    REQUIRE_THROWS_AS(amplitude_encode(bad), std::invalid_argument);
    REQUIRE_THROWS_AS(amplitude_encode(std::vector<double>(33, 0.1)), std::invalid_argument);
}

TEST_CASE("measure_probs basics", "[qsim]") {
    auto probs = measure_probs(StateVector::zero_state(5));
    REQUIRE(probs[0] == 1.0);
    REQUIRE(std::accumulate(probs.begin(), probs.end(), 0.0) == Catch::Approx(1.0));

    std::vector<double> uniform(32, 1.0);
    auto up = measure_probs(amplitude_encode(uniform));
    for (double p : up) REQUIRE(p == Catch::Approx(1.0 / 32.0).epsilon(1e-12));

    // Ry(pi/2) on qubit 0 of |00000>: probability 0.5 on indices 0 and 16
    StateVector s = apply_rot(StateVector::zero_state(5), 0, 0.0, 1.5707963267948966, 0.0);
    auto sp = measure_probs(s);
    REQUIRE(sp[0] == Catch::Approx(0.5));
    REQUIRE(sp[16] == Catch::Approx(0.5));
}

static std::vector<GateSpec> small_random_circuit(Rng& rng, int n_qubits, int n_rot, std::size_t n_angles) {
    std::vector<GateSpec> gates;
    for (int i = 0; i < n_rot; ++i) {
        const int w = static_cast<int>(rng.below(n_qubits));
        gates.push_back(GateSpec::rot(w, {3 * static_cast<std::size_t>(i) % n_angles, false},
                                      {(3 * static_cast<std::size_t>(i) + 1) % n_angles, false},
                                      {(3 * static_cast<std::size_t>(i) + 2) % n_angles, false}));
        if (i % 2 == 1 && n_qubits > 1) {
            int c = static_cast<int>(rng.below(n_qubits));
            int t = (c + 1) % n_qubits;
            gates.push_back(GateSpec::cnot(c, t));
        }
    }
    return gates;
}

TEST_CASE("run_circuit basics", "[qsim]") {
    Rng rng(21);
    StateVector s = random_state(rng, 5);

    SECTION("empty gate list returns input unchanged") {
        StateVector t = run_circuit({}, {}, s);
        REQUIRE(distance(s, t) == 0.0);
    }

    SECTION("norm conserved for a randomized single-block circuit") {
        auto angles = test_helpers::random_vector(rng, qgen::kAnglesPerCircuit, -3.14, 3.14);
        std::vector<GateSpec> block;
        for (int q = 0; q < 5; ++q) {
            block.push_back(GateSpec::rot(q, {static_cast<std::size_t>(3 * q), false},
                                          {static_cast<std::size_t>(3 * q + 1), false},
                                          {static_cast<std::size_t>(3 * q + 2), false}));
        }
        for (int q = 0; q < 4; ++q) block.push_back(GateSpec::cnot(q, q + 1));
        StateVector t = run_circuit(block, angles, s);
        REQUIRE(std::abs(t.norm() - 1.0) < 1e-12);
    }

    SECTION("unresolvable angle_ref is a configuration error") {
        std::vector<GateSpec> gates{GateSpec::rot(0, {500, false}, {1, false}, {2, false})};
        std::vector<double> angles(3, 0.1);
        REQUIRE_THROWS_AS(run_circuit(gates, angles, s), std::invalid_argument);
    }
}

TEST_CASE("run_circuit is linear at the raw amplitude level", "[qsim][property]") {
    Rng rng(22);
    std::vector<double> angles = test_helpers::random_vector(rng, 30, -3.0, 3.0);
    auto gates = small_random_circuit(rng, 4, 8, angles.size());

    StateVector psi1 = random_state(rng, 4);
    StateVector psi2 = random_state(rng, 4);
    const cplx a{1.7, -0.3}, b{-0.4, 0.9};

    StateVector combo;
    combo.n_qubits = 4;
    combo.amplitudes.resize(16);
    for (int i = 0; i < 16; ++i) combo.amplitudes[i] = a * psi1.amplitudes[i] + b * psi2.amplitudes[i];

    StateVector lhs = run_circuit(gates, angles, combo);
    StateVector r1 = run_circuit(gates, angles, psi1);
    StateVector r2 = run_circuit(gates, angles, psi2);
    for (int i = 0; i < 16; ++i) {
        REQUIRE(std::abs(lhs.amplitudes[i] - (a * r1.amplitudes[i] + b * r2.amplitudes[i])) < 1e-12);
    }
}

TEST_CASE("norm preservation across long random gate sequences", "[qsim][property]") {
    Rng rng(23);
    StateVector s = random_state(rng, 5);
    std::vector<double> angles = test_helpers::random_vector(rng, 12, -3.14, 3.14);
    for (int i = 0; i < 2000; ++i) {
        if (rng.uniform() < 0.7) {
            const int w = static_cast<int>(rng.below(5));
            std::vector<GateSpec> g{GateSpec::rot(w, {rng.below(12), false}, {rng.below(12), false},
                                                  {rng.below(12), false})};
            s = run_circuit(g, angles, std::move(s));
        } else {
            const int c = static_cast<int>(rng.below(5));
            const int t = (c + 1 + static_cast<int>(rng.below(4))) % 5;
            s = apply_cnot(std::move(s), c, t);
        }
        REQUIRE(std::abs(s.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("circuit_grad closed-form single-gate case", "[qsim][grad]") {
    // Rot(a, b, c)|0> puts sin^2(b/2) of probability on |1>, independent of
    // a and c, so the exact gradient against upstream e_1 is
    // [0, sin(b)/2, 0]. Frozen for b = 1.1: sin(1.1)/2 = 0.44560368003071754.
    std::vector<GateSpec> gates{GateSpec::rot(0, {0, false}, {1, false}, {2, false})};
    std::vector<double> angles{0.4, 1.1, -0.7};
    std::vector<double> upstream{0.0, 1.0};
    auto grads = circuit_grad(gates, angles, StateVector::zero_state(1), upstream);
    REQUIRE(grads[0] == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(grads[1] == Catch::Approx(0.44560368003071754).epsilon(1e-12));
    REQUIRE(grads[2] == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("circuit_grad zero upstream gives zero gradients", "[qsim][grad]") {
    Rng rng(31);
    std::vector<double> angles = test_helpers::random_vector(rng, 15, -2.0, 2.0);
    auto gates = small_random_circuit(rng, 3, 5, angles.size());
    auto grads = circuit_grad(gates, angles, random_state(rng, 3), std::vector<double>(8, 0.0));
    for (double g : grads) REQUIRE(g == 0.0);
}

TEST_CASE("circuit_grad shape mismatch is a contract error", "[qsim][grad]") {
    std::vector<GateSpec> gates{GateSpec::rot(0, {0, false}, {1, false}, {2, false})};
    std::vector<double> angles{0.1, 0.2, 0.3};
    REQUIRE_THROWS_AS(circuit_grad(gates, angles, StateVector::zero_state(2), std::vector<double>(3, 1.0)),
                      std::invalid_argument);
}

TEST_CASE("circuit_grad matches finite differences on random circuits", "[qsim][grad][property]") {
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        const int n_qubits = 2 + static_cast<int>(rng.below(3));
        std::vector<double> angles = test_helpers::random_vector(rng, 18, -2.5, 2.5);
        auto gates = small_random_circuit(rng, n_qubits, 6, angles.size());
        StateVector input = random_state(rng, n_qubits);
        auto upstream = test_helpers::random_vector(rng, std::size_t{1} << n_qubits, -1.0, 1.0);

        auto loss = [&](std::span<const double> a) {
            auto probs = measure_probs(run_circuit(gates, a, input));
            double acc = 0.0;
            for (std::size_t i = 0; i < probs.size(); ++i) acc += upstream[i] * probs[i];
            return acc;
        };
        auto fd = finite_difference(loss, angles);
        auto analytic = circuit_grad(gates, angles, input, upstream);
        REQUIRE(max_rel_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("circuit_grad matches finite differences on the full 12-block circuit", "[qsim][grad]") {
    Rng rng(33);
    auto gates_span = qgen::circuit_template(qgen::Direction::Forward);
    std::vector<GateSpec> gates(gates_span.begin(), gates_span.end());
    std::vector<double> angles = test_helpers::random_vector(rng, qgen::kAnglesPerCircuit, -3.14, 3.14);
    StateVector input = random_state(rng, 5);
    auto upstream = test_helpers::random_vector(rng, 32, -1.0, 1.0);

    auto loss = [&](std::span<const double> a) {
        auto probs = measure_probs(run_circuit(gates, a, input));
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) acc += upstream[i] * probs[i];
        return acc;
    };
    auto fd = finite_difference(loss, angles);
    auto analytic = circuit_grad(gates, angles, input, upstream);
    REQUIRE(analytic.size() == 180);
    REQUIRE(max_rel_error(analytic, fd) < 1e-4);
}
