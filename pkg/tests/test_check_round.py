"""Checks for the four-node stabilizer round: GHZ prep, trajectory rounds,
and the two independent routes to the exact round error distribution."""

from itertools import product

import numpy as np
import pytest

from spinmesh.channels import NoiseModel
from spinmesh.check_round import (
    NodeRegister,
    RoundErrorDistribution,
    _oracle_final_accums,
    extract_round_distribution,
    oracle_round_distribution,
    prepare_ghz,
    run_check_round,
    stabilizer_pauli,
)
from spinmesh.paulis import PauliString, all_paulis, pauli_matrix
from spinmesh.states import StateVector

QUIET = NoiseModel(0.0, 0.0, 0.0)


def ghz_state() -> StateVector:
    v = np.zeros(16, dtype=complex)
    v[0] = v[15] = 1 / np.sqrt(2)
    return StateVector(4, v)


def max_discrepancy(a: RoundErrorDistribution, b: RoundErrorDistribution) -> float:
    ac, bc = a.canonicalized(), b.canonicalized()
    keys = set(ac.entries) | set(bc.entries)
    return max(abs(ac.prob(*k) - bc.prob(*k)) for k in keys)


class TestNodeRegister:
    def test_default_counts(self):
        reg = NodeRegister()
        assert reg.wires("data") == (0, 2, 4, 6)
        assert reg.wires("ancilla1") == (1, 3, 5, 7)
        assert reg.wires("ancilla2") == (8, 9)

    def test_wrong_counts_rejected(self):
        with pytest.raises(ValueError):
            NodeRegister(roles=(("data", "A"),) * 10)


class TestPrepareGhz:
    def test_all_branches_reach_ghz(self):
        target = ghz_state()
        for d1, d2 in product((0.1, 0.9), repeat=2):
            st, parity = prepare_ghz((d1, d2))
            assert st.fidelity(target) == pytest.approx(1.0, abs=1e-12)
            assert parity == (d1 > 0.5) ^ (d2 > 0.5)

    def test_pre_feedback_outcome_table(self):
        # even parity: |0000>+|1111>; odd parity: |0011>+|1100> (A,B flipped)
        odd = np.zeros(16, dtype=complex)
        odd[0b0011] = odd[0b1100] = 1 / np.sqrt(2)
        for d1, d2 in product((0.1, 0.9), repeat=2):
            st, parity = prepare_ghz((d1, d2), feedback=False)
            expect = StateVector(4, odd) if parity else ghz_state()
            assert st.fidelity(expect) == pytest.approx(1.0, abs=1e-12)

    def test_branches_equiprobable(self):
        # the measurement thresholds sit exactly at 1/2, so each of the four
        # outcome combinations carries probability 1/4
        eps = 1e-9
        for second in (0.25, 0.75):
            _, lo = prepare_ghz((0.5 - eps, second))
            _, hi = prepare_ghz((0.5 + eps, second))
            assert lo != hi
            _, lo = prepare_ghz((second, 0.5 - eps))
            _, hi = prepare_ghz((second, 0.5 + eps))
            assert lo != hi


class TestRunCheckRound:
    def test_z_round_on_zero_state(self):
        rng = np.random.default_rng(3)
        st = StateVector(4)
        syndrome, post = run_check_round(st, "Z", QUIET, rng)
        assert syndrome == 0
        assert post.fidelity(StateVector(4)) == pytest.approx(1.0, abs=1e-12)

    def test_z_round_on_odd_parity_state(self):
        rng = np.random.default_rng(4)
        v = np.zeros(16, dtype=complex)
        v[1] = 1.0  # qubit A flipped
        syndrome, _ = run_check_round(StateVector(4, v), "Z", QUIET, rng)
        assert syndrome == 1

    def test_x_round_on_plus_state(self):
        rng = np.random.default_rng(5)
        st = StateVector(4, np.full(16, 0.25))
        syndrome, _ = run_check_round(st, "X", QUIET, rng)
        assert syndrome == 0

    @pytest.mark.parametrize("stype", ["Z", "X"])
    def test_syndrome_linearity(self, stype):
        # on a stabilizer eigenstate, prepending Pauli E flips the syndrome
        # iff E anticommutes with the stabilizer
        rng = np.random.default_rng(6)
        s = stabilizer_pauli(stype)
        raw = StateVector(4, np.random.default_rng(1).normal(size=16)
                          + 1j * np.random.default_rng(2).normal(size=16))
        proj = raw.psi + pauli_matrix(s) @ raw.psi
        base = StateVector(4, proj / np.linalg.norm(proj))
        assert base.expectation(s) == pytest.approx(1.0, abs=1e-12)
        for e in [PauliString.from_label(l) for l in ("XIII", "ZIII", "YZIX", "IIZI")]:
            st = base.copy().apply_pauli(e)
            syndrome, _ = run_check_round(st, stype, QUIET, rng)
            assert syndrome == (0 if e.commutes(s) else 1)

    @pytest.mark.parametrize("stype", ["Z", "X"])
    def test_noiseless_round_projects(self, stype):
        rng = np.random.default_rng(11)
        raw = rng.normal(size=16) + 1j * rng.normal(size=16)
        st = StateVector(4, raw / np.linalg.norm(raw))
        s = stabilizer_pauli(stype)
        syndrome, post = run_check_round(st, stype, QUIET, rng)
        assert post.expectation(s) == pytest.approx(1.0 if syndrome == 0 else -1.0, abs=1e-10)
        again, post2 = run_check_round(post, stype, QUIET, rng)
        assert again == syndrome
        assert post2.fidelity(post) == pytest.approx(1.0, abs=1e-10)


class TestRoundDistributionBasics:
    @pytest.mark.parametrize("stype", ["Z", "X"])
    def test_zero_noise_point_mass(self, stype):
        for dist in (extract_round_distribution(stype, QUIET),
                     oracle_round_distribution(stype, QUIET)):
            assert dist.entries == {(PauliString.identity(4), 0): pytest.approx(1.0)}

    def test_parameter_range_enforced(self):
        with pytest.raises(ValueError):
            extract_round_distribution("Z", NoiseModel(0.2, 0.0, 0.0))

    def test_bad_type_rejected(self):
        with pytest.raises(ValueError):
            extract_round_distribution("Y", QUIET)

    def test_mass_defect_rejected(self):
        bad = RoundErrorDistribution("Z", {(PauliString.identity(4), 0): 0.5})
        with pytest.raises(ValueError):
            bad.validate()

    def test_json_round_trip(self):
        dist = extract_round_distribution("X", NoiseModel(1e-3, 2e-3, 3e-3))
        back = RoundErrorDistribution.from_json(dist.to_json())
        assert back.stabilizer_type == "X"
        assert max_discrepancy(dist, back) < 1e-15

    def test_shuttle_only_mass(self):
        # three shuttle dephasing sites; two of them cancel pairwise, so the
        # non-identity mass is 1-(1-p)^3 up to exactly p^2(1-p)
        p = 1e-3
        dist = extract_round_distribution("Z", NoiseModel(0.0, 0.0, p))
        nonid = 1.0 - dist.identity_mass()
        assert abs(nonid - (1.0 - (1.0 - p) ** 3)) < 2 * p * p
        for (res, _), w in dist.entries.items():
            if w > 0:
                assert set(res.to_label()) <= {"I", "Z"}

    def test_identity_mass_monotone(self):
        base = NoiseModel(1e-3, 1e-3, 1e-3)
        ref = extract_round_distribution("Z", base).identity_mass()
        for bumped in (NoiseModel(2e-3, 1e-3, 1e-3),
                       NoiseModel(1e-3, 2e-3, 1e-3),
                       NoiseModel(1e-3, 1e-3, 2e-3)):
            assert extract_round_distribution("Z", bumped).identity_mass() < ref


class TestRouteAgreement:
    @pytest.mark.parametrize("stype", ["Z", "X"])
    def test_grid_agreement(self, stype):
        # Pauli-propagation extraction vs full operator-evolution oracle on
        # every parameter triple from {0, 1e-3, 1e-2}^3
        for p1, psw, psh in product((0.0, 1e-3, 1e-2), repeat=3):
            nm = NoiseModel(p1, psw, psh)
            d = max_discrepancy(extract_round_distribution(stype, nm),
                                oracle_round_distribution(stype, nm))
            assert d < 1e-9, (p1, psw, psh, d)

    def test_reference_operating_point(self):
        nm = NoiseModel(2e-4, 2e-3, 7.9e-3)
        for stype in ("Z", "X"):
            d = max_discrepancy(extract_round_distribution(stype, nm),
                                oracle_round_distribution(stype, nm))
            assert d < 1e-6

    @pytest.mark.parametrize("stype", ["Z", "X"])
    def test_reduced_twirl_equals_full_in_situ(self, stype):
        # the physical two-branch twirl and the sixteen-gate reference twirl
        # give the same distribution inside the complete round, including
        # the check CZs whose measured legs sit in a GHZ (not Bell) state
        nm = NoiseModel(5e-3, 5e-3, 5e-3)
        d = max_discrepancy(oracle_round_distribution(stype, nm),
                            oracle_round_distribution(stype, nm, twirl_scheme="full"))
        assert d < 1e-12

    def test_branch_average_equals_explicit_enumeration(self):
        # the oracle averages the two twirl branches per CZ by linearity;
        # the 2^6 explicit branch enumeration must give identical operators
        nm = NoiseModel(5e-3, 5e-3, 5e-3)
        probes = [PauliString.from_label("IIII"), PauliString.from_label("ZZII")]
        accum: dict = {}
        for bits in product((0, 1), repeat=6):
            o0, o1 = _oracle_final_accums("Z", nm, probes, twirl_bits=bits)
            for tag, o in (("u", o0), ("w", o1)):
                for pid in range(len(probes)):
                    for key, val in o.coefficients(pid).items():
                        accum[(tag, pid, key)] = accum.get((tag, pid, key), 0.0) + val / 64
        o0, o1 = _oracle_final_accums("Z", nm, probes)
        ref: dict = {}
        for tag, o in (("u", o0), ("w", o1)):
            for pid in range(len(probes)):
                for key, val in o.coefficients(pid).items():
                    ref[(tag, pid, key)] = val
        keys = set(accum) | set(ref)
        assert max(abs(accum.get(k, 0.0) - ref.get(k, 0.0)) for k in keys) < 1e-12

    @pytest.mark.parametrize("stype,label", [("Z", "ZIII"), ("X", "XIII")])
    def test_deterministic_swap_image(self, stype, label):
        # p_swap=1 on the node-A check CZ fires both SWAP sites: the net
        # fault is Z(data)Z(ancilla), whose propagated image is a flipped
        # syndrome plus Z (Hadamard-conjugated to X for the X type) on A
        override = [QUIET] * 6
        override[2] = NoiseModel(0.0, 1.0, 0.0)
        dist = oracle_round_distribution(stype, QUIET, cz_noise=override).canonicalized()
        expect = RoundErrorDistribution(
            stype, {(PauliString.from_label(label), 1): 1.0}).canonicalized()
        assert max_discrepancy(dist, expect) < 1e-12


class TestTrajectoryStatistics:
    def test_flip_marginal_matches_distribution(self):
        # on a +1 eigenstate the recorded-syndrome-1 frequency equals the
        # total flip mass of the extracted distribution
        nm = NoiseModel(1e-2, 1e-2, 1e-2)
        dist = extract_round_distribution("Z", nm)
        p_flip = sum(w for (_, f), w in dist.entries.items() if f == 1)
        rng = np.random.default_rng(20240817)
        shots = 2000
        flips = 0
        for _ in range(shots):
            syndrome, _ = run_check_round(StateVector(4), "Z", nm, rng)
            flips += syndrome
        sigma = np.sqrt(p_flip * (1 - p_flip) / shots)
        assert abs(flips / shots - p_flip) < 4.5 * sigma
