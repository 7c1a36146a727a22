import itertools

import numpy as np
import pytest

from cavity_repeater import core, protocols
from cavity_repeater.core import Bell
from cavity_repeater.gates import NOISELESS, GateNoise
from cavity_repeater.protocols import (
    TABLE1,
    GenerationResult,
    SwapEfficiencies,
    generate_entanglement,
    rotate_relabel,
    swap_branches,
    swap_entanglement,
)

TOL = 1e-12
PHI = core.bell_state(Bell.PHI_PLUS)
PLUS = np.array([core.SQRT1_2, core.SQRT1_2])


def bell_pair_product(a: Bell, b: Bell):
    return core.tensor(core.bell_state(a), core.bell_state(b))


class TestGeneration:
    def test_pre_measurement_state(self):
        reg = protocols.generation_pre_measurement()
        phi = core.bell_state(Bell.PHI_PLUS).amplitudes
        psi = core.bell_state(Bell.PSI_PLUS).amplitudes
        expected = core.SQRT1_2 * (np.kron(phi, core.PM_BASIS[:, 0]) + np.kron(psi, core.PM_BASIS[:, 1]))
        np.testing.assert_allclose(reg.amplitudes, expected, atol=TOL)

    def test_both_branches_end_in_phi_plus(self):
        branches = protocols.herald_generation(protocols.generation_pre_measurement())
        assert sorted(label for label, _, _ in branches) == ["+", "-"]
        for _, prob, post in branches:
            assert prob == pytest.approx(0.5, abs=TOL)
            assert core.fidelity(post, PHI) == pytest.approx(1.0, abs=TOL)

    def test_sampled_noiseless(self, rng):
        for _ in range(40):
            out = generate_entanglement(NOISELESS, NOISELESS, 1.0, 1.0, 1.0, rng)
            assert out.result is GenerationResult.ENTANGLED
            assert out.bell is Bell.PHI_PLUS
            assert core.fidelity(out.state, PHI) == pytest.approx(1.0, abs=TOL)

    def test_no_photon_leaves_atoms(self, rng):
        out = generate_entanglement(NOISELESS, NOISELESS, 1.0, 1.0, 0.0, rng)
        assert out.result is GenerationResult.VACUUM_NO_OP
        np.testing.assert_allclose(out.state.amplitudes, np.kron(PLUS, PLUS), atol=TOL)

    def test_gate_loss_at_a_leaves_atoms(self, rng):
        out = generate_entanglement(GateNoise(p_CN=0.0), NOISELESS, 1.0, 1.0, 1.0, rng)
        assert out.result is GenerationResult.VACUUM_NO_OP
        np.testing.assert_allclose(out.state.amplitudes, np.kron(PLUS, PLUS), atol=TOL)

    def test_loss_before_b_is_mixed(self, rng):
        out = generate_entanglement(NOISELESS, NOISELESS, 0.0, 1.0, 1.0, rng)
        assert out.result is GenerationResult.MIXED_FAILURE
        rho_a = np.trace(out.density.reshape(2, 2, 2, 2), axis1=1, axis2=3)
        rho_b = np.trace(out.density.reshape(2, 2, 2, 2), axis1=0, axis2=2)
        np.testing.assert_allclose(rho_a, np.eye(2) / 2, atol=TOL)
        np.testing.assert_allclose(rho_b, np.outer(PLUS, PLUS), atol=TOL)
        assert core.purity(out.density) < 1 - 1e-6

    def test_undetected_then_retry_is_consistent(self, rng):
        for _ in range(20):
            first = generate_entanglement(NOISELESS, NOISELESS, 1.0, 0.0, 1.0, rng)
            assert first.result is GenerationResult.UNDETECTED_RETRYABLE
            # ensemble over the lost photon's record is the equal Phi+/Psi+ mixture
            assert core.purity(first.density) == pytest.approx(0.5, abs=TOL)
            branches = protocols.herald_generation(protocols.generation_pre_measurement(first.state))
            assert len(branches) == 1 and branches[0][1] == pytest.approx(1.0, abs=TOL)
            expected = "+" if core.fidelity(first.state, PHI) > 0.5 else "-"
            assert branches[0][0] == expected
            second = generate_entanglement(NOISELESS, NOISELESS, 1.0, 1.0, 1.0, rng, atoms=first.state)
            assert second.detector == expected
            assert core.fidelity(second.state, PHI) == pytest.approx(1.0, abs=TOL)

    def test_lossy_successes_are_exact(self, rng):
        noise = GateNoise(p_CN=0.8)
        seen = 0
        for _ in range(300):
            out = generate_entanglement(noise, noise, 0.7, 0.8, 0.9, rng)
            if out.result is GenerationResult.ENTANGLED:
                seen += 1
                assert core.fidelity(out.state, PHI) == pytest.approx(1.0, abs=TOL)
        assert seen > 50

    @pytest.mark.parametrize("bad", [dict(eta_link=1.2), dict(eta_d=-0.1), dict(eta_s=2.0)])
    def test_efficiency_validation(self, rng, bad):
        kw = dict(eta_link=1.0, eta_d=1.0, eta_s=1.0) | bad
        with pytest.raises(protocols.ProtocolError):
            generate_entanglement(NOISELESS, NOISELESS, rng=rng, **kw)


class TestParityCheck:
    @pytest.mark.parametrize(
        "label,outcome",
        [(Bell.PHI_PLUS, "+"), (Bell.PHI_MINUS, "+"), (Bell.PSI_PLUS, "-"), (Bell.PSI_MINUS, "-")],
    )
    def test_bell_inputs(self, label, outcome):
        outs = {o.label: o for o in protocols.parity_check_branches(core.bell_state(label), 0, 1)}
        assert outs[outcome].probability == pytest.approx(1.0, abs=TOL)
        assert core.fidelity(outs[outcome].post_state, core.bell_state(label)) == pytest.approx(1.0, abs=TOL)

    def test_00_unchanged(self):
        reg = core.atoms([1, 0, 0, 0])
        outs = {o.label: o for o in protocols.parity_check_branches(reg, 0, 1)}
        assert outs["+"].probability == pytest.approx(1.0, abs=TOL)
        assert core.fidelity(outs["+"].post_state, reg) == pytest.approx(1.0, abs=TOL)


class TestRelabel:
    @pytest.mark.parametrize(
        "src,dst",
        [
            (Bell.PHI_PLUS, Bell.PHI_PLUS),
            (Bell.PHI_MINUS, Bell.PSI_PLUS),
            (Bell.PSI_PLUS, Bell.PHI_MINUS),
            (Bell.PSI_MINUS, Bell.PSI_MINUS),
        ],
    )
    def test_map(self, src, dst):
        assert rotate_relabel(src) is dst

    @pytest.mark.parametrize("label", list(Bell))
    def test_state_level(self, label):
        reg = core.bell_state(label)
        reg = core.apply_unitary(reg, [0], core.HALF_PI_PULSE)
        reg = core.apply_unitary(reg, [1], core.HALF_PI_PULSE)
        assert core.fidelity(reg, core.bell_state(rotate_relabel(label))) == pytest.approx(1.0, abs=TOL)

    @pytest.mark.parametrize("label", list(Bell))
    def test_involution(self, label):
        assert rotate_relabel(rotate_relabel(label)) is label


class TestSwap:
    def test_table1_bijection(self):
        assert sorted(TABLE1.values(), key=lambda b: b.value) == sorted(Bell, key=lambda b: b.value)

    def test_plus_plus_needs_no_correction(self):
        branches = {(b.record.first_outcome, b.record.second_outcome): b for b in swap_branches(bell_pair_product(Bell.PHI_PLUS, Bell.PHI_PLUS))}
        br = branches[("+", "+")]
        assert br.record.bell is Bell.PHI_PLUS and br.record.correction == "I"
        assert core.fidelity(br.state, PHI) == pytest.approx(1.0, abs=TOL)

    def test_minus_minus_uses_zx(self):
        branches = {(b.record.first_outcome, b.record.second_outcome): b for b in swap_branches(bell_pair_product(Bell.PHI_PLUS, Bell.PHI_PLUS))}
        br = branches[("-", "-")]
        assert br.record.bell is Bell.PSI_MINUS and br.record.correction == "ZX"
        assert core.fidelity(br.state, PHI) == pytest.approx(1.0, abs=TOL)

    def test_each_outcome_quarter(self):
        branches = swap_branches(bell_pair_product(Bell.PHI_PLUS, Bell.PHI_PLUS))
        assert len(branches) == 4
        for b in branches:
            assert b.probability == pytest.approx(0.25, abs=TOL)

    @pytest.mark.parametrize("la,lb", list(itertools.product(Bell, Bell)))
    def test_all_inputs_end_in_phi_plus(self, la, lb):
        branches = swap_branches(bell_pair_product(la, lb), input_labels=(la, lb))
        assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-10)
        for b in branches:
            assert core.fidelity(b.state, PHI) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("k1,k2", list(itertools.product(range(3), range(3))))
    def test_lost_parity_photons_are_harmless(self, k1, k2):
        branches = swap_branches(bell_pair_product(Bell.PHI_PLUS, Bell.PHI_PLUS), undetected=(k1, k2))
        assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-10)
        for b in branches:
            assert b.record.photons_spent == k1 + k2 + 2
            assert core.fidelity(b.state, PHI) == pytest.approx(1.0, abs=1e-10)

    def test_d_correction_matches_eq_targets(self):
        names = {bell: protocols.CORRECTIONS[bell][0] for bell in Bell}
        assert names == {Bell.PHI_PLUS: "I", Bell.PHI_MINUS: "Z", Bell.PSI_PLUS: "X", Bell.PSI_MINUS: "ZX"}

    def test_sampled_lossy_swap(self, rng):
        noise = GateNoise(p_CN=0.85)
        eta = SwapEfficiencies(eta_s=0.8, eta_c=0.95, eta_d=0.9)
        n_s = 3
        done = 0
        for _ in range(200):
            out = swap_entanglement(bell_pair_product(Bell.PHI_PLUS, Bell.PHI_PLUS), noise, eta, n_s, rng)
            assert out.photons_spent <= 2 * n_s
            if out.swapped:
                done += 1
                assert core.fidelity(out.state, PHI) == pytest.approx(1.0, abs=1e-10)
        assert 0 < done < 200

    def test_requires_four_atoms(self, rng):
        with pytest.raises(protocols.ProtocolError):
            swap_entanglement(PHI, NOISELESS, SwapEfficiencies(), 5, rng)
        with pytest.raises(protocols.ProtocolError):
            swap_entanglement(bell_pair_product(Bell.PHI_PLUS, Bell.PHI_PLUS), NOISELESS, SwapEfficiencies(), 0, rng)


class TestMediatedCnot:
    def test_plus_branch_matches_display(self, rng):
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        c /= np.linalg.norm(c)
        outs = {o.label: o for o in protocols.mediated_cnot_branches(core.atoms(c), 0, 1)}
        expected = np.array([c[0], c[1], c[2], -c[3]])
        assert outs["+"].probability == pytest.approx(0.5, abs=TOL)
        np.testing.assert_allclose(outs["+"].post_state.amplitudes, expected, atol=TOL)

    def test_minus_branch_same_up_to_phase(self, rng):
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        c /= np.linalg.norm(c)
        outs = {o.label: o for o in protocols.mediated_cnot_branches(core.atoms(c), 0, 1)}
        ov = np.vdot(np.array([c[0], c[1], c[2], -c[3]]), outs["-"].post_state.amplitudes)
        assert abs(ov) == pytest.approx(1.0, abs=TOL)

    @pytest.mark.parametrize("outcome", "+-")
    def test_hadamard_wrapped_is_cnot(self, outcome):
        u = protocols.mediated_cnot_kraus(outcome, hadamard_wrap=True)
        phase = u[0, 0] / abs(u[0, 0])
        np.testing.assert_allclose(u / phase, protocols.CNOT, atol=TOL)

    def test_wrapped_10_to_11(self):
        for o in protocols.mediated_cnot_branches(core.atoms([0, 0, 1, 0]), 0, 1, hadamard_wrap=True):
            assert core.fidelity(o.post_state, core.atoms([0, 0, 0, 1])) == pytest.approx(1.0, abs=TOL)

    def test_control_off(self, rng):
        t = core.random_state([core.ATOM], rng)
        reg = core.tensor(core.atom(0), t)
        for o in protocols.mediated_cnot_branches(reg, 0, 1, hadamard_wrap=True):
            assert core.fidelity(o.post_state, reg) == pytest.approx(1.0, abs=TOL)

    def test_uncorrected_minus_differs(self):
        u = protocols.mediated_cnot_kraus("-", hadamard_wrap=True, correct=False)
        overlap = abs(np.trace(u.conj().T @ protocols.CNOT))
        assert overlap < 4 - 1e-6

    def test_sampled(self, rng):
        reg = core.atoms([0, 0, 1, 0])
        out = protocols.mediated_cnot(reg, 0, 1, rng, hadamard_wrap=True)
        assert core.fidelity(out, core.atoms([0, 0, 0, 1])) == pytest.approx(1.0, abs=TOL)
        with pytest.raises(protocols.HeraldedFailure):
            protocols.mediated_cnot(reg, 0, 1, rng, transmission=0.0)


def _werner_terms(f):
    rest = (1 - f) / 3
    return [(f, Bell.PHI_PLUS), (rest, Bell.PHI_MINUS), (rest, Bell.PSI_PLUS), (rest, Bell.PSI_MINUS)]


def _purify_mixture(f):
    """(success probability, output density) for two Werner-like pairs."""
    rho = np.zeros((4, 4), dtype=complex)
    kept = 0.0
    for (w1, l1), (w2, l2) in itertools.product(_werner_terms(f), _werner_terms(f)):
        for br in protocols.purify_branches(core.bell_state(l1), core.bell_state(l2)):
            if br.kept:
                v = br.state.amplitudes
                rho += w1 * w2 * br.probability * np.outer(v, v.conj())
                kept += w1 * w2 * br.probability
    return kept, rho / kept


class TestPurify:
    def test_fixed_point(self, rng):
        branches = protocols.purify_branches(PHI, PHI)
        assert sum(b.probability for b in branches if b.kept) == pytest.approx(1.0, abs=TOL)
        for b in branches:
            assert core.fidelity(b.state, PHI) == pytest.approx(1.0, abs=TOL)
        res = protocols.purify(PHI, PHI, rng)
        assert res.kept and core.fidelity(res.state, PHI) == pytest.approx(1.0, abs=TOL)

    def test_bit_flip_detected(self):
        branches = protocols.purify_branches(core.bell_state(Bell.PSI_PLUS), PHI)
        assert sum(b.probability for b in branches if not b.kept) == pytest.approx(1.0, abs=TOL)

    def test_werner_improves(self):
        _, rho = _purify_mixture(0.8)
        f_out = core.density_fidelity(rho, PHI)
        assert 0.8 < f_out <= 1.0

    def test_side_symmetry(self, rng):
        for _ in range(5):
            p1 = core.random_state([core.ATOM, core.ATOM], rng)
            p2 = core.random_state([core.ATOM, core.ATOM], rng)
            swap = lambda r: core.permute(r, [1, 0])
            a = protocols.purify_branches(p1, p2)
            b = protocols.purify_branches(swap(p1), swap(p2))
            pa = sum(x.probability for x in a if x.kept)
            pb = sum(x.probability for x in b if x.kept)
            assert pa == pytest.approx(pb, abs=1e-10)

    def test_rejects_non_pairs(self):
        with pytest.raises(protocols.ProtocolError):
            protocols.purify_branches(core.atom(0), PHI)


class TestBsm:
    @pytest.mark.parametrize("label", list(Bell))
    def test_decodes(self, label):
        assert protocols.bsm_distribution(core.bell_state(label), 0, 1)[label] == pytest.approx(1.0, abs=TOL)
        assert protocols.deterministic_bsm(core.bell_state(label), 0, 1) is label

    def test_00(self, rng):
        probs = protocols.bsm_distribution(core.atoms([1, 0, 0, 0]), 0, 1)
        assert probs[Bell.PHI_PLUS] == pytest.approx(0.5, abs=TOL)
        assert probs[Bell.PHI_MINUS] == pytest.approx(0.5, abs=TOL)
        with pytest.raises(protocols.ProtocolError):
            protocols.deterministic_bsm(core.atoms([1, 0, 0, 0]), 0, 1)
        assert protocols.deterministic_bsm(core.atoms([1, 0, 0, 0]), 0, 1, rng) in (Bell.PHI_PLUS, Bell.PHI_MINUS)

    @pytest.mark.parametrize("label", list(Bell))
    def test_repeated_is_stable(self, label, rng):
        assert protocols.repeated_bsm(core.bell_state(label), 0, 1, 5, rng) == [label] * 5

    def test_repeated_collapses_once(self, rng):
        labels = protocols.repeated_bsm(core.atoms([1, 0, 0, 0]), 0, 1, 6, rng)
        assert len(set(labels)) == 1


class TestTwoSidedPrep:
    def test_amplitudes(self):
        expected = np.kron(core.photon("+").amplitudes, [1, 0, 0, 0])
        np.testing.assert_allclose(protocols.two_sided_prep().amplitudes, expected, atol=TOL)

    def test_photon_plus_and_bsm(self):
        outs = {o.label: o for o in core.measure(protocols.two_sided_prep(), 0)}
        assert outs["+"].probability == pytest.approx(1.0, abs=TOL)
        probs = protocols.bsm_distribution(outs["+"].post_state, 0, 1)
        assert probs[Bell.PHI_PLUS] == pytest.approx(0.5, abs=TOL)
        assert probs[Bell.PHI_MINUS] == pytest.approx(0.5, abs=TOL)

    def test_reduced_populations(self):
        rho = core.partial_trace(protocols.two_sided_prep(), [1, 2])
        assert rho[0, 0].real == pytest.approx(1.0, abs=TOL)
