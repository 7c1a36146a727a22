"""Exhaustive noiseless enumeration suites for gates and protocols."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import core, gates, protocols
from .core import E, L, Bell

TOL = 1e-12

# expected action of the gate on |atom, bin> (time-bin basis)
EXPECTED_CZ = {(0, "e"): -1, (1, "e"): -1, (0, "l"): -1, (1, "l"): +1}
# expected action on |atom, +/->: (sign, output label)
EXPECTED_CNOT = {(0, "+"): (-1, "+"), (0, "-"): (-1, "-"), (1, "+"): (-1, "-"), (1, "-"): (-1, "+")}


@dataclass(frozen=True)
class Check:
    entry: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteResult:
    name: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def add(self, entry: str, ok: bool, detail: str = ""):
        self.checks.append(Check(entry, bool(ok), detail))

    def summary(self) -> str:
        n_ok = sum(c.passed for c in self.checks)
        line = f"{'PASS' if self.passed else 'FAIL'} {self.name}: {n_ok}/{len(self.checks)} checks"
        for c in self.failures:
            line += f"\n    failed {c.entry}" + (f" ({c.detail})" if c.detail else "")
        return line


def _close(a, b) -> bool:
    return bool(np.max(np.abs(np.asarray(a) - np.asarray(b))) <= TOL)


def _phase_free(u: np.ndarray) -> np.ndarray:
    k = np.argmax(np.abs(u))
    return u * (abs(u.flat[k]) / u.flat[k])


def gate_truth_tables() -> SuiteResult:
    s = SuiteResult("gate truth tables")
    levels = {"e": E, "l": L}
    for (a, b), sign in EXPECTED_CZ.items():
        reg = core.tensor(core.atom(a), core.photon(levels[b]))
        out = gates.controlled_phase(reg, 0, 1)
        s.add(f"controlled_phase |{a},{b}>", _close(out.amplitudes, sign * reg.amplitudes), f"expected sign {sign:+d}")
    for (a, b), (sign, b_out) in EXPECTED_CNOT.items():
        reg = core.tensor(core.atom(a), core.photon(b))
        ref = core.tensor(core.atom(a), core.photon(b_out))
        out = gates.photon_atom_cnot(reg, 0, 1)
        s.add(
            f"photon_atom_cnot |{a},{b}>",
            _close(out.amplitudes, sign * ref.amplitudes),
            f"expected {sign:+d}|{a},{b_out}>",
        )
    return s


def generation() -> SuiteResult:
    s = SuiteResult("entanglement generation")
    reg = protocols.generation_pre_measurement()
    phi_p = core.bell_state(Bell.PHI_PLUS).amplitudes
    psi_p = core.bell_state(Bell.PSI_PLUS).amplitudes
    plus, minus = core.PM_BASIS[:, 0], core.PM_BASIS[:, 1]
    expected = core.SQRT1_2 * (np.kron(phi_p, plus) + np.kron(psi_p, minus))
    s.add("pre-measurement state", _close(reg.amplitudes, expected))
    target = core.bell_state(Bell.PHI_PLUS)
    for label, prob, post in protocols.herald_generation(reg):
        s.add(f"detector {label} -> PhiPlus", abs(core.fidelity(post, target) - 1) <= TOL and abs(prob - 0.5) <= TOL)
    return s


def swap_table1() -> SuiteResult:
    s = SuiteResult("swap decoding table")
    target = core.bell_state(Bell.PHI_PLUS)
    reg = core.tensor(target, target)
    seen = {}
    for br in protocols.swap_branches(reg):
        key = (br.record.first_outcome, br.record.second_outcome)
        seen[key] = br
    for key, label in protocols.TABLE1.items():
        br = seen.get(key)
        ok = br is not None and br.record.bell is label and abs(core.fidelity(br.state, target) - 1) <= TOL
        s.add(f"parity outcomes {key[0]}{key[1]} -> {label.value}", ok)
    return s


def swap_completeness() -> SuiteResult:
    s = SuiteResult("swap completeness")
    target = core.bell_state(Bell.PHI_PLUS)
    for la, lb in itertools.product(Bell, Bell):
        reg = core.tensor(core.bell_state(la), core.bell_state(lb))
        branches = protocols.swap_branches(reg, input_labels=(la, lb))
        total = sum(b.probability for b in branches)
        worst = min(core.fidelity(b.state, target) for b in branches)
        s.add(f"inputs {la.value},{lb.value}", abs(total - 1) <= 1e-10 and abs(worst - 1) <= 1e-10)
    return s


def mediated_cnot() -> SuiteResult:
    s = SuiteResult("mediated CNOT")
    for outcome in "+-":
        u = protocols.mediated_cnot_kraus(outcome, hadamard_wrap=True)
        s.add(f"outcome {outcome}", _close(_phase_free(u), protocols.CNOT))
    return s


def deterministic_bsm() -> SuiteResult:
    s = SuiteResult("deterministic BSM")
    for label in Bell:
        probs = protocols.bsm_distribution(core.bell_state(label), 0, 1)
        s.add(f"input {label.value}", abs(probs[label] - 1) <= TOL)
    return s


def two_sided_prep() -> SuiteResult:
    s = SuiteResult("two-sided preparation")
    reg = protocols.two_sided_prep()
    plus = {o.label: o for o in core.measure(reg, 0)}["+"]
    s.add("photon +", abs(plus.probability - 1) <= TOL)
    probs = protocols.bsm_distribution(plus.post_state, 0, 1)
    s.add("BSM PhiPlus 1/2", abs(probs[Bell.PHI_PLUS] - 0.5) <= TOL)
    s.add("BSM PhiMinus 1/2", abs(probs[Bell.PHI_MINUS] - 0.5) <= TOL)
    return s


SUITES = (
    gate_truth_tables,
    generation,
    swap_table1,
    swap_completeness,
    mediated_cnot,
    deterministic_bsm,
    two_sided_prep,
)


def run_all() -> list[SuiteResult]:
    results = []
    for suite in SUITES:
        try:
            results.append(suite())
        except Exception as exc:  # a broken gate can make later protocol steps impossible
            r = SuiteResult(suite.__name__.replace("_", " "))
            r.add("suite raised", False, f"{type(exc).__name__}: {exc}")
            results.append(r)
    return results
