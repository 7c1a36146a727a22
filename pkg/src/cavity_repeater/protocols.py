"""Repeater protocol state machines built on the photon-atom gates.

Every randomized protocol has an exact enumeration counterpart (``*_branches``)
that returns all measurement branches with their probabilities; the tests and
``verify`` suites use those, the Monte Carlo layers use the sampled versions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import Bell, QuantumRegister, H, X, Z, I2
from .gates import GateNoise, GateResult, controlled_phase, noisy_gate

BellLabel = Bell

# first photon, second photon -> Bell state of B, C
TABLE1 = {
    ("+", "+"): Bell.PHI_PLUS,
    ("+", "-"): Bell.PHI_MINUS,
    ("-", "+"): Bell.PSI_PLUS,
    ("-", "-"): Bell.PSI_MINUS,
}

# Pauli applied at the far node for each decoded Bell state
CORRECTIONS = {
    Bell.PHI_PLUS: ("I", I2),
    Bell.PHI_MINUS: ("Z", Z),
    Bell.PSI_PLUS: ("X", X),
    Bell.PSI_MINUS: ("ZX", Z @ X),
}

# label = (I (x) P) |Phi+>
_BELL_FRAME = {
    Bell.PHI_PLUS: I2,
    Bell.PHI_MINUS: Z,
    Bell.PSI_PLUS: X,
    Bell.PSI_MINUS: X @ Z,
}

_RELABEL = {
    Bell.PHI_PLUS: Bell.PHI_PLUS,
    Bell.PSI_MINUS: Bell.PSI_MINUS,
    Bell.PHI_MINUS: Bell.PSI_PLUS,
    Bell.PSI_PLUS: Bell.PHI_MINUS,
}

# UMZI after the first cavity of the mediated CNOT: |+> -> |l>, |-> -> |e>
UMZI = core.embed_qubit_op(core.SQRT1_2 * np.array([[1, -1], [1, 1]], dtype=complex))

RX_PI = np.array([[0, -1j], [-1j, 0]], dtype=complex)
RY_PI = np.array([[0, -1], [1, 0]], dtype=complex)
# y-axis pi pulse first, then x-axis pi pulse
MINUS_BRANCH_CORRECTION = RX_PI @ RY_PI

# deterministic BSM readout: (control bit, target bit) -> label
BSM_READOUT = {
    (0, 0): Bell.PHI_PLUS,
    (1, 0): Bell.PHI_MINUS,
    (0, 1): Bell.PSI_PLUS,
    (1, 1): Bell.PSI_MINUS,
}

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


class ProtocolError(ValueError):
    pass


class HeraldedFailure(RuntimeError):
    """The photon never reached the detector; the attempt can be repeated."""


def rotate_relabel(label: Bell) -> Bell:
    """Bell label after a pi/2 pulse on both atoms."""
    return _RELABEL[label]


def _append_photon(reg: QuantumRegister, state: str = "+") -> tuple[QuantumRegister, int]:
    return core.tensor(reg, core.photon(state)), reg.n


def _drop_vacuum_photon(reg: QuantumRegister, p: int) -> QuantumRegister:
    prob, post = core.project_onto(reg, p, [0, 0, 1])
    if prob < 1 - 1e-9:
        raise ProtocolError("photon is not in vacuum")
    return post


# ---------------------------------------------------------------- generation


class GenerationResult(enum.Enum):
    ENTANGLED = "entangled"
    VACUUM_NO_OP = "vacuum_no_op"
    MIXED_FAILURE = "mixed_failure"
    UNDETECTED_RETRYABLE = "undetected_retryable"


@dataclass(frozen=True)
class GenerationOutcome:
    result: GenerationResult
    attempts_used: int
    bell: Bell | None = None
    state: QuantumRegister | None = None  # atoms (A, B), trajectory state
    density: np.ndarray | None = None  # atoms (A, B), ensemble state where relevant
    detector: str | None = None


def initial_atom() -> QuantumRegister:
    """Atom after the pi/2 pulse on |0>."""
    return core.apply_unitary(core.atom(0), [0], core.HALF_PI_PULSE)


def generation_pre_measurement(atoms: QuantumRegister | None = None) -> QuantumRegister:
    """Joint (A, B, photon) state after reflection from both cavities, no loss."""
    if atoms is None:
        atoms = core.tensor(initial_atom(), initial_atom())
    reg, p = _append_photon(atoms)
    reg = controlled_phase(reg, 0, p)
    return controlled_phase(reg, 1, p)


def herald_generation(reg: QuantumRegister, p: int = 2) -> list[tuple[str, float, QuantumRegister]]:
    """All detector branches of a generation round with the bit flip on B applied."""
    out = []
    for o in core.measure(reg, p):
        if o.probability == 0.0:
            continue
        post = o.post_state
        if o.label == "-":
            post = core.apply_unitary(post, [1], X)
        out.append((o.label, o.probability, post))
    return out


def generate_entanglement(
    noise_a: GateNoise,
    noise_b: GateNoise,
    eta_link: float,
    eta_d: float,
    eta_s: float,
    rng: np.random.Generator,
    *,
    atoms: QuantumRegister | None = None,
) -> GenerationOutcome:
    """One photon's worth of heralded entanglement generation between A and B.

    ``eta_link`` is the survival probability from cavity A into cavity B
    (fiber attenuation and both fiber-cavity couplings). ``atoms`` resumes
    from an :attr:`GenerationResult.UNDETECTED_RETRYABLE` state.
    """
    for name, v in (("eta_link", eta_link), ("eta_d", eta_d), ("eta_s", eta_s)):
        if not 0.0 <= v <= 1.0:
            raise ProtocolError(f"{name} must be in [0, 1], got {v}")
    if atoms is None:
        atoms = core.tensor(initial_atom(), initial_atom())
    if rng.random() >= eta_s:
        return GenerationOutcome(GenerationResult.VACUUM_NO_OP, 1, state=atoms)

    reg, p = _append_photon(atoms)
    g = noisy_gate(reg, 0, p, noise_a, rng)
    if g.result is GateResult.HERALDED_LOSS:
        return GenerationOutcome(GenerationResult.VACUUM_NO_OP, 1, state=_drop_vacuum_photon(g.register, p))
    reg = g.register

    in_flight = core.partial_trace(reg, [0, 1])
    if rng.random() >= eta_link:
        return GenerationOutcome(GenerationResult.MIXED_FAILURE, 1, density=in_flight)
    g = noisy_gate(reg, 1, p, noise_b, rng)
    if g.result is GateResult.HERALDED_LOSS:
        return GenerationOutcome(GenerationResult.MIXED_FAILURE, 1, density=in_flight)
    reg = g.register

    o = core.measure_sampled(reg, p, rng)
    if rng.random() >= eta_d:
        # the environment absorbs the photon behind the interferometer
        return GenerationOutcome(
            GenerationResult.UNDETECTED_RETRYABLE, 1, state=o.post_state, density=core.partial_trace(reg, [0, 1])
        )
    post = o.post_state
    if o.label == "-":
        post = core.apply_unitary(post, [1], X)
    return GenerationOutcome(GenerationResult.ENTANGLED, 1, bell=Bell.PHI_PLUS, state=post, detector=o.label)


# ------------------------------------------------------------------ swapping


def parity_check_branches(reg: QuantumRegister, atom_b: int, atom_c: int) -> list[core.MeasurementOutcome]:
    """Send a |+> photon to C then B and enumerate its +/- detection."""
    reg, p = _append_photon(reg)
    reg = controlled_phase(reg, atom_c, p)
    reg = controlled_phase(reg, atom_b, p)
    return [o for o in core.measure(reg, p) if o.label != "vac"]


def parity_check(reg: QuantumRegister, atom_b: int, atom_c: int, rng: np.random.Generator) -> tuple[str, QuantumRegister]:
    o = core.sample(parity_check_branches(reg, atom_b, atom_c), rng)
    return o.label, o.post_state


@dataclass(frozen=True)
class SwapEfficiencies:
    eta_s: float = 1.0
    eta_c: float = 1.0
    eta_d: float = 1.0

    @property
    def photon_success(self) -> float:
        return self.eta_s * self.eta_c**2 * self.eta_d


@dataclass(frozen=True)
class SwapRecord:
    first_outcome: str
    second_outcome: str
    bell: Bell
    correction: str
    photons_spent: int


@dataclass(frozen=True)
class SwapOutcome:
    swapped: bool
    photons_spent: int
    record: SwapRecord | None = None
    state: QuantumRegister | None = None  # atoms (A, D)
    photon_attempts: tuple[int, ...] = field(default=())


def _frame_correction(labels: tuple[Bell, Bell]) -> np.ndarray:
    return _BELL_FRAME[labels[0]] @ _BELL_FRAME[labels[1]]


def d_correction(bell: Bell, input_labels: tuple[Bell, Bell] = (Bell.PHI_PLUS, Bell.PHI_PLUS)) -> np.ndarray:
    """Unitary applied at D: the decoded-state correction, plus the input pairs' known Pauli frame."""
    return CORRECTIONS[bell][1] @ _frame_correction(input_labels)


def _finish_swap(reg, first, second, spent, idx, input_labels) -> tuple[SwapRecord, QuantumRegister]:
    a, b, c, d = idx
    bell = TABLE1[(first, second)]
    reg = core.apply_unitary(reg, [d], d_correction(bell, input_labels))
    record = SwapRecord(first, second, bell, CORRECTIONS[bell][0], spent)
    return record, core.extract(reg, [a, d])


def _swap_photon(reg, b, c, noise, eta, n_s, rng):
    """Send parity photons until one clicks; returns (label, register, photons used)."""
    for attempt in range(1, n_s + 1):
        if rng.random() >= eta.eta_s * eta.eta_c**2:
            continue
        reg_p, p = _append_photon(reg)
        g = noisy_gate(reg_p, c, p, noise, rng)
        if g.result is GateResult.HERALDED_LOSS:
            continue
        g = noisy_gate(g.register, b, p, noise, rng, loss_after=True)
        if g.result is GateResult.HERALDED_LOSS:
            reg = _drop_vacuum_photon(g.register, p)
            continue
        o = core.measure_sampled(g.register, p, rng)
        if rng.random() >= eta.eta_d:
            reg = o.post_state  # photon absorbed behind the interferometer
            continue
        return o.label, o.post_state, attempt
    return None, reg, n_s


def swap_entanglement(
    reg: QuantumRegister,
    noise: GateNoise,
    eta: SwapEfficiencies,
    n_s: int,
    rng: np.random.Generator,
    *,
    idx: tuple[int, int, int, int] = (0, 1, 2, 3),
    input_labels: tuple[Bell, Bell] = (Bell.PHI_PLUS, Bell.PHI_PLUS),
) -> SwapOutcome:
    """Swap pairs (A, B) and (C, D) into (A, D) with two sequential parity photons."""
    if n_s < 1:
        raise ProtocolError("n_s must be >= 1")
    if reg.n != 4 or any(k is not core.ATOM for k in reg.kinds):
        raise ProtocolError("swap expects a register of four atoms (A, B, C, D)")
    a, b, c, d = idx
    first, reg, used1 = _swap_photon(reg, b, c, noise, eta, n_s, rng)
    if first is None:
        return SwapOutcome(False, used1, photon_attempts=(used1,))
    reg = core.apply_unitary(reg, [b], core.HALF_PI_PULSE)
    reg = core.apply_unitary(reg, [c], core.HALF_PI_PULSE)
    second, reg, used2 = _swap_photon(reg, b, c, noise, eta, n_s, rng)
    if second is None:
        return SwapOutcome(False, used1 + used2, photon_attempts=(used1, used2))
    record, post = _finish_swap(reg, first, second, used1 + used2, idx, input_labels)
    return SwapOutcome(True, used1 + used2, record, post, (used1, used2))


@dataclass(frozen=True)
class SwapBranch:
    record: SwapRecord
    probability: float
    state: QuantumRegister


def _undetected_branches(reg, b, c, k):
    """Branches after ``k`` photons that interacted with both atoms and were lost.

    The environment keeps each lost photon's time bin; all records are enumerated.
    """
    branches = [(1.0, reg)]
    for _ in range(k):
        nxt = []
        for prob, r in branches:
            r_p, p = _append_photon(r)
            r_p = controlled_phase(r_p, c, p)
            r_p = controlled_phase(r_p, b, p)
            for o in core.measure(r_p, p, core.TIME_BIN_BASIS, core.TIME_BIN_LABELS):
                if o.probability > 0:
                    nxt.append((prob * o.probability, o.post_state))
        branches = nxt
    return branches


def swap_branches(
    reg: QuantumRegister,
    *,
    idx: tuple[int, int, int, int] = (0, 1, 2, 3),
    input_labels: tuple[Bell, Bell] = (Bell.PHI_PLUS, Bell.PHI_PLUS),
    undetected: tuple[int, int] = (0, 0),
) -> list[SwapBranch]:
    """Exact enumeration of a noiseless swap.

    ``undetected`` gives the number of photons lost after interacting, before
    the click of the first and second parity photon respectively; probabilities
    are conditional on that loss pattern.
    """
    a, b, c, d = idx
    out = []
    for p0, r0 in _undetected_branches(reg, b, c, undetected[0]):
        for o1 in parity_check_branches(r0, b, c):
            if o1.probability == 0:
                continue
            r1 = core.apply_unitary(o1.post_state, [b], core.HALF_PI_PULSE)
            r1 = core.apply_unitary(r1, [c], core.HALF_PI_PULSE)
            for p1, r2 in _undetected_branches(r1, b, c, undetected[1]):
                for o2 in parity_check_branches(r2, b, c):
                    if o2.probability == 0:
                        continue
                    spent = undetected[0] + undetected[1] + 2
                    record, post = _finish_swap(o2.post_state, o1.label, o2.label, spent, idx, input_labels)
                    out.append(SwapBranch(record, p0 * o1.probability * p1 * o2.probability, post))
    return out


# ---------------------------------------------------------- mediated CNOT


def mediated_cnot_branches(
    reg: QuantumRegister, atom1: int, atom2: int, *, hadamard_wrap: bool = False, correct: bool = True
) -> list[core.MeasurementOutcome]:
    """Enumerate the photon outcomes of the single-photon mediated CNOT.

    Without ``hadamard_wrap`` the result is a CNOT with ``atom1`` as control
    in the 0/1 basis and ``atom2`` as target in the +/- basis (a controlled-Z
    in the computational basis).
    """
    if hadamard_wrap:
        reg = core.apply_unitary(reg, [atom2], H)
    reg, p = _append_photon(reg)
    reg = controlled_phase(reg, atom1, p)
    reg = core.apply_unitary(reg, [p], UMZI)
    # the appendix algebra puts the sign of the second cavity on |1, e>
    reg = controlled_phase(reg, atom2, p, mirrored=True)
    out = []
    for o in core.measure(reg, p):
        if o.label == "vac":
            continue
        post = o.post_state
        if post is not None and correct and o.label == "-":
            post = core.apply_unitary(post, [atom1], MINUS_BRANCH_CORRECTION)
        if post is not None and hadamard_wrap:
            post = core.apply_unitary(post, [atom2], H)
        out.append(core.MeasurementOutcome(o.label, o.probability, post))
    return out


def mediated_cnot_kraus(outcome: str, *, hadamard_wrap: bool = False, correct: bool = True) -> np.ndarray:
    """4x4 operator on (atom1, atom2) realized by one photon outcome, rescaled to be unitary."""
    out = np.zeros((4, 4), dtype=complex)
    for col in range(4):
        basis = np.zeros(4, dtype=complex)
        basis[col] = 1.0
        reg, p = _append_photon(core.atoms(basis))
        if hadamard_wrap:
            reg = core.apply_unitary(reg, [1], H)
        reg = controlled_phase(reg, 0, p)
        reg = core.apply_unitary(reg, [p], UMZI)
        reg = controlled_phase(reg, 1, p, mirrored=True)
        vec = core.PM_BASIS[:, 0 if outcome == "+" else 1]
        branch = np.tensordot(vec.conj(), np.moveaxis(reg.tensor_view(), p, 0), axes=(0, 0))
        post = core.QuantumRegister((core.ATOM, core.ATOM), np.sqrt(2) * branch.reshape(-1))
        if correct and outcome == "-":
            post = core.apply_operator(post, [0], MINUS_BRANCH_CORRECTION)
        if hadamard_wrap:
            post = core.apply_operator(post, [1], H)
        out[:, col] = post.amplitudes
    return out


def mediated_cnot(
    reg: QuantumRegister,
    atom1: int,
    atom2: int,
    rng: np.random.Generator,
    *,
    hadamard_wrap: bool = False,
    transmission: float = 1.0,
) -> QuantumRegister:
    if rng.random() >= transmission:
        raise HeraldedFailure("mediating photon lost")
    return core.sample(mediated_cnot_branches(reg, atom1, atom2, hadamard_wrap=hadamard_wrap), rng).post_state


# -------------------------------------------------------------- purification


@dataclass(frozen=True)
class PurifyBranch:
    kept: bool
    probability: float
    state: QuantumRegister | None  # (A1, B1) when kept


def purify_branches(pair1: QuantumRegister, pair2: QuantumRegister) -> list[PurifyBranch]:
    """Enumerate bilateral mediated CNOTs (A1->A2, B1->B2) and the A2/B2 readout."""
    for pair in (pair1, pair2):
        if pair.kinds != (core.ATOM, core.ATOM):
            raise ProtocolError("purification expects two-atom pair registers")
    reg = core.tensor(pair1, pair2)  # A1, B1, A2, B2
    out = []
    for oa in mediated_cnot_branches(reg, 0, 2, hadamard_wrap=True):
        for ob in mediated_cnot_branches(oa.post_state, 1, 3, hadamard_wrap=True):
            for ma in core.measure(ob.post_state, 2):
                if ma.probability == 0:
                    continue
                for mb in core.measure(ma.post_state, 2):  # B2 moved to index 2
                    prob = oa.probability * ob.probability * ma.probability * mb.probability
                    if prob == 0:
                        continue
                    kept = ma.label == mb.label
                    out.append(PurifyBranch(kept, prob, mb.post_state if kept else None))
    return out


@dataclass(frozen=True)
class PurifyResult:
    kept: bool
    state: QuantumRegister | None


def purify(pair1: QuantumRegister, pair2: QuantumRegister, rng: np.random.Generator) -> PurifyResult:
    reg = core.tensor(pair1, pair2)
    reg = mediated_cnot(reg, 0, 2, rng, hadamard_wrap=True)
    reg = mediated_cnot(reg, 1, 3, rng, hadamard_wrap=True)
    ma = core.measure_sampled(reg, 2, rng)
    mb = core.measure_sampled(ma.post_state, 2, rng)
    if ma.label != mb.label:
        return PurifyResult(False, None)
    return PurifyResult(True, mb.post_state)


# ------------------------------------------------------------ deterministic BSM


def bsm_distribution(reg: QuantumRegister, atom1: int, atom2: int) -> dict[Bell, float]:
    """CNOT (atom1 -> atom2), Hadamard on atom1, then 0/1 readout of both."""
    reg = core.apply_unitary(reg, [atom1, atom2], CNOT)
    reg = core.apply_unitary(reg, [atom1], H)
    probs = dict.fromkeys(Bell, 0.0)
    for m1 in core.measure(reg, atom1, remove=False):
        if m1.probability == 0:
            continue
        for m2 in core.measure(m1.post_state, atom2, remove=False):
            probs[BSM_READOUT[(m1.label, m2.label)]] += m1.probability * m2.probability
    return probs


def deterministic_bsm(
    reg: QuantumRegister, atom1: int, atom2: int, rng: np.random.Generator | None = None
) -> Bell:
    probs = bsm_distribution(reg, atom1, atom2)
    for label, prob in probs.items():
        if prob > 1 - 1e-12:
            return label
    if rng is None:
        raise ProtocolError("BSM outcome is not deterministic; pass a random generator to sample it")
    labels = list(probs)
    p = np.array([probs[k] for k in labels])
    return labels[rng.choice(len(labels), p=p / p.sum())]


def repeated_bsm(reg: QuantumRegister, atom1: int, atom2: int, rounds: int, rng: np.random.Generator) -> list[Bell]:
    """Measure, then undo the BSM circuit so the pair is handed back in the measured Bell state."""
    labels = []
    for _ in range(rounds):
        reg = core.apply_unitary(reg, [atom1, atom2], CNOT)
        reg = core.apply_unitary(reg, [atom1], H)
        m1 = core.measure_sampled(reg, atom1, rng, remove=False)
        m2 = core.measure_sampled(m1.post_state, atom2, rng, remove=False)
        labels.append(BSM_READOUT[(m1.label, m2.label)])
        reg = core.apply_unitary(m2.post_state, [atom1], H)
        reg = core.apply_unitary(reg, [atom1, atom2], CNOT)
    return labels


def two_sided_prep() -> QuantumRegister:
    """(photon, A, B) state after one photon is reflected by two two-sided cavities."""
    phi = core.bell_state(Bell.PHI_PLUS).amplitudes + core.bell_state(Bell.PHI_MINUS).amplitudes
    return core.tensor(core.photon("+"), core.atoms(core.SQRT1_2 * phi))
