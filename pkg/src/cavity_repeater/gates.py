"""Photon-atom gates for an atom in a single-sided cavity.

The reflection of a time-bin photon off the cavity, together with the
microwave shelving pulses, acts on (atom, photon) as a controlled phase.
In the photon's +/- basis the same operation is a CNOT with the atom as
control, so :func:`photon_atom_cnot` and :func:`controlled_phase` apply the
same physical operation; they differ only in which basis their truth table
is written.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import core
from .core import ATOM, PHOTON, E, L, VAC, QuantumRegister

# Signs picked up by |atom, bin>; vacuum is untouched.
CZ_SIGNS = {(0, E): -1, (1, E): -1, (0, L): -1, (1, L): +1}

# Shelving pulses bracketing the early bin instead of the late one.
MIRRORED_CZ_SIGNS = {(0, E): -1, (1, E): +1, (0, L): -1, (1, L): -1}

TYPICAL_COOPERATIVITY = (100.0, 1000.0)


class GateError(ValueError):
    pass


def _phase_matrix(signs: dict) -> np.ndarray:
    # ordering (atom, photon level) with photon levels (e, l, vac)
    diag = []
    for a in (0, 1):
        for p in (E, L, VAC):
            diag.append(1 if p == VAC else signs[(a, p)])
    return np.diag(np.asarray(diag, dtype=complex))


def _check_pair(reg: QuantumRegister, atom: int, photon: int):
    for idx in (atom, photon):
        if not 0 <= idx < reg.n:
            raise IndexError(f"subsystem index {idx} out of range")
    if reg.kinds[atom] is not ATOM or reg.kinds[photon] is not PHOTON:
        raise GateError(f"expected (atom, photon) at ({atom}, {photon}), got {reg.kinds[atom]}, {reg.kinds[photon]}")


def controlled_phase(reg: QuantumRegister, atom: int, photon: int, *, mirrored: bool = False) -> QuantumRegister:
    _check_pair(reg, atom, photon)
    op = _phase_matrix(MIRRORED_CZ_SIGNS if mirrored else CZ_SIGNS)
    return core.apply_operator(reg, [atom, photon], op)


def photon_atom_cnot(reg: QuantumRegister, atom: int, photon: int) -> QuantumRegister:
    """Atom-controlled NOT on the photon's +/- qubit (overall sign -1)."""
    return controlled_phase(reg, atom, photon)


def controlled_phase_matrix() -> np.ndarray:
    """4x4 matrix of the gate on (atom) x (e, l)."""
    return np.diag([CZ_SIGNS[(a, p)] for a in (0, 1) for p in (E, L)]).astype(complex)


def photon_atom_cnot_matrix() -> np.ndarray:
    """4x4 matrix of the gate on (atom) x (+, -), read off register amplitudes."""
    basis = {"+": core.photon("+"), "-": core.photon("-")}
    out = np.zeros((4, 4), dtype=complex)
    for col, (a, s) in enumerate((a, s) for a in (0, 1) for s in "+-"):
        reg = photon_atom_cnot(core.tensor(core.atom(a), basis[s]), 0, 1)
        for row, (a2, s2) in enumerate((a2, s2) for a2 in (0, 1) for s2 in "+-"):
            ref = core.tensor(core.atom(a2), basis[s2])
            out[row, col] = np.vdot(ref.amplitudes, reg.amplitudes)
    return out


class PhotonEncoding(enum.Enum):
    TIME_BIN = ("e", "l")
    LINEAR_POL = ("H", "V")
    CIRCULAR_POL = ("R", "L")


# native level order -> canonical (e, l) order
_TO_CANONICAL = {
    PhotonEncoding.TIME_BIN: np.eye(2, dtype=complex),
    PhotonEncoding.LINEAR_POL: np.eye(2, dtype=complex),  # H -> e, V -> l
    PhotonEncoding.CIRCULAR_POL: np.array([[0, 1], [1, 0]], dtype=complex),  # L -> e, R -> l
}

# Native-basis sign tables of the polarization gates.
VARIANT_SIGNS = {
    # only |0>|V> is reflected off the mirror without entering the cavity
    PhotonEncoding.LINEAR_POL: {(0, 0): 1, (0, 1): -1, (1, 0): 1, (1, 1): 1},
    # only |1>|R> avoids the pi shift
    PhotonEncoding.CIRCULAR_POL: {(0, 0): -1, (0, 1): -1, (1, 0): 1, (1, 1): -1},
}


def encoding_matrix(src: PhotonEncoding, dst: PhotonEncoding) -> np.ndarray:
    """3x3 photon relabeling from ``src`` amplitudes to ``dst`` amplitudes."""
    for enc in (src, dst):
        if not isinstance(enc, PhotonEncoding):
            raise GateError(f"unknown photon encoding {enc!r}")
    m = _TO_CANONICAL[dst].conj().T @ _TO_CANONICAL[src]
    return core.embed_qubit_op(m)


def encode_variant(reg: QuantumRegister, photon: int, src: PhotonEncoding, dst: PhotonEncoding) -> QuantumRegister:
    if reg.kinds[photon] is not PHOTON:
        raise GateError(f"subsystem {photon} is not a photon")
    return core.apply_unitary(reg, [photon], encoding_matrix(src, dst))


def variant_gate_matrix(encoding: PhotonEncoding) -> np.ndarray:
    if encoding is PhotonEncoding.TIME_BIN:
        return controlled_phase_matrix()
    signs = VARIANT_SIGNS[encoding]
    return np.diag([signs[(a, p)] for a in (0, 1) for p in (0, 1)]).astype(complex)


def variant_gate(reg: QuantumRegister, atom: int, photon: int, encoding: PhotonEncoding) -> QuantumRegister:
    """Apply the gate of ``encoding`` with photon amplitudes in that encoding's basis."""
    _check_pair(reg, atom, photon)
    m = variant_gate_matrix(encoding)
    op = np.eye(6, dtype=complex)
    idx = [0, 1, 3, 4]  # (atom, e/l) inside (atom, e/l/vac)
    op[np.ix_(idx, idx)] = m
    return core.apply_operator(reg, [atom, photon], op)


@dataclass(frozen=True)
class CavityParams:
    g: float
    kappa: float
    gamma: float
    t_p: float | None = None

    def __post_init__(self):
        for name in ("g", "kappa", "gamma"):
            if not getattr(self, name) > 0:
                raise GateError(f"{name} must be positive, got {getattr(self, name)}")


def cooperativity(p: CavityParams) -> float:
    return 4.0 * p.g**2 / (p.kappa * p.gamma)


def cooperativity_regime(c: float) -> str:
    lo, hi = TYPICAL_COOPERATIVITY
    if c < lo:
        return "below-typical"
    if c > hi:
        return "above-typical"
    return "typical"


@dataclass(frozen=True)
class GateNoise:
    p_CN: float = 1.0
    epsilon_CN: float = 0.0
    t_CN: float = 10e-6

    def __post_init__(self):
        if not 0.0 <= self.p_CN <= 1.0:
            raise GateError(f"p_CN must be in [0, 1], got {self.p_CN}")
        if not 0.0 <= self.epsilon_CN < 1.0:
            raise GateError(f"epsilon_CN must be in [0, 1), got {self.epsilon_CN}")


NOISELESS = GateNoise()


class GateResult(enum.Enum):
    SUCCESS = "success"
    HERALDED_LOSS = "heralded_loss"
    SILENT_ERROR = "silent_error"


@dataclass(frozen=True)
class GateOutcome:
    result: GateResult
    register: QuantumRegister
    pauli: str = "I"


def discard_photon(reg: QuantumRegister, photon: int, rng: np.random.Generator) -> QuantumRegister:
    """Lose the photon to the environment and leave ``|vac>`` in its place.

    The environment keeps the photon's time bin, so the loss channel is
    unravelled by sampling a time-bin record before resetting the level.
    """
    out = core.measure_sampled(reg, photon, rng, core.TIME_BIN_BASIS, core.TIME_BIN_LABELS, remove=False)
    return core.set_level(out.post_state, photon, VAC)


def noisy_gate(
    reg: QuantumRegister,
    atom: int,
    photon: int,
    noise: GateNoise,
    rng: np.random.Generator,
    *,
    mirrored: bool = False,
    loss_after: bool = False,
) -> GateOutcome:
    """Controlled phase with heralded failure and silent atom errors.

    Failure loses the photon before it interacts (``loss_after=False``) or on
    its way out of the cavity (``loss_after=True``); either way nothing is
    known until the detector stays dark. A silent error is a uniformly random
    X, Y or Z on the atom after an otherwise ideal gate.
    """
    _check_pair(reg, atom, photon)
    u = rng.random()
    if u >= noise.p_CN:
        if loss_after:
            reg = controlled_phase(reg, atom, photon, mirrored=mirrored)
        return GateOutcome(GateResult.HERALDED_LOSS, discard_photon(reg, photon, rng))
    reg = controlled_phase(reg, atom, photon, mirrored=mirrored)
    if u < noise.p_CN * noise.epsilon_CN:
        name = "XYZ"[rng.integers(3)]
        return GateOutcome(GateResult.SILENT_ERROR, core.apply_unitary(reg, [atom], core.PAULIS[name]), name)
    return GateOutcome(GateResult.SUCCESS, reg)
