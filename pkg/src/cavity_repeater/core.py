"""Dense state-vector algebra over small registers of atoms and time-bin photons.

Registers are immutable: every operation returns a new :class:`QuantumRegister`.
Atom qubits have levels ``|0>, |1>``; time-bin photons have levels
``|e>, |l>, |vac>`` so that vacuum and loss branches are ordinary states.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

AMP_TOL = 1e-12
UNITARY_TOL = 1e-10
MAX_SUBSYSTEMS = 8

SQRT1_2 = 1.0 / np.sqrt(2.0)


class Kind(enum.Enum):
    ATOM = 2
    PHOTON = 3

    @property
    def dim(self) -> int:
        return self.value


ATOM = Kind.ATOM
PHOTON = Kind.PHOTON

# level indices
E, L, VAC = 0, 1, 2

# single-qubit matrices
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=complex)
# microwave pi/2 pulse: |0> -> |+>, |1> -> |->
HALF_PI_PULSE = H
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

# photon bases, columns are basis vectors over (e, l, vac)
PM_BASIS = np.array(
    [[SQRT1_2, SQRT1_2, 0], [SQRT1_2, -SQRT1_2, 0], [0, 0, 1]], dtype=complex
)
PM_LABELS = ("+", "-", "vac")
TIME_BIN_BASIS = np.eye(3, dtype=complex)
TIME_BIN_LABELS = ("e", "l", "vac")
ATOM_Z_BASIS = np.eye(2, dtype=complex)
ATOM_Z_LABELS = (0, 1)


class RegisterError(ValueError):
    """Raised for malformed registers, operators or bases."""


@dataclass(frozen=True)
class QuantumRegister:
    kinds: tuple[Kind, ...]
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        kinds = tuple(self.kinds)
        if len(kinds) > MAX_SUBSYSTEMS:
            raise RegisterError(f"register holds at most {MAX_SUBSYSTEMS} subsystems, got {len(kinds)}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1).copy()
        size = int(np.prod([k.dim for k in kinds])) if kinds else 1
        if amps.size != size:
            raise RegisterError(f"expected {size} amplitudes, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(k.dim for k in self.kinds)

    @property
    def n(self) -> int:
        return len(self.kinds)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def amplitude(self, *levels: int) -> complex:
        return complex(self.tensor_view()[tuple(levels)])

    def normalized(self) -> "QuantumRegister":
        nrm = self.norm()
        if nrm < AMP_TOL:
            raise RegisterError("cannot normalize a zero vector")
        return QuantumRegister(self.kinds, self.amplitudes / nrm)


def atom(state: Sequence[complex] | int = 0) -> QuantumRegister:
    """Single atom register; ``state`` is a level index or an amplitude pair."""
    if isinstance(state, (int, np.integer)):
        amps = np.zeros(2, dtype=complex)
        amps[state] = 1.0
    else:
        amps = np.asarray(state, dtype=complex)
    return QuantumRegister((ATOM,), amps)


def photon(state: Sequence[complex] | int | str = E) -> QuantumRegister:
    """Single time-bin photon register. Accepts 'e', 'l', 'vac', '+', '-'."""
    named = {
        "e": [1, 0, 0],
        "l": [0, 1, 0],
        "vac": [0, 0, 1],
        "+": [SQRT1_2, SQRT1_2, 0],
        "-": [SQRT1_2, -SQRT1_2, 0],
    }
    if isinstance(state, str):
        amps = np.asarray(named[state], dtype=complex)
    elif isinstance(state, (int, np.integer)):
        amps = np.zeros(3, dtype=complex)
        amps[state] = 1.0
    else:
        amps = np.asarray(state, dtype=complex)
    return QuantumRegister((PHOTON,), amps)


def atoms(amplitudes: Sequence[complex]) -> QuantumRegister:
    """Multi-atom register from a flat amplitude vector of length 2**k."""
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    k = int(round(np.log2(amps.size)))
    if 2**k != amps.size:
        raise RegisterError("atom register needs 2**k amplitudes")
    return QuantumRegister((ATOM,) * k, amps)


def tensor(*regs: QuantumRegister) -> QuantumRegister:
    if not regs:
        raise RegisterError("tensor of nothing")
    kinds = sum((r.kinds for r in regs), ())
    if len(kinds) > MAX_SUBSYSTEMS:
        raise RegisterError(f"register holds at most {MAX_SUBSYSTEMS} subsystems, got {len(kinds)}")
    amps = regs[0].amplitudes
    for r in regs[1:]:
        amps = np.kron(amps, r.amplitudes)
    return QuantumRegister(kinds, amps)


def _check_targets(reg: QuantumRegister, targets: Sequence[int]) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise RegisterError(f"repeated target indices {targets}")
    for t in targets:
        if not 0 <= t < reg.n:
            raise IndexError(f"subsystem index {t} out of range for {reg.n} subsystems")
    return targets


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(
        u.conj().T @ u, np.eye(u.shape[0]), atol=tol, rtol=0
    )


def apply_operator(reg: QuantumRegister, targets: Sequence[int], op: np.ndarray) -> QuantumRegister:
    """Apply an arbitrary (not necessarily unitary) operator to ``targets``."""
    targets = _check_targets(reg, targets)
    tdims = [reg.dims[t] for t in targets]
    tsize = int(np.prod(tdims))
    op = np.asarray(op, dtype=complex)
    if op.shape != (tsize, tsize):
        raise RegisterError(f"operator shape {op.shape} does not match target dims {tdims}")
    psi = reg.tensor_view()
    op_t = op.reshape(tdims + tdims)
    k = len(targets)
    out = np.tensordot(op_t, psi, axes=(list(range(k, 2 * k)), targets))
    # tensordot puts the target axes first; move them back
    out = np.moveaxis(out, list(range(k)), targets)
    return QuantumRegister(reg.kinds, out.reshape(-1))


def apply_unitary(reg: QuantumRegister, targets: Sequence[int], u: np.ndarray) -> QuantumRegister:
    if not is_unitary(u):
        raise RegisterError("operator is not unitary within 1e-10")
    return apply_operator(reg, targets, u)


def embed_qubit_op(u2: np.ndarray) -> np.ndarray:
    """Lift a 2x2 operator on (e, l) to the photon space, identity on vac."""
    out = np.eye(3, dtype=complex)
    out[:2, :2] = u2
    return out


@dataclass(frozen=True)
class MeasurementOutcome:
    label: object
    probability: float
    post_state: QuantumRegister | None


def _check_basis(basis: np.ndarray, dim: int) -> np.ndarray:
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (dim, dim):
        raise RegisterError(f"basis must be {dim}x{dim}, got {basis.shape}")
    if not is_unitary(basis):
        raise RegisterError("measurement basis is not orthonormal")
    return basis


def measure(
    reg: QuantumRegister,
    target: int,
    basis: np.ndarray | None = None,
    labels: Sequence[object] | None = None,
    *,
    remove: bool = True,
) -> list[MeasurementOutcome]:
    """Enumerate all outcomes of a projective measurement on one subsystem.

    ``basis`` holds the basis vectors as columns (defaults: the +/- basis for
    photons, the 0/1 basis for atoms). Zero-probability outcomes are kept with
    ``post_state=None`` so that the list is always complete. With
    ``remove=True`` the measured subsystem is dropped from the post-state,
    otherwise it is collapsed onto the measured basis vector.
    """
    (target,) = _check_targets(reg, [target])
    kind = reg.kinds[target]
    if basis is None:
        basis, default_labels = (PM_BASIS, PM_LABELS) if kind is PHOTON else (ATOM_Z_BASIS, ATOM_Z_LABELS)
        labels = labels or default_labels
    basis = _check_basis(basis, kind.dim)
    labels = list(labels) if labels is not None else list(range(kind.dim))
    psi = np.moveaxis(reg.tensor_view(), target, 0)
    rest_kinds = reg.kinds[:target] + reg.kinds[target + 1 :]
    outcomes = []
    for j, label in enumerate(labels):
        vec = basis[:, j]
        branch = np.tensordot(vec.conj(), psi, axes=(0, 0))
        prob = float(np.vdot(branch, branch).real)
        if prob < AMP_TOL**2:
            outcomes.append(MeasurementOutcome(label, 0.0, None))
            continue
        branch = branch / np.sqrt(prob)
        if remove:
            post = QuantumRegister(rest_kinds, branch.reshape(-1)) if rest_kinds else None
        else:
            full = np.multiply.outer(vec, branch)
            post = QuantumRegister(reg.kinds, np.moveaxis(full, 0, target).reshape(-1))
        outcomes.append(MeasurementOutcome(label, prob, post))
    return outcomes


def sample(outcomes: Sequence[MeasurementOutcome], rng: np.random.Generator) -> MeasurementOutcome:
    probs = np.array([o.probability for o in outcomes])
    idx = rng.choice(len(outcomes), p=probs / probs.sum())
    return outcomes[idx]


def measure_sampled(
    reg: QuantumRegister,
    target: int,
    rng: np.random.Generator,
    basis: np.ndarray | None = None,
    labels: Sequence[object] | None = None,
    *,
    remove: bool = True,
) -> MeasurementOutcome:
    return sample(measure(reg, target, basis, labels, remove=remove), rng)


def fidelity(reg: QuantumRegister, reference: QuantumRegister) -> float:
    if reg.kinds != reference.kinds:
        raise RegisterError("fidelity needs identical subsystem layouts")
    ov = np.vdot(reference.amplitudes, reg.amplitudes)
    return float(min(1.0, abs(ov) ** 2))


def partial_trace(reg: QuantumRegister, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix over ``keep`` (in the given order)."""
    keep = _check_targets(reg, keep)
    if not keep:
        raise RegisterError("keep must be nonempty")
    traced = [i for i in range(reg.n) if i not in keep]
    psi = np.transpose(reg.tensor_view(), keep + traced)
    kdim = int(np.prod([reg.dims[i] for i in keep]))
    mat = psi.reshape(kdim, -1)
    return mat @ mat.conj().T


def purity(rho: np.ndarray) -> float:
    return float(np.trace(rho @ rho).real)


def density_fidelity(rho: np.ndarray, reference: QuantumRegister) -> float:
    """<ref| rho |ref> for a pure reference."""
    v = reference.amplitudes
    return float(np.vdot(v, rho @ v).real)


def project_onto(reg: QuantumRegister, target: int, vec: Sequence[complex]) -> tuple[float, QuantumRegister | None]:
    """Project one subsystem onto ``vec`` and remove it; returns (probability, post)."""
    (target,) = _check_targets(reg, [target])
    vec = np.asarray(vec, dtype=complex)
    psi = np.moveaxis(reg.tensor_view(), target, 0)
    branch = np.tensordot(vec.conj(), psi, axes=(0, 0))
    prob = float(np.vdot(branch, branch).real)
    rest = reg.kinds[:target] + reg.kinds[target + 1 :]
    if prob < AMP_TOL**2:
        return 0.0, None
    return prob, QuantumRegister(rest, branch.reshape(-1) / np.sqrt(prob))


def extract(reg: QuantumRegister, keep: Sequence[int], tol: float = 1e-9) -> QuantumRegister:
    """Pure state of ``keep`` when it is in a product with the remaining subsystems.

    The global phase of the result is fixed so that its largest amplitude is
    real and positive.
    """
    keep = _check_targets(reg, keep)
    traced = [i for i in range(reg.n) if i not in keep]
    if not traced:
        return reg
    psi = np.transpose(reg.tensor_view(), keep + traced)
    kdim = int(np.prod([reg.dims[i] for i in keep]))
    u, s, _ = np.linalg.svd(psi.reshape(kdim, -1), full_matrices=False)
    if len(s) > 1 and s[1] > tol:
        raise RegisterError(f"subsystems {keep} are entangled with the rest (second Schmidt value {s[1]:.3g})")
    vec = u[:, 0]
    k = np.argmax(np.abs(vec))
    vec = vec * (abs(vec[k]) / vec[k])
    return QuantumRegister(tuple(reg.kinds[i] for i in keep), vec)


def permute(reg: QuantumRegister, order: Sequence[int]) -> QuantumRegister:
    """Reorder subsystems: subsystem ``order[j]`` becomes position ``j``."""
    order = _check_targets(reg, order)
    if sorted(order) != list(range(reg.n)):
        raise RegisterError("order must be a permutation of all subsystems")
    psi = np.transpose(reg.tensor_view(), order)
    return QuantumRegister(tuple(reg.kinds[i] for i in order), psi.reshape(-1))


def set_level(reg: QuantumRegister, target: int, level: int) -> QuantumRegister:
    """Replace a subsystem that is in a product state by the basis level ``level``.

    Raises if the subsystem is entangled with the rest.
    """
    (target,) = _check_targets(reg, [target])
    others = [i for i in range(reg.n) if i != target]
    rest = extract(reg, others) if others else None
    fresh = np.zeros(reg.dims[target], dtype=complex)
    fresh[level] = 1.0
    if rest is None:
        return QuantumRegister(reg.kinds, fresh)
    full = np.moveaxis(np.multiply.outer(fresh, rest.tensor_view()), 0, target)
    return QuantumRegister(reg.kinds, full.reshape(-1))


def random_state(kinds: Sequence[Kind], rng: np.random.Generator) -> QuantumRegister:
    size = int(np.prod([k.dim for k in kinds]))
    v = rng.normal(size=size) + 1j * rng.normal(size=size)
    return QuantumRegister(tuple(kinds), v / np.linalg.norm(v))


# Bell states on two atoms, ordered (first, second)
class Bell(enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"


_BELL_VECTORS = {
    Bell.PHI_PLUS: [1, 0, 0, 1],
    Bell.PHI_MINUS: [1, 0, 0, -1],
    Bell.PSI_PLUS: [0, 1, 1, 0],
    Bell.PSI_MINUS: [0, 1, -1, 0],
}


def bell_state(label: Bell) -> QuantumRegister:
    return atoms(np.asarray(_BELL_VECTORS[label], dtype=complex) * SQRT1_2)
