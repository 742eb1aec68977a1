"""Dense qubit-state primitives.

States are small (at most a handful of qubits), so everything is a plain
``numpy`` array wrapped in an immutable container that carries the qubit
labels. Basis ordering is big-endian over the labels: for labels
``("c", "e", "f")`` the index of ``|q_c q_e q_f>`` is ``4*q_c + 2*q_e + q_f``.

The array-level helpers (``ptrace``, ``ptranspose``) accept leading batch
dimensions so that the entanglement measures can be mapped over large
collections of states without Python loops.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
SQRT_FLOOR = 1e-13


class StateError(ValueError):
    """Raised when a state or operator violates its invariants."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


def _check_labels(labels: Sequence[str], num_qubits: int) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    if len(labels) != num_qubits:
        raise StateError(f"expected {num_qubits} labels, got {len(labels)}")
    if len(set(labels)) != len(labels):
        raise StateError(f"duplicate qubit labels {labels}")
    return labels


def _default_labels(n: int) -> tuple[str, ...]:
    return tuple(f"q{i}" for i in range(n))


def _num_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if n < 1 or 2**n != dim:
        raise StateError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class PureState:
    """Normalized ket on ``num_qubits`` labelled qubits."""

    amplitudes: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        n = _num_qubits(amps.size)
        if not np.all(np.isfinite(amps)):
            raise StateError("amplitudes must be finite")
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > NORM_TOL:
            raise StateError(f"state norm {norm!r} differs from 1")
        labels = self.labels or _default_labels(n)
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "labels", _check_labels(labels, n))

    @classmethod
    def from_unnormalized(cls, vector, labels=()) -> tuple["PureState", float]:
        """Normalize ``vector`` and return ``(state, norm**2)``.

        The squared norm is the success probability when ``vector`` is a
        post-selected branch of a larger state.
        """
        vector = np.asarray(vector, dtype=np.complex128).reshape(-1)
        norm2 = float(np.vdot(vector, vector).real)
        if norm2 <= 0:
            raise StateError("cannot normalize the zero vector")
        return cls(vector / np.sqrt(norm2), tuple(labels)), norm2

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def to_density(self) -> "DensityMatrix":
        psi = self.amplitudes
        return DensityMatrix(np.outer(psi, psi.conj()), self.labels)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator on labelled qubits."""

    matrix: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=np.complex128)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise StateError(f"density matrix must be square, got {rho.shape}")
        n = _num_qubits(rho.shape[0])
        if not np.all(np.isfinite(rho)):
            raise StateError("density matrix entries must be finite")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > HERMITIAN_TOL:
            raise StateError(f"not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(rho).real
        if abs(tr - 1) > TRACE_TOL:
            raise StateError(f"trace {tr!r} differs from 1")
        lmin = np.linalg.eigvalsh(rho).min()
        if lmin < -PSD_TOL:
            raise StateError(f"not positive semidefinite (min eigenvalue {lmin:.3g})")
        labels = self.labels or _default_labels(n)
        object.__setattr__(self, "matrix", _frozen(rho))
        object.__setattr__(self, "labels", _check_labels(labels, n))

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.matrix, self.matrix)))

    def to_density(self) -> "DensityMatrix":
        return self


State = PureState | DensityMatrix


def as_density(state: State) -> DensityMatrix:
    return state.to_density()


# ---------------------------------------------------------------------------
# array-level helpers (support leading batch dimensions)


def ptrace(rho: np.ndarray, num_qubits: int, keep: Sequence[int]) -> np.ndarray:
    """Partial trace of ``rho`` (shape ``(..., 2**n, 2**n)``) onto qubit indices ``keep``.

    Kept qubits appear in the order given by ``keep``.
    """
    keep = list(keep)
    n = num_qubits
    batch = rho.shape[:-2]
    t = rho.reshape(batch + (2,) * (2 * n))
    nb = len(batch)
    traced = [q for q in range(n) if q not in keep]
    # einsum subscripts: batch axes, ket axes, bra axes
    letters = "abcdefghijklmnopqrstuvwxyz"
    bsub = "".join(letters[i] for i in range(nb))
    ket = [letters[nb + i] for i in range(n)]
    bra = [letters[nb + n + i] for i in range(n)]
    for q in traced:
        bra[q] = ket[q]
    out = bsub + "".join(ket[q] for q in keep) + "".join(bra[q] for q in keep)
    red = np.einsum(bsub + "".join(ket) + "".join(bra) + "->" + out, t)
    d = 2 ** len(keep)
    return red.reshape(batch + (d, d))


def ptranspose(rho: np.ndarray, num_qubits: int, part: Iterable[int]) -> np.ndarray:
    """Transpose the tensor factors listed in ``part``; batch dimensions allowed."""
    n = num_qubits
    batch = rho.shape[:-2]
    nb = len(batch)
    t = rho.reshape(batch + (2,) * (2 * n))
    axes = list(range(nb + 2 * n))
    for q in part:
        axes[nb + q], axes[nb + n + q] = axes[nb + n + q], axes[nb + q]
    return t.transpose(axes).reshape(rho.shape)


def purify_rows(psi: np.ndarray) -> np.ndarray:
    """Batched ``|psi><psi|`` for row vectors of shape ``(..., d)``."""
    return psi[..., :, None] * psi[..., None, :].conj()


# ---------------------------------------------------------------------------
# state-level operations


def _indices(labels: Sequence[str], wanted: Iterable[str]) -> list[int]:
    idx = []
    for w in wanted:
        if w not in labels:
            raise StateError(f"unknown qubit label {w!r}; have {tuple(labels)}")
        idx.append(labels.index(w))
    return idx


def tensor(a: State, b: State) -> State:
    """Kronecker product; labels are concatenated."""
    if type(a) is not type(b):
        raise StateError("tensor requires two states of the same kind")
    labels = a.labels + b.labels
    if isinstance(a, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes), labels)
    return DensityMatrix(np.kron(a.matrix, b.matrix), labels)


def partial_trace(rho: State, keep: Iterable[str]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep``.

    The output keeps the original label order regardless of the order of
    ``keep``.
    """
    rho = as_density(rho)
    keep = set(keep)
    if not keep:
        raise StateError("keep must be non-empty")
    idx = sorted(_indices(rho.labels, keep))
    red = ptrace(rho.matrix, rho.num_qubits, idx)
    red = 0.5 * (red + red.conj().T)
    return DensityMatrix(red, tuple(rho.labels[i] for i in idx))


def partial_transpose(rho: State, part: Iterable[str]) -> np.ndarray:
    """Partial transpose over the qubits in ``part``. Returns a bare matrix."""
    rho = as_density(rho)
    part = set(part)
    if not part or len(part) >= rho.num_qubits:
        raise StateError("part must be a non-empty proper subset of the labels")
    return ptranspose(rho.matrix, rho.num_qubits, _indices(rho.labels, part))


def _floor(w: np.ndarray) -> np.ndarray:
    # eigenvalues at round-off level would otherwise leak ~1e-8 through sqrt
    return np.where(w > SQRT_FLOOR * max(w.max(), 1.0), w, 0.0)


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    return (v * np.sqrt(_floor(w))) @ v.conj().T


def fidelity(a: State, b: State) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``."""
    if a.dim != b.dim:
        raise StateError(f"dimension mismatch {a.dim} vs {b.dim}")
    if isinstance(a, PureState) and isinstance(b, PureState):
        return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    if isinstance(a, PureState):
        a, b = b, a
    if isinstance(b, PureState):
        psi = b.amplitudes
        val = np.vdot(psi, a.matrix @ psi).real
        return float(np.clip(val, 0.0, 1.0))
    sa = _sqrt_psd(a.matrix)
    inner = sa @ b.matrix @ sa
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(min(np.sum(np.sqrt(_floor(w))) ** 2, 1.0))


def linear_entropy(rho: State, normalized: bool = True) -> float:
    """Linear entropy ``1 - Tr rho^2``, scaled by ``d/(d-1)`` when ``normalized``.

    The normalized form lies in ``[0, 1]`` for every dimension.
    """
    rho = as_density(rho)
    s = 1.0 - rho.purity()
    if normalized:
        d = rho.dim
        s *= d / (d - 1)
    return float(max(s, 0.0))


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise StateError(f"unitary must be square, got {u.shape}")
    dev = np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0])))
    if dev > tol:
        raise StateError(f"matrix is not unitary (deviation {dev:.3g})")
    return u


def local_operator(unitaries: Sequence[np.ndarray]) -> np.ndarray:
    op = np.ones((1, 1), dtype=np.complex128)
    for u in unitaries:
        op = np.kron(op, u)
    return op


def apply_local_unitaries(state: State, unitaries: Sequence[np.ndarray]) -> State:
    """Apply one 2x2 unitary per qubit, in label order."""
    if len(unitaries) != state.num_qubits:
        raise StateError(f"need {state.num_qubits} unitaries, got {len(unitaries)}")
    for u in unitaries:
        if np.shape(u) != (2, 2):
            raise StateError("local unitaries must be 2x2")
        check_unitary(u)
    op = local_operator(unitaries)
    if isinstance(state, PureState):
        psi = op @ state.amplitudes
        return PureState(psi / np.linalg.norm(psi), state.labels)
    rho = op @ state.matrix @ op.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T), state.labels)


def basis_state(bits: str, labels: Sequence[str] = ()) -> PureState:
    """Computational basis ket from a bit string such as ``"010"``."""
    vec = np.zeros(2 ** len(bits), dtype=np.complex128)
    vec[int(bits, 2)] = 1
    return PureState(vec, tuple(labels))


# ---------------------------------------------------------------------------
# JSON interchange: {"labels": [...], "kind": "pure"|"density", "data": [[re, im], ...]}


def state_to_dict(state: State) -> dict:
    if isinstance(state, PureState):
        kind, data = "pure", state.amplitudes
    else:
        kind, data = "density", state.matrix.reshape(-1)
    return {
        "labels": list(state.labels),
        "kind": kind,
        "data": [[float(z.real), float(z.imag)] for z in data],
    }


def state_from_dict(obj: dict) -> State:
    try:
        labels = tuple(obj["labels"])
        kind = obj["kind"]
        data = np.array([complex(re, im) for re, im in obj["data"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise StateError(f"malformed state record: {exc}") from exc
    if kind == "pure":
        return PureState(data, labels)
    if kind == "density":
        d = int(round(np.sqrt(data.size)))
        if d * d != data.size:
            raise StateError("density data length is not a perfect square")
        return DensityMatrix(data.reshape(d, d), labels)
    raise StateError(f"unknown state kind {kind!r}")


def save_state(state: State, path) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_dict(state), fh, indent=1)
        fh.write("\n")


def load_state(path) -> State:
    with open(path) as fh:
        return state_from_dict(json.load(fh))
