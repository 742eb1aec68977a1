"""Entanglement measures for two- and three-qubit states.

Array functions (suffix ``_array``) accept stacks of density matrices or
kets with arbitrary leading batch dimensions; the state-level wrappers
below them take :class:`~entangle_lab.qcore.PureState` or
:class:`~entangle_lab.qcore.DensityMatrix`.

Conventions
-----------
* tangle = squared Wootters concurrence.
* negativity of a bipartition = 2 * |sum of negative eigenvalues of the
  partial transpose|, so a Bell pair scores 1.
* tripartite negativity = geometric mean of the three one-vs-two
  negativities.
* three-tangle = 4 det(rho_A) - tau_AB - tau_AC, pure states only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .qcore import (
    DensityMatrix,
    PureState,
    State,
    StateError,
    as_density,
    linear_entropy,
    ptrace,
    ptranspose,
    purify_rows,
)

PURE_TOL = 1e-6
EIG_FLOOR = 1e-14

_SY = np.array([[0, -1j], [1j, 0]])
_SYSY = np.kron(_SY, _SY)

THREE_QUBIT_LABELS = ("c", "e", "f")
PAIRS = ((0, 1), (0, 2), (1, 2))


# ---------------------------------------------------------------------------
# array kernels


def concurrence_from_factor(a: np.ndarray) -> np.ndarray:
    """Concurrence of ``rho = a a^dag`` for factors of shape ``(..., 4, r)``.

    The square roots of the spectrum of ``rho (sy sy) rho* (sy sy)`` are
    the singular values of ``a^T (sy sy) a``, so no square roots of tiny,
    noisy eigenvalues are taken.
    """
    m = np.swapaxes(a, -1, -2) @ _SYSY @ a
    lam = np.linalg.svd(m, compute_uv=False)  # descending
    lam = np.concatenate([lam, np.zeros(lam.shape[:-1] + (max(0, 4 - lam.shape[-1]),))], axis=-1)
    c = lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3]
    return np.clip(c, 0, 1)


def concurrence_array(rho: np.ndarray) -> np.ndarray:
    """Wootters concurrence of two-qubit density matrices, shape ``(..., 4, 4)``.

    Eigenvalues below ``EIG_FLOOR`` are treated as exact zeros before the
    factorization ``rho = a a^dag``.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    w, v = np.linalg.eigh(rho)
    w = np.where(w < EIG_FLOOR, 0.0, w)
    return concurrence_from_factor(v * np.sqrt(w)[..., None, :])


def tangle_array(rho: np.ndarray) -> np.ndarray:
    return concurrence_array(rho) ** 2


def negativity_array(rho: np.ndarray, num_qubits: int, part) -> np.ndarray:
    ev = np.linalg.eigvalsh(ptranspose(rho, num_qubits, part))
    neg = 2 * np.abs(np.sum(np.clip(ev, None, 0), axis=-1))
    # round-off negativity would survive the cube root in N3 as ~1e-6
    return np.where(neg > EIG_FLOOR * 100, neg, 0.0)


def tripartite_negativity_array(rho: np.ndarray) -> np.ndarray:
    negs = [negativity_array(rho, 3, [q]) for q in range(3)]
    return np.cbrt(negs[0] * negs[1] * negs[2])


def pair_tangles_array(rho: np.ndarray) -> np.ndarray:
    """Residual tangles of the (0,1), (0,2), (1,2) reduced states; shape ``(..., 3)``."""
    return np.stack([tangle_array(ptrace(rho, 3, pair)) for pair in PAIRS], axis=-1)


def pair_tangles_from_kets(psi: np.ndarray) -> np.ndarray:
    """Residual tangles of three-qubit kets ``(..., 8)``, pairs ordered as ``PAIRS``.

    The reduced state of a pair is ``a a^dag`` with ``a`` the ket reshaped
    to (pair, traced qubit), which keeps the result exact for rank-two
    reductions.
    """
    t = np.asarray(psi, dtype=np.complex128).reshape(psi.shape[:-1] + (2, 2, 2))
    nb = t.ndim - 3
    out = []
    for i, j in PAIRS:
        k = 3 - i - j
        axes = list(range(nb)) + [nb + i, nb + j, nb + k]
        a = t.transpose(axes).reshape(psi.shape[:-1] + (4, 2))
        out.append(concurrence_from_factor(a) ** 2)
    return np.stack(out, axis=-1)


def three_tangle_array(psi: np.ndarray, focus: int = 0) -> np.ndarray:
    """Residual three-tangle of three-qubit kets, shape ``(..., 8)``."""
    psi = np.asarray(psi, dtype=np.complex128)
    rho_a = ptrace(purify_rows(psi), 3, [focus])
    tau_a_bc = 4 * np.real(np.linalg.det(rho_a))
    tangles = pair_tangles_from_kets(psi)
    involved = [n for n, pair in enumerate(PAIRS) if focus in pair]
    return np.clip(tau_a_bc - tangles[..., involved[0]] - tangles[..., involved[1]], 0, 1)


def pure_profile_array(psi: np.ndarray) -> dict[str, np.ndarray]:
    """N3, pair tangles and three-tangle for a stack of three-qubit kets."""
    psi = np.asarray(psi, dtype=np.complex128)
    rho = purify_rows(psi)
    tangles = pair_tangles_from_kets(psi)
    rho_a = ptrace(rho, 3, [0])
    tau3 = 4 * np.real(np.linalg.det(rho_a)) - tangles[..., 0] - tangles[..., 1]
    return {
        "n3": tripartite_negativity_array(rho),
        "tau2": tangles,
        "tau2_min": tangles.min(axis=-1),
        "tau2_avg": tangles.mean(axis=-1),
        "tau3": np.clip(tau3, 0, 1),
    }


# ---------------------------------------------------------------------------
# state-level measures


def _density_of(state: State, num_qubits: int) -> DensityMatrix:
    rho = as_density(state)
    if rho.num_qubits != num_qubits:
        raise StateError(f"expected a {num_qubits}-qubit state, got {rho.num_qubits} qubits")
    return rho


def concurrence(state: State) -> float:
    return float(concurrence_array(_density_of(state, 2).matrix))


def tangle(state: State) -> float:
    return concurrence(state) ** 2


def negativity(state: State, part) -> float:
    """Bipartite negativity with ``part`` (labels) on one side."""
    rho = as_density(state)
    idx = [rho.labels.index(p) for p in part]
    if not idx or len(idx) >= rho.num_qubits:
        raise StateError("part must be a non-empty proper subset of the labels")
    return float(negativity_array(rho.matrix, rho.num_qubits, idx))


def tripartite_negativity(state: State) -> float:
    return float(tripartite_negativity_array(_density_of(state, 3).matrix))


def _as_pure_vector(state: State) -> np.ndarray:
    if isinstance(state, PureState):
        return state.amplitudes
    w, v = np.linalg.eigh(state.matrix)
    if w[-1] < 1 - PURE_TOL:
        raise StateError(f"three-tangle needs a pure state (purity {state.purity():.6f})")
    return v[:, -1]


def three_tangle(state: State, focus: int = 0) -> float:
    if state.num_qubits != 3:
        raise StateError("three_tangle needs a three-qubit state")
    return float(three_tangle_array(_as_pure_vector(state), focus))


def is_pure(state: State) -> bool:
    return isinstance(state, PureState) or state.purity() > 1 - PURE_TOL


# ---------------------------------------------------------------------------
# reference states


def w_vector() -> np.ndarray:
    """(|110> + |101> - |011>)/sqrt(3)."""
    v = np.zeros(8, dtype=np.complex128)
    v[0b110] = v[0b101] = 1
    v[0b011] = -1
    return v / math.sqrt(3)


def ideal_amplitudes(theta: float, printed: bool = False) -> np.ndarray:
    """Unnormalized output amplitudes of the tunable family at wave-plate angle ``theta``.

    With ``c = cos 2t`` and ``s = sin 2t``::

        c^2/(2 sqrt2) |000> + k c s |100> + s^2/(2 sqrt2) (|110> + |101> - |011>)

    where ``k = 1/sqrt2`` for the state produced by the Fock-space circuit.
    ``printed=True`` gives ``k = 1``; the circuit does not produce that
    state, it is kept for comparison only.
    ``theta`` may be an array; amplitudes run along the last axis.
    """
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    k = 1.0 if printed else 1 / math.sqrt(2)
    v = np.zeros(theta.shape + (8,), dtype=np.complex128)
    v[..., 0b000] = c * c / (2 * math.sqrt(2))
    v[..., 0b100] = k * c * s
    v[..., 0b110] = v[..., 0b101] = s * s / (2 * math.sqrt(2))
    v[..., 0b011] = -s * s / (2 * math.sqrt(2))
    return v


def ideal_state(theta: float, printed: bool = False) -> PureState:
    return PureState.from_unnormalized(ideal_amplitudes(theta, printed), THREE_QUBIT_LABELS)[0]


_BELL = {
    "psi+": (0b01, 0b10, 1),
    "psi-": (0b01, 0b10, -1),
    "phi+": (0b00, 0b11, 1),
    "phi-": (0b00, 0b11, -1),
}


def bell_state(name: str = "psi+", labels=("a", "b")) -> PureState:
    try:
        i, j, sign = _BELL[name]
    except KeyError:
        raise StateError(f"unknown Bell state {name!r}") from None
    v = np.zeros(4, dtype=np.complex128)
    v[i], v[j] = 1, sign
    return PureState(v / math.sqrt(2), labels)


def mems(c: float, labels=("a", "b")) -> DensityMatrix:
    """Maximally entangled mixed state with concurrence ``c``.

    Basis order |00>, |01>, |10>, |11>::

        c >= 2/3:  [[c/2, 0, 0, c/2], [0, 1-c, 0, 0], [0, 0, 0, 0], [c/2, 0, 0, c/2]]
        c <  2/3:  [[1/3, 0, 0, c/2], [0, 1/3, 0, 0], [0, 0, 0, 0], [c/2, 0, 0, 1/3]]
    """
    if not 0 <= c <= 1:
        raise StateError(f"MEMS concurrence must lie in [0, 1], got {c}")
    g = c / 2 if c >= 2 / 3 else 1 / 3
    rho = np.zeros((4, 4), dtype=np.complex128)
    rho[0, 0] = rho[3, 3] = g
    rho[0, 3] = rho[3, 0] = c / 2
    rho[1, 1] = 1 - 2 * g
    return DensityMatrix(rho, labels)


def werner(p: float, labels=("a", "b")) -> DensityMatrix:
    """p |psi-><psi-| + (1 - p) I/4."""
    if not 0 <= p <= 1:
        raise StateError(f"Werner weight must lie in [0, 1], got {p}")
    psi = bell_state("psi-").amplitudes
    rho = p * np.outer(psi, psi.conj()) + (1 - p) * np.eye(4) / 4
    return DensityMatrix(rho, labels)


def reference_state(name: str, **params) -> State:
    """Named reference state.

    ``W``, ``GHZ``, ``product-zero`` (|000>), ``zero-bell`` (|0> x psi+) and
    ``tunable`` (``theta=``) are three-qubit kets on labels c, e, f;
    ``MEMS`` (``c=``), ``Werner`` (``p=``) and the Bell states ``psi+``,
    ``psi-``, ``phi+``, ``phi-`` are two-qubit states.
    """
    key = name.lower()
    labels = THREE_QUBIT_LABELS
    if key == "w":
        return PureState(w_vector(), labels)
    if key == "ghz":
        v = np.zeros(8)
        v[0] = v[7] = 1 / math.sqrt(2)
        return PureState(v, labels)
    if key in ("product-zero", "zero"):
        v = np.zeros(8)
        v[0] = 1
        return PureState(v, labels)
    if key in ("zero-bell", "zero-tensor-bell"):
        v = np.kron([1, 0], bell_state("psi+").amplitudes)
        return PureState(v, labels)
    if key == "tunable":
        theta = params.get("theta")
        if theta is None or not 0 <= theta <= math.pi / 4 + 1e-12:
            raise StateError("tunable state needs theta in [0, pi/4]")
        return ideal_state(theta, printed=params.get("printed", False))
    if key == "mems":
        return mems(params.get("c", 1.0))
    if key == "werner":
        return werner(params.get("p", 1.0))
    if key in _BELL:
        return bell_state(key)
    raise StateError(f"unknown reference state {name!r}")


def closed_form_residual_tangle(theta):
    """Pairwise residual tangle of the tunable family, ``4 sin^4(2t) / (cos(4t) - 2)^2``.

    Accepts a scalar or an array of angles in ``[0, pi/4]``.
    """
    t = np.asarray(theta, dtype=float)
    if np.any((t < -1e-12) | (t > math.pi / 4 + 1e-12)):
        raise StateError(f"theta must lie in [0, pi/4], got {theta}")
    out = 4 * np.sin(2 * t) ** 4 / (np.cos(4 * t) - 2) ** 2
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# witness and report


def w_witness(state: State) -> float:
    """Expectation of the W-state witness ``(2/3) I - |W><W|``; negative means detected."""
    rho = _density_of(state, 3)
    w = w_vector()
    return float(2 / 3 - np.vdot(w, rho.matrix @ w).real)


@dataclass
class EntanglementReport:
    tangle_per_pair: dict[str, float]
    tau2_min: float
    tau2_avg: float
    three_tangle: Optional[float]
    tripartite_negativity: float
    linear_entropy: float
    fidelity_vs_target: Optional[float] = None
    witness_value: Optional[float] = None
    error_bars: Optional[dict[str, float]] = field(default=None)

    def scalar_measures(self) -> dict[str, float]:
        """Flat map of every numeric measure (used for error bars and CSV rows)."""
        out = {f"tau2_{k}": v for k, v in self.tangle_per_pair.items()}
        out.update(
            tau2_min=self.tau2_min,
            tau2_avg=self.tau2_avg,
            n3=self.tripartite_negativity,
            s_linear=self.linear_entropy,
        )
        if self.three_tangle is not None:
            out["tau3"] = self.three_tangle
        if self.fidelity_vs_target is not None:
            out["fidelity"] = self.fidelity_vs_target
        if self.witness_value is not None:
            out["witness"] = self.witness_value
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def robustness_profile(state: State, target: State | None = None) -> EntanglementReport:
    """Full entanglement report of a three-qubit state.

    The witness value is always included; the fidelity only when a
    ``target`` is given. The three-tangle is ``None`` for mixed inputs.
    """
    from .qcore import fidelity

    rho = _density_of(state, 3)
    if isinstance(state, PureState):
        tangles = pair_tangles_from_kets(state.amplitudes)
    else:
        tangles = pair_tangles_array(rho.matrix)
    labels = rho.labels
    per_pair = {
        labels[i] + labels[j]: float(t) for (i, j), t in zip(PAIRS, tangles)
    }
    tau3 = three_tangle(state) if is_pure(state) else None
    return EntanglementReport(
        tangle_per_pair=per_pair,
        tau2_min=float(tangles.min()),
        tau2_avg=float(tangles.mean()),
        three_tangle=tau3,
        tripartite_negativity=tripartite_negativity(rho),
        linear_entropy=linear_entropy(rho),
        fidelity_vs_target=None if target is None else fidelity(rho, target),
        witness_value=w_witness(rho),
    )


def pair_labels(labels=THREE_QUBIT_LABELS) -> list[str]:
    return [labels[i] + labels[j] for i, j in itertools.combinations(range(3), 2)]
