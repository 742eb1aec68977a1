"""Over-complete polarization tomography: simulated counts and reconstruction.

Every qubit is analysed in the six Pauli eigenstates H, V, D, A, R, L, giving
``6**n`` product projectors (216 for three qubits, 36 for two). Settings are
ordered lexicographically over ``"HVDARL"`` with the first qubit slowest.

Reconstruction fits ``M = T^dag T`` (``T`` lower triangular with a real
diagonal) to the counts with the weighted least-squares objective::

    sum_k (n_k - Tr(M P_k))**2 / max(n_k, 1)

The fitted flux is ``Tr M`` and the state estimate is ``M / Tr M``, so it is
positive semidefinite and unit-trace by construction.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import measures
from .qcore import (
    DensityMatrix,
    PureState,
    State,
    StateError,
    apply_local_unitaries,
    as_density,
    fidelity,
    linear_entropy,
    partial_trace,
)
from .rng import parallel_map, task_rng

ANALYZERS = "HVDARL"
_S = 1 / math.sqrt(2)
ANALYZER_VECTORS = {
    "H": np.array([1, 0], dtype=np.complex128),
    "V": np.array([0, 1], dtype=np.complex128),
    "D": np.array([_S, _S], dtype=np.complex128),
    "A": np.array([_S, -_S], dtype=np.complex128),
    "R": np.array([_S, 1j * _S], dtype=np.complex128),
    "L": np.array([_S, -1j * _S], dtype=np.complex128),
}
# 0.1 Hz fourfold rate over an 80 minute iteration
DEFAULT_FLUX = 480.0


class TomographyError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectorSetting:
    analyzers: tuple[str, ...]

    def __post_init__(self):
        bad = [a for a in self.analyzers if a not in ANALYZER_VECTORS]
        if bad:
            raise TomographyError(f"unknown analyzer settings {bad}")

    @property
    def vector(self) -> np.ndarray:
        v = np.ones(1, dtype=np.complex128)
        for a in self.analyzers:
            v = np.kron(v, ANALYZER_VECTORS[a])
        return v

    @property
    def projector(self) -> DensityMatrix:
        return PureState(self.vector).to_density()

    def __str__(self):
        return ",".join(self.analyzers)


def build_projector_set(num_qubits: int) -> list[ProjectorSetting]:
    if num_qubits not in (2, 3):
        raise TomographyError(f"only 2 or 3 qubits supported, got {num_qubits}")
    return [ProjectorSetting(s) for s in itertools.product(ANALYZERS, repeat=num_qubits)]


def _setting_matrix(settings: Sequence[ProjectorSetting]) -> np.ndarray:
    """Projector kets as columns, shape ``(d, K)``."""
    return np.stack([s.vector for s in settings], axis=1)


@dataclass
class MeasurementRecord:
    settings: list[ProjectorSetting]
    counts: np.ndarray
    iteration: int = 0
    flux: float = float("nan")
    labels: tuple[str, ...] = ()
    noiseless: bool = False

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != (len(self.settings),):
            raise TomographyError("one count per setting required")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise TomographyError("counts must be finite and non-negative")
        if not self.noiseless and np.any(counts != np.round(counts)):
            raise TomographyError("counts must be integers")
        self.counts = counts
        n = len(self.settings[0].analyzers) if self.settings else 0
        if not self.labels:
            self.labels = tuple(measures.THREE_QUBIT_LABELS[:n]) if n == 3 else tuple(f"q{i}" for i in range(n))

    @property
    def num_qubits(self) -> int:
        return len(self.settings[0].analyzers)

    def __add__(self, other: "MeasurementRecord") -> "MeasurementRecord":
        if [s.analyzers for s in self.settings] != [s.analyzers for s in other.settings]:
            raise TomographyError("cannot combine records with different settings")
        return MeasurementRecord(
            self.settings,
            self.counts + other.counts,
            iteration=max(self.iteration, other.iteration),
            flux=self.flux + other.flux,
            labels=self.labels,
            noiseless=self.noiseless and other.noiseless,
        )

    def with_counts(self, counts) -> "MeasurementRecord":
        return MeasurementRecord(self.settings, counts, self.iteration, self.flux, self.labels)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["setting_index", "qubit_settings", "count", "iteration"])
            for k, (s, n) in enumerate(zip(self.settings, self.counts)):
                w.writerow([k, str(s), int(n) if not self.noiseless else repr(float(n)), self.iteration])

    @classmethod
    def from_csv(cls, path, labels=()) -> "MeasurementRecord":
        """Read a counts file; rows with the same setting are summed across iterations."""
        rows = {}
        order = []
        last_iter = 0
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = tuple(row["qubit_settings"].split(","))
                if key not in rows:
                    rows[key] = 0.0
                    order.append(key)
                rows[key] += float(row["count"])
                last_iter = max(last_iter, int(row.get("iteration") or 0))
        if not order:
            raise TomographyError(f"no counts in {path}")
        settings = [ProjectorSetting(k) for k in order]
        counts = np.array([rows[k] for k in order])
        noiseless = bool(np.any(counts != np.round(counts)))
        return cls(settings, counts, last_iter, labels=tuple(labels), noiseless=noiseless)


def expected_counts(rho: State, settings: Sequence[ProjectorSetting], flux: float) -> np.ndarray:
    """Mean counts ``flux * Tr(rho P_k)``."""
    rho = as_density(rho)
    phi = _setting_matrix(settings)
    probs = np.einsum("ik,ij,jk->k", phi.conj(), rho.matrix, phi).real
    return flux * np.clip(probs, 0, None)


def _poisson(means: np.ndarray, seed: int, *keys: int) -> np.ndarray:
    # one generator per setting index so each count depends only on (seed, keys, index)
    return np.array(
        [task_rng(seed, *keys, k).poisson(m) if m > 0 else 0 for k, m in enumerate(means)],
        dtype=float,
    )


def simulate_counts(rho: State, settings: Sequence[ProjectorSetting], flux: float,
                    seed: int, iteration: int = 0) -> MeasurementRecord:
    """Poisson counts with mean ``flux * Tr(rho P_k)`` for each setting."""
    if not flux > 0:
        raise TomographyError(f"flux must be positive, got {flux}")
    rho = as_density(rho)
    means = expected_counts(rho, settings, flux)
    counts = _poisson(means, seed, iteration)
    return MeasurementRecord(list(settings), counts, iteration, flux, rho.labels)


def noiseless_record(rho: State, settings: Sequence[ProjectorSetting], flux: float) -> MeasurementRecord:
    rho = as_density(rho)
    return MeasurementRecord(list(settings), expected_counts(rho, settings, flux), 0, flux,
                             rho.labels, noiseless=True)


# ---------------------------------------------------------------------------
# reconstruction


def _tril_indices(d: int):
    return np.tril_indices(d, -1)


def params_to_t(x: np.ndarray, d: int) -> np.ndarray:
    """Real vector of length ``d*d`` -> lower-triangular ``T`` with real diagonal."""
    t = np.zeros((d, d), dtype=np.complex128)
    t[np.diag_indices(d)] = x[:d]
    rows, cols = _tril_indices(d)
    m = rows.size
    t[rows, cols] = x[d:d + m] + 1j * x[d + m:]
    return t


def t_to_params(t: np.ndarray) -> np.ndarray:
    d = t.shape[0]
    rows, cols = _tril_indices(d)
    off = t[rows, cols]
    return np.concatenate([np.real(np.diag(t)), off.real, off.imag])


def _grad_to_params(g: np.ndarray) -> np.ndarray:
    d = g.shape[0]
    rows, cols = _tril_indices(d)
    off = g[rows, cols]
    return np.concatenate([np.real(np.diag(g)), off.real, off.imag])


def lower_factor(m: np.ndarray) -> np.ndarray:
    """Lower-triangular ``T`` with ``T^dag T = m`` for positive definite ``m``."""
    p = np.eye(m.shape[0])[::-1]
    chol = np.linalg.cholesky(p @ m @ p)  # p m p = L L^dag
    return p @ chol.conj().T @ p


class _Objective:
    def __init__(self, phi: np.ndarray, counts: np.ndarray, kind: str = "lsq"):
        self.phi = phi
        self.counts = counts
        self.weights = 1.0 / np.maximum(counts, 1.0)
        self.kind = kind
        self.d = phi.shape[0]

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        t = params_to_t(x, self.d)
        tphi = t @ self.phi
        pred = np.sum(np.abs(tphi) ** 2, axis=0)
        if self.kind == "lsq":
            r = pred - self.counts
            val = float(np.sum(self.weights * r * r))
            g = 2 * self.weights * r
        else:
            p = np.maximum(pred, 1e-300)
            val = float(np.sum(pred - self.counts * np.log(p)))
            g = 1 - self.counts / p
        # dL/dM = sum_k g_k P_k ; dL/dT = 2 T (dL/dM)
        dm = (self.phi * g) @ self.phi.conj().T
        return val, _grad_to_params(2 * t @ dm)


@dataclass
class ReconstructionResult:
    rho: DensityMatrix
    objective_value: float
    iterations_used: int
    converged: bool
    fitted_flux: float
    t_matrix: np.ndarray = field(repr=False)


def linear_inversion(record: MeasurementRecord) -> np.ndarray:
    """Unconstrained Hermitian ``M`` solving ``Tr(M P_k) ~ n_k`` by least squares."""
    phi = _setting_matrix(record.settings)
    d = phi.shape[0]
    # Tr(M P_k) = sum_ij M_ij conj(phi_ik) phi_jk ; basis of Hermitian matrices
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=np.complex128)
        e[i, i] = 1
        basis.append(e)
    for i, j in zip(*_tril_indices(d)):
        e = np.zeros((d, d), dtype=np.complex128)
        e[i, j] = e[j, i] = 1
        basis.append(e)
        e = np.zeros((d, d), dtype=np.complex128)
        e[i, j], e[j, i] = 1j, -1j
        basis.append(e)
    design = np.array([np.einsum("ik,ij,jk->k", phi.conj(), b, phi).real for b in basis]).T
    if np.linalg.matrix_rank(design) < d * d:
        raise TomographyError("settings are not informationally complete")
    w = 1 / np.sqrt(np.maximum(record.counts, 1.0))
    coef = np.linalg.lstsq(design * w[:, None], record.counts * w, rcond=None)[0]
    return np.tensordot(coef, np.array(basis), axes=1)


def _initial_points(record: MeasurementRecord, starts: int, seed: int,
                    initial: Optional[np.ndarray]) -> list[np.ndarray]:
    d = 2 ** record.num_qubits
    flux0 = max(record.counts.sum() / 3 ** record.num_qubits, 1.0)
    points = []
    if initial is not None:
        points.append(t_to_params(initial))
    m = linear_inversion(record)
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.clip(w, 0, None) + 1e-6 * flux0 / d
    points.append(t_to_params(lower_factor((v * w) @ v.conj().T)))
    rng = task_rng(seed, 0xC0FFEE)
    wanted = max(starts, 1) + (initial is not None)
    while len(points) < wanted:
        noise = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        t = np.sqrt(flux0 / d) * np.tril(np.eye(d) + 0.1 * noise)
        t[np.diag_indices(d)] = np.abs(np.diag(t))
        points.append(t_to_params(t))
    return points


def reconstruct(record: MeasurementRecord, starts: int = 5, seed: int = 0,
                initial: Optional[np.ndarray] = None, objective: str = "lsq",
                maxiter: int = 5000) -> ReconstructionResult:
    """Physical density matrix from a measurement record.

    Runs L-BFGS from the linear-inversion estimate plus ``starts - 1``
    identity-plus-noise points (and ``initial``, a ``T`` matrix, when
    given) and keeps the lowest objective. ``objective="likelihood"``
    switches to the Poisson negative log-likelihood.
    """
    if objective not in ("lsq", "likelihood"):
        raise TomographyError(f"unknown objective {objective!r}")
    phi = _setting_matrix(record.settings)
    d = phi.shape[0]
    raw = _Objective(phi, record.counts, objective)
    # optimize over T / sqrt(flux0) with the objective averaged over settings
    scale = math.sqrt(max(record.counts.sum() / 3 ** record.num_qubits, 1.0))
    norm = len(record.settings)

    def fun(y):
        val, grad = raw(y * scale)
        return val / norm, grad * (scale / norm)

    best = None
    for x0 in _initial_points(record, starts, seed, initial):
        res = minimize(fun, x0 / scale, jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "ftol": 1e-12, "gtol": 1e-8, "maxcor": 30})
        if best is None or res.fun < best.fun:
            best = res
    t = params_to_t(best.x * scale, d)
    m = t.conj().T @ t
    flux = float(np.trace(m).real)
    rho = m / flux
    rho = 0.5 * (rho + rho.conj().T)
    gnorm = float(np.linalg.norm(best.jac))
    converged = bool(best.success or gnorm < 1e-8)
    return ReconstructionResult(
        rho=DensityMatrix(rho, record.labels),
        objective_value=float(best.fun * norm),
        iterations_used=int(best.nit),
        converged=converged,
        fitted_flux=flux,
        t_matrix=t,
    )


# ---------------------------------------------------------------------------
# analysis helpers


def state_measures(rho: DensityMatrix, target: State | None = None) -> dict[str, float]:
    """Flat measure map for a two- or three-qubit estimate."""
    if rho.num_qubits == 3:
        return measures.robustness_profile(rho, target).scalar_measures()
    out = {"tau2": measures.tangle(rho), "s_linear": linear_entropy(rho)}
    if target is not None:
        out["fidelity"] = fidelity(rho, target)
    return out


def iterative_tomography(rho_true: State, num_iterations: int, flux_per_iteration: float = DEFAULT_FLUX,
                         seed: int = 0, target: State | None = None, starts: int = 5) -> list[dict]:
    """Reconstruct after each acquisition slice from the cumulative counts.

    Iteration ``m`` (1-based) draws fresh counts with keys ``(seed, m)``;
    later iterations are warm-started from the previous estimate. Each row
    of the returned trajectory holds the iteration index, total counts and
    the measure map of the estimate (fidelity against ``target``, which
    defaults to ``rho_true``).
    """
    if num_iterations < 1:
        raise TomographyError("num_iterations must be >= 1")
    rho_true = as_density(rho_true)
    target = rho_true if target is None else target
    settings = build_projector_set(rho_true.num_qubits)
    cumulative = None
    prev_t = None
    rows = []
    for m in range(1, num_iterations + 1):
        rec = simulate_counts(rho_true, settings, flux_per_iteration, seed, iteration=m)
        cumulative = rec if cumulative is None else cumulative + rec
        res = reconstruct(cumulative, starts=starts, seed=seed, initial=prev_t)
        prev_t = res.t_matrix
        row = {"iteration": m, "total_counts": float(cumulative.counts.sum()),
               "converged": res.converged}
        row.update(state_measures(res.rho, target))
        rows.append(row)
    return rows


@dataclass
class MonteCarloErrors:
    estimate: dict[str, float]
    std: dict[str, float]
    samples: dict[str, np.ndarray] = field(repr=False)


def _resample_task(args):
    record, seed, r, t0, target, starts = args
    rng = task_rng(seed, 0x5EED, r)
    counts = rng.poisson(record.counts).astype(float)
    res = reconstruct(record.with_counts(counts), starts=starts, seed=seed, initial=t0)
    return state_measures(res.rho, target)


def monte_carlo_errors(record: MeasurementRecord, num_resamples: int, seed: int = 0,
                       target: State | None = None, starts: int = 1,
                       workers: int = 1) -> MonteCarloErrors:
    """Poisson-resampling error bars for every measure of the reconstruction.

    Each resample ``r`` redraws every count as Poisson(observed) using the
    generator keyed ``(seed, r)``, so results do not depend on ``workers``.
    """
    if num_resamples < 2:
        raise TomographyError("need at least two resamples")
    base = reconstruct(record, seed=seed)
    estimate = state_measures(base.rho, target)
    tasks = [(record, seed, r, base.t_matrix, target, starts) for r in range(num_resamples)]
    results = parallel_map(_resample_task, tasks, workers)
    keys = results[0].keys()
    samples = {k: np.array([res[k] for res in results]) for k in keys}
    std = {k: float(np.std(v, ddof=1)) for k, v in samples.items()}
    return MonteCarloErrors(estimate, std, samples)


# ---------------------------------------------------------------------------
# local-unitary correction


def euler_unitary(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Rz(alpha) Ry(beta) Rz(gamma)."""
    rz = lambda a: np.array([[np.exp(-0.5j * a), 0], [0, np.exp(0.5j * a)]])
    c, s = math.cos(beta / 2), math.sin(beta / 2)
    ry = np.array([[c, -s], [s, c]], dtype=np.complex128)
    return rz(alpha) @ ry @ rz(gamma)


@dataclass
class LocalCorrection:
    unitaries: list[np.ndarray]
    fidelity_before: float
    fidelity_after: float
    corrected: DensityMatrix
    converged: bool


def fit_local_unitaries(rho_measured: State, rho_target: State, starts: int = 8,
                        seed: int = 0) -> LocalCorrection:
    """Per-qubit unitaries maximizing fidelity of ``U rho U^dag`` with the target."""
    rho = as_density(rho_measured)
    if rho.dim != rho_target.dim:
        raise StateError("measured and target states differ in dimension")
    n = rho.num_qubits

    def unitaries(x):
        return [euler_unitary(*x[3 * q:3 * q + 3]) for q in range(n)]

    def loss(x):
        return -fidelity(apply_local_unitaries(rho, unitaries(x)), rho_target)

    rng = task_rng(seed, 0x10CA1)
    best = None
    for s in range(max(starts, 1)):
        x0 = np.zeros(3 * n) if s == 0 else rng.uniform(-np.pi, np.pi, 3 * n)
        res = minimize(loss, x0, method="BFGS", options={"gtol": 1e-9})
        if best is None or res.fun < best.fun:
            best = res
        if -best.fun > 1 - 1e-12:
            break
    us = unitaries(best.x)
    corrected = apply_local_unitaries(rho, us)
    return LocalCorrection(
        unitaries=us,
        fidelity_before=fidelity(rho, rho_target),
        fidelity_after=float(-best.fun),
        corrected=corrected,
        converged=bool(best.success),
    )


def direct_reduced_tomography(rho_true: State, traced_qubit: str, flux: float, seed: int = 0,
                              starts: int = 5) -> ReconstructionResult:
    """Two-qubit tomography of ``rho_true`` with ``traced_qubit`` only used as a trigger."""
    rho = as_density(rho_true)
    if traced_qubit not in rho.labels:
        raise StateError(f"unknown qubit label {traced_qubit!r}")
    reduced = partial_trace(rho, [l for l in rho.labels if l != traced_qubit])
    settings = build_projector_set(2)
    record = simulate_counts(reduced, settings, flux, seed)
    return reconstruct(record, starts=starts, seed=seed)
