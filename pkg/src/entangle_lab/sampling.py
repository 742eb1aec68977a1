"""Haar-random three-qubit states and the robustness-boundary study.

Sample ``i`` of a study with master seed ``s`` is drawn from the generator
keyed ``(s, chunk)`` where chunks hold ``CHUNK`` consecutive samples, so a
study is reproducible row by row regardless of the number of workers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import measures
from .qcore import PureState
from .rng import parallel_map, task_rng

CHUNK = 10_000
W_TAU2_MIN = 4 / 9
BOUNDARY_TOL = 1e-6


def gaussian_kets(rng: np.random.Generator, count: int, num_qubits: int) -> np.ndarray:
    """``count`` Haar-random kets as rows (normalized complex Gaussian vectors)."""
    d = 2**num_qubits
    z = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_random_pure(num_qubits: int, seed: int) -> PureState:
    if num_qubits < 1:
        raise ValueError("num_qubits must be >= 1")
    return PureState(gaussian_kets(task_rng(seed), 1, num_qubits)[0])


def _chunk(seed: int, index: int, count: int) -> dict[str, np.ndarray]:
    psi = gaussian_kets(task_rng(seed, index), count, 3)
    prof = measures.pure_profile_array(psi)
    return {
        "n3": prof["n3"],
        "tau2_min": prof["tau2_min"],
        "tau2_avg": prof["tau2_avg"],
        "tau3": prof["tau3"],
        "psi": psi,
    }


def _chunk_task(args):
    return _chunk(*args)


@dataclass
class HaarScatter:
    n3: np.ndarray
    tau2_min: np.ndarray
    tau3: np.ndarray
    tau2_avg: np.ndarray
    seed: int
    kets: np.ndarray | None = field(default=None, repr=False)

    @property
    def sample_count(self) -> int:
        return self.n3.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n3", "tau2_min", "tau3"])
            for row in zip(self.n3, self.tau2_min, self.tau3):
                w.writerow([repr(float(x)) for x in row])


def scatter_study(samples: int, seed: int, workers: int = 1, keep_kets: bool = False) -> HaarScatter:
    """N3, weakest-link tangle and three-tangle for ``samples`` Haar-random kets."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    tasks = []
    for i, start in enumerate(range(0, samples, CHUNK)):
        tasks.append((seed, i, min(CHUNK, samples - start)))
    parts = parallel_map(_chunk_task, tasks, workers)
    cat = lambda k: np.concatenate([p[k] for p in parts])
    return HaarScatter(
        n3=cat("n3"),
        tau2_min=cat("tau2_min"),
        tau3=cat("tau3"),
        tau2_avg=cat("tau2_avg"),
        seed=seed,
        kets=cat("psi") if keep_kets else None,
    )


# ---------------------------------------------------------------------------
# the tunable family as a curve in the (N3, tau2) plane


@dataclass
class IdealCurve:
    theta: np.ndarray
    n3: np.ndarray
    tau2_min: np.ndarray
    tau2_avg: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta_deg", "n3", "tau2_min", "tau2_avg"])
            for row in zip(np.degrees(self.theta), self.n3, self.tau2_min, self.tau2_avg):
                w.writerow([repr(float(x)) for x in row])

    def tau2_at(self, n3: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Curve weakest-link tangle at the given N3 values.

        Linear interpolation on a dense monotone grid refined by bisection
        in theta. Values outside the curve's N3 range are clamped and
        flagged.
        """
        n3 = np.asarray(n3, dtype=float)
        lo, hi = self.n3[0], self.n3[-1]
        clamped = (n3 < lo) | (n3 > hi)
        x = np.clip(n3, lo, hi)
        # bracket in theta, then bisect on the exact family
        k = np.clip(np.searchsorted(self.n3, x), 1, self.n3.size - 1)
        a, b = self.theta[k - 1].copy(), self.theta[k].copy()
        for _ in range(30):
            mid = 0.5 * (a + b)
            prof = _family_profile(mid)
            go_right = prof["n3"] < x
            a = np.where(go_right, mid, a)
            b = np.where(go_right, b, mid)
        return _family_profile(0.5 * (a + b))["tau2_min"], clamped


def _family_kets(theta: np.ndarray) -> np.ndarray:
    v = measures.ideal_amplitudes(np.atleast_1d(np.asarray(theta, dtype=float)))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _family_profile(theta: np.ndarray) -> dict[str, np.ndarray]:
    return measures.pure_profile_array(_family_kets(theta))


def ideal_curve(points: int = 200) -> IdealCurve:
    theta = np.linspace(0, math.pi / 4, points)
    prof = _family_profile(theta)
    n3 = prof["n3"]
    if np.any(np.diff(n3) <= 0):
        raise RuntimeError("N3 is not strictly increasing along the ideal family")
    return IdealCurve(theta, n3, prof["tau2_min"], prof["tau2_avg"])


def reference_points() -> dict[str, dict[str, float]]:
    out = {}
    for name in ("W", "GHZ"):
        prof = measures.pure_profile_array(measures.reference_state(name).amplitudes)
        out[name] = {k: float(prof[k]) for k in ("n3", "tau2_min", "tau3")}
    return out


@dataclass
class BoundaryReport:
    violations: int
    max_excess: float
    violating_indices: np.ndarray
    clamped: int
    max_tau2_min: float
    w_class_fraction: float
    samples: int


def boundary_check(scatter: HaarScatter, curve: IdealCurve | None = None,
                   tol: float = BOUNDARY_TOL, w_class_tol: float = 1e-4) -> BoundaryReport:
    """Count samples whose weakest link exceeds the ideal curve at equal N3.

    Only samples within ``1e-3`` of the interpolated curve are refined by
    bisection; the rest are decided on the coarse grid.
    """
    if scatter.sample_count == 0:
        raise ValueError("empty scatter")
    curve = curve or ideal_curve(2001)
    coarse = np.interp(np.clip(scatter.n3, curve.n3[0], curve.n3[-1]), curve.n3, curve.tau2_min)
    excess = scatter.tau2_min - coarse
    clamped = (scatter.n3 < curve.n3[0]) | (scatter.n3 > curve.n3[-1])
    near = np.flatnonzero(excess > -1e-3)
    if near.size:
        exact, _ = curve.tau2_at(scatter.n3[near])
        excess[near] = scatter.tau2_min[near] - exact
    bad = np.flatnonzero(excess > tol)
    return BoundaryReport(
        violations=int(bad.size),
        max_excess=float(excess.max()),
        violating_indices=bad,
        clamped=int(clamped.sum()),
        max_tau2_min=float(scatter.tau2_min.max()),
        w_class_fraction=float(np.mean(scatter.tau3 < w_class_tol)),
        samples=scatter.sample_count,
    )


@dataclass
class AverageTangleReport:
    exceeding: int
    counterexamples: int
    counterexample_indices: np.ndarray
    samples: int


def average_tangle_study(samples: int, seed: int, workers: int = 1,
                         scatter: HaarScatter | None = None, curve: IdealCurve | None = None,
                         tol: float = 1e-9) -> AverageTangleReport:
    """States beating the ideal curve on average tangle must lose on the weakest link.

    A counterexample is a state whose average tangle exceeds the curve's
    average at equal N3 while its weakest link is not strictly below the
    curve's weakest link.
    """
    if scatter is None:
        if samples < 1:
            raise ValueError("samples must be >= 1")
        scatter = scatter_study(samples, seed, workers)
    curve = curve or ideal_curve(2001)
    x = np.clip(scatter.n3, curve.n3[0], curve.n3[-1])
    avg_curve = np.interp(x, curve.n3, curve.tau2_avg)
    min_curve = np.interp(x, curve.n3, curve.tau2_min)
    exceed = scatter.tau2_avg > avg_curve + tol
    counter = exceed & ~(scatter.tau2_min < min_curve - tol)
    idx = np.flatnonzero(counter)
    return AverageTangleReport(int(exceed.sum()), int(idx.size), idx, scatter.sample_count)


def profile_point(psi: PureState) -> dict[str, float]:
    """(N3, tau2_min, tau2_avg, tau3) of a single ket, via the measures kernels."""
    prof = measures.pure_profile_array(psi.amplitudes)
    return {k: float(prof[k]) for k in ("n3", "tau2_min", "tau2_avg", "tau3")}
