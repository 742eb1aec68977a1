"""Fock-space model of the three-photon circuit.

Two photons in mode ``a`` (polarization set by a half-wave plate) and one
horizontal photon in mode ``b`` meet on a 50:50 beam splitter with outputs
``c`` and ``d``; mode ``d`` is split again into ``e`` and ``f``. Keeping
only the events with exactly one photon in each of ``c``, ``e``, ``f``
leaves a three-qubit polarization state (H -> 0, V -> 1).

States are stored as sparse maps from occupation tuples to amplitudes in
the normalized Fock basis, so the ``sqrt(n!)`` factors are applied
explicitly when creation operators are expanded.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .qcore import PureState

PRUNE_TOL = 1e-14
POLARIZATIONS = ("H", "V")
QUBIT_LABELS = ("c", "e", "f")


class OpticsError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class OpticalMode:
    spatial: str
    polarization: str

    def __post_init__(self):
        if self.polarization not in POLARIZATIONS:
            raise OpticsError(f"polarization must be H or V, got {self.polarization!r}")

    def __str__(self):
        return f"{self.spatial}{self.polarization}"


Occupation = tuple[int, ...]


class FockState:
    """Superposition of occupation-number states over a fixed list of modes."""

    def __init__(self, modes: Sequence[OpticalMode], terms: Mapping[Occupation, complex]):
        modes = tuple(modes)
        if len(set(modes)) != len(modes):
            raise OpticsError("duplicate optical modes")
        clean = {}
        for occ, amp in terms.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != len(modes):
                raise OpticsError("occupation vector length does not match modes")
            if any(n < 0 for n in occ):
                raise OpticsError("negative occupation number")
            amp = complex(amp)
            if not np.isfinite(amp.real) or not np.isfinite(amp.imag):
                raise OpticsError("non-finite amplitude")
            if abs(amp) >= PRUNE_TOL:
                clean[occ] = clean.get(occ, 0) + amp
        self.modes = modes
        self.terms = clean

    @classmethod
    def vacuum(cls, modes: Sequence[OpticalMode]) -> "FockState":
        return cls(modes, {(0,) * len(modes): 1.0})

    def __repr__(self):
        parts = []
        for occ, amp in sorted(self.terms.items()):
            ket = ",".join(f"{n}{m}" for n, m in zip(occ, self.modes) if n)
            parts.append(f"({amp:.4g})|{ket}>")
        return " + ".join(parts) or "0"

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def photon_numbers(self) -> set[int]:
        return {sum(occ) for occ in self.terms}

    def spatial_labels(self) -> set[str]:
        return {m.spatial for m in self.modes}

    def index(self, mode: OpticalMode) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise OpticsError(f"mode {mode} not present") from None

    def amplitude(self, occupation: Mapping[OpticalMode, int]) -> complex:
        occ = [0] * len(self.modes)
        for mode, n in occupation.items():
            occ[self.index(mode)] = n
        return self.terms.get(tuple(occ), 0j)

    def tensor(self, other: "FockState") -> "FockState":
        if set(self.modes) & set(other.modes):
            raise OpticsError("states share modes")
        terms = {
            o1 + o2: a1 * a2
            for (o1, a1), (o2, a2) in itertools.product(self.terms.items(), other.terms.items())
        }
        return FockState(self.modes + other.modes, terms)

    def with_vacuum(self, spatial: str) -> "FockState":
        """Append empty H and V modes for ``spatial``."""
        extra = FockState.vacuum([OpticalMode(spatial, p) for p in POLARIZATIONS])
        return self.tensor(extra)


def single_photon(spatial: str, polarization: str = "H") -> FockState:
    modes = [OpticalMode(spatial, p) for p in POLARIZATIONS]
    occ = (1, 0) if polarization == "H" else (0, 1)
    return FockState(modes, {occ: 1.0})


def apply_linear(state: FockState, transform: Mapping[OpticalMode, Mapping[OpticalMode, complex]],
                 out_modes: Sequence[OpticalMode]) -> FockState:
    """Apply a linear map on creation operators.

    ``transform[m]`` gives the expansion of the creation operator of input
    mode ``m`` over output modes; modes absent from ``transform`` pass
    through unchanged and must also appear in ``out_modes``.
    """
    out_modes = tuple(out_modes)
    pos = {m: i for i, m in enumerate(out_modes)}
    rules = []
    for m in state.modes:
        expansion = transform.get(m, {m: 1.0})
        rules.append([(pos[k], complex(v)) for k, v in expansion.items() if v != 0])

    result: dict[Occupation, complex] = defaultdict(complex)
    for occ, amp in state.terms.items():
        # |n> = prod (a_i^dag)^n_i / sqrt(n_i!) |0>; expand each power
        # multinomially.
        partial = {(0,) * len(out_modes): amp / math.sqrt(math.prod(math.factorial(n) for n in occ))}
        for n, rule in zip(occ, rules):
            for _ in range(n):
                nxt: dict[Occupation, complex] = defaultdict(complex)
                for mono, c in partial.items():
                    for j, coeff in rule:
                        m2 = list(mono)
                        m2[j] += 1
                        nxt[tuple(m2)] += c * coeff
                partial = nxt
        for mono, c in partial.items():
            # monomial prod (b_j^dag)^m_j |0> = prod sqrt(m_j!) |m>
            result[mono] += c * math.sqrt(math.prod(math.factorial(k) for k in mono))
    return FockState(out_modes, result)


def half_wave_plate(state: FockState, spatial: str, theta: float) -> FockState:
    """Half-wave plate at angle ``theta``: H -> cos2t H + sin2t V, V -> sin2t H - cos2t V."""
    h, v = OpticalMode(spatial, "H"), OpticalMode(spatial, "V")
    state.index(h), state.index(v)
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return apply_linear(state, {h: {h: c, v: s}, v: {h: s, v: -c}}, state.modes)


def beamsplitter(state: FockState, in1: str, in2: str, out1: str, out2: str,
                 reflectivity: float = 0.5) -> FockState:
    """Lossless beam splitter, applied to both polarizations.

    Convention: ``in1 -> t out1 + i r out2`` and ``in2 -> i r out1 + t out2``
    with ``r = sqrt(reflectivity)``, ``t = sqrt(1 - reflectivity)``.
    """
    if not 0 < reflectivity < 1:
        raise OpticsError(f"reflectivity must lie in (0, 1), got {reflectivity}")
    labels = state.spatial_labels()
    for lab in (in1, in2):
        if lab not in labels:
            raise OpticsError(f"input mode {lab!r} not present in state")
    if in1 == in2:
        raise OpticsError("beam splitter inputs must differ")
    clash = {out1, out2} & (labels - {in1, in2})
    if clash:
        raise OpticsError(f"output labels {sorted(clash)} already in use")
    r = math.sqrt(reflectivity)
    t = math.sqrt(1 - reflectivity)
    transform = {}
    renamed = {}
    for p in POLARIZATIONS:
        a, b = OpticalMode(in1, p), OpticalMode(in2, p)
        c, d = OpticalMode(out1, p), OpticalMode(out2, p)
        transform[a] = {c: t, d: 1j * r}
        transform[b] = {c: 1j * r, d: t}
        renamed[a], renamed[b] = c, d
    out_modes = [renamed.get(m, m) for m in state.modes]
    return apply_linear(state, transform, out_modes)


def prepare_qutrit(theta: float, spatial: str = "a") -> FockState:
    """Two horizontal photons in ``spatial`` rotated by a half-wave plate at ``theta``."""
    if not 0 <= theta <= math.pi / 2 + 1e-12:
        raise OpticsError(f"theta must lie in [0, pi/2], got {theta}")
    modes = [OpticalMode(spatial, p) for p in POLARIZATIONS]
    return half_wave_plate(FockState(modes, {(2, 0): 1.0}), spatial, theta)


def qutrit_amplitudes(state: FockState, spatial: str = "a") -> np.ndarray:
    """Amplitudes on ``|2H,0V>, |1H,1V>, |0H,2V>``."""
    h, v = OpticalMode(spatial, "H"), OpticalMode(spatial, "V")
    return np.array([state.amplitude({h: 2 - k, v: k}) for k in range(3)])


def postselect_qubits(state: FockState, spatials: Sequence[str] = QUBIT_LABELS) -> np.ndarray:
    """Unnormalized polarization amplitudes given one photon in each of ``spatials``.

    All other modes must be empty. Index ordering is big-endian with
    H -> 0 and V -> 1.
    """
    n = len(spatials)
    vec = np.zeros(2**n, dtype=np.complex128)
    others = [m for m in state.modes if m.spatial not in spatials]
    for k, bits in enumerate(itertools.product((0, 1), repeat=n)):
        occ = {m: 0 for m in others}
        for sp, b in zip(spatials, bits):
            occ[OpticalMode(sp, "H")] = 1 - b
            occ[OpticalMode(sp, "V")] = b
        vec[k] = state.amplitude(occ)
    return vec


# Reference phase pattern of the ideal output: only |011> carries a minus sign.
_REFERENCE_PHASES = {0b000: 0.0, 0b100: 0.0, 0b110: 0.0, 0b101: 0.0, 0b011: math.pi}
_PRIORITY = (0b100, 0b110, 0b000, 0b101, 0b011)


def align_local_phases(psi: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Remove local Z phases and a global phase from a three-qubit ket.

    Phases are fixed greedily in the order |100>, |110>, |000>, |101>,
    |011> against the sign pattern of the ideal family (all positive except
    ``-|011>``), skipping amplitudes below ``tol``. Returns the aligned
    vector and the four phases ``(global, c, e, f)``.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    rows, rhs = [], []
    for k in _PRIORITY:
        if abs(psi[k]) < tol:
            continue
        row = [1.0, (k >> 2) & 1, (k >> 1) & 1, k & 1]
        trial = np.array(rows + [row])
        if np.linalg.matrix_rank(trial) > len(rows):
            rows.append(row)
            # target phase minus current phase, wrapped
            rhs.append(np.angle(np.exp(1j * (_REFERENCE_PHASES[k] - np.angle(psi[k])))))
        if len(rows) == 4:
            break
    if not rows:
        return psi.copy(), np.zeros(4)
    phases = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    g, pc, pe, pf = phases
    bits = np.arange(8)
    shift = g + pc * ((bits >> 2) & 1) + pe * ((bits >> 1) & 1) + pf * (bits & 1)
    return psi * np.exp(1j * shift), phases


@dataclass(frozen=True)
class CircuitOutcome:
    conditional_state: PureState
    success_probability: float
    theta: float
    raw_amplitudes: np.ndarray


def run_circuit(theta: float, align: bool = True) -> CircuitOutcome:
    """Simulate the circuit at half-wave-plate angle ``theta`` (radians, in [0, pi/4])."""
    if not 0 <= theta <= math.pi / 4 + 1e-12:
        raise OpticsError(f"theta must lie in [0, pi/4], got {theta}")
    state = prepare_qutrit(theta, "a").tensor(single_photon("b", "H"))
    state = beamsplitter(state, "a", "b", "c", "d")
    state = state.with_vacuum("v")
    state = beamsplitter(state, "d", "v", "e", "f")
    raw = postselect_qubits(state, QUBIT_LABELS)
    vec = align_local_phases(raw)[0] if align else raw
    psi, prob = PureState.from_unnormalized(vec, QUBIT_LABELS)
    return CircuitOutcome(psi, prob, theta, raw)


SCAN_COLUMNS = (
    "theta_deg", "success_prob", "n3", "tau3", "tau2_ce", "tau2_cf", "tau2_ef",
    "tau2_min", "tau2_avg", "s_linear", "fidelity_vs_ideal",
)


def theta_scan(grid: Sequence[float]) -> list[dict[str, float]]:
    """Circuit outcome and entanglement report for each angle (radians) in ``grid``."""
    from . import measures
    from .qcore import fidelity

    rows = []
    for theta in grid:
        out = run_circuit(theta)
        rep = measures.robustness_profile(out.conditional_state)
        rows.append({
            "theta_deg": math.degrees(theta),
            "success_prob": out.success_probability,
            "n3": rep.tripartite_negativity,
            "tau3": rep.three_tangle,
            **{f"tau2_{k}": v for k, v in rep.tangle_per_pair.items()},
            "tau2_min": rep.tau2_min,
            "tau2_avg": rep.tau2_avg,
            "s_linear": rep.linear_entropy,
            "fidelity_vs_ideal": fidelity(out.conditional_state, measures.ideal_state(theta)),
        })
    return rows
