"""Independent reference computations used only by the tests.

None of these share code paths with the package: they use explicit index
loops, the textbook eigenvalue route for the Wootters concurrence, the
Cayley hyperdeterminant for the three-tangle and matrix permanents for
photon amplitudes.
"""
import itertools
import math

import numpy as np

SY = np.array([[0, -1j], [1j, 0]])
YY = np.kron(SY, SY)


def random_density(rng, num_qubits, rank=None):
    d = 2**num_qubits
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_ket(rng, num_qubits):
    d = 2**num_qubits
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_unitary(rng, d=2):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def ptrace_loops(rho, n, keep):
    """Partial trace by explicit summation over basis indices."""
    keep = sorted(keep)
    traced = [q for q in range(n) if q not in keep]
    dk = 2 ** len(keep)
    out = np.zeros((dk, dk), dtype=complex)

    def index(bits):
        return int("".join(map(str, bits)), 2)

    for ik, jk in itertools.product(range(dk), repeat=2):
        bi = [int(b) for b in format(ik, f"0{len(keep)}b")]
        bj = [int(b) for b in format(jk, f"0{len(keep)}b")]
        total = 0
        for bt in itertools.product((0, 1), repeat=len(traced)):
            full_i = [0] * n
            full_j = [0] * n
            for q, b in zip(keep, bi):
                full_i[q] = b
            for q, b in zip(keep, bj):
                full_j[q] = b
            for q, b in zip(traced, bt):
                full_i[q] = full_j[q] = b
            total += rho[index(full_i), index(full_j)]
        out[ik, jk] = total
    return out


def wootters_eig(rho):
    """Concurrence from the eigenvalues of rho (sy sy) rho* (sy sy)."""
    rt = YY @ rho.conj() @ YY
    ev = np.linalg.eigvals(rho @ rt).real
    # rank-deficient inputs leave ~1e-17 eigenvalues whose square roots
    # would otherwise show up at the 1e-8 level
    ev = np.where(ev > 1e-13 * max(ev.max(), 1e-300), ev, 0.0)
    lam = np.sort(np.sqrt(ev))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def pure_concurrence(psi):
    a, b, c, d = psi
    return 2 * abs(a * d - b * c)


def hyperdet_tau3(psi):
    """Three-tangle as 4|hyperdeterminant| (independent of any partial trace)."""
    a = {format(k, "03b"): psi[k] for k in range(8)}
    d1 = (a["000"] ** 2 * a["111"] ** 2 + a["001"] ** 2 * a["110"] ** 2
          + a["010"] ** 2 * a["101"] ** 2 + a["100"] ** 2 * a["011"] ** 2)
    d2 = (a["000"] * a["111"] * a["011"] * a["100"] + a["000"] * a["111"] * a["101"] * a["010"]
          + a["000"] * a["111"] * a["110"] * a["001"] + a["011"] * a["100"] * a["101"] * a["010"]
          + a["011"] * a["100"] * a["110"] * a["001"] + a["101"] * a["010"] * a["110"] * a["001"])
    d3 = a["000"] * a["110"] * a["101"] * a["011"] + a["111"] * a["001"] * a["010"] * a["100"]
    return 4 * abs(d1 - 2 * d2 + 4 * d3)


def negativity_dense(rho, n, part):
    """Negativity via an explicit partial-transpose permutation of matrix elements."""
    d = 2**n
    out = np.zeros_like(rho)
    for i, j in itertools.product(range(d), repeat=2):
        bi = list(format(i, f"0{n}b"))
        bj = list(format(j, f"0{n}b"))
        for q in part:
            bi[q], bj[q] = bj[q], bi[q]
        out[int("".join(bi), 2), int("".join(bj), 2)] = rho[i, j]
    ev = np.linalg.eigvalsh(out)
    return 2 * abs(ev[ev < 0].sum())


def permanent(m):
    n = m.shape[0]
    if n == 0:
        return 1.0
    return sum(
        np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n))
    )


def fock_amplitude(u, inputs, outputs):
    """<outputs| U |inputs> for photons listed by mode index (repeats allowed)."""
    sub = u[np.ix_(inputs, outputs)]
    norm = 1.0
    for k in set(inputs):
        norm *= math.factorial(inputs.count(k))
    for k in set(outputs):
        norm *= math.factorial(outputs.count(k))
    return permanent(sub) / math.sqrt(norm)


def circuit_unitary(theta):
    """Single-photon transfer matrix of the circuit, input modes
    (aH, aV, bH, bV, vH, vV) -> output modes (cH, cV, eH, eV, fH, fV).

    Row = input mode, column = output mode.
    """
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    hwp = np.array([[c, s], [s, -c]])
    r = 1 / math.sqrt(2)
    # a -> r c + i r d ; b -> i r c + r d ; d -> r e + i r f ; v -> i r e + r f
    a_to = {"c": r, "e": 1j * r * r, "f": 1j * r * 1j * r}
    b_to = {"c": 1j * r, "e": r * r, "f": r * 1j * r}
    v_to = {"c": 0, "e": 1j * r, "f": r}
    out = ["c", "e", "f"]
    u = np.zeros((6, 6), dtype=complex)
    for p in range(2):
        for k, o in enumerate(out):
            # a: wave plate first
            for q in range(2):
                u[0 + q, 2 * k + p] += hwp[q, p] * a_to[o]
            u[2 + p, 2 * k + p] = b_to[o]
            u[4 + p, 2 * k + p] = v_to[o]
    return u


def circuit_amplitudes_oracle(theta):
    """Unnormalized (c, e, f) polarization amplitudes from permanents."""
    u = circuit_unitary(theta)
    inputs = [0, 0, 2]  # two aH photons, one bH photon
    vec = np.zeros(8, dtype=complex)
    for k, bits in enumerate(itertools.product((0, 1), repeat=3)):
        outputs = [2 * m + b for m, b in enumerate(bits)]
        vec[k] = fock_amplitude(u, inputs, outputs)
    return vec
