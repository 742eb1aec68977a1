import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entangle_lab import measures as M
from entangle_lab.qcore import DensityMatrix, PureState, StateError, apply_local_unitaries, linear_entropy, partial_trace, tensor

from oracles import (
    hyperdet_tau3,
    negativity_dense,
    pure_concurrence,
    random_density,
    random_ket,
    random_unitary,
    wootters_eig,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
LABELS = ("c", "e", "f")


def reduced_w():
    return partial_trace(M.reference_state("W"), ["e", "f"])


# --- concurrence / tangle ----------------------------------------------------


def test_bell_concurrence_is_one():
    for name in ("psi+", "psi-", "phi+", "phi-"):
        assert M.concurrence(M.bell_state(name)) == pytest.approx(1, abs=1e-12)


def test_reduced_w_tangle():
    assert M.tangle(reduced_w()) == pytest.approx(4 / 9, abs=1e-12)


def test_product_state_tangle_zero():
    rng = np.random.default_rng(0)
    a = DensityMatrix(random_density(rng, 1))
    b = DensityMatrix(random_density(rng, 1), ["b"])
    assert M.tangle(tensor(a, b)) == pytest.approx(0, abs=1e-12)


def test_concurrence_wrong_dimension():
    with pytest.raises(StateError):
        M.concurrence(M.reference_state("W"))


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_pure_concurrence_closed_form(seed):
    psi = random_ket(np.random.default_rng(seed), 2)
    assert M.concurrence(PureState(psi)) == pytest.approx(pure_concurrence(psi), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_concurrence_matches_eigenvalue_route(seed):
    rho = random_density(np.random.default_rng(seed), 2)
    assert M.concurrence(DensityMatrix(rho)) == pytest.approx(wootters_eig(rho), abs=1e-7)


def test_concurrence_array_batches():
    rng = np.random.default_rng(1)
    rhos = np.stack([random_density(rng, 2) for _ in range(5)])
    batch = M.concurrence_array(rhos)
    assert np.allclose(batch, [wootters_eig(r) for r in rhos], atol=1e-7)


# --- three-tangle -----------------------------------------------------------


def test_three_tangle_examples():
    assert M.three_tangle(M.reference_state("GHZ")) == pytest.approx(1, abs=1e-12)
    assert M.three_tangle(M.reference_state("W")) == pytest.approx(0, abs=1e-12)
    assert M.three_tangle(M.reference_state("product-zero")) == pytest.approx(0, abs=1e-12)


def test_three_tangle_rejects_mixed():
    with pytest.raises(StateError):
        M.three_tangle(DensityMatrix(np.eye(8) / 8))


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_three_tangle_matches_hyperdeterminant_and_is_focus_invariant(seed):
    psi = random_ket(np.random.default_rng(seed), 3)
    state = PureState(psi, LABELS)
    ref = hyperdet_tau3(psi)
    for focus in range(3):
        assert M.three_tangle(state, focus) == pytest.approx(ref, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_ckw_monogamy(seed):
    psi = random_ket(np.random.default_rng(seed), 3)
    rho = np.outer(psi, psi.conj())
    tangles = M.pair_tangles_array(rho)  # (ce, cf, ef)
    involving = {0: (0, 1), 1: (0, 2), 2: (1, 2)}
    for focus, (i, j) in involving.items():
        red = partial_trace(DensityMatrix(rho, LABELS), [LABELS[focus]]).matrix
        assert 4 * np.linalg.det(red).real >= tangles[i] + tangles[j] - 1e-9


def test_pure_and_mixed_pair_tangle_routes_agree():
    rng = np.random.default_rng(7)
    psi = np.stack([random_ket(rng, 3) for _ in range(20)])
    a = M.pair_tangles_from_kets(psi)
    b = M.pair_tangles_array(psi[:, :, None] * psi[:, None, :].conj())
    assert np.allclose(a, b, atol=1e-7)


# --- tripartite negativity ---------------------------------------------------


def test_tripartite_negativity_examples():
    assert M.tripartite_negativity(M.reference_state("W")) == pytest.approx(2 * math.sqrt(2) / 3, abs=1e-12)
    assert M.tripartite_negativity(M.reference_state("zero-bell")) == pytest.approx(0, abs=1e-12)
    assert M.tripartite_negativity(M.reference_state("product-zero")) == pytest.approx(0, abs=1e-12)
    assert M.tripartite_negativity(M.reference_state("GHZ")) == pytest.approx(1, abs=1e-12)


def test_bell_pair_negativity_is_one():
    assert M.negativity(M.bell_state("psi+"), ["a"]) == pytest.approx(1, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=seeds, q=st.integers(0, 2))
def test_negativity_matches_dense_oracle(seed, q):
    rho = random_density(np.random.default_rng(seed), 3, rank=2)
    got = M.negativity(DensityMatrix(rho, LABELS), [LABELS[q]])
    assert got == pytest.approx(negativity_dense(rho, 3, [q]), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, single=st.integers(0, 2))
def test_biseparable_states_have_zero_n3(seed, single):
    rng = np.random.default_rng(seed)
    one = random_ket(rng, 1)
    two = random_ket(rng, 2)
    psi = np.kron(one, two).reshape(2, 2, 2)
    # move the unentangled qubit to position `single`
    order = {0: (0, 1, 2), 1: (1, 0, 2), 2: (1, 2, 0)}[single]
    psi = psi.transpose(order).reshape(8)
    state = PureState(psi, LABELS)
    assert M.negativity(state, [LABELS[single]]) == pytest.approx(0, abs=1e-10)
    assert M.tripartite_negativity(state) == pytest.approx(0, abs=1e-6)


# --- local-unitary invariance -------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_measures_invariant_under_local_unitaries(seed):
    rng = np.random.default_rng(seed)
    psi = PureState(random_ket(rng, 3), LABELS)
    us = [random_unitary(rng) for _ in range(3)]
    a = M.robustness_profile(psi).scalar_measures()
    b = M.robustness_profile(apply_local_unitaries(psi, us)).scalar_measures()
    for key in ("tau2_ce", "tau2_cf", "tau2_ef", "tau3", "n3", "s_linear"):
        assert a[key] == pytest.approx(b[key], abs=1e-8), key


def test_w_measures_invariant_under_local_unitaries():
    rng = np.random.default_rng(11)
    w = M.reference_state("W")
    ref = M.robustness_profile(w)
    out = M.robustness_profile(apply_local_unitaries(w, [random_unitary(rng) for _ in range(3)]))
    for k, v in ref.tangle_per_pair.items():
        assert out.tangle_per_pair[k] == pytest.approx(v, abs=1e-9)
    assert out.tripartite_negativity == pytest.approx(ref.tripartite_negativity, abs=1e-9)
    assert out.three_tangle == pytest.approx(ref.three_tangle, abs=1e-9)


# --- robustness profile -------------------------------------------------------


def test_profile_w():
    rep = M.robustness_profile(M.reference_state("W"))
    assert rep.tau2_min == pytest.approx(4 / 9, abs=1e-12)
    assert rep.tau2_avg == pytest.approx(4 / 9, abs=1e-12)
    assert rep.tripartite_negativity == pytest.approx(0.9428, abs=1e-4)


def test_profile_zero_bell():
    rep = M.robustness_profile(M.reference_state("zero-bell"))
    assert rep.tau2_min == pytest.approx(0, abs=1e-12)
    assert rep.tau2_avg == pytest.approx(1 / 3, abs=1e-12)


def test_profile_product_is_all_zero():
    rep = M.robustness_profile(M.reference_state("product-zero"))
    vals = rep.scalar_measures()
    vals.pop("witness")
    assert all(abs(v) < 1e-12 for v in vals.values())


def test_profile_invariants_and_mixed_input():
    rho = DensityMatrix(random_density(np.random.default_rng(4), 3), LABELS)
    rep = M.robustness_profile(rho, target=M.reference_state("W"))
    t = list(rep.tangle_per_pair.values())
    assert rep.tau2_min == pytest.approx(min(t), abs=1e-12)
    assert rep.tau2_avg == pytest.approx(np.mean(t), abs=1e-12)
    assert rep.three_tangle is None
    assert 0 <= rep.fidelity_vs_target <= 1
    assert set(rep.to_dict()) >= {"tangle_per_pair", "tau2_min", "error_bars"}


# --- witness --------------------------------------------------------------------


def test_witness_values():
    w = M.reference_state("W")
    assert M.w_witness(w) == pytest.approx(-1 / 3, abs=1e-12)
    assert M.w_witness(DensityMatrix(np.eye(8) / 8, LABELS)) == pytest.approx(2 / 3 - 1 / 8)
    # white-noise W with fidelity 0.90
    p = (0.90 - 1 / 8) / (7 / 8)
    rho = DensityMatrix(p * w.to_density().matrix + (1 - p) * np.eye(8) / 8, LABELS)
    assert M.w_witness(rho) == pytest.approx(2 / 3 - 0.90, abs=1e-12)


# --- reference states ------------------------------------------------------------


def test_mems_two_thirds_matches_reduced_w():
    m = M.mems(2 / 3)
    assert M.tangle(m) == pytest.approx(4 / 9, abs=1e-12)
    assert np.allclose(np.sort(m.eigenvalues()), np.sort(reduced_w().eigenvalues()), atol=1e-12)
    assert linear_entropy(m) == pytest.approx(linear_entropy(reduced_w()), abs=1e-12)
    # the two differ only by a bit flip on the first qubit
    x = np.array([[0, 1], [1, 0]])
    flipped = apply_local_unitaries(DensityMatrix(reduced_w().matrix, ("a", "b")), [x, np.eye(2)])
    assert np.allclose(flipped.matrix, m.matrix, atol=1e-12)


@pytest.mark.parametrize("c", np.linspace(0, 1, 11))
def test_mems_concurrence_parameter(c):
    assert M.concurrence(M.mems(c)) == pytest.approx(c, abs=1e-9)


def test_werner_limits():
    assert M.tangle(M.werner(1)) == pytest.approx(1, abs=1e-12)
    assert np.allclose(M.werner(0).matrix, np.eye(4) / 4)
    assert M.tangle(M.werner(0)) == pytest.approx(0, abs=1e-12)


def test_reference_state_errors():
    with pytest.raises(StateError):
        M.reference_state("nonsense")
    with pytest.raises(StateError):
        M.werner(1.5)
    with pytest.raises(StateError):
        M.mems(-0.1)
    with pytest.raises(StateError):
        M.reference_state("tunable", theta=2.0)


# --- the tunable family and its closed-form tangle --------------------------------


def test_closed_form_limits():
    assert M.closed_form_residual_tangle(0) == 0
    assert M.closed_form_residual_tangle(math.pi / 4) == pytest.approx(4 / 9, abs=1e-15)
    with pytest.raises(StateError):
        M.closed_form_residual_tangle(1.0)


def test_closed_form_at_fifteen_degrees_matches_wootters():
    theta = math.radians(15)
    red = partial_trace(M.ideal_state(theta), ["e", "f"])
    oracle = wootters_eig(red.matrix) ** 2
    assert M.closed_form_residual_tangle(theta) == pytest.approx(oracle, abs=1e-12)
    # sin(30 deg) = 1/2 and cos(60 deg) = 1/2, so 4/16 / (9/4) = 1/9
    assert M.closed_form_residual_tangle(theta) == pytest.approx(1 / 9, abs=1e-15)


def test_family_is_symmetric_and_w_class():
    for theta in np.linspace(0, math.pi / 4, 41):
        rep = M.robustness_profile(M.ideal_state(theta))
        t = list(rep.tangle_per_pair.values())
        assert max(t) - min(t) < 1e-9
        assert rep.three_tangle < 1e-9
        assert t[0] == pytest.approx(M.closed_form_residual_tangle(theta), abs=1e-9)


def test_family_tangle_linear_in_entropy():
    for theta in np.linspace(0.05, math.pi / 4, 9):
        red = partial_trace(M.ideal_state(theta), ["c", "e"])
        assert M.tangle(red) == pytest.approx(0.75 * linear_entropy(red), abs=1e-9)


def test_printed_family_breaks_the_closed_form():
    theta = math.radians(22.5)
    red = partial_trace(M.ideal_state(theta, printed=True), ["e", "f"])
    assert abs(M.tangle(red) - M.closed_form_residual_tangle(theta)) > 0.1
    # the literal single-angle reading gives 1/4 at 45 degrees
    literal = 4 * math.sin(math.pi / 4) ** 4 / (math.cos(math.pi / 2) - 2) ** 2
    assert literal == pytest.approx(1 / 4)
