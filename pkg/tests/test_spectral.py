import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphon_sips.graphon import ErdosRenyi, PowerLaw, SmallWorld, discretize
from graphon_sips.spectral import (
    ConvergenceError,
    analytic_leading_eigenpair,
    check_small_world_dominance,
    graphon_spectrum,
    numeric_spectrum,
    operator_residual,
)


def test_analytic_pairs():
    er = analytic_leading_eigenpair(ErdosRenyi(0.5))
    assert er.eigenvalue == 0.5 and er(0.3) == 1.0
    pl = analytic_leading_eigenpair(PowerLaw(0.3, 0.4))
    assert pl.eigenvalue == pytest.approx(2.5, rel=1e-15)
    assert pl(0.5) == pytest.approx(0.5**-0.3)
    assert pl.norm**2 == pytest.approx(2.5)
    assert analytic_leading_eigenpair(SmallWorld(0.4, 0.01)).eigenvalue == pytest.approx(0.02)


def test_er_numeric():
    spec = numeric_spectrum(discretize(ErdosRenyi(0.5), 256), k=1)
    assert spec.eigenvalues[0] == pytest.approx(0.5, abs=1e-10)
    assert np.allclose(spec.eigenfunctions[0], 1.0, atol=1e-8)


def test_pl_numeric_rank_one():
    spec = graphon_spectrum(PowerLaw(0.3, 0.4), m=512, k=2)
    assert spec.eigenvalues[0] == pytest.approx(2.5, rel=0.05)
    assert abs(spec.eigenvalues[1]) / spec.eigenvalues[0] <= 0.05


def test_sw_numeric():
    spec = graphon_spectrum(SmallWorld(0.4, 0.05), m=512, k=3)
    assert spec.eigenvalues[0] == pytest.approx(0.1, rel=0.01)
    phi = spec.eigenfunctions[0]
    assert np.max(np.abs(phi - phi.mean())) <= 1e-6
    assert np.all(np.diff(spec.eigenvalues) <= 0)


@pytest.mark.parametrize("g", [ErdosRenyi(0.3), SmallWorld(0.4, 0.1), PowerLaw(0.2, 0.5)])
def test_orthonormal_and_residuals(g):
    K = discretize(g, 200)
    spec = numeric_spectrum(K, k=3)
    w = spec.weights
    gram = (spec.eigenfunctions * w) @ spec.eigenfunctions.T
    assert np.allclose(gram, np.eye(3), atol=1e-8)
    res = operator_residual(K, spec)
    assert np.all(res <= 1e-6 * np.maximum(np.abs(spec.eigenvalues), 1e-300) + 1e-9)


def test_sw_multiplets_flagged():
    # cosine modes of the ring kernel come in sin/cos pairs
    spec = graphon_spectrum(SmallWorld(0.4, 0.05), m=256, k=3)
    assert spec.simple[0]
    assert not spec.simple[1] and not spec.simple[2]


def test_analytic_vs_numeric_agree():
    for g, rtol in [(ErdosRenyi(0.7), 0.01), (SmallWorld(0.3, 0.2), 0.01), (PowerLaw(0.1, 0.5), 0.05)]:
        lam = graphon_spectrum(g, m=512).eigenvalues[0]
        assert lam == pytest.approx(analytic_leading_eigenpair(g).eigenvalue, rel=rtol)
        assert lam > 0


def test_deterministic():
    K = discretize(SmallWorld(0.4, 0.1), 128)
    a = numeric_spectrum(K, k=2)
    b = numeric_spectrum(K, k=2)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_input_validation():
    with pytest.raises(ValueError):
        numeric_spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        numeric_spectrum(np.eye(3), k=4)


def test_convergence_error():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((60, 60))
    with pytest.raises(ConvergenceError):
        numeric_spectrum(A + A.T, k=2, max_iter=3)


def test_dominance_warning():
    g = SmallWorld(0.4, 0.05)
    fake = numeric_spectrum(np.full((8, 8), 1.0) + np.diag(np.arange(8.0)), k=1)
    with pytest.warns(RuntimeWarning):
        assert not check_small_world_dominance(g, fake)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_small_world_dominance(g, graphon_spectrum(g, m=64))


def test_csv(tmp_path):
    spec = numeric_spectrum(discretize(ErdosRenyi(0.5), 16), k=2)
    path = tmp_path / "s.csv"
    spec.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,eigenvalue" and lines[1].startswith("1,0.5")


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 40), st.integers(0, 2**31))
def test_random_psd_kernel_matches_eigh(m, seed):
    rng = np.random.default_rng(seed)
    B = rng.random((m, 3))
    K = B @ B.T
    spec = numeric_spectrum(K, k=1)
    # uniform weights: operator eigenvalues are those of K/m
    ref = np.linalg.eigvalsh(K / m)[-1]
    assert spec.eigenvalues[0] == pytest.approx(ref, rel=1e-8)
