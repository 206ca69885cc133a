import itertools
import os
import subprocess
import sys

import numpy as np
import pytest

from srl import _accel, kernels
from srl.jsr import MatrixSet, product_of_word

from conftest import BACKENDS, GOLDEN

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def brute_force(mats, n_levels):
    """Per-level sup norm and max rho with lexicographically least maximisers."""
    mset = MatrixSet(tuple(mats))
    out = []
    for n in range(1, n_levels + 1):
        best_n, best_r, wn, wr = -1.0, -1.0, None, None
        for w in itertools.product(range(len(mats)), repeat=n):
            p = product_of_word(mset, w)
            nv = np.linalg.norm(p, 2)
            rv = np.max(np.abs(np.linalg.eigvals(p)))
            if nv > best_n:
                best_n, wn = nv, w
            if rv > best_r:
                best_r, wr = rv, w
        out.append((best_n, best_r, wn, wr))
    return out


@pytest.mark.parametrize("backend", BACKENDS)
def test_enumerate_matches_brute_force(backend, rng):
    for d in (2, 3):
        mats = rng.uniform(-1, 1, size=(3, d, d))
        norm_sup, rho_max, nw, rw = kernels.enumerate_words(mats, 5, backend=backend)
        for i, (bn, br, wn, wr) in enumerate(brute_force(mats, 5)):
            assert norm_sup[i] == pytest.approx(bn, rel=1e-12)
            assert rho_max[i] == pytest.approx(br, rel=1e-10, abs=1e-14)
            assert tuple(nw[i, : i + 1]) == wn


@pytest.mark.parametrize("backend", BACKENDS)
def test_enumerate_zero_prefix(backend):
    mats = np.stack([np.zeros((2, 2)), np.diag([2.0, 0.5])])
    norm_sup, rho_max, _, _ = kernels.enumerate_words(mats, 4, backend=backend)
    np.testing.assert_allclose(norm_sup, [2, 4, 8, 16])
    np.testing.assert_allclose(rho_max, [2, 4, 8, 16])


@needs_numba
def test_backends_agree(rng):
    mats = rng.normal(size=(2, 2, 2))
    a = kernels.enumerate_words(mats, 10, backend="numba")
    b = kernels.enumerate_words(mats, 10, backend="numpy")
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-10)
    np.testing.assert_array_equal(a[2], b[2])

    seq = rng.normal(size=(500, 3, 3))
    for fn in (kernels.prefix_products,):
        pa, la = fn(seq, 32, backend="numba")
        pb, lb = fn(seq, 32, backend="numpy")
        np.testing.assert_allclose(pa * np.exp(la - lb)[:, None, None], pb, rtol=1e-9, atol=1e-12)
    starts = np.array([0, 7, 100, 400])
    pa, la = kernels.window_products(seq, starts, 64, backend="numba")
    pb, lb = kernels.window_products(seq, starts, 64, backend="numpy")
    np.testing.assert_allclose(pa * np.exp(la - lb)[:, None, None], pb, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(
        kernels.qr_exponents(seq, backend="numba"), kernels.qr_exponents(seq, backend="numpy"), rtol=1e-9
    )
    stack = rng.normal(size=(50, 2, 2))
    for x, y in zip(kernels.stack_norm_rho(stack, backend="numba"), kernels.stack_norm_rho(stack, backend="numpy")):
        np.testing.assert_allclose(x, y, rtol=1e-12)


@needs_numba
@pytest.mark.parametrize("split", [1, 2, 4])
def test_subtree_split_is_deterministic(rng, split):
    mats = rng.normal(size=(3, 2, 2))
    mats[1] = 0.0
    serial = kernels._enumerate_words_jit(mats, 6, 0)
    parallel = kernels._enumerate_words_jit(mats, 6, split)
    for x, y in zip(serial, parallel):
        np.testing.assert_array_equal(x, y)


@pytest.mark.parametrize("backend", BACKENDS)
def test_prefix_products_log_ledger(backend, rng):
    seq = rng.normal(size=(100, 2, 2)) * 3
    prods, logs = kernels.prefix_products(seq, 32, backend=backend)
    direct = np.eye(2)
    for t in range(100):
        direct = seq[t] @ direct
        got = prods[t] * np.exp(logs[t])
        np.testing.assert_allclose(got, direct, rtol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_prefix_products_no_overflow(backend):
    seq = np.broadcast_to(np.diag([1e3, 1e-3]), (2000, 2, 2))
    prods, logs = kernels.prefix_products(seq, 32, backend=backend)
    assert np.all(np.isfinite(prods)) and np.all(np.isfinite(logs))
    growth = np.log(np.linalg.norm(prods[-1], 2)) + logs[-1]
    assert growth == pytest.approx(2000 * np.log(1e3), rel=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_window_products(backend, rng):
    seq = rng.normal(size=(60, 2, 2))
    starts = np.array([0, 5, 30])
    prods, logs = kernels.window_products(seq, starts, 20, backend=backend)
    for j, s in enumerate(starts):
        direct = np.eye(2)
        for t in range(s, s + 20):
            direct = seq[t] @ direct
        np.testing.assert_allclose(prods[j] * np.exp(logs[j]), direct, rtol=1e-9)
    with pytest.raises(IndexError):
        kernels.window_products(seq, np.array([50]), 20, backend=backend)


@pytest.mark.parametrize("backend", BACKENDS)
def test_qr_exponents(backend):
    seq = np.broadcast_to(np.diag([2.0, 0.5]), (100, 2, 2))
    np.testing.assert_allclose(kernels.qr_exponents(seq, backend=backend) / 100, [np.log(2), -np.log(2)], rtol=1e-12)
    sing = np.broadcast_to(np.array([[1.0, 0.0], [0.0, 0.0]]), (10, 2, 2))
    ex = kernels.qr_exponents(sing, backend=backend)
    assert ex[0] == pytest.approx(0.0) and ex[1] == -np.inf


@pytest.mark.parametrize("backend", BACKENDS)
def test_stack_norm_rho_general_dim(backend, rng):
    stack = rng.normal(size=(20, 4, 4))
    nrm, rho = kernels.stack_norm_rho(stack, backend=backend)
    for i in range(20):
        assert nrm[i] == pytest.approx(np.linalg.norm(stack[i], 2), rel=1e-12)
        assert rho[i] == pytest.approx(np.max(np.abs(np.linalg.eigvals(stack[i]))), rel=1e-10)


def test_golden_closed_forms():
    nrm, rho = kernels.stack_norm_rho(np.stack(GOLDEN), backend="numpy")
    phi = (1 + 5**0.5) / 2
    np.testing.assert_allclose(nrm, [phi, phi], rtol=1e-14)
    np.testing.assert_allclose(rho, [1, 1], rtol=1e-7)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.enumerate_words(np.stack(GOLDEN), 2, backend="fortran")


def test_env_flag_selects_numpy():
    code = "import srl._accel as a, srl.kernels as k; print(a.HAVE_NUMBA, k.default_backend())"
    out = subprocess.run(
        [sys.executable, "-c", code], env={**os.environ, "SRL_DISABLE_NUMBA": "1"},
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.split() == ["False", "numpy"]
