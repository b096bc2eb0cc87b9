import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlocal.matrixkit import (
    I2,
    SX,
    SY,
    SZ,
    ShapeError,
    is_density,
    is_hermitian,
    is_psd,
    ket,
    kron,
    min_eigenvalue,
    num_qubits,
    partial_trace,
    projector,
    singular_values_3x3,
)
from nlocal.states import bell_state, random_density

from conftest import random_hermitian, random_rotation, seeds


def brute_partial_trace(m, qubit_count, traced):
    """Index-by-index contraction over the traced qubits."""
    keep = [q for q in range(qubit_count) if q not in traced]
    d = 2 ** len(keep)
    out = np.zeros((d, d), dtype=complex)
    for r, c in itertools.product(range(d), repeat=2):
        rbits = format(r, f"0{len(keep)}b") if keep else ""
        cbits = format(c, f"0{len(keep)}b") if keep else ""
        for tb in itertools.product("01", repeat=len(traced)):
            row = ["0"] * qubit_count
            col = ["0"] * qubit_count
            for q, b in zip(keep, rbits):
                row[q] = b
            for q, b in zip(keep, cbits):
                col[q] = b
            for q, b in zip(traced, tb):
                row[q] = col[q] = b
            out[r, c] += m[int("".join(row), 2), int("".join(col), 2)]
    return out


def test_kron_examples():
    np.testing.assert_array_equal(kron(I2, I2), np.eye(4))
    np.testing.assert_array_equal(kron(SZ, SZ), np.diag([1, -1, -1, 1]))
    np.testing.assert_array_equal(
        kron(projector(ket("0")), projector(ket("1"))), projector(ket("01"))
    )


def test_kron_rejects_non_square():
    with pytest.raises(ShapeError):
        kron(np.ones((2, 3)))


@given(seeds)
def test_kron_trace_factorises(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.trace(kron(a, b)) == pytest.approx(np.trace(a) * np.trace(b), abs=1e-12)


def test_partial_trace_examples():
    phi = bell_state("phi-").rho
    np.testing.assert_allclose(partial_trace(phi, 2, {1}), I2 / 2, atol=1e-15)
    np.testing.assert_allclose(partial_trace(projector(ket("01")), 2, {0}), projector(ket("1")))


@given(seeds)
def test_partial_trace_of_product(seed):
    rng = np.random.default_rng(seed)
    rho, tau = random_hermitian(rng, 2), random_hermitian(rng, 2)
    np.testing.assert_allclose(partial_trace(kron(rho, tau), 2, {1}), rho * np.trace(tau), atol=1e-12)


@given(seeds, st.integers(min_value=1, max_value=4), st.data())
def test_partial_trace_matches_index_contraction(seed, qubits, data):
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, 2**qubits)
    traced = data.draw(st.sets(st.integers(0, qubits - 1)))
    expected = brute_partial_trace(m, qubits, sorted(traced))
    np.testing.assert_allclose(partial_trace(m, qubits, traced), expected, atol=1e-12)


@given(seeds, st.data())
def test_partial_trace_preserves_trace_and_positivity(seed, data):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, dim=8)
    traced = data.draw(st.sets(st.integers(0, 2), max_size=2))
    out = partial_trace(rho, 3, traced)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
    assert is_density(out)


def test_partial_trace_shape_errors():
    with pytest.raises(ShapeError):
        partial_trace(np.eye(4), 3, {0})
    with pytest.raises(ShapeError):
        partial_trace(np.eye(4), 2, {2})


def test_predicates():
    assert is_hermitian(SY) and not is_hermitian(SY @ SX + 0.1j * I2 @ SZ)
    assert is_psd(np.eye(2)) and not is_psd(SZ)
    assert min_eigenvalue(SZ) == pytest.approx(-1.0)
    assert is_density(np.eye(4) / 4) and not is_density(np.eye(4) / 2)
    assert num_qubits(np.eye(8)) == 3
    with pytest.raises(ShapeError):
        num_qubits(np.eye(3))


def test_singular_value_examples():
    assert singular_values_3x3(np.diag([-0.9, 0.9, 0.95])) == pytest.approx((0.95, 0.9, 0.9), abs=1e-15)
    assert singular_values_3x3(np.zeros((3, 3))) == (0.0, 0.0, 0.0)
    with pytest.raises(ShapeError):
        singular_values_3x3(np.zeros((2, 3)))


@given(seeds)
def test_singular_values_match_dense_svd(seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1, 1, size=(3, 3))
    ours = singular_values_3x3(w)
    ref = np.linalg.svd(w, compute_uv=False)
    np.testing.assert_allclose(ours, ref, atol=1e-10)
    assert list(ours) == sorted(ours, reverse=True)
    assert min(ours) >= 0


@given(seeds)
def test_singular_values_rank_deficient(seed):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=3), rng.normal(size=3)
    s = singular_values_3x3(np.outer(u, v))
    assert s[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v), rel=1e-12)
    assert s[1] < 1e-12 and s[2] < 1e-12


@given(seeds)
def test_singular_values_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1, 1, size=(3, 3))
    r1, r2 = random_rotation(rng), random_rotation(rng)
    np.testing.assert_allclose(singular_values_3x3(r1 @ w @ r2), singular_values_3x3(w), atol=1e-10)
