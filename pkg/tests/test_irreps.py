import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_symtensor
from hermite_mrt.irreps import (
    IrrepParts,
    decompose,
    max_trace_defect,
    reassemble,
    relax_parts,
    scale_parts,
)
from hermite_mrt.symtensor import SymTensor


def _tensor(full):
    full = np.asarray(full, float)
    return SymTensor.from_full(full, full.ndim, full.shape[0])


def test_rank2_example():
    p = decompose(_tensor([[2, 1], [1, 0]]))
    np.testing.assert_allclose(p[0].full(), [[1, 1], [1, -1]])
    assert float(p[1].data[0]) == 2.0


@pytest.mark.parametrize("dim", [2, 3])
def test_pure_trace(dim):
    p = decompose(SymTensor.delta(dim) * 1.7)
    assert np.abs(p[0].data).max() < 1e-15
    assert float(p[1].data[0]) == pytest.approx(1.7 * dim)


def test_rank3_example():
    full = np.zeros((2, 2, 2))
    full[0, 0, 0] = 1.0
    p = decompose(_tensor(full))
    assert p[0][0, 0, 0] == pytest.approx(0.25)
    np.testing.assert_allclose(p[1].full(), [1.0, 0.0])


def test_rank3_projector_oracle():
    # build the traceless projector as the orthogonal complement of sym(v delta) in D=2
    dim = 2
    basis = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        basis.append(SymTensor.vector(e).sym(SymTensor.delta(dim)).full().ravel())
    B = np.array(basis).T
    P = np.eye(dim**3) - B @ np.linalg.pinv(B)
    full = np.zeros((2, 2, 2))
    full[0, 0, 0] = 1.0
    ref = (P @ full.ravel()).reshape(full.shape)
    np.testing.assert_allclose(decompose(_tensor(full))[0].full(), ref, atol=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("rank", [2, 3, 4])
def test_tracelessness_and_reassembly(rng, dim, rank):
    for _ in range(1000 // 6 + 1):
        a = random_symtensor(rng, rank, dim, scale=rng.uniform(0.1, 10))
        parts = decompose(a)
        scale = float(a.norm())
        assert max_trace_defect(parts) <= 1e-12 * scale
        back = reassemble(parts)
        assert np.abs(back.data - a.data).max() <= 1e-13 * scale


def test_tracelessness_vectorized(rng):
    # 1000 samples per (rank, dim) carried as one batch
    for dim in (2, 3):
        for rank in (2, 3, 4):
            a = random_symtensor(rng, rank, dim, batch=(1000,))
            parts = decompose(a)
            norms = a.norm()
            for p in [parts[0]] + ([parts[1]] if rank == 4 else []):
                assert np.all(np.abs(p.trace().data) <= 1e-12 * norms)
            assert np.all(np.abs(reassemble(parts).data - a.data) <= 1e-13 * norms)


@pytest.mark.parametrize("dim", [2, 3])
def test_rank4_isotropic_structure(rng, dim):
    a = random_symtensor(rng, 4, dim)
    prime, dev2, s = decompose(a).parts
    t = a.trace()
    ss = float(t.trace().data[0])
    np.testing.assert_allclose((t - SymTensor.delta(dim) * (ss / dim)).data, dev2.data, atol=1e-13)
    iso = dev2.sym(SymTensor.delta(dim)) * (6 / (dim + 4)) + SymTensor.delta(dim, 2) * (
        3 * ss / (dim * (dim + 2))
    )
    np.testing.assert_allclose((a - iso).data, prime.data, atol=1e-13)


def test_printed_isotropic_term_is_not_symmetric():
    # delta_ij delta_kl + delta_ik delta_jl + delta_il delta_jl is not invariant under index swaps
    I = np.eye(2)
    last = I[:, None, None, :] * I[None, :, None, :] * np.ones((1, 1, 2, 1))
    printed = np.einsum("ij,kl->ijkl", I, I) + np.einsum("ik,jl->ijkl", I, I) + last
    assert not np.allclose(printed, printed.transpose(0, 1, 3, 2))


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("rank", [2, 3, 4])
def test_projection_idempotence(rng, dim, rank):
    parts = decompose(random_symtensor(rng, rank, dim))
    for k in range(len(parts)):
        only = IrrepParts(rank, tuple(p if j == k else p * 0.0 for j, p in enumerate(parts)))
        again = decompose(reassemble(only))
        for j, p in enumerate(again):
            ref = parts[k] if j == k else p * 0.0
            assert np.abs(p.data - ref.data).max() <= 1e-12


def _rotation(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("rank", [2, 3, 4])
def test_rotation_equivariance(rng, dim, rank):
    for _ in range(20):
        R = _rotation(rng, dim)
        a = random_symtensor(rng, rank, dim)
        lhs = decompose(a.rotate(R))
        rhs = decompose(a)
        for p, q in zip(lhs, rhs):
            assert np.abs(p.data - q.rotate(R).data).max() <= 1e-10


def test_relax_parts_examples(rng):
    a = random_symtensor(rng, 2, 3)
    parts = decompose(a)
    neg = relax_parts(parts, (1.0, 1.0))
    for p, q in zip(neg, parts):
        np.testing.assert_allclose(p.data, -q.data)
    frozen = relax_parts(parts, (1e12, 1e12))
    assert all(np.abs(p.data).max() < 1e-10 for p in frozen)
    mixed = relax_parts(parts, (2.0, 0.5))
    np.testing.assert_allclose(mixed[0].data, -0.5 * parts[0].data)
    np.testing.assert_allclose(mixed[1].data, -2.0 * parts[1].data)
    assert max_trace_defect(mixed) < 1e-14


def test_relax_parts_rejects_bad_tau(rng):
    parts = decompose(random_symtensor(rng, 3, 2))
    with pytest.raises(ValueError):
        relax_parts(parts, (1.0, 0.0))
    with pytest.raises(ValueError):
        relax_parts(parts, (1.0,))


@settings(max_examples=40, deadline=None)
@given(rank=st.sampled_from([2, 3, 4]), dim=st.sampled_from([2, 3]),
       tau=st.floats(0.51, 20.0), seed=st.integers(0, 2**32 - 1))
def test_uniform_rate_is_plain_scaling(rank, dim, tau, seed):
    a = random_symtensor(np.random.default_rng(seed), rank, dim)
    parts = decompose(a)
    relaxed = reassemble(relax_parts(parts, [tau] * len(parts)))
    assert np.abs(relaxed.data + a.data / tau).max() <= 1e-13 * max(1.0, float(a.norm()))


def test_zero_tensor_round_trip():
    z = SymTensor.zeros(4, 3)
    assert np.all(reassemble(decompose(z)).data == 0)
    two = IrrepParts(2, (SymTensor.zeros(2, 2), SymTensor.scalar(2.0, 2)))
    np.testing.assert_allclose(reassemble(two).full(), np.eye(2))


def test_malformed_parts_rejected():
    with pytest.raises(ValueError):
        IrrepParts(3, (SymTensor.zeros(3, 2), SymTensor.zeros(2, 2)))
    with pytest.raises(ValueError):
        decompose(SymTensor.zeros(1, 2))
    with pytest.raises(ValueError):
        scale_parts(decompose(SymTensor.zeros(2, 2)), [1.0])
