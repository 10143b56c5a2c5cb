import numpy as np
import pytest

from neupde import _kernels
from neupde._kernels import _pykernels as py
from neupde.dictionary import DictionarySpec

ck = pytest.importorskip("neupde._kernels._ckernels")


@pytest.fixture(params=[(3, 2, 20, "tanh"), (9, 2, 50, "elu"), (4, 4, 5, "paper_elu")])
def problem(request):
    nv, p, h, act = request.param
    rng = np.random.default_rng(nv * 10 + p)
    E = DictionarySpec(nv, p).exponents
    n = E.shape[0]
    Z = np.ascontiguousarray(rng.uniform(-1, 1, (257, nv)))
    A1 = rng.normal(size=(h, n)) / np.sqrt(n)
    A2 = rng.normal(size=(2, h)) / np.sqrt(h)
    b1, b2 = rng.normal(size=h), rng.normal(size=2)
    code = {"tanh": _kernels.TANH, "elu": _kernels.ELU, "paper_elu": _kernels.PAPER_ELU}[act]
    W = np.ascontiguousarray(rng.normal(size=(257, 2)))
    return Z, E, A1, b1, A2, b2, code, W


def test_monomials_agree(problem):
    Z, E = problem[:2]
    np.testing.assert_allclose(ck.monomials(Z, E), py.monomials(Z, E), rtol=1e-13, atol=1e-14)


def test_monomials_vjp_agree(problem):
    Z, E = problem[:2]
    G = np.random.default_rng(3).normal(size=(Z.shape[0], E.shape[0]))
    np.testing.assert_allclose(ck.monomials_vjp(Z, E, G), py.monomials_vjp(Z, E, G),
                               rtol=1e-12, atol=1e-12)


def test_field_forward_backward_agree(problem):
    Z, E, A1, b1, A2, b2, code, W = problem
    fc = ck.field_forward(Z, E, A1, b1, A2, b2, code)
    fp = py.field_forward(Z, E, A1, b1, A2, b2, code)
    for a, b in zip(fc, fp):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    bc = ck.field_backward(Z, E, fc[0], fc[1], A1, A2, code, W)
    bp = py.field_backward(Z, E, fp[0], fp[1], A1, A2, code, W)
    for a, b in zip(bc, bp):
        np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-11)


def test_monomials_vjp_matches_jacobian(problem):
    Z, E = problem[:2]
    G = np.random.default_rng(4).normal(size=(Z.shape[0], E.shape[0]))
    J = py.monomials_jacobian(Z, E)
    np.testing.assert_allclose(py.monomials_vjp(Z, E, G), np.einsum("bn,bnv->bv", G, J),
                               rtol=1e-12, atol=1e-12)


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")
