"""Field kernels: compiled extension when built, numpy otherwise.

Set ``NEUPDE_BACKEND=python`` to force the numpy path.
"""

import os

from . import _pykernels
from ._pykernels import TANH, ELU, PAPER_ELU, activation, monomials_jacobian

_forced = os.environ.get("NEUPDE_BACKEND", "").lower()

try:
    if _forced == "python":
        raise ImportError("numpy backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

monomials = _impl.monomials
monomials_vjp = _impl.monomials_vjp
field_forward = _impl.field_forward
field_backward = _impl.field_backward

__all__ = [
    "BACKEND", "TANH", "ELU", "PAPER_ELU", "activation", "monomials",
    "monomials_vjp", "monomials_jacobian", "field_forward", "field_backward",
]
