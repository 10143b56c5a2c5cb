"""Normalized monomial feature map.

A dictionary is the ordered list of monomials ``t^k x_1^l1 ... x_d^ld`` with
``0 < k + sum(l) <= p``.  States are first sent to ``[-1, 1]^d`` by one global
affine map fitted on the data, so every feature stays bounded by one.
"""

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from . import _kernels
from .errors import DegenerateData, DimensionMismatch


@dataclass(frozen=True)
class NormalizationBounds:
    """Global data range ``[m, M]`` used by :func:`normalize`.

    ``m`` and ``M`` are scalars for the ODE path.  The PDE path stores one
    range per channel, in which case they are 1-d arrays.
    """

    m: object
    M: object

    def __post_init__(self):
        if np.any(np.asarray(self.M) <= np.asarray(self.m)):
            raise DegenerateData(f"upper bound {self.M} must exceed lower bound {self.m}")
        with np.errstate(over="ignore"):
            if not np.all(np.isfinite(self.scale)):
                raise DegenerateData(f"range [{self.m}, {self.M}] too narrow to normalize")

    @property
    def scale(self):
        """Derivative of the normalization map, 2 / (M - m)."""
        return 2.0 / (np.asarray(self.M, dtype=float) - np.asarray(self.m, dtype=float))

    def to_dict(self):
        return {"m": np.asarray(self.m).tolist(), "M": np.asarray(self.M).tolist()}

    @classmethod
    def from_dict(cls, d):
        m, M = d["m"], d["M"]
        if isinstance(m, list):
            m, M = np.asarray(m, dtype=float), np.asarray(M, dtype=float)
        return cls(m, M)


def fit_bounds(data):
    """Global min and max over every component of every sample.

    ``data`` may be a :class:`~neupde.odeint.Trajectory`, a field series, a
    list of either, or a plain array.
    """
    arrays = []
    items = data if isinstance(data, (list, tuple)) else [data]
    for item in items:
        values = getattr(item, "states", None)
        if values is None:
            values = getattr(item, "values", item)
        arrays.append(np.asarray(values, dtype=float).ravel())
    flat = np.concatenate(arrays) if arrays else np.empty(0)
    if flat.size == 0:
        raise ValueError("cannot fit bounds on an empty dataset")
    lo, hi = float(flat.min()), float(flat.max())
    if hi == lo:
        raise DegenerateData(f"all samples equal {lo}; normalization undefined")
    return NormalizationBounds(lo, hi)


def normalize(x, bounds):
    """N(x) = 2 (x - m) / (M - m) - 1, applied componentwise; no clipping."""
    x = np.asarray(x, dtype=float)
    return (x - bounds.m) * bounds.scale - 1.0


def _graded_lex_terms(nvars, degree):
    terms = []
    for deg in range(1, degree + 1):
        for combo in combinations_with_replacement(range(nvars), deg):
            exps = [0] * nvars
            for v in combo:
                exps[v] += 1
            terms.append(tuple(exps))
    return tuple(terms)


@dataclass(frozen=True)
class DictionarySpec:
    """Exponent multi-indices of the monomial dictionary.

    Each term is a tuple over the variables ``(t, x1, ..., xd)`` when
    ``include_time`` is set, else over ``(x1, ..., xd)``.  Terms are in graded
    lexicographic order: by total degree, then descending exponent tuples.
    """

    dim: int
    degree: int
    include_time: bool = False
    terms: tuple = None
    names: tuple = None
    _E: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1 or self.degree < 1:
            raise ValueError("dictionary needs dim >= 1 and degree >= 1")
        if self.terms is None:
            object.__setattr__(self, "terms", _graded_lex_terms(self.nvars, self.degree))
        else:
            terms = tuple(tuple(int(e) for e in t) for t in self.terms)
            for t in terms:
                if len(t) != self.nvars or not 0 < sum(t) <= self.degree or min(t) < 0:
                    raise ValueError(f"invalid term {t} for dim={self.dim}, degree={self.degree}")
            object.__setattr__(self, "terms", terms)
        if self.names is None:
            names = (["t"] if self.include_time else []) + [f"x{i + 1}" for i in range(self.dim)]
            object.__setattr__(self, "names", tuple(names))
        elif len(self.names) != self.nvars:
            raise ValueError("one name per dictionary variable required")
        object.__setattr__(self, "_E", np.array(self.terms, dtype=np.int64).reshape(-1, self.nvars))

    @property
    def nvars(self):
        return self.dim + (1 if self.include_time else 0)

    @property
    def exponents(self):
        return self._E

    def __len__(self):
        return len(self.terms)

    def term_names(self):
        out = []
        for t in self.terms:
            parts = [n if e == 1 else f"{n}^{e}" for n, e in zip(self.names, t) if e]
            out.append("*".join(parts))
        return out

    def to_dict(self):
        return {
            "dim": self.dim,
            "degree": self.degree,
            "include_time": self.include_time,
            "names": list(self.names),
            "terms": [list(t) for t in self.terms],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            dim=int(d["dim"]),
            degree=int(d["degree"]),
            include_time=bool(d["include_time"]),
            terms=tuple(tuple(t) for t in d["terms"]),
            names=tuple(d["names"]) if d.get("names") else None,
        )


def term_count(spec):
    return comb(spec.nvars + spec.degree, spec.degree) - 1


def _stack_inputs(spec, t, z):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != spec.dim:
        raise DimensionMismatch(f"expected {spec.dim} state components, got {Z.shape[1]}")
    if spec.include_time:
        if t is None:
            raise DimensionMismatch("time-dependent dictionary needs t")
        tcol = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1, 1), (Z.shape[0], 1))
        Z = np.hstack([tcol, Z])
    elif t is not None:
        raise DimensionMismatch("autonomous dictionary takes no t")
    return Z, single


def eval_dictionary(spec, t, z):
    """Feature vector(s) for normalized state ``z`` (shape (d,) or (B, d))."""
    Z, single = _stack_inputs(spec, t, z)
    out = _kernels.monomials(Z, spec.exponents)
    return out[0] if single else out


def dictionary_jacobian(spec, t, z):
    """Return (dD/dz, dD/dt).

    dD/dz has shape (n, d) (or (B, n, d) for batched input); dD/dt is the
    time column of shape (n,) / (B, n), or ``None`` for autonomous specs.
    """
    Z, single = _stack_inputs(spec, t, z)
    J = _kernels.monomials_jacobian(Z, spec.exponents)
    if spec.include_time:
        jz, jt = J[:, :, 1:], J[:, :, 0]
    else:
        jz, jt = J, None
    if single:
        return jz[0], (None if jt is None else jt[0])
    return jz, jt
