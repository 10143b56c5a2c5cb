"""Pure numpy implementation of the field kernels.

Every function works on a batch of points: ``Z`` has shape (B, nv) and
holds the (already normalized) dictionary variables, ``E`` is the (n, nv)
integer exponent matrix of a dictionary.
"""

import numpy as np

TANH, ELU, PAPER_ELU = 0, 1, 2


def activation(code, x):
    """Return (sigma(x), sigma'(x)) for the activation with the given code."""
    if code == TANH:
        s = np.tanh(x)
        return s, 1.0 - s * s
    # exp(min(x, 0)) - 1 + max(x, 0) is exact on both branches and avoids np.where
    if code == ELU:
        ex = np.exp(np.minimum(x, 0.0))
        return ex - 1.0 + np.maximum(x, 0.0), ex
    if code == PAPER_ELU:
        ex = np.exp(np.maximum(x, 0.0))
        return ex - 1.0 + np.minimum(x, 0.0), ex
    raise ValueError(f"unknown activation code {code}")


def _factors(Z, E):
    # factors[i][b, j] = Z[b, i] ** E[j, i]
    p = int(E.max()) if E.size else 0
    P = Z[:, :, None] ** np.arange(p + 1)
    return [P[:, i, E[:, i]] for i in range(Z.shape[1])], P


def monomials(Z, E):
    Z = np.ascontiguousarray(Z, dtype=float)
    factors, _ = _factors(Z, E)
    out = np.ones((Z.shape[0], E.shape[0]))
    for f in factors:
        out *= f
    return out


def monomials_vjp(Z, E, G):
    """dZ[b, i] = sum_j G[b, j] * d Phi_j / d Z_i."""
    Z = np.ascontiguousarray(Z, dtype=float)
    factors, P = _factors(Z, E)
    nv = Z.shape[1]
    prefix = [np.ones((Z.shape[0], E.shape[0]))]
    for f in factors[:-1]:
        prefix.append(prefix[-1] * f)
    dZ = np.empty_like(Z)
    suffix = np.ones((Z.shape[0], E.shape[0]))
    for i in range(nv - 1, -1, -1):
        e = E[:, i]
        deriv = e * P[:, i, np.maximum(e - 1, 0)]
        dZ[:, i] = np.sum(G * prefix[i] * suffix * deriv, axis=1)
        suffix = suffix * factors[i]
    return dZ


def monomials_jacobian(Z, E):
    """Full Jacobian, shape (B, n, nv)."""
    Z = np.ascontiguousarray(Z, dtype=float)
    factors, P = _factors(Z, E)
    nv = Z.shape[1]
    J = np.empty((Z.shape[0], E.shape[0], nv))
    for i in range(nv):
        e = E[:, i]
        col = e * P[:, i, np.maximum(e - 1, 0)]
        for r in range(nv):
            if r != i:
                col = col * factors[r]
        J[:, :, i] = col
    return J


def field_forward(Z, E, A1, b1, A2, b2, act):
    """Dictionary + perceptron forward pass.

    Returns (Phi, pre, out) where Phi are the monomial features, pre the
    hidden pre-activations and out = A2 sigma(pre) + b2.
    """
    Phi = monomials(Z, E)
    pre = Phi @ A1.T + b1
    s, _ = activation(act, pre)
    out = s @ A2.T + b2
    return Phi, pre, out


def field_backward(Z, E, Phi, pre, A1, A2, act, W):
    """Reverse pass for ``field_forward`` with output cotangent W (B, o).

    Returns (dZ, dA1, db1, dA2, db2); parameter gradients are summed over
    the batch.
    """
    s, ds = activation(act, pre)
    dA2 = W.T @ s
    db2 = W.sum(axis=0)
    dpre = (W @ A2) * ds
    dA1 = dpre.T @ Phi
    db1 = dpre.sum(axis=0)
    dPhi = dpre @ A1
    dZ = monomials_vjp(Z, E, dPhi)
    return dZ, dA1, db1, dA2, db2
