"""Pure-Python/NumPy kernels, used when the compiled extension is absent.

Both functions mirror ``_fast.pyx`` operation for operation.  Path sampling
only compares doubles, so it is bit-identical across backends; the LSTD
accumulation agrees to rounding (the projection matvec goes through
different BLAS entry points).
"""

from bisect import bisect_right

import numpy as np


def sample_path(cdf, u, x0):
    """Walk a chain from ``x0`` using one uniform per transition.

    ``cdf[x]`` is the cumulative row of P for state ``x``; the next state is
    the number of cdf entries ``<= u`` (clamped to the last state).
    """
    n_states = cdf.shape[0]
    last = n_states - 1
    rows = cdf.tolist()
    out = np.empty(len(u) + 1, dtype=np.int64)
    x = int(x0)
    out[0] = x
    for t, ut in enumerate(u.tolist(), start=1):
        x = bisect_right(rows[x], ut)
        if x > last:
            x = last
        out[t] = x
    return out


def lstd_accumulate(Phi, H, states, rewards, gamma, lam):
    """Running-average accumulation of (A_hat, b_hat) along a trajectory.

    Processes the ``n - 1`` transitions of ``states``.  ``H=None`` means the
    identity projection (psi = phi).
    """
    n = states.shape[0]
    lg = lam * gamma
    if H is None:
        def proj(x):
            return Phi[x].copy()
        k = Phi.shape[1]
    else:
        def proj(x):
            return H @ Phi[x]
        k = H.shape[0]

    A = np.zeros((k, k))
    b = np.zeros(k)
    z = np.zeros(k)
    psi = proj(states[0])
    for t in range(1, n):
        psi_next = proj(states[t])
        z = lg * z + psi
        A += (np.outer(z, psi - gamma * psi_next) - A) / t
        b += (z * rewards[t - 1] - b) / t
        psi = psi_next
    return A, b
