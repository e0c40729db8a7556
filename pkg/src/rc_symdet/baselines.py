"""Model-based reference receivers: LMMSE estimation/equalization and sphere decoding."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

__all__ = [
    "FrequencyChannelEstimate",
    "orthogonal_pilots",
    "lmmse_channel_estimate",
    "lmmse_equalize",
    "sphere_decode",
    "sphere_detect_grid",
    "brute_force_ml",
]


@dataclass
class FrequencyChannelEstimate:
    h: np.ndarray  # (n_sc, n_r, n_t)
    noise_var: float

    def __post_init__(self):
        if self.noise_var < 0:
            raise ConfigError("noise_var must be >= 0")


def orthogonal_pilots(q, n_sc, n_t, seed=None):
    """Reference grids ``(q, n_sc, n_t)`` with orthogonal antenna columns per subcarrier.

    Entry ``[k, n, j] = a[n, j] * exp(-2j*pi*k*j/q)`` with ``a`` random QPSK,
    so every per-subcarrier pilot matrix ``P`` satisfies ``P^H P = q I``.
    """
    if q < n_t:
        raise ConfigError(f"orthogonal pilots need q >= n_t ({q} < {n_t})")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n_sc, n_t, 2))
    a = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2)
    k = np.arange(q)[:, None]
    j = np.arange(n_t)[None, :]
    dft = np.exp(-2j * np.pi * k * j / q)
    return dft[:, None, :] * a[None, :, :]


def lmmse_channel_estimate(rx_pilots, tx_pilots, noise_var, prior_var=None):
    """Per-subcarrier LMMSE fit of ``y = H z`` over the pilot symbols.

    ``rx_pilots`` is ``(Q, n_sc, n_r)``, ``tx_pilots`` is ``(Q, n_sc, n_t)``.
    With ``P`` the ``Q x n_t`` pilot matrix and ``Y`` the ``Q x n_r``
    observations of one subcarrier,
    ``H^T = (P^H P + (noise_var / prior_var) I)^-1 P^H Y``.

    ``prior_var`` is the variance of one channel entry.  When omitted it is
    estimated from the pilot receive power, which keeps the estimator
    invariant to an unknown common gain (e.g. the PA drive level).
    """
    y = np.asarray(rx_pilots)
    p = np.asarray(tx_pilots)
    if y.ndim != 3 or p.ndim != 3 or y.shape[:2] != p.shape[:2]:
        raise ShapeError(f"pilot shapes {p.shape} and {y.shape} do not match")
    if y.shape[0] < 1:
        raise ConfigError("need at least one pilot symbol")
    if prior_var is None:
        signal = np.mean(np.abs(y) ** 2) - noise_var
        prior_var = max(signal, 1e-12 * max(noise_var, 1e-300)) / np.mean(np.sum(np.abs(p) ** 2, axis=-1))
    if prior_var <= 0:
        raise ConfigError("prior_var must be positive")
    P = np.moveaxis(p, 0, 1)  # (n_sc, Q, n_t)
    Y = np.moveaxis(y, 0, 1)
    Ph = np.conj(np.swapaxes(P, -1, -2))
    gram = Ph @ P + (noise_var / prior_var) * np.eye(P.shape[-1])
    ht = np.linalg.solve(gram, Ph @ Y)  # (n_sc, n_t, n_r)
    return FrequencyChannelEstimate(np.swapaxes(ht, -1, -2), float(noise_var))


def lmmse_equalize(est, rx_grid):
    """``z_hat(n) = (H^H H + noise_var I)^-1 H^H y(n)`` for grids ``(..., n_sc, n_r)``."""
    y = np.asarray(rx_grid)
    H = est.h
    if y.shape[-2:] != (H.shape[0], H.shape[1]):
        raise ShapeError(f"grid {y.shape} does not match channel estimate {H.shape}")
    Hh = np.conj(np.swapaxes(H, -1, -2))
    gram = Hh @ H + est.noise_var * np.eye(H.shape[-1])
    G = np.linalg.solve(gram, Hh)  # (n_sc, n_t, n_r)
    return np.einsum("ntr,...nr->...nt", G, y)


def brute_force_ml(H, y, constellation):
    """Exhaustive search over ``constellation ** n_t``; returns ``(z, metric)``."""
    H = np.asarray(H)
    n_t = H.shape[1]
    c = np.asarray(constellation)
    grids = np.meshgrid(*([c] * n_t), indexing="ij")
    cand = np.stack([g.ravel() for g in grids], axis=-1)
    metrics = np.sum(np.abs(y[None, :] - cand @ H.T) ** 2, axis=1)
    i = int(np.argmin(metrics))
    return cand[i], float(metrics[i])


def sphere_decode(H, y, constellation, radius=None):
    """Exact ML detection ``argmin_z ||y - H z||^2`` over a finite alphabet.

    QR-decomposes ``H`` and runs a depth-first search that visits the
    children of each node in Schnorr-Euchner order (closest first) and
    shrinks the radius at every leaf.  With the default infinite radius the
    first leaf is the Babai point, so the search cannot come up empty.  A
    finite ``radius`` that turns out to hold no lattice point is doubled
    until one is found.

    Returns ``(z, metric)``.
    """
    H = np.asarray(H, dtype=complex)
    y = np.asarray(y, dtype=complex)
    c = np.asarray(constellation, dtype=complex)
    n_r, n_t = H.shape
    if n_r < n_t:
        raise ShapeError(f"sphere decoding needs n_r >= n_t, got {H.shape}")
    if y.shape != (n_r,):
        raise ShapeError(f"y must have length {n_r}")
    Q, R = np.linalg.qr(H, mode="complete")
    yt = Q.conj().T @ y
    # energy outside the column span of H is a constant offset of every metric
    tail = float(np.sum(np.abs(yt[n_t:]) ** 2))
    yt, R = yt[:n_t], R[:n_t]
    r2 = np.inf if radius is None else float(radius) ** 2
    while True:
        z, _ = _sd_search(R, yt, c, max(r2 - tail, 0.0) if np.isfinite(r2) else np.inf)
        if z is not None:
            return z, float(np.sum(np.abs(y - H @ z) ** 2))
        r2 = 4.0 * r2 if r2 > 0 else 1.0


def _sd_search(R, yt, c, r2):
    n = R.shape[0]
    best_z = None
    best = r2
    z = np.zeros(n, dtype=complex)
    # per-level candidate order, partial metric, and position in that order
    order = [None] * n
    pos = np.zeros(n, dtype=int)
    partial = np.zeros(n + 1)
    level = n - 1

    def expand(k):
        off = yt[k] - R[k, k + 1 :] @ z[k + 1 :]
        inc = np.abs(off - R[k, k] * c) ** 2
        idx = np.argsort(inc, kind="stable")
        order[k] = (idx, inc[idx])
        pos[k] = 0

    expand(level)
    while True:
        idx, inc = order[level]
        i = pos[level]
        if i >= idx.size or partial[level + 1] + inc[i] >= best:
            level += 1
            if level >= n:
                return best_z, best
            pos[level] += 1
            continue
        z[level] = c[idx[i]]
        partial[level] = partial[level + 1] + inc[i]
        if level == 0:
            best = partial[0]
            best_z = z.copy()
            pos[0] += 1
            continue
        level -= 1
        expand(level)


def sphere_detect_grid(est, rx_grid, constellation):
    """Sphere-decode every subcarrier of ``rx_grid`` ``(..., n_sc, n_r)``."""
    y = np.asarray(rx_grid)
    out = np.empty(y.shape[:-1] + (est.h.shape[2],), dtype=complex)
    for idx in np.ndindex(y.shape[:-1]):
        out[idx] = sphere_decode(est.h[idx[-1]], y[idx], constellation)[0]
    return out
