"""The two snowflake embeddings and their L_p distances.

Kernel construction: S = p (1-eps)^{1/p} T with T(x)(z) = N(x^{-1}z)^{-alpha}
- N(z)^{-alpha}; distances reduce by left invariance to a single kernel norm,
estimated by Monte Carlo (the ambient dimension 2n+1 rules out deterministic
cubature).

Representation construction: the cocycle of the Gaussian unit vector under
the family of Schrodinger representations.  Its L_p distance has the scalar
closed form

    ||Q(x) - Q(y)||_p = (1-eps)^{1/p} * I(s, w)^{1/p},   (u,v,w) = x^{-1}y,
    s = |u|^2 + |v|^2,

with I the scale integral from heislp.quadrature, so no infinite-dimensional
object is ever materialized.  A grid oracle for the single-representation
pairing ||g - sigma_lambda(u,v,w) g||^2 validates the closed form that the
reduction rests on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .group import (
    EmbeddingParams,
    GroupPoint,
    inverse,
    koranyi_norm,
    multiply,
)
from .mc import MCEstimate, kernel_values, mc_kernel_norm
from .quadrature import QuadratureResult, _lambda_integral_unit, check_eps, lambda_integral

__all__ = [
    "KernelFunction",
    "kernel_eval",
    "kernel_distance",
    "ReprDistance",
    "repr_distance",
    "repr_envelope",
    "schrodinger_pairing_oracle",
]


# ---------------------------------------------------------------------------
# kernel side


@dataclass(frozen=True)
class KernelFunction:
    """Lazy representation of z -> T(x)(z) for a fixed basepoint."""

    basepoint: GroupPoint
    params: EmbeddingParams

    def __call__(self, z: GroupPoint) -> float:
        return kernel_eval(self.basepoint, z, self.params)


def kernel_eval(x: GroupPoint, z: GroupPoint, params: EmbeddingParams) -> float:
    """T(x)(z) = N(x^{-1}z)^{-alpha} - N(z)^{-alpha}.

    Signed infinity at the two integrable poles z = identity (negative side)
    and z = x (positive side).
    """
    if x.n != params.n or z.n != params.n:
        raise ValueError("points must live in H_n for the given params")
    vals = kernel_values(
        x, np.asarray(z.u)[None, :], np.asarray(z.v)[None, :], np.asarray([z.w]), params
    )
    return float(vals[0])


def kernel_distance(x: GroupPoint, y: GroupPoint, params: EmbeddingParams,
                    samples: int = 10**6, seed: int = 0, workers: int = 1) -> MCEstimate:
    """||S(x) - S(y)||_p with S = p (1-eps)^{1/p} T.

    Left invariance reduces the difference to p(1-eps)^{1/p} ||T(y^{-1}x)||_p;
    the p-th root of the Monte Carlo norm estimate is returned with a
    delta-method standard error.
    """
    if x == y:
        return MCEstimate(0.0, 0.0, samples, seed)
    g = multiply(inverse(y), x)
    est = mc_kernel_norm(g, params, samples=samples, seed=seed, workers=workers)
    p = params.p
    scale = p * (1.0 - params.eps) ** (1.0 / p)
    mean = scale * est.mean ** (1.0 / p)
    se = scale * est.mean ** (1.0 / p - 1.0) * est.std_error / p
    return MCEstimate(mean, se, samples, seed)


# ---------------------------------------------------------------------------
# representation side


def _pair_to_sw(x: GroupPoint, y: GroupPoint):
    g = multiply(inverse(x), y)
    s = sum(a * a for a in g.u) + sum(a * a for a in g.v)
    return s, g.w


def repr_distance(x: GroupPoint, y: GroupPoint, params: EmbeddingParams,
                  tol: float = 1e-8) -> QuadratureResult:
    """||Q(x) - Q(y)||_p = (1-eps)^{1/p} I(s, w)^{1/p} by direct quadrature."""
    s, w = _pair_to_sw(x, y)
    r = lambda_integral(s, w, params.p, params.eps, tol=tol)
    if r.value == 0.0:
        return QuadratureResult(0.0, 0.0, r.evaluations, degenerate=r.degenerate)
    p = params.p
    pref = (1.0 - params.eps) ** (1.0 / p)
    val = pref * r.value ** (1.0 / p)
    err = pref * r.value ** (1.0 / p - 1.0) * r.abs_error / p
    return QuadratureResult(val, err, r.evaluations)


class ReprDistance:
    """Vector-friendly evaluator of the representation distance.

    Holds a Chebyshev-Lobatto interpolant (in the stretched variable
    sigma = sqrt(tau), tau = s/(s+|w|)) of the normalized scale integral,
    so bulk metric evaluations cost a few flops per pair after a one-time
    build.  The build validates itself against direct quadrature at the node
    midpoints and records the observed interpolation error.
    """

    def __init__(self, params: EmbeddingParams, tol: float = 1e-8, nodes: int = 65):
        check_eps(params.eps)
        self.params = params
        self.tol = tol
        m = int(nodes)
        if m < 9:
            raise ValueError("need at least 9 interpolation nodes")
        j = np.arange(m)
        sigma = 0.5 * (1.0 - np.cos(math.pi * j / (m - 1)))
        self._sigma = sigma
        self._tau = sigma * sigma
        vals = np.empty(m)
        errs = np.empty(m)
        nev = 0
        for i, t in enumerate(self._tau):
            v, e, k = _lambda_integral_unit(float(t), params.p, params.eps, tol)
            vals[i] = v
            errs[i] = e
            nev += k
        self._vals = vals
        self.node_error = float(errs.max())
        # barycentric weights for Chebyshev-Lobatto points
        bw = np.ones(m)
        bw[1::2] = -1.0
        bw[0] *= 0.5
        bw[-1] *= 0.5
        self._bw = bw
        self.evaluations = nev
        # validate at midpoints against direct quadrature
        mid_sigma = 0.5 * (sigma[:-1] + sigma[1:])
        direct = np.array(
            [
                _lambda_integral_unit(float(t), params.p, params.eps, tol)[0]
                for t in mid_sigma**2
            ]
        )
        interp = self._unit(mid_sigma**2)
        self.interp_error = float(np.max(np.abs(interp - direct)))
        self.abs_tol = self.node_error + 2.0 * self.interp_error

    def _unit(self, tau):
        """Barycentric interpolation of the normalized integral at tau."""
        tau = np.asarray(tau, float)
        sigma = np.sqrt(tau)
        d = sigma[..., None] - self._sigma
        exact = d == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            c = self._bw / d
            out = (c @ self._vals) / np.sum(c, axis=-1)
        hit = exact.any(axis=-1)
        if np.any(hit):
            idx = np.argmax(exact, axis=-1)
            out = np.where(hit, self._vals[idx], out)
        return out

    def unit_values(self, tau):
        return self._unit(tau)

    @property
    def min_unit_distance(self) -> float:
        """Safe lower bound for dist(e, x) / N(x)^{1-eps} (used for boxes)."""
        p = self.params.p
        lo = float(self._vals.min()) - self.abs_tol
        return 0.98 * (1.0 - self.params.eps) ** (1.0 / p) * max(lo, 0.0) ** (1.0 / p)

    def distance_from_sw(self, s, w):
        """Distances to the identity from (s, w) arrays."""
        s = np.asarray(s, float)
        w = np.asarray(w, float)
        m = s + np.abs(w)
        p = self.params.p
        beta = (1.0 - self.params.eps) * p / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(m > 0.0, s / np.where(m > 0.0, m, 1.0), 0.0)
        unit = self._unit(tau)
        val = (1.0 - self.params.eps) ** (1.0 / p) * (m**beta * unit) ** (1.0 / p)
        return np.where(m > 0.0, val, 0.0)

    def distance_arrays(self, x: GroupPoint, U, V, W):
        """Distances from x to a batch of points given by coordinate arrays."""
        xu = np.asarray(x.u, float)
        xv = np.asarray(x.v, float)
        U = np.asarray(U, float)
        V = np.asarray(V, float)
        W = np.asarray(W, float)
        du = U - xu
        dv = V - xv
        s = np.sum(du * du, axis=-1) + np.sum(dv * dv, axis=-1)
        w = W - x.w + 2.0 * (V @ xu) - 2.0 * (U @ xv)
        return self.distance_from_sw(s, w)

    def __call__(self, x: GroupPoint, y: GroupPoint) -> float:
        s, w = _pair_to_sw(x, y)
        return float(self.distance_from_sw(np.asarray([s]), np.asarray([w]))[0])


def repr_envelope(g: GroupPoint, params: EmbeddingParams):
    """The two structural terms the scale integral is equivalent to.

    Returns (term_uv, term_w): the horizontal part (|u|^2+|v|^2)^{(1-eps)/2}
    scaled by eps^{-1/p} + (1-eps)^{-1/p}, and the central part
    |w|^{(1-eps)/2} (1-eps)^{-1/p}.  The distance divided by their sum stays
    inside constant bounds.
    """
    p = params.p
    eps = params.eps
    s = sum(a * a for a in g.u) + sum(a * a for a in g.v)
    half = (1.0 - eps) / 2.0
    term_uv = (eps ** (-1.0 / p) + (1.0 - eps) ** (-1.0 / p)) * s**half
    term_w = abs(g.w) ** half * (1.0 - eps) ** (-1.0 / p)
    return term_uv, term_w


# ---------------------------------------------------------------------------
# Schrodinger-representation grid oracle (n = 1)


def schrodinger_pairing_oracle(lam: float, u: float, v: float, w: float,
                               L: float | None = None, h: float = 0.005) -> float:
    """||g - sigma_lam(u,v,w) g||^2 on L_2(R) by direct grid summation.

    sigma_lam(u,v,w) g(x) = exp(i lam (w - 2uv) + 2i sqrt(lam) v x)
    g(x - 2 sqrt(lam) u) with g the unit-width Gaussian e^{-x^2/2}.  The
    trapezoid rule on [-L, L] is spectrally accurate for these integrands.
    Matches 2 sqrt(pi) (1 - e^{-lam(u^2+v^2)} cos(lam w)) to grid accuracy.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    needed = 8.0 + 2.0 * math.sqrt(lam) * (abs(u) + abs(v))
    if L is None:
        L = needed + 2.0
    if L < needed:
        raise ValueError(f"grid reach L={L} too small; need at least {needed:.2f}")
    if h > 0.01:
        raise ValueError("grid spacing h must be <= 0.01")
    x = np.arange(-L, L + 0.5 * h, h)
    g = np.exp(-0.5 * x * x)
    rl = math.sqrt(lam)
    phase = lam * (w - 2.0 * u * v) + 2.0 * rl * v * x
    shifted = np.exp(-0.5 * (x - 2.0 * rl * u) ** 2)
    diff = g - np.exp(1j * phase) * shifted
    return float(np.sum(np.abs(diff) ** 2) * h)
