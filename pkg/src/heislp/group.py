"""Continuous Heisenberg group H_n in (u, v, w) coordinates.

A point carries two horizontal blocks u, v in R^n and a central coordinate w
that scales like length squared.  The group law, Koranyi gauge N, the induced
left-invariant metric d_N and the anisotropic dilations are exact closed
forms; every operation here is a pure function on immutable values.

The interleaved convention (a single vector x in R^{2n+1} whose odd entries
are u, even entries are v and last entry is w, with the central twist written
through the standard symplectic form) is supported only through the
conversion helpers; under the interleaving used here the two group laws agree
coordinate for coordinate.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GroupPoint",
    "EmbeddingParams",
    "identity",
    "multiply",
    "inverse",
    "dilate",
    "koranyi_norm",
    "koranyi_distance",
    "embed_h1",
    "params_from",
    "from_interleaved",
    "to_interleaved",
    "symplectic_form",
    "point_to_dict",
    "point_from_dict",
    "batch_multiply",
    "batch_inverse",
    "batch_norm",
    "batch_distance_from",
]


@dataclass(frozen=True)
class GroupPoint:
    """Element of H_n.

    u, v are length-n tuples of floats, w a float.  Values are immutable and
    never normalized; equality is exact coordinate equality.
    """

    u: tuple
    v: tuple
    w: float

    def __post_init__(self):
        u = tuple(float(a) for a in self.u)
        v = tuple(float(a) for a in self.v)
        w = float(self.w)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        if len(u) == 0 or len(u) != len(v):
            raise ValueError("u and v must be nonempty and of equal length")
        if not all(math.isfinite(a) for a in u + v + (w,)):
            raise ValueError("coordinates must be finite")

    @property
    def n(self) -> int:
        return len(self.u)


def identity(n: int = 1) -> GroupPoint:
    """Identity element (0, 0, 0) of H_n."""
    return GroupPoint((0.0,) * n, (0.0,) * n, 0.0)


def multiply(x: GroupPoint, y: GroupPoint) -> GroupPoint:
    """Group product: (u+u', v+v', w+w' - 2<u,v'> + 2<v,u'>)."""
    if x.n != y.n:
        raise ValueError(f"dimension mismatch: {x.n} != {y.n}")
    uv = sum(a * b for a, b in zip(x.u, y.v))
    vu = sum(a * b for a, b in zip(x.v, y.u))
    return GroupPoint(
        tuple(a + b for a, b in zip(x.u, y.u)),
        tuple(a + b for a, b in zip(x.v, y.v)),
        x.w + y.w - 2.0 * uv + 2.0 * vu,
    )


def inverse(x: GroupPoint) -> GroupPoint:
    """Group inverse, which is plain negation in these coordinates."""
    return GroupPoint(tuple(-a for a in x.u), tuple(-a for a in x.v), -x.w)


def dilate(theta: float, x: GroupPoint) -> GroupPoint:
    """Anisotropic dilation (theta*u, theta*v, theta^2*w); theta > 0."""
    theta = float(theta)
    if not (theta > 0.0) or not math.isfinite(theta):
        raise ValueError("dilation parameter must be a positive finite real")
    return GroupPoint(
        tuple(theta * a for a in x.u),
        tuple(theta * a for a in x.v),
        theta * theta * x.w,
    )


def koranyi_norm(x: GroupPoint) -> float:
    """Koranyi gauge N(u,v,w) = ((|u|^2+|v|^2)^2 + w^2)^{1/4}."""
    m = sum(a * a for a in x.u) + sum(a * a for a in x.v)
    # hypot keeps m^2 + w^2 from overflowing for large coordinates
    return math.sqrt(math.hypot(m, x.w))


def koranyi_distance(x: GroupPoint, y: GroupPoint) -> float:
    """Left-invariant metric d_N(x, y) = N(x^{-1} y)."""
    return koranyi_norm(multiply(inverse(x), y))


def embed_h1(x: GroupPoint, n: int) -> GroupPoint:
    """Canonical embedding of H_1 into H_n by zero-padding u and v.

    A group homomorphism that preserves the Koranyi gauge exactly.
    """
    if x.n != 1:
        raise ValueError("embed_h1 expects a point of H_1")
    if n < 1:
        raise ValueError("target dimension must be >= 1")
    pad = (0.0,) * (n - 1)
    return GroupPoint(x.u + pad, x.v + pad, x.w)


@dataclass(frozen=True)
class EmbeddingParams:
    """Parameter bundle (p, eps, n, alpha) shared by both embeddings.

    n is the integer with n <= p < n+1 and alpha = (2n+2)/p - 1 + eps, so that
    (2n+2) - alpha*p = (1-eps)*p > 0, the local integrability condition for
    the kernel.  Construct through params_from.
    """

    p: float
    eps: float
    n: int
    alpha: float

    def __post_init__(self):
        if not (self.n <= self.p < self.n + 1):
            raise ValueError("n must satisfy n <= p < n+1")
        expected = (2.0 * self.n + 2.0) / self.p - 1.0 + self.eps
        if abs(self.alpha - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError("alpha inconsistent with (p, eps, n)")
        if not (self.alpha * self.p < 2.0 * self.n + 2.0):
            raise ValueError("alpha*p must be < 2n+2")

    @property
    def homogeneous_dim(self) -> int:
        """Homogeneous dimension Q = 2n+2 (Lebesgue scales as theta^Q)."""
        return 2 * self.n + 2

    @property
    def snowflake_exponent(self) -> float:
        return 1.0 - self.eps


def params_from(p: float, eps: float) -> EmbeddingParams:
    """Derive the full parameter bundle from (p, eps).

    eps outside (0, 1/2] is accepted with a warning: the constructions are
    valid on all of (0, 1) but the quantitative statements are usually quoted
    for eps <= 1/2.
    """
    p = float(p)
    eps = float(eps)
    if not math.isfinite(p) or p < 2.0:
        raise ValueError("p must be a finite real >= 2")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if eps > 0.5:
        warnings.warn(
            f"eps={eps} is outside (0, 1/2]; formulas remain valid on (0, 1)",
            stacklevel=2,
        )
    n = int(math.floor(p))
    alpha = (2.0 * n + 2.0) / p - 1.0 + eps
    return EmbeddingParams(p=p, eps=eps, n=n, alpha=alpha)


# ---------------------------------------------------------------------------
# interleaved coordinates


def symplectic_form(x, y) -> float:
    """Standard symplectic form sum_j (x_{2j-1} y_{2j} - x_{2j} y_{2j-1})."""
    x = list(map(float, x))
    y = list(map(float, y))
    if len(x) != len(y) or len(x) % 2 != 0:
        raise ValueError("symplectic form needs two even-length vectors of equal length")
    s = 0.0
    for j in range(0, len(x), 2):
        s += x[j] * y[j + 1] - x[j + 1] * y[j]
    return s


def from_interleaved(coords) -> GroupPoint:
    """Convert an odd-length vector (x_1, ..., x_{2n+1}) to (u, v, w).

    Odd-position entries become u, even-position entries become v, the last
    entry is w.  Under this identification the interleaved group law and the
    (u, v, w) law coincide coordinate for coordinate, so the conversion is a
    group isomorphism.
    """
    coords = tuple(float(a) for a in coords)
    if len(coords) % 2 == 0 or len(coords) < 3:
        raise ValueError("interleaved form must have odd length >= 3")
    u = coords[0:-1:2]
    v = coords[1:-1:2]
    return GroupPoint(u, v, coords[-1])


def to_interleaved(x: GroupPoint) -> tuple:
    """Inverse of from_interleaved; round-trip is the identity."""
    out = []
    for a, b in zip(x.u, x.v):
        out.append(a)
        out.append(b)
    out.append(x.w)
    return tuple(out)


# ---------------------------------------------------------------------------
# JSON-friendly serialization


def point_to_dict(x: GroupPoint) -> dict:
    return {"u": list(x.u), "v": list(x.v), "w": x.w}


def point_from_dict(d: dict) -> GroupPoint:
    """Accepts {"u": [...], "v": [...], "w": num} or interleaved {"x": [...]}."""
    if "x" in d:
        return from_interleaved(d["x"])
    return GroupPoint(tuple(d["u"]), tuple(d["v"]), d["w"])


# ---------------------------------------------------------------------------
# batch (numpy) versions used by the samplers and experiment loops
#
# U, V are arrays of shape (m, n); W has shape (m,).  These mirror the scalar
# operations exactly.


def batch_multiply(U1, V1, W1, U2, V2, W2):
    U1 = np.asarray(U1, dtype=float)
    V1 = np.asarray(V1, dtype=float)
    U2 = np.asarray(U2, dtype=float)
    V2 = np.asarray(V2, dtype=float)
    uv = np.sum(U1 * V2, axis=-1)
    vu = np.sum(V1 * U2, axis=-1)
    return U1 + U2, V1 + V2, np.asarray(W1, float) + np.asarray(W2, float) - 2.0 * uv + 2.0 * vu


def batch_inverse(U, V, W):
    return -np.asarray(U, float), -np.asarray(V, float), -np.asarray(W, float)


def batch_norm(U, V, W):
    m = np.sum(np.square(U), axis=-1) + np.sum(np.square(V), axis=-1)
    return np.sqrt(np.hypot(m, np.asarray(W, float)))


def batch_distance_from(x: GroupPoint, U, V, W):
    """d_N(x, z) for a batch of points z given by coordinate arrays."""
    xu = np.asarray(x.u, float)
    xv = np.asarray(x.v, float)
    Ui, Vi, Wi = batch_inverse(xu, xv, x.w)
    Ug, Vg, Wg = batch_multiply(Ui, Vi, Wi, U, V, W)
    return batch_norm(Ug, Vg, Wg)
