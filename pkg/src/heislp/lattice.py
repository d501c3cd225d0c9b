"""Discrete Heisenberg group: integer normal form, BFS word balls, growth.

Elements are the integer triples (x, y, z) of the upper-triangular matrix
normal form, with product z'' = z + z' + x*y'.  The generators are
a = (1,0,0) and b = (0,1,0); their commutator c = [a,b] = (0,0,1) is central.
Word distances are exact BFS layers over the symmetric generating set
{a, b, a^-1, b^-1}.

The lattice embeds into H_1 through a -> (1,0,0), b -> (0,1,0), which forces
(x, y, z) -> (x, y, 2xy - 4z); the central generator lands on (0,0,-4).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .group import GroupPoint

__all__ = [
    "LatticeElement",
    "WordBall",
    "XnSet",
    "GrowthFit",
    "BudgetExceededError",
    "A",
    "B",
    "E",
    "lattice_multiply",
    "lattice_inverse",
    "commutator",
    "lattice_to_continuous",
    "word_ball",
    "word_distance",
    "central_distances",
    "build_xn",
    "growth_fit",
]

DEFAULT_MAX_ELEMENTS = 10_000_000

# packed-key layout: three 21-bit fields, good for |x|,|y|,|z| < 2^20
_OFF = 1 << 20
_SHIFT = 21


class BudgetExceededError(RuntimeError):
    """Raised when a search would exceed its element budget or radius.

    The radius attribute records how far the search got before giving up.
    """

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


@dataclass(frozen=True)
class LatticeElement:
    x: int
    y: int
    z: int

    def __post_init__(self):
        for a in (self.x, self.y, self.z):
            if not isinstance(a, (int, np.integer)):
                raise ValueError("lattice coordinates must be integers")
        object.__setattr__(self, "x", int(self.x))
        object.__setattr__(self, "y", int(self.y))
        object.__setattr__(self, "z", int(self.z))


E = LatticeElement(0, 0, 0)
A = LatticeElement(1, 0, 0)
B = LatticeElement(0, 1, 0)


def lattice_multiply(g: LatticeElement, h: LatticeElement) -> LatticeElement:
    """Matrix product in normal form: z'' = z + z' + x*y'."""
    return LatticeElement(g.x + h.x, g.y + h.y, g.z + h.z + g.x * h.y)


def lattice_inverse(g: LatticeElement) -> LatticeElement:
    return LatticeElement(-g.x, -g.y, g.x * g.y - g.z)


def commutator(g: LatticeElement, h: LatticeElement) -> LatticeElement:
    return lattice_multiply(
        lattice_multiply(g, h),
        lattice_multiply(lattice_inverse(g), lattice_inverse(h)),
    )


def lattice_to_continuous(g: LatticeElement) -> GroupPoint:
    """Injective homomorphism into H_1 with a -> (1,0,0), b -> (0,1,0).

    Central elements (0,0,z) land on (0,0,-4z), so image central coordinates
    sit in 4Z.
    """
    return GroupPoint((float(g.x),), (float(g.y),), float(2 * g.x * g.y - 4 * g.z))


# ---------------------------------------------------------------------------
# packed integer keys for vectorized BFS


def _check_packable(coords):
    if np.any(np.abs(coords) >= _OFF):
        raise BudgetExceededError("coordinates exceed packed-key range")


def _pack(coords):
    c = coords.astype(np.int64)
    return ((c[:, 0] + _OFF) << (2 * _SHIFT)) | ((c[:, 1] + _OFF) << _SHIFT) | (c[:, 2] + _OFF)


def _key_of(g: LatticeElement):
    return ((g.x + _OFF) << (2 * _SHIFT)) | ((g.y + _OFF) << _SHIFT) | (g.z + _OFF)


def _neighbors(coords):
    """All right-products with a, a^-1, b, b^-1 (affine in (x, y, z))."""
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    out = np.empty((4 * len(coords), 3), dtype=np.int64)
    m = len(coords)
    # * a: (x+1, y, z)      * a^-1: (x-1, y, z)
    out[0:m] = coords
    out[0:m, 0] += 1
    out[m : 2 * m] = coords
    out[m : 2 * m, 0] -= 1
    # * b: (x, y+1, z+x)    * b^-1: (x, y-1, z-x)
    out[2 * m : 3 * m, 0] = x
    out[2 * m : 3 * m, 1] = y + 1
    out[2 * m : 3 * m, 2] = z + x
    out[3 * m :, 0] = x
    out[3 * m :, 1] = y - 1
    out[3 * m :, 2] = z - x
    return out


class _BFS:
    """Layered BFS from the identity, deduplicating via sorted packed keys."""

    def __init__(self, max_elements):
        self.max_elements = max_elements
        start = np.zeros((1, 3), dtype=np.int64)
        self.layers = [start]
        self.visited = _pack(start)  # sorted
        self.frontier = start
        self.radius = 0

    def step(self):
        cand = _neighbors(self.frontier)
        _check_packable(cand)
        keys = _pack(cand)
        keys_u, idx = np.unique(keys, return_index=True)
        pos = np.searchsorted(self.visited, keys_u)
        pos = np.clip(pos, 0, len(self.visited) - 1)
        fresh = self.visited[pos] != keys_u
        new_coords = cand[idx[fresh]]
        if len(self.visited) + len(new_coords) > self.max_elements:
            raise BudgetExceededError(
                f"ball would exceed {self.max_elements} elements", radius=self.radius
            )
        self.visited = np.sort(np.concatenate([self.visited, keys_u[fresh]]))
        self.frontier = new_coords
        self.layers.append(new_coords)
        self.radius += 1
        return new_coords


@dataclass
class WordBall:
    """Closed word ball B(r) with exact BFS distances.

    coords is an (m, 3) int64 array, dist the matching word lengths, and
    layer_sizes[k] counts the sphere of radius k.
    """

    radius: int
    coords: np.ndarray
    dist: np.ndarray
    layer_sizes: list
    _keys: np.ndarray = field(repr=False, default=None)
    _order: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._keys is None:
            keys = _pack(self.coords)
            order = np.argsort(keys)
            self._keys = keys[order]
            self._order = order

    def __len__(self):
        return len(self.coords)

    def __contains__(self, g: LatticeElement) -> bool:
        return self._lookup(g) is not None

    def _lookup(self, g: LatticeElement):
        key = _key_of(g)
        i = np.searchsorted(self._keys, key)
        if i < len(self._keys) and self._keys[i] == key:
            return self._order[i]
        return None

    def distance_of(self, g: LatticeElement) -> int:
        i = self._lookup(g)
        if i is None:
            raise KeyError(f"{g} not inside B({self.radius})")
        return int(self.dist[i])

    def distances_of(self, coords) -> np.ndarray:
        """Vectorized lookup; raises KeyError if any row is outside the ball."""
        keys = _pack(np.asarray(coords, dtype=np.int64))
        pos = np.searchsorted(self._keys, keys)
        pos = np.clip(pos, 0, len(self._keys) - 1)
        if np.any(self._keys[pos] != keys):
            raise KeyError("some elements are outside the explored ball")
        return self.dist[self._order[pos]]

    def elements(self):
        for row in self.coords:
            yield LatticeElement(int(row[0]), int(row[1]), int(row[2]))

    def as_dict(self) -> dict:
        """dict LatticeElement -> word length (materializes; small balls only)."""
        return {g: int(d) for g, d in zip(self.elements(), self.dist)}

    def jsonl_records(self):
        for row, d in zip(self.coords, self.dist):
            yield {"x": int(row[0]), "y": int(row[1]), "z": int(row[2]), "d": int(d)}


def word_ball(radius: int, max_elements: int = DEFAULT_MAX_ELEMENTS) -> WordBall:
    """Exact closed ball B(radius) around the identity."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    bfs = _BFS(max_elements)
    for _ in range(radius):
        bfs.step()
    coords = np.concatenate(bfs.layers)
    dist = np.concatenate(
        [np.full(len(layer), k, dtype=np.int64) for k, layer in enumerate(bfs.layers)]
    )
    sizes = [len(layer) for layer in bfs.layers]
    return WordBall(radius=radius, coords=coords, dist=dist, layer_sizes=sizes)


def word_distance(
    g: LatticeElement,
    h: LatticeElement = E,
    max_radius: int = 128,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
) -> int:
    """Exact word distance d_W(g, h), by BFS on g^{-1}h with early exit.

    Raises BudgetExceededError("unresolved beyond radius ...") when the
    target is not reached within the budget.
    """
    target = lattice_multiply(lattice_inverse(g), h)
    if target == E:
        return 0
    key = _key_of(target)
    bfs = _BFS(max_elements)
    for r in range(1, max_radius + 1):
        layer = bfs.step()
        if len(layer) and np.any(_pack(layer) == key):
            return r
    raise BudgetExceededError(
        f"unresolved beyond radius {max_radius}", radius=max_radius
    )


def central_distances(
    k_max: int, max_elements: int = DEFAULT_MAX_ELEMENTS, max_radius: int = 256
) -> dict:
    """Word lengths of the central powers (0,0,k) for k = 1..k_max, one BFS."""
    want = {(_key_of(LatticeElement(0, 0, k))): k for k in range(1, k_max + 1)}
    found = {}
    bfs = _BFS(max_elements)
    for r in range(1, max_radius + 1):
        layer = bfs.step()
        for key in _pack(layer):
            k = want.get(int(key))
            if k is not None and k not in found:
                found[k] = r
        if len(found) == k_max:
            return found
    raise BudgetExceededError(f"unresolved beyond radius {max_radius}", radius=max_radius)


@dataclass
class XnSet:
    """Deterministic n-point prefix of the BFS/lexicographic enumeration.

    Contains the full ball of radius_inner and is contained in the ball of
    radius_outer; eta_inner/eta_outer are the realized inclusion constants
    radius / n^{1/4}.
    """

    elements: list
    dist: np.ndarray
    radius_inner: int
    radius_outer: int
    eta_inner: float
    eta_outer: float

    def __len__(self):
        return len(self.elements)

    def jsonl_records(self):
        for g, d in zip(self.elements, self.dist):
            yield {"x": g.x, "y": g.y, "z": g.z, "d": int(d)}


def build_xn(n: int, max_elements: int = DEFAULT_MAX_ELEMENTS) -> XnSet:
    """First n lattice elements ordered by (word length, x, y, z)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    bfs = _BFS(max_elements)
    total = 1
    while total < n:
        total += len(bfs.step())
    coords = np.concatenate(bfs.layers)
    dist = np.concatenate(
        [np.full(len(layer), k, dtype=np.int64) for k, layer in enumerate(bfs.layers)]
    )
    order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0], dist))
    take = order[:n]
    d_taken = dist[take]
    r_out = int(d_taken.max()) if n > 1 else 0
    # prefix covers every layer below r_out fully; the ball of radius r_out is
    # included exactly when n exhausts it
    sizes = np.array([len(layer) for layer in bfs.layers])
    cum = np.cumsum(sizes)
    r_in = r_out if n == cum[r_out] else r_out - 1
    elements = [LatticeElement(int(c[0]), int(c[1]), int(c[2])) for c in coords[take]]
    qn = float(n) ** 0.25
    return XnSet(
        elements=elements,
        dist=d_taken,
        radius_inner=int(r_in),
        radius_outer=r_out,
        eta_inner=r_in / qn,
        eta_outer=r_out / qn,
    )


@dataclass
class GrowthFit:
    exponent: float
    residual: float
    radii: list
    counts: list


def growth_fit(r_max: int, max_elements: int = DEFAULT_MAX_ELEMENTS) -> GrowthFit:
    """Least-squares slope of log|B(r)| against log r over r in [r_max/4, r_max].

    residual is the RMS misfit of the linear model in log-log space.
    """
    if r_max < 8:
        raise ValueError("r_max must be >= 8")
    ball = word_ball(r_max, max_elements=max_elements)
    counts = np.cumsum(ball.layer_sizes)
    r_lo = max(2, r_max // 4)
    rs = np.arange(r_lo, r_max + 1)
    ys = np.log(counts[rs])
    xs = np.log(rs)
    slope, intercept = np.polyfit(xs, ys, 1)
    fit = slope * xs + intercept
    residual = float(np.sqrt(np.mean((ys - fit) ** 2)))
    return GrowthFit(
        exponent=float(slope),
        residual=residual,
        radii=[int(r) for r in rs],
        counts=[int(counts[r]) for r in rs],
    )
