"""Experiment harness: distortion reports, doubling estimates, the image
measure-ratio identity, the eps-sharpness sweep, and the discrete smoothness
inequality evaluation.

Everything here consumes explicit seeds and emits plain dataclasses that
serialize to JSON (and CSV for the tabular ones).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .group import EmbeddingParams, GroupPoint, params_from
from .embeddings import ReprDistance
from .lattice import word_ball
from .mc import _stream
from .quadrature import _lambda_integral_unit

__all__ = [
    "DistortionReport",
    "DoublingReport",
    "DoublingTrial",
    "MeasureRatioResult",
    "EpsilonSweepResult",
    "LNInequalityResult",
    "distortion_report",
    "doubling_estimate",
    "measure_ratio_check",
    "epsilon_sweep",
    "ln_inequality_eval",
    "heisenberg_net",
]


# ---------------------------------------------------------------------------
# distortion


@dataclass
class DistortionReport:
    """Ratio extremes of metric_b / metric_a over a pair sample.

    distortion = max_ratio / min_ratio is scaling invariant; the witnesses
    reproduce the extremes on re-evaluation.
    """

    pair_count: int
    excluded_pairs: int
    min_ratio: float
    max_ratio: float
    distortion: float
    witness_min: tuple
    witness_max: tuple
    label_a: str
    label_b: str
    subsample_seed: int | None = None

    def to_dict(self):
        return asdict(self)


def distortion_report(points, metric_a, metric_b, labels=("a", "b"),
                      pairs=None, subsample=None, seed=0) -> DistortionReport:
    """Two-sided Lipschitz ratio extremes over point pairs.

    pairs: explicit index pairs; subsample: number of random pairs (seeded);
    default is every unordered pair.  Pairs at metric_a distance zero are
    excluded and counted.
    """
    pts = list(points)
    m = len(pts)
    if m < 2:
        raise ValueError("need at least two points")
    if pairs is None:
        if subsample is None:
            pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
            sub_seed = None
        else:
            rng = _stream(seed, 101, 0)
            ii = rng.integers(0, m, size=int(subsample) * 2)
            jj = rng.integers(0, m, size=int(subsample) * 2)
            pairs = [(int(i), int(j)) for i, j in zip(ii, jj) if i != j][: int(subsample)]
            sub_seed = seed
    else:
        pairs = [(int(i), int(j)) for i, j in pairs]
        sub_seed = None

    best_min = math.inf
    best_max = -math.inf
    wit_min = wit_max = None
    excluded = 0
    used = 0
    for i, j in pairs:
        da = metric_a(pts[i], pts[j])
        if da <= 0.0:
            excluded += 1
            continue
        ratio = metric_b(pts[i], pts[j]) / da
        used += 1
        if ratio < best_min:
            best_min, wit_min = ratio, (i, j)
        if ratio > best_max:
            best_max, wit_max = ratio, (i, j)
    if used == 0:
        raise ValueError("all pairs coincide under metric_a")
    return DistortionReport(
        pair_count=used,
        excluded_pairs=excluded,
        min_ratio=best_min,
        max_ratio=best_max,
        distortion=best_max / best_min,
        witness_min=wit_min,
        witness_max=wit_max,
        label_a=labels[0],
        label_b=labels[1],
        subsample_seed=sub_seed,
    )


# ---------------------------------------------------------------------------
# doubling


@dataclass
class DoublingTrial:
    center_index: int
    radius: float
    ball_size: int
    covering_count: int
    packing_count: int
    reliable: bool


@dataclass
class DoublingReport:
    trials: list
    max_covering: int
    bound: float | None
    bound_satisfied: bool | None
    all_reliable: bool

    def to_dict(self):
        return {
            "trials": [asdict(t) for t in self.trials],
            "max_covering": self.max_covering,
            "bound": self.bound,
            "bound_satisfied": self.bound_satisfied,
            "all_reliable": self.all_reliable,
        }


def _greedy_cover(dist_to_center, batch_metric, idx_in_ball, r):
    """Farthest-point greedy covering of the 2r-ball by r-balls.

    Returns the chosen center count; deterministic given point order.
    """
    sub = idx_in_ball
    m = len(sub)
    best = np.full(m, np.inf)
    # first center: farthest from the ball center, lowest index on ties
    order0 = np.argmax(dist_to_center[sub])
    chosen = []
    nxt = int(order0)
    while True:
        chosen.append(nxt)
        d = batch_metric(sub[nxt], sub)
        best = np.minimum(best, d)
        uncovered = best > r
        if not uncovered.any():
            return len(chosen), best
        cand = np.where(uncovered)[0]
        nxt = int(cand[np.argmax(best[cand])])


def _greedy_pack(batch_metric, idx_in_ball, r):
    """Farthest-point maximal 2r-separated subset (covering lower bound)."""
    sub = idx_in_ball
    m = len(sub)
    best = np.full(m, np.inf)
    chosen = [0]
    d = batch_metric(sub[0], sub)
    best = np.minimum(best, d)
    while True:
        nxt = int(np.argmax(best))
        if best[nxt] <= 2.0 * r:
            return len(chosen)
        chosen.append(nxt)
        best = np.minimum(best, batch_metric(sub[nxt], sub))


def doubling_estimate(points, batch_metric, radii, center_indices,
                      bound: float | None = None) -> DoublingReport:
    """Greedy covering/packing numbers of metric balls B(c, 2r) by radius r.

    points: reference array (only its length is used here); batch_metric(i,
    idx) must return distances from point i to points[idx].  The covering
    count upper-estimates and the packing count lower-estimates the true
    covering number.  A trial is flagged unreliable when the point cloud is
    too coarse at scale r (max nearest-neighbour gap above r/4 on a sample).
    """
    m = len(points)
    trials = []
    rng = _stream(12345, 9, 0)
    for ci in center_indices:
        d_center = batch_metric(int(ci), np.arange(m))
        for r in radii:
            inside = np.where(d_center <= 2.0 * r)[0]
            if len(inside) < 2:
                trials.append(DoublingTrial(int(ci), float(r), int(len(inside)), 1, 1, False))
                continue
            cover, best = _greedy_cover(d_center, batch_metric, inside, float(r))
            pack = _greedy_pack(batch_metric, inside, float(r))
            # mesh check on a sample: every sampled point should have a close
            # neighbour relative to r
            probe = inside if len(inside) <= 256 else rng.choice(inside, 256, replace=False)
            gaps = []
            for pi in probe:
                d = batch_metric(int(pi), inside)
                d[d == 0.0] = np.inf
                gaps.append(d.min())
            reliable = float(np.max(gaps)) <= r / 4.0
            trials.append(
                DoublingTrial(int(ci), float(r), int(len(inside)), int(cover), int(pack), bool(reliable))
            )
    max_cover = max(t.covering_count for t in trials)
    ok = None if bound is None else bool(max_cover <= bound)
    return DoublingReport(
        trials=trials,
        max_covering=max_cover,
        bound=bound,
        bound_satisfied=ok,
        all_reliable=all(t.reliable for t in trials),
    )


def heisenberg_net(h: float = 1.0 / 16.0, radius: float = 1.0):
    """Anisotropic lattice net of B_N(0, radius) in H_1.

    Spacing (h, h, h^2) scaled by the radius respects the dilation scaling,
    so the net is a (const * h * radius)-net of the ball.  Returns (U, V, W)
    coordinate arrays with U, V of shape (m, 1).
    """
    k = int(math.floor(1.0 / h))
    ax = np.arange(-k, k + 1) * h * radius
    kw = int(math.floor(1.0 / (h * h)))
    aw = np.arange(-kw, kw + 1) * h * h * radius * radius
    U, V, W = np.meshgrid(ax, ax, aw, indexing="ij")
    U = U.ravel()
    V = V.ravel()
    W = W.ravel()
    m = U * U + V * V
    keep = np.square(m) + np.square(W) <= radius**4
    return U[keep][:, None], V[keep][:, None], W[keep]


# ---------------------------------------------------------------------------
# measure ratio


@dataclass
class MeasureRatioResult:
    ratio: float
    std_error: float
    expected: float
    rel_deviation: float
    vol_small: float
    vol_large: float
    hits_small: int
    hits_large: int
    samples: int
    seed: int
    r: float

    def to_dict(self):
        return asdict(self)


def measure_ratio_check(params: EmbeddingParams, r: float = 1.0,
                        samples: int = 10**6, seed: int = 0) -> MeasureRatioResult:
    """Monte Carlo ratio vol{dist <= 2r} / vol{dist <= r} for the image
    metric dist(q) = ||Q(phi(q)) - Q(e)||_p on R^3.

    Each volume is an independent uniform-box estimate (box sized from a
    certified lower bound dist >= c N^{1-eps}), so the ratio genuinely
    probes the dilation structure at both scales; the homogeneity identity
    predicts 2^{4/(1-eps)}.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    rd = ReprDistance(params)
    c_min = rd.min_unit_distance
    if not (c_min > 0.0):
        raise RuntimeError("degenerate lower bound for the image metric")
    one_m_eps = 1.0 - params.eps

    def volume(rho, tag):
        R = (rho / c_min) ** (1.0 / one_m_eps)
        box_vol = (2.0 * R) ** 2 * 2.0 * R * R
        n = samples // 2
        hits = 0
        got = 0
        block = 1 << 17
        bi = 0
        margin_ok = True
        while got < n:
            take = min(block, n - got)
            rng = _stream(seed, tag, bi)
            bi += 1
            u = rng.uniform(-R, R, take)
            v = rng.uniform(-R, R, take)
            w = rng.uniform(-R * R, R * R, take)
            s = u * u + v * v
            d = rd.distance_from_sw(s, w)
            inside = d <= rho
            hits += int(inside.sum())
            if inside.any():
                # all hits must be strictly interior to the box
                iu = np.abs(u[inside]).max() if inside.any() else 0.0
                if iu > 0.999 * R:
                    margin_ok = False
            got += take
        p_hat = hits / n
        vol = box_vol * p_hat
        se = box_vol * math.sqrt(max(p_hat * (1 - p_hat), 0.0) / n)
        return vol, se, hits, margin_ok

    v1, se1, h1, ok1 = volume(r, 21)
    v2, se2, h2, ok2 = volume(2.0 * r, 22)
    if h1 == 0 or h2 == 0:
        raise RuntimeError("degenerate volume estimate: no hits")
    ratio = v2 / v1
    se = ratio * math.sqrt((se1 / v1) ** 2 + (se2 / v2) ** 2)
    expected = 2.0 ** (4.0 / one_m_eps)
    return MeasureRatioResult(
        ratio=ratio,
        std_error=se,
        expected=expected,
        rel_deviation=abs(ratio - expected) / expected,
        vol_small=v1,
        vol_large=v2,
        hits_small=h1,
        hits_large=h2,
        samples=samples,
        seed=seed,
        r=r,
    )


# ---------------------------------------------------------------------------
# eps sweep


@dataclass
class EpsilonSweepResult:
    p: float
    eps_values: list
    sup_ratio: list
    inf_ratio: list
    slope_sup: float
    slope_spread: float
    pair_count: int
    seed: int

    def to_dict(self):
        return asdict(self)

    def csv_rows(self):
        yield ("eps", "sup_ratio", "inf_ratio")
        for e, s, i in zip(self.eps_values, self.sup_ratio, self.inf_ratio):
            yield (e, s, i)


def _random_pairs_sw(n_pairs, radius, seed):
    """(s, w, d_N) for random pairs x, y in B_N(0, radius) of H_1."""
    from .mc import sample_ball_points

    Ux, Vx, Wx = sample_ball_points(1, n_pairs, seed, radius=radius, tag=31)
    Uy, Vy, Wy = sample_ball_points(1, n_pairs, seed + 1, radius=radius, tag=32)
    du = (Uy - Ux)[:, 0]
    dv = (Vy - Vx)[:, 0]
    s = du * du + dv * dv
    w = Wy - Wx + 2.0 * (Vy[:, 0] * Ux[:, 0] - Uy[:, 0] * Vx[:, 0])
    dN = np.sqrt(np.hypot(s, w))
    return s, w, dN


def epsilon_sweep(eps_values, p: float, n_pairs: int = 512, radius: float = 4.0,
                  seed: int = 0) -> EpsilonSweepResult:
    """Ratio extremes of repr distance over d_N^{1-eps} on one fixed pair
    sample, per eps, plus the fitted blow-up exponents against 1/eps.

    slope_sup fits log sup_ratio ~ slope * log(1/eps); the horizontal-pair
    structure of the integral predicts slope close to 1/p.  slope_spread
    fits the same for sup/inf.
    """
    eps_values = sorted(float(e) for e in eps_values)
    if len(eps_values) < 4:
        raise ValueError("need at least 4 eps values for a slope fit")
    s, w, dN = _random_pairs_sw(n_pairs, radius, seed)
    keep = dN > 0
    s, w, dN = s[keep], w[keep], dN[keep]
    sups, infs = [], []
    for eps in eps_values:
        params = params_from(p, eps)
        rd = ReprDistance(params)
        d = rd.distance_from_sw(s, w)
        ratio = d / dN ** (1.0 - eps)
        sups.append(float(ratio.max()))
        infs.append(float(ratio.min()))
    xs = np.log(1.0 / np.asarray(eps_values))
    slope_sup = float(np.polyfit(xs, np.log(sups), 1)[0])
    slope_spread = float(np.polyfit(xs, np.log(np.asarray(sups) / np.asarray(infs)), 1)[0])
    return EpsilonSweepResult(
        p=p,
        eps_values=list(eps_values),
        sup_ratio=sups,
        inf_ratio=infs,
        slope_sup=slope_sup,
        slope_spread=slope_spread,
        pair_count=int(len(dN)),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# discrete smoothness inequality


@dataclass
class LNInequalityResult:
    n: int
    p: float
    eps: float
    lhs: float
    rhs_proxy: float
    ratio: float
    analytic_sum: float
    integral_comparison: float
    integral_comparison_corrected: float
    k1_term: float
    ball_n_size: int
    ball_21n_size: int

    def to_dict(self):
        return asdict(self)


def ln_inequality_eval(n: int, p: float, eps: float,
                       max_elements: int = 20_000_000) -> LNInequalityResult:
    """Both sides of the central-difference vs generator-difference
    inequality for the representation embedding, collapsed by left
    invariance.

    lhs  = |B_n| * sum_{k<=n^2} dist(e, c^k)^p / k^{1+p/2}
    rhs  = |B_{21n}| * (dist(e, a)^p + dist(e, b)^p)
    analytic_sum = sum_{k<=n^2} k^{-1-eps p/2}, reported with its integral
    comparison (2/(eps p)) (1 - n^{-eps p}); the corrected variant adds the
    trapezoid endpoint term, which is what finite sums actually track.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    params = params_from(p, eps)
    ball_n = word_ball(n, max_elements=max_elements)
    ball_21n = word_ball(21 * n, max_elements=max_elements)
    beta = (1.0 - eps) * p / 2.0
    unit_c, _, _ = _lambda_integral_unit(0.0, p, eps, 1e-9)  # central direction
    unit_g, _, _ = _lambda_integral_unit(1.0, p, eps, 1e-9)  # generator direction
    pref = 1.0 - eps
    # dist(e, phi(c^k))^p = (1-eps) * (4k)^beta * I_unit(0);  phi(c^k) = (0,0,-4k)
    ks = np.arange(1, n * n + 1, dtype=float)
    dist_ck_p = pref * (4.0 * ks) ** beta * unit_c
    lhs = len(ball_n) * float(np.sum(dist_ck_p / ks ** (1.0 + p / 2.0)))
    # generators map to (1,0,0) and (0,1,0): s = 1, w = 0 for both
    dist_gen_p = pref * unit_g
    rhs = len(ball_21n) * 2.0 * dist_gen_p
    analytic_sum = float(np.sum(ks ** (-1.0 - eps * p / 2.0)))
    integral = (2.0 / (eps * p)) * (1.0 - float(n) ** (-eps * p))
    corrected = integral + 0.5 * (1.0 + float(n * n) ** (-1.0 - eps * p / 2.0))
    k1 = len(ball_n) * float(dist_ck_p[0])
    return LNInequalityResult(
        n=n,
        p=p,
        eps=eps,
        lhs=lhs,
        rhs_proxy=rhs,
        ratio=lhs / rhs,
        analytic_sum=analytic_sum,
        integral_comparison=integral,
        integral_comparison_corrected=corrected,
        k1_term=k1,
        ball_n_size=len(ball_n),
        ball_21n_size=len(ball_21n),
    )
