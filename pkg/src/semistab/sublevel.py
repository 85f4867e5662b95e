"""Monte-Carlo estimation of uniform sublevel-set integrals.

The integrand is w(t) / ||u(t)||_omega^tau where u(t) is the row family of
an incidence matrix, omega a volume-one basis, and w a weight (typically a
product of tile-map group norms).  The form norm is computed through the
Cauchy-Binet identity: the sum of squared maximal minors of the pairing
matrix G equals det(G G^T), so no explicit minor enumeration is needed.

Estimators are deterministic given (seed, samples, domain, omega): sampling
uses counter-mode Philox streams keyed by the master seed, chunk sums are
merged by exact float summation, and the adaptive stratification refines
strata in a deterministic priority order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .blockdecomp import (
    BlockDecomposition,
    IncidenceMatrix,
    Tile,
    reduced_matrix,
    specialize_s,
    tile_map,
)
from .gitnorm import git_norm, minimize_diagonal, sparse_criterion
from .polycore import Poly, PolyMatrix, mi_factorial, substitute_linear


@dataclass
class OmegaBasis:
    """A volume-one basis of R^q; column k of ``columns`` is omega^k."""

    columns: np.ndarray
    log_scale: np.ndarray

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=float)
        det = np.linalg.det(self.columns)
        if abs(abs(det) - 1.0) > 1e-8:
            raise ValueError(f"|det omega| = {abs(det)} is not 1")


@dataclass
class IntegralEstimate:
    value: float
    std_error: float
    samples: int
    flagged: int
    domain: tuple
    seed: int

    def to_json(self):
        return {
            "value": self.value,
            "std_error": self.std_error,
            "samples": self.samples,
            "flagged": self.flagged,
            "domain": [list(map(float, iv)) for iv in self.domain],
            "seed": self.seed,
        }


def wedge_norm(rows, omega) -> float:
    """Norm of the decomposable form spanned by ``rows`` in the basis omega.

    rows: (p, q) array of the evaluated row covectors; omega: OmegaBasis or
    a (q, q) array whose columns are the basis vectors.  Returns the square
    root of the sum of squared p x p maximal minors of the pairing matrix,
    computed as sqrt(det(G G^T)).
    """
    rows = np.asarray(rows, dtype=float)
    cols = omega.columns if isinstance(omega, OmegaBasis) else np.asarray(omega)
    p, q = rows.shape
    if p > q:
        raise ValueError("more rows than ambient dimensions")
    G = rows @ cols
    gram = G @ G.T
    det = np.linalg.det(gram)
    return math.sqrt(max(det, 0.0))


def wedge_norm_batch(rows, omega) -> np.ndarray:
    """Vectorized wedge_norm for a batch of shape (n, p, q)."""
    cols = omega.columns if isinstance(omega, OmegaBasis) else np.asarray(omega)
    G = rows @ cols
    gram = np.einsum("nij,nkj->nik", G, G)
    det = np.linalg.det(gram)
    return np.sqrt(np.maximum(det, 0.0))


def sample_omega(seed: int, scale_max: float, q: int) -> OmegaBasis:
    """Anisotropic volume-one basis O1 exp(diag w) O2.

    The orthogonal factors are Haar-ish (QR of a Gaussian with sign fix);
    w is uniform on the traceless part of the cube [-scale_max, scale_max]^q,
    drawn by rejection.  The determinant is renormalized to +-1 at the end
    to mop up rounding.
    """
    if scale_max < 0:
        raise ValueError("scale_max must be nonnegative")
    rng = np.random.default_rng(np.random.Philox(key=seed))
    from .gitnorm import haar_orthogonal

    O1 = haar_orthogonal(rng, q)
    O2 = haar_orthogonal(rng, q)
    while True:
        w = rng.uniform(-scale_max, scale_max, size=q)
        w -= w.mean()
        if scale_max == 0 or np.abs(w).max() <= scale_max:
            break
    M = O1 @ np.diag(np.exp(w)) @ O2
    sign, logdet = np.linalg.slogdet(M)
    M *= math.exp(-logdet / q)
    return OmegaBasis(M, w)


def matrix_evaluator(M: PolyMatrix):
    """callable mapping points (n, d) to evaluated row matrices (n, p, q)."""
    terms = []
    for i in range(M.p):
        for j in range(M.q):
            for a, c in M.entries[i][j].terms.items():
                terms.append((i, j, a, float(c)))

    def evaluate(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        out = np.zeros((n, M.p, M.q))
        for i, j, a, c in terms:
            mono = np.full(n, c)
            for k, e in enumerate(a):
                if e:
                    mono = mono * pts[:, k] ** e
            out[:, i, j] += mono
        return out

    return evaluate


def _philox_stream(seed: int, counter: int) -> np.random.Generator:
    return np.random.default_rng(np.random.Philox(key=seed, counter=[0, 0, 0, counter]))


def _integrand_factory(u_of_t, weight, tau: float):
    def f(pts, omega):
        rows = u_of_t(pts)
        norms = wedge_norm_batch(rows, omega)
        w = weight(pts)
        bad = (norms == 0.0) & (w > 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(bad, 0.0, w * norms ** (-tau))
        vals = np.where(w == 0.0, 0.0, vals)
        nonfinite = ~np.isfinite(vals)
        vals = np.where(nonfinite, 0.0, vals)
        return vals, int(np.count_nonzero(bad | nonfinite))

    return f


def estimate_integral(M, weight, tau, domain, omega, seed: int = 0,
                      n_samples: int = 100_000, stratified: bool = False,
                      target_rel_error: float = 0.05,
                      budget_factor: int = 32) -> IntegralEstimate:
    """Monte-Carlo estimate of int w(t) ||u(t)||_omega^(-tau) dt over a box.

    Parameters
    ----------
    M : PolyMatrix | IncidenceMatrix | callable
        Row family; a callable must map (n, d) points to (n, p, q) rows.
    weight : callable | float
        Nonnegative weight w(t); a scalar means a constant weight.
    domain : sequence of (lo, hi)
        Axis-aligned box.
    stratified : bool
        Adaptive stratification: strata are split (doubling the count) in
        decreasing order of estimated variance until the relative standard
        error target is met or the sample budget (budget_factor * n_samples)
        is exhausted.

    Samples where the norm vanishes under positive weight are excluded and
    counted in ``flagged``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    tau = float(tau)
    if isinstance(M, IncidenceMatrix):
        M = M.M
    u_of_t = matrix_evaluator(M) if isinstance(M, PolyMatrix) else M
    if not callable(weight):
        wconst = float(weight)
        weight = lambda pts: np.full(len(pts), wconst)
    dom = tuple((float(lo), float(hi)) for lo, hi in domain)
    f = _integrand_factory(u_of_t, weight, tau)

    if not stratified:
        return _plain_mc(f, dom, omega, seed, n_samples)
    return _stratified_mc(f, dom, omega, seed, n_samples,
                          target_rel_error, budget_factor)


def _sample_box(rng, box, n):
    lo = np.array([iv[0] for iv in box])
    hi = np.array([iv[1] for iv in box])
    return lo + (hi - lo) * rng.random((n, len(box)))


def _box_volume(box) -> float:
    v = 1.0
    for lo, hi in box:
        v *= hi - lo
    return v


def _plain_mc(f, dom, omega, seed, n_samples) -> IntegralEstimate:
    vol = _box_volume(dom)
    chunk = 1 << 14
    sums, sqsums = [], []
    count = 0
    flagged = 0
    counter = 0
    while count < n_samples:
        counter += 1
        n = min(chunk, n_samples - count)
        rng = _philox_stream(seed, counter)
        pts = _sample_box(rng, dom, n)
        vals, bad = f(pts, omega)
        flagged += bad
        sums.append(float(vals.sum()))
        sqsums.append(float((vals * vals).sum()))
        count += n
    total = math.fsum(sums)
    total_sq = math.fsum(sqsums)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    return IntegralEstimate(
        value=mean * vol,
        std_error=math.sqrt(var / count) * vol,
        samples=count,
        flagged=flagged,
        domain=dom,
        seed=seed,
    )


def _stratified_mc(f, dom, omega, seed, n_samples, target, budget_factor):
    """Stratified passes with doubling stratum counts.

    Each pass lays an equal grid of strata over the box (the split axis
    rotates) and spends roughly ``n_samples`` fresh points; the stratum count
    doubles between passes until the relative standard error target is met
    AND the estimate is stable against the previous pass, or the total budget
    is exhausted.  Once the grid is as fine as the per-pass sample count
    allows, further passes enrich the per-stratum sample count instead.
    Doubling rather than locally refining is deliberately conservative:
    narrow features are discovered by the fresh global passes.
    """
    dim = len(dom)
    budget = budget_factor * n_samples
    used = 0
    flagged = 0
    pass_id = 0
    splits = [0] * dim  # number of binary splits per axis
    value = err = None
    prev = None
    lo = np.array([iv[0] for iv in dom])
    widths0 = np.array([iv[1] - iv[0] for iv in dom])
    vol = float(np.prod(widths0))

    def run_pass(n_per):
        nonlocal used, flagged, pass_id
        pass_id += 1
        counts = [1 << s for s in splits]
        m = int(np.prod(counts))
        rng = _philox_stream(seed, pass_id)
        u = rng.random((m, n_per, dim))
        idx = np.arange(m)
        coords = []
        for ax in range(dim):
            coords.append(idx % counts[ax])
            idx = idx // counts[ax]
        cell_lo = np.stack(
            [lo[ax] + coords[ax] * widths0[ax] / counts[ax] for ax in range(dim)],
            axis=-1)
        cell_w = widths0 / np.array(counts, dtype=float)
        pts = cell_lo[:, None, :] + u * cell_w
        vals, bad = f(pts.reshape(-1, dim), omega)
        flagged_local = bad
        vals = vals.reshape(m, n_per)
        used_local = m * n_per
        cvol = vol / m
        means = vals.mean(axis=1)
        variances = vals.var(axis=1)
        est = float(means.sum()) * cvol
        var_est = float(variances.sum()) * cvol * cvol / n_per
        return est, math.sqrt(var_est), used_local, flagged_local

    mult = 1
    while True:
        m = int(np.prod([1 << s for s in splits]))
        n_per = max(2, n_samples // m) * mult
        est, e, took, bad = run_pass(n_per)
        used += took
        flagged += bad
        prev, value, err = (value, est, e) if value is not None else (None, est, e)
        stable = prev is None or abs(value - prev) <= 3.0 * err + 1e-3 * abs(value)
        good = value > 0 and err <= target * value and stable and prev is not None
        if good or used + m * n_per > budget:
            break
        if 2 * m * 2 <= 8 * n_samples:
            splits[int(np.argmin(splits))] += 1  # double along the coarsest axis
        else:
            mult *= 2  # grid is as fine as the pass affords; deepen the passes
    return IntegralEstimate(
        value=value,
        std_error=err,
        samples=used,
        flagged=flagged,
        domain=dom,
        seed=seed,
    )


# -- tile-plan weights ---------------------------------------------------------------


def git_value(P: PolyMatrix, sigma, restarts: int = 8, seed: int = 0,
              budget: int = 120) -> float:
    """Group norm value with the sparse fast path.

    A strictly positive sparse certificate means the infimum is attained by
    diagonal scalings in the given frame, so the inner solve alone is exact
    up to optimizer tolerance; otherwise fall back to the frame search
    (upper bound).
    """
    if P.exact:
        sv = sparse_criterion(P, Fraction(sigma))
        if sv.applicable and sv.positive and sv.strictly_positive_theta:
            return minimize_diagonal(P, sigma).value
    return git_norm(P, sigma, restarts=restarts, seed=seed, budget=budget).value


class TilePlanWeight:
    """w(t) = prod_i git(tile_map(..., t))^(theta_i / sigma).

    ``mode="auto"`` probes a few rational points; if the composed value is
    constant to 1e-4 relative (the optimizer's own accuracy scale) the
    weight collapses to that constant, otherwise each requested point is
    evaluated exactly (no interpolation).
    """

    def __init__(self, M, decomp: BlockDecomposition, plan, mode: str = "auto",
                 restarts: int = 8, seed: int = 0):
        if isinstance(M, IncidenceMatrix):
            M = M.M
        self.M = M
        self.decomp = decomp
        self.plan = plan
        self.restarts = restarts
        self.seed = seed
        self.constant = None
        if mode not in ("auto", "exact", "constant"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode in ("auto", "constant"):
            const = self._probe_constancy()
            if const is None and mode == "constant":
                raise ValueError("tile values are not constant on probes")
            self.constant = const

    def _value_at(self, t0) -> float:
        total = 1.0
        for pt, theta in zip(self.plan.points, self.plan.theta):
            if theta == 0:
                continue
            tm = tile_map(self.M, self.decomp, pt.tile, t0)
            v = git_value(tm, pt.sigma, restarts=self.restarts, seed=self.seed)
            total *= v ** (float(theta) / float(self.plan.sigma_total))
        return total

    def _probe_constancy(self):
        probes = [
            [Fraction(0)] * self.M.d,
            [Fraction(3, 7)] * self.M.d,
            [Fraction(-11, 5) + Fraction(k, 3) for k in range(self.M.d)],
            [Fraction(17, 2) - Fraction(2 * k, 7) for k in range(self.M.d)],
        ]
        vals = [self._value_at(t0) for t0 in probes]
        ref = vals[0]
        if ref == 0:
            return None
        if all(abs(v - ref) <= 1e-4 * abs(ref) for v in vals[1:]):
            return ref
        return None

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.constant is not None:
            return np.full(len(pts), self.constant)
        out = np.empty(len(pts))
        for k, t in enumerate(pts):
            t0 = [Fraction(x).limit_denominator(10**6) for x in t]
            out[k] = self._value_at(t0)
        return out


# -- hypothesis probing ----------------------------------------------------------------


@dataclass
class NondegReport:
    samples: list
    min_ratio: float

    def to_json(self):
        return {"samples": self.samples, "min_ratio": self.min_ratio}


def probe_nondegeneracy(M, decomp: BlockDecomposition, t0, sigma, w_value,
                        M_samples: int = 10, seed: int = 0,
                        destabilizer=None, flow_steps: int = 0,
                        tile: Tile | None = None,
                        degree_override: int | None = None) -> NondegReport:
    """Numeric probe of the derivative lower-bound hypothesis at one point.

    For each sampled invertible matrix Mx (Haar-ish with random log-scales;
    plus exponentials of a supplied destabilizer direction), evaluates

        RHS(Mx) = (sum over blocks, |alpha| = D_ij of
                   |u_row . (Mx d)^alpha v_col|^2 / alpha!)^(1/2)

    through exact differentiation of the reduced matrix and reports
    RHS / (|det Mx|^sigma w_value^sigma) per sample plus the minimum.

    ``tile`` restricts the block sum (used to exhibit instability of a
    degenerate subtile) and ``degree_override`` replaces the blocks' formal
    degrees (lowering degrees yields a coarser but still valid
    decomposition, which is how a homogeneous subtile is probed on its own).
    A destabilizer contributes samples (exp(k w_d); row/column rescalings
    exp(k w_p), exp(k w_q) applied to the adapted factorization, indexed
    within the tile) for k = 1 .. flow_steps.
    """
    if isinstance(M, IncidenceMatrix):
        M = M.M
    d = M.d
    sigma = float(sigma)
    R = reduced_matrix(M, decomp)
    diag = [[specialize_s(R.entries[r][c], d, t0) for c in range(R.q)]
            for r in range(R.p)]
    ri = [0]
    for s in decomp.row_groups:
        ri.append(ri[-1] + s)
    ci = [0]
    for s in decomp.col_groups:
        ci.append(ci[-1] + s)
    if tile is None:
        irange = range(len(decomp.row_groups))
        jrange = range(len(decomp.col_groups))
    else:
        irange = range(tile.I[0], tile.I[1] + 1)
        jrange = range(tile.J[0], tile.J[1] + 1)
    row_lo = ri[irange.start]
    col_lo = ci[jrange.start]

    def rhs(Mx, row_scale=None, col_scale=None) -> float:
        total = 0.0
        for i in irange:
            for j in jrange:
                if (i, j) in decomp.zero_blocks:
                    continue
                D = decomp.D[i][j] if degree_override is None else degree_override
                for r in range(ri[i], ri[i + 1]):
                    for c in range(ci[j], ci[j + 1]):
                        e = substitute_linear(diag[r][c], Mx)
                        scale = 1.0
                        if row_scale is not None:
                            scale *= row_scale[r - row_lo]
                        if col_scale is not None:
                            scale *= col_scale[c - col_lo]
                        for a, coef in e.homogeneous_part(D).terms.items():
                            total += mi_factorial(a) * (float(coef) * scale) ** 2
        return math.sqrt(total)

    samples = []
    w_value = float(w_value)

    def record(desc, Mx, row_scale=None, col_scale=None):
        det = abs(float(np.linalg.det(np.asarray(Mx, dtype=float))))
        val = rhs(Mx, row_scale, col_scale)
        denom = det ** sigma * w_value ** sigma
        ratio = math.inf if denom == 0 else val / denom
        samples.append({"sample": desc, "rhs": val, "det": det, "ratio": ratio})

    record("identity", np.eye(d))
    rng = np.random.default_rng(seed)
    from .gitnorm import haar_orthogonal

    for k in range(max(0, M_samples - 1)):
        O1 = haar_orthogonal(rng, d)
        O2 = haar_orthogonal(rng, d)
        w = rng.uniform(-2, 2, size=d)
        Mx = O1 @ np.diag(np.exp(w)) @ O2
        record(f"random-{k}", Mx)
    if destabilizer is not None and flow_steps > 0:
        wp = np.array([float(x) for x in destabilizer.w_p])
        wq = np.array([float(x) for x in destabilizer.w_q])
        wd = np.array([float(x) for x in destabilizer.w_d])
        for k in range(1, flow_steps + 1):
            Mx = np.diag(np.exp(k * wd))
            record(f"destabilizer-{k}", Mx,
                   row_scale=np.exp(k * wp), col_scale=np.exp(k * wq))
    return NondegReport(samples, min(s["ratio"] for s in samples))
