"""Block decompositions of polynomial incidence matrices.

An incidence matrix M(s) (p x q, polynomial entries in s in R^d, generic
rank p) is jointly row/column reduced: columns may be combined with
polynomial coefficients in t, rows with coefficients in s, both with
determinant-one bookkeeping matrices A(s) and B(t).  The reduced matrix
R(s, z) = A(s) M(s) B(s + z), re-expanded in z := t - s, vanishes on the
diagonal z = 0 to orders that are read off blockwise as the formal degree
matrix D.

Internally bivariate objects live as polynomials in 2d variables: the first
d are s, the last d are z.  All elimination decisions are exact.

Two elimination strategies are tried in order:

* flow: when every s-partial of every column is a constant linear
  combination of columns (nilpotently), the whole column reduction is the
  polynomial flow B(t) = prod_k exp(-t_k G_k);
* greedy: order-raising column/row operations found by solving exact linear
  systems on diagonal jets.

Both are followed by greedy sweeps, so the flow case also gets its constant
regrouping.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .polycore import (
    Poly,
    PolyMatrix,
    eval_poly_exact,
    exact_det,
    grlex_key,
    mi_order,
    poly_from_json,
    poly_to_json,
    polymatrix_from_json,
    polymatrix_to_json,
)


class NotDerivativeClosed(Exception):
    def __init__(self, column: int, direction: int):
        self.column = column
        self.direction = direction
        super().__init__(
            f"column {column}: s_{direction}-partial is not a constant "
            f"combination of columns"
        )


class AmbiguousRank(Exception):
    def __init__(self, gap: float):
        self.gap = gap
        super().__init__(f"singular value gap {gap:.3e} below 1e6")


# -- bivariate helpers ------------------------------------------------------------


def inflate_s(P: Poly, d: int) -> Poly:
    """Poly in s (d vars) -> poly in (s, z) (2d vars), constant in z."""
    return Poly(2 * d, {a + (0,) * d: c for a, c in P.terms.items()}, exact=P.exact)


def inflate_t(P: Poly, d: int) -> Poly:
    """Poly in t (d vars) -> poly in (s, z) via t = s + z."""
    out = Poly.zero(2 * d)
    for a, c in P.terms.items():
        mono = Poly.constant(2 * d, c)
        for k, e in enumerate(a):
            if e:
                sk = tuple(1 if j == k else 0 for j in range(2 * d))
                zk = tuple(1 if j == d + k else 0 for j in range(2 * d))
                form = Poly(2 * d, {sk: 1, zk: 1})
                for _ in range(e):
                    mono = mono * form
        out = out + mono
    return out


def z_order(P: Poly, d: int) -> int:
    """Least total z-degree with a nonzero coefficient; -1 for the zero poly."""
    if P.is_zero():
        return -1
    return min(sum(a[d:]) for a in P.terms)


def z_degree(P: Poly, d: int) -> int:
    if P.is_zero():
        return -1
    return max(sum(a[d:]) for a in P.terms)


def z_homogeneous_part(P: Poly, d: int, deg: int) -> Poly:
    return Poly(2 * d,
                {a: c for a, c in P.terms.items() if sum(a[d:]) == deg},
                exact=P.exact)


def specialize_s(P: Poly, d: int, t0) -> Poly:
    """Substitute s := t0 in a bivariate poly; result lives in the z block."""
    out: dict = {}
    for a, c in P.terms.items():
        val = c
        for k in range(d):
            if a[k]:
                val = val * Fraction(t0[k]) ** a[k]
        if val:
            key = a[d:]
            out[key] = out.get(key, 0) + val
    return Poly(d, out)


def substitute_z_negate(P: Poly, d: int) -> Poly:
    """Sign adapter between the two diagonal conventions: z -> -z."""
    return Poly(
        P.dim,
        {a: (c if sum(a[d:]) % 2 == 0 else -c) for a, c in P.terms.items()},
        exact=P.exact,
    )


def pm_mul(X: PolyMatrix, Y: PolyMatrix) -> PolyMatrix:
    if X.q != Y.p:
        raise ValueError("shape mismatch in polynomial matrix product")
    rows = []
    for i in range(X.p):
        row = []
        for j in range(Y.q):
            acc = Poly.zero(X.d)
            for k in range(X.q):
                if not X.entries[i][k].is_zero() and not Y.entries[k][j].is_zero():
                    acc = acc + X.entries[i][k] * Y.entries[k][j]
            row.append(acc)
        rows.append(row)
    return PolyMatrix(rows)


def poly_exact_div(P: Poly, Q: Poly) -> Poly:
    """Exact division of multivariate polynomials (remainder must vanish)."""
    if Q.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    if P.is_zero():
        return Poly.zero(P.dim)
    qlead = max(Q.terms, key=grlex_key)
    qc = Q.terms[qlead]
    rem = dict(P.terms)
    out: dict = {}
    while rem:
        lead = max(rem, key=grlex_key)
        diff = tuple(a - b for a, b in zip(lead, qlead))
        if any(v < 0 for v in diff):
            raise ArithmeticError("inexact polynomial division")
        coef = rem[lead] / qc
        out[diff] = coef
        for b, cb in Q.terms.items():
            key = tuple(x + y for x, y in zip(diff, b))
            val = rem.get(key, Fraction(0)) - coef * cb
            if val:
                rem[key] = val
            else:
                rem.pop(key, None)
    return Poly(P.dim, out)


def pm_det(X: PolyMatrix) -> Poly:
    """Determinant by fraction-free (Bareiss) elimination; exact."""
    n = X.p
    if n != X.q:
        raise ValueError("determinant of a nonsquare matrix")
    if n == 0:
        return Poly.constant(X.d, 1)
    a = [[X.entries[i][j] for j in range(n)] for i in range(n)]
    sign = 1
    prev = Poly.constant(X.d, 1)
    for k in range(n - 1):
        piv = next((i for i in range(k, n) if not a[i][k].is_zero()), None)
        if piv is None:
            return Poly.zero(X.d)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = a[i][j] * a[k][k] - a[i][k] * a[k][j]
                a[i][j] = poly_exact_div(num, prev)
        prev = a[k][k]
    det = a[n - 1][n - 1]
    return det.scale(sign)


# -- data types --------------------------------------------------------------------


@dataclass
class IncidenceMatrix:
    """Rows span the moving subspace; ambient dimension is the column count."""

    M: PolyMatrix

    def __post_init__(self):
        if not self.M.exact:
            raise ValueError("incidence matrices must be exact")

    @property
    def p(self):
        return self.M.p

    @property
    def q(self):
        return self.M.q

    @property
    def d(self):
        return self.M.d

    def has_generic_rank_p(self, seed: int = 5) -> bool:
        """Exact rank at a couple of random rational points."""
        rng = np.random.default_rng(seed)
        for _ in range(2):
            pt = [Fraction(int(rng.integers(-99, 100)), 101) for _ in range(self.d)]
            rows = [[eval_poly_exact(e, pt) for e in row] for row in self.M.entries]
            if _exact_rank(rows) == self.p:
                return True
        return False


def _exact_rank(rows) -> int:
    a = [list(r) for r in rows]
    m = len(a)
    n = len(a[0]) if m else 0
    rank = 0
    for c in range(n):
        piv = next((i for i in range(rank, m) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        inv = Fraction(1) / a[rank][c]
        a[rank] = [v * inv for v in a[rank]]
        for i in range(m):
            if i != rank and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[rank])]
        rank += 1
        if rank == m:
            break
    return rank


@dataclass
class Tile:
    """An interval product of group indices with its degeneracy parameter."""

    I: tuple
    J: tuple
    sigma: Fraction = Fraction(0)

    def to_json(self):
        return {"I": list(self.I), "J": list(self.J),
                "sigma": {"num": self.sigma.numerator, "den": self.sigma.denominator}}


@dataclass
class BlockDecomposition:
    row_groups: list          # sizes p_0 .. p_{m*}
    col_groups: list          # sizes q_0 .. q_m
    D: list                   # (m*+1) x (m+1) formal degrees
    A: PolyMatrix             # p x p in s, det == 1
    B: PolyMatrix             # q x q in t, det == 1
    zero_blocks: set = field(default_factory=set)

    @property
    def p(self):
        return sum(self.row_groups)

    @property
    def q(self):
        return sum(self.col_groups)

    @property
    def d(self):
        return self.A.d

    def row_slice(self, i: int) -> range:
        lo = sum(self.row_groups[:i])
        return range(lo, lo + self.row_groups[i])

    def col_slice(self, j: int) -> range:
        lo = sum(self.col_groups[:j])
        return range(lo, lo + self.col_groups[j])

    def degree(self, i: int, j: int):
        """Formal degree with zero blocks reading as +infinity."""
        if (i, j) in self.zero_blocks:
            return math.inf
        return self.D[i][j]

    def to_json(self) -> dict:
        return {
            "row_groups": list(self.row_groups),
            "col_groups": list(self.col_groups),
            "D": [list(row) for row in self.D],
            "zero_blocks": sorted(list(b) for b in self.zero_blocks),
            "A": polymatrix_to_json(self.A),
            "B": polymatrix_to_json(self.B),
        }

    @staticmethod
    def from_json(obj: dict) -> "BlockDecomposition":
        return BlockDecomposition(
            row_groups=list(obj["row_groups"]),
            col_groups=list(obj["col_groups"]),
            D=[list(r) for r in obj["D"]],
            A=polymatrix_from_json(obj["A"]),
            B=polymatrix_from_json(obj["B"]),
            zero_blocks={tuple(b) for b in obj.get("zero_blocks", [])},
        )


# -- kernel parametrization ---------------------------------------------------------


def parametrize_kernel(M, basis=None, rank: int | None = None):
    """Kernel basis by Cramer's rule on the largest well-conditioned minor.

    Selects the r x r minor maximizing |det| (lexicographic tie-break on the
    index sets), expresses the kernel through it, and sign-normalizes so the
    wedge of the selected basis columns with the kernel vectors equals the
    wedge of the full basis.  Coefficients relative to the chosen minor are
    bounded by 2 in magnitude by construction of the maximizer.
    """
    M = np.asarray(M, dtype=float)
    p, q = M.shape
    if basis is None:
        basis = np.eye(q)
    else:
        basis = np.asarray(basis, dtype=float).T if np.asarray(basis).shape == (q, q) \
            else np.asarray(basis, dtype=float)
        if basis.shape != (q, q):
            raise ValueError("need q basis vectors of length q")
    Me = M @ basis
    sv = np.linalg.svd(Me, compute_uv=False)
    sv = np.concatenate([sv, np.zeros(max(0, q - len(sv)))])
    if rank is None:
        rank = int(np.sum(sv > max(1e-12 * sv[0], 1e-300)))
    if rank < min(p, q):
        gap = sv[rank - 1] / sv[rank] if rank > 0 and sv[rank] > 0 else math.inf
        if gap < 1e6:
            raise AmbiguousRank(gap)
    r = rank
    best = None
    for rows in itertools.combinations(range(p), r):
        for cols in itertools.combinations(range(q), r):
            det = float(np.linalg.det(Me[np.ix_(rows, cols)]))
            key = (-abs(det), rows, cols)
            if best is None or key < best[0]:
                best = (key, rows, cols, det)
    _, rows, cols, det = best
    if det == 0.0:
        raise AmbiguousRank(0.0)
    minor = Me[np.ix_(rows, cols)]
    others = [j for j in range(q) if j not in cols]
    kernel = []
    for k, sig in enumerate(others):
        coeffs = np.linalg.solve(minor, Me[np.ix_(rows, [sig])]).ravel()
        x = np.zeros(q)
        x[sig] = 1.0
        for kk, jc in enumerate(cols):
            x[jc] = -coeffs[kk]
        kernel.append(x)
    # wedge normalization: e^{j_1} ^ ... ^ e^{j_r} ^ x^1 ^ ... ^ x^{q-r}
    # equals the full wedge iff the column permutation is even
    perm = list(cols) + others
    if _perm_sign(perm) < 0 and kernel:
        kernel[0] = -kernel[0]
    kernel = [basis @ x for x in kernel]
    return kernel, (rows, cols)


def _perm_sign(perm) -> int:
    seen = [False] * len(perm)
    sign = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        clen = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            clen += 1
        if clen % 2 == 0:
            sign = -sign
    return sign


# -- flow elimination ----------------------------------------------------------------


def _columns_as_vectors(M: PolyMatrix):
    return [[M.entries[i][j] for i in range(M.p)] for j in range(M.q)]


def _solve_constant_closure(M: PolyMatrix):
    """Find constant G_k with d/ds_k M = M G_k for each k, preferring to
    express derivatives through columns of strictly lower degree (that choice
    makes the generators nilpotent when it exists).  Returns None if some
    derivative is not a constant combination of the columns."""
    from .polycore import partial_derivative

    p, q, d = M.p, M.q, M.d
    cols = _columns_as_vectors(M)
    degs = [max((e.degree() for e in col), default=-1) for col in cols]
    monos = {a for col in cols for e in col for a in e.terms}
    # include first-derivative monomials so an unclosed system shows up as
    # infeasible rather than as a missing basis element
    for a in list(monos):
        for k in range(d):
            if a[k] > 0:
                monos.add(tuple(v - 1 if m == k else v for m, v in enumerate(a)))
    monomials = sorted(monos, key=grlex_key)
    mon_index = {a: ix for ix, a in enumerate(monomials)}

    def col_vector(col):
        v = [Fraction(0)] * (p * len(monomials))
        for i, e in enumerate(col):
            for a, c in e.terms.items():
                v[i * len(monomials) + mon_index[a]] = c
        return v

    col_vecs = [col_vector(c) for c in cols]
    generators = []
    for k in range(d):
        ek = tuple(1 if j == k else 0 for j in range(d))
        G = [[Fraction(0)] * q for _ in range(q)]
        for j in range(q):
            dcol = [partial_derivative(e, ek) for e in cols[j]]
            if all(e.is_zero() for e in dcol):
                continue
            target = col_vector(dcol)
            # candidate pivots: strictly lower degree first, then everything
            lower = [j2 for j2 in range(q) if degs[j2] < degs[j]]
            sol = _solve_linear_combo([col_vecs[j2] for j2 in lower], target)
            use = lower
            if sol is None:
                allow = [j2 for j2 in range(q) if j2 != j]
                sol = _solve_linear_combo([col_vecs[j2] for j2 in allow], target)
                use = allow
            if sol is None:
                raise NotDerivativeClosed(j, k)
            for coef, j2 in zip(sol, use):
                G[j2][j] = coef
        generators.append(G)
    # nilpotency: required so the flow stays polynomial
    for G in generators:
        power = G
        for _ in range(M.q):
            if all(v == 0 for row in power for v in row):
                break
            power = _mat_mul_frac(power, G)
        else:
            if any(v != 0 for row in power for v in row):
                return None
    return generators


def _solve_linear_combo(vectors, target):
    """Coefficients x with sum x_i vectors_i = target, exact; None if none."""
    if not vectors:
        return None if any(v != 0 for v in target) else []
    n = len(vectors)
    m = len(target)
    A = [[vectors[j][i] for j in range(n)] for i in range(m)]
    return _solve_exact_system(A, target)


def _solve_exact_system(A, b):
    """One exact solution of A x = b (free variables zeroed); None if none."""
    m = len(A)
    n = len(A[0]) if m else 0
    tab = [list(A[i]) + [b[i]] for i in range(m)]
    piv_of_col = {}
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if tab[i][c] != 0), None)
        if piv is None:
            continue
        tab[r], tab[piv] = tab[piv], tab[r]
        inv = Fraction(1) / tab[r][c]
        tab[r] = [v * inv for v in tab[r]]
        for i in range(m):
            if i != r and tab[i][c] != 0:
                f = tab[i][c]
                tab[i] = [x - f * y for x, y in zip(tab[i], tab[r])]
        piv_of_col[c] = r
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if tab[i][n] != 0:
            return None
    if any(tab[i][n] != 0 and all(tab[i][j] == 0 for j in range(n))
           for i in range(m)):
        return None
    x = [Fraction(0)] * n
    for c, i in piv_of_col.items():
        x[c] = tab[i][n]
    return x


def _mat_mul_frac(X, Y):
    n, k, m = len(X), len(Y), len(Y[0])
    return [[sum(X[i][l] * Y[l][j] for l in range(k)) for j in range(m)]
            for i in range(n)]


def _exp_flow(generators, d: int, q: int) -> PolyMatrix:
    """B(t) = prod_k exp(-t_k G_k); polynomial because each G_k is nilpotent."""
    B = PolyMatrix([[Poly.constant(d, 1 if i == j else 0) for j in range(q)]
                    for i in range(q)])
    for k, G in enumerate(generators):
        ek = tuple(1 if j == k else 0 for j in range(d))
        term = [[Fraction(1 if i == j else 0) for j in range(q)] for i in range(q)]
        entries = [[Poly.constant(d, 1 if i == j else 0) for j in range(q)]
                   for i in range(q)]
        power = term
        fact = 1
        for n in range(1, q + 1):
            power = _mat_mul_frac(power, G)
            fact *= n
            if all(v == 0 for row in power for v in row):
                break
            mono = tuple(n * e for e in ek)
            for i in range(q):
                for j in range(q):
                    c = power[i][j] * Fraction((-1) ** n, fact)
                    if c:
                        entries[i][j] = entries[i][j] + Poly(d, {mono: c})
        E = PolyMatrix(entries)
        B = pm_mul(B, E)
    return B


# -- greedy elimination ----------------------------------------------------------------


def _col_z_order(R: PolyMatrix, j: int, d: int):
    orders = [z_order(R.entries[i][j], d) for i in range(R.p)]
    orders = [o for o in orders if o >= 0]
    return min(orders) if orders else math.inf


def _row_z_order(R: PolyMatrix, i: int, cols, d: int):
    orders = [z_order(R.entries[i][j], d) for j in cols]
    orders = [o for o in orders if o >= 0]
    return min(orders) if orders else math.inf


def _col_jet(R: PolyMatrix, j: int, m: int, d: int):
    """Order-m diagonal jet of a column: {(row, z-beta): s-poly coeff}."""
    jet = {}
    for i in range(R.p):
        part = z_homogeneous_part(R.entries[i][j], d, m)
        for a, c in part.terms.items():
            key = (i, a[d:])
            spoly = jet.setdefault(key, {})
            spoly[a[:d]] = spoly.get(a[:d], 0) + c
    return jet


def _row_jet(R: PolyMatrix, i: int, cols, m: int, d: int):
    jet = {}
    for j in cols:
        part = z_homogeneous_part(R.entries[i][j], d, m)
        for a, c in part.terms.items():
            key = (j, a[d:])
            spoly = jet.setdefault(key, {})
            spoly[a[:d]] = spoly.get(a[:d], 0) + c
    return jet


def _solve_jet_kill(target_jet, pivot_jets, d: int, degbound: int):
    """Polynomial coefficients f (one per pivot, degree <= degbound in s)
    with sum_p f_p . jet_p = -target; None if impossible."""
    smonos = sorted(
        {a for a in _s_monomials(degbound, d)}, key=grlex_key)
    keys = set(target_jet)
    for jet in pivot_jets:
        keys |= set(jet)
    keys = sorted(keys)
    # unknown u[(pividx, gamma)]: coefficient of s^gamma in f_pividx
    unknowns = [(pi, g) for pi in range(len(pivot_jets)) for g in smonos]
    uix = {u: i for i, u in enumerate(unknowns)}
    rows = []
    rhs = []
    eq_index = {}
    for key in keys:
        base = target_jet.get(key, {})
        # collect equation rows per s-monomial of the products
        contributions: dict = {}
        for pi, jet in enumerate(pivot_jets):
            for sg, c in jet.get(key, {}).items():
                for g in smonos:
                    mono = tuple(x + y for x, y in zip(sg, g))
                    contributions.setdefault(mono, []).append((uix[(pi, g)], c))
        monos = set(contributions) | set(base)
        for mono in sorted(monos, key=grlex_key):
            row = [Fraction(0)] * len(unknowns)
            for ucol, c in contributions.get(mono, []):
                row[ucol] += c
            rows.append(row)
            rhs.append(-Fraction(base.get(mono, 0)))
    if not rows:
        return [Poly.zero(d) for _ in pivot_jets]
    sol = _solve_exact_system(rows, rhs)
    if sol is None:
        return None
    polys = []
    for pi in range(len(pivot_jets)):
        terms = {}
        for g in smonos:
            c = sol[uix[(pi, g)]]
            if c:
                terms[g] = c
        polys.append(Poly(d, terms))
    return polys


def _s_monomials(degbound: int, d: int):
    ranges = [range(degbound + 1)] * d
    for combo in itertools.product(*ranges):
        if sum(combo) <= degbound:
            yield combo


def _greedy_columns(R: PolyMatrix, B: PolyMatrix, d: int, degbound: int):
    """Raise column vanishing orders in place; records the ops into B."""
    q = R.q
    changed_any = False
    progress = True
    while progress:
        progress = False
        orders = [_col_z_order(R, j, d) for j in range(q)]
        for j in range(q):
            m = orders[j]
            if m is math.inf:
                continue
            m = int(m)
            pivots = [j2 for j2 in range(q) if j2 != j and orders[j2] == m]
            if not pivots:
                continue
            target = _col_jet(R, j, m, d)
            piv_jets = [_col_jet(R, j2, m, d) for j2 in pivots]
            fs = _solve_jet_kill(target, piv_jets, d, degbound)
            if fs is None:
                continue
            if all(f.is_zero() for f in fs):
                continue
            for f, j2 in zip(fs, pivots):
                if f.is_zero():
                    continue
                f2 = inflate_t(f, d)  # the op coefficient is a function of t
                for i in range(R.p):
                    R.entries[i][j] = R.entries[i][j] + f2 * R.entries[i][j2]
                for i in range(B.p):
                    B.entries[i][j] = B.entries[i][j] + f * B.entries[i][j2]
            neworder = _col_z_order(R, j, d)
            if neworder > m:
                progress = True
                changed_any = True
                orders[j] = neworder
            # a solvable kill always raises the order; if not, undo is not
            # needed because the jet solve guarantees cancellation at order m
    return changed_any


def _runs(values):
    groups = []
    for v in values:
        if groups and groups[-1][0] == v:
            groups[-1][1] += 1
        else:
            groups.append([v, 1])
    return [g[1] for g in groups]


def _greedy_rows(R: PolyMatrix, A: PolyMatrix, d: int, degbound: int):
    """Raise within-column-group row orders using rows of compatible profile."""
    p = R.p
    col_orders = [_col_z_order(R, j, d) for j in range(R.q)]
    order_vals = sorted({o for o in col_orders})
    groups = [[j for j in range(R.q) if col_orders[j] == v] for v in order_vals]
    changed_any = False
    progress = True
    while progress:
        progress = False
        profiles = [
            tuple(_row_z_order(R, i, g, d) for g in groups) for i in range(p)
        ]
        for gi in range(len(groups) - 1, 0, -1):
            cols = groups[gi]
            for i in range(p):
                m = profiles[i][gi]
                if m is math.inf:
                    continue
                m = int(m)
                pivots = [
                    i2 for i2 in range(p)
                    if i2 != i and profiles[i2][gi] == m
                    and all(profiles[i2][g2] >= profiles[i][g2]
                            for g2 in range(len(groups)) if g2 != gi)
                ]
                if not pivots:
                    continue
                target = _row_jet(R, i, cols, m, d)
                piv_jets = [_row_jet(R, i2, cols, m, d) for i2 in pivots]
                fs = _solve_jet_kill(target, piv_jets, d, degbound)
                if fs is None or all(f.is_zero() for f in fs):
                    continue
                for f, i2 in zip(fs, pivots):
                    if f.is_zero():
                        continue
                    f2 = inflate_s(f, d)  # row ops use functions of s
                    for j in range(R.q):
                        R.entries[i][j] = R.entries[i][j] + f2 * R.entries[i2][j]
                    for j in range(A.q):
                        A.entries[i][j] = A.entries[i][j] + f * A.entries[i2][j]
                if _row_z_order(R, i, cols, d) > m:
                    progress = True
                    changed_any = True
                    profiles = [
                        tuple(_row_z_order(R, i3, g, d) for g in groups)
                        for i3 in range(p)
                    ]
    return changed_any


def eliminate(M, degbound: int | None = None):
    """Joint row/column reduction of an incidence matrix.

    Returns (A, B, R, decomp): determinant-one A(s), B(t), the reduced
    bivariate matrix R(s, z) = A(s) M(s) B(s + z), and the block
    decomposition read off from it (column groups by vanishing order, row
    groups by order profile).

    Refuses with NotDerivativeClosed only when neither strategy applies; the
    greedy strategy needs no closure hypothesis, so in practice the check is
    soft: flow is preferred when the closure system solves.
    """
    if isinstance(M, IncidenceMatrix):
        M = M.M
    if not M.exact:
        raise ValueError("eliminate needs exact coefficients")
    p, q, d = M.p, M.q, M.d
    if degbound is None:
        degbound = max(M.degree(), 1)

    A = PolyMatrix([[Poly.constant(d, 1 if i == j else 0) for j in range(p)]
                    for i in range(p)])
    try:
        generators = _solve_constant_closure(M)
    except NotDerivativeClosed:
        generators = None
    if generators is not None:
        B = _exp_flow(generators, d, q)
    else:
        B = PolyMatrix([[Poly.constant(d, 1 if i == j else 0) for j in range(q)]
                        for i in range(q)])
    Ms = PolyMatrix([[inflate_s(e, d) for e in row] for row in M.entries])
    Bt = PolyMatrix([[inflate_t(e, d) for e in row] for row in B.entries])
    R = pm_mul(Ms, Bt)

    for _ in range(8):
        c1 = _greedy_columns(R, B, d, degbound)
        c2 = _greedy_rows(R, A, d, degbound)
        if not (c1 or c2):
            break

    # sort columns by vanishing order, rows by their order profile
    col_orders = [_col_z_order(R, j, d) for j in range(q)]
    cperm = sorted(range(q), key=lambda j: (col_orders[j], j))
    _apply_col_perm(R, cperm)
    _apply_col_perm(B, cperm)
    col_orders = [col_orders[j] for j in cperm]
    col_groups = _runs(col_orders)

    group_cols = []
    lo = 0
    for size in col_groups:
        group_cols.append(list(range(lo, lo + size)))
        lo += size
    profiles = [tuple(_row_z_order(R, i, g, d) for g in group_cols)
                for i in range(p)]
    rperm = sorted(range(p), key=lambda i: (profiles[i], i))
    _apply_row_perm(R, rperm)
    _apply_row_perm(A, rperm)
    profiles = [profiles[i] for i in rperm]
    row_groups = _runs(profiles)

    D, zero_blocks = vanishing_degrees(R, row_groups, col_groups)
    decomp = BlockDecomposition(row_groups, col_groups, D, A, B, zero_blocks)
    return A, B, R, decomp


def _apply_col_perm(X: PolyMatrix, perm):
    sign = _perm_sign(perm)
    for i in range(X.p):
        X.entries[i] = [X.entries[i][j] for j in perm]
        if sign < 0:
            X.entries[i][-1] = X.entries[i][-1].scale(-1)


def _apply_row_perm(X: PolyMatrix, perm):
    sign = _perm_sign(perm)
    X.entries = [X.entries[i] for i in perm]
    if sign < 0:
        X.entries[-1] = [e.scale(-1) for e in X.entries[-1]]


# -- degrees, verification, tiles --------------------------------------------------


def vanishing_degrees(R: PolyMatrix, row_groups, col_groups):
    """Blockwise diagonal vanishing orders of a reduced bivariate matrix.

    D_ij is the least total z-degree over the (i, j) block carrying a
    coefficient not identically zero in s.  Identically-zero blocks are
    flagged and get the sentinel 1 + max z-degree seen in their block row
    and column.
    """
    d = R.d // 2
    if sum(row_groups) != R.p or sum(col_groups) != R.q:
        raise ValueError("groups do not partition the matrix")
    ri = [0]
    for s in row_groups:
        ri.append(ri[-1] + s)
    ci = [0]
    for s in col_groups:
        ci.append(ci[-1] + s)
    nI, nJ = len(row_groups), len(col_groups)
    D = [[0] * nJ for _ in range(nI)]
    zero_blocks = set()
    for i in range(nI):
        for j in range(nJ):
            orders = [
                z_order(R.entries[r][c], d)
                for r in range(ri[i], ri[i + 1])
                for c in range(ci[j], ci[j + 1])
            ]
            orders = [o for o in orders if o >= 0]
            if orders:
                D[i][j] = min(orders)
            else:
                zero_blocks.add((i, j))
    for (i, j) in zero_blocks:
        degs = [
            z_degree(R.entries[r][c], d)
            for r in range(ri[i], ri[i + 1]) for c in range(R.q)
        ] + [
            z_degree(R.entries[r][c], d)
            for c in range(ci[j], ci[j + 1]) for r in range(R.p)
        ]
        D[i][j] = 1 + max([dg for dg in degs if dg >= 0], default=0)
    return D, zero_blocks


@dataclass
class VerifyReport:
    ok: bool
    det_ok: bool
    monotone_ok: bool
    violations: list

    def to_json(self):
        return {
            "ok": self.ok,
            "det_ok": self.det_ok,
            "monotone_ok": self.monotone_ok,
            "violations": [
                {"block": list(v[0]), "alpha": list(v[1]), "beta": list(v[2]),
                 "entry": list(v[3])}
                for v in self.violations
            ],
        }


def reduced_matrix(M, decomp: BlockDecomposition) -> PolyMatrix:
    """A(s) M(s) B(s+z) as a bivariate matrix."""
    if isinstance(M, IncidenceMatrix):
        M = M.M
    d = M.d
    As = PolyMatrix([[inflate_s(e, d) for e in row] for row in decomp.A.entries])
    Ms = PolyMatrix([[inflate_s(e, d) for e in row] for row in M.entries])
    Bt = PolyMatrix([[inflate_t(e, d) for e in row] for row in decomp.B.entries])
    return pm_mul(pm_mul(As, Ms), Bt)


def verify_block_decomposition(M, decomp: BlockDecomposition) -> VerifyReport:
    """Exact check of a block decomposition against its incidence matrix.

    Verifies det A == det B == 1, blockwise diagonal vanishing to the
    declared formal degrees (every z-monomial of total degree < D_ij must be
    absent), and separate monotonicity of D.  All violations are listed,
    none raise.
    """
    if isinstance(M, IncidenceMatrix):
        M = M.M
    d = M.d
    det_ok = (pm_det(decomp.A) == Poly.constant(d, 1)
              and pm_det(decomp.B) == Poly.constant(d, 1))
    R = reduced_matrix(M, decomp)
    violations = []
    ri = [0]
    for s in decomp.row_groups:
        ri.append(ri[-1] + s)
    ci = [0]
    for s in decomp.col_groups:
        ci.append(ci[-1] + s)
    for i in range(len(decomp.row_groups)):
        for j in range(len(decomp.col_groups)):
            need = decomp.D[i][j]
            for r in range(ri[i], ri[i + 1]):
                for c in range(ci[j], ci[j + 1]):
                    e = R.entries[r][c]
                    for a in sorted(e.terms, key=grlex_key):
                        if sum(a[d:]) < need:
                            violations.append(
                                ((i, j), (0,) * d, a[d:], (r, c)))
                            break
    monotone_ok = True
    for i in range(len(decomp.row_groups)):
        for j in range(len(decomp.col_groups)):
            if (i, j) in decomp.zero_blocks:
                continue
            if i + 1 < len(decomp.row_groups) and \
                    (i + 1, j) not in decomp.zero_blocks and \
                    decomp.D[i + 1][j] < decomp.D[i][j]:
                monotone_ok = False
            if j + 1 < len(decomp.col_groups) and \
                    (i, j + 1) not in decomp.zero_blocks and \
                    decomp.D[i][j + 1] < decomp.D[i][j]:
                monotone_ok = False
    ok = det_ok and monotone_ok and not violations
    return VerifyReport(ok, det_ok, monotone_ok, violations)


def tile_map(M, decomp: BlockDecomposition, tile: Tile, t0) -> PolyMatrix:
    """The homogeneous bilinear map attached to a tile at a diagonal point.

    Entry blocks are the degree-D_ij homogeneous z-parts of the reduced
    matrix specialized at s = t = t0; the Taylor expansion supplies the
    1/alpha! normalization.  Exact for rational t0.
    """
    if isinstance(M, IncidenceMatrix):
        M = M.M
    d = M.d
    if len(t0) != d:
        raise ValueError("diagonal point has wrong dimension")
    R = reduced_matrix(M, decomp)
    iL, iR = tile.I
    jL, jR = tile.J
    ri = [0]
    for s in decomp.row_groups:
        ri.append(ri[-1] + s)
    ci = [0]
    for s in decomp.col_groups:
        ci.append(ci[-1] + s)
    rows = []
    for i in range(iL, iR + 1):
        for r in range(ri[i], ri[i + 1]):
            row = []
            for j in range(jL, jR + 1):
                for c in range(ci[j], ci[j + 1]):
                    if (i, j) in decomp.zero_blocks:
                        row.append(Poly.zero(d))
                        continue
                    e = specialize_s(R.entries[r][c], d, t0)
                    row.append(e.homogeneous_part(decomp.D[i][j]))
            rows.append(row)
    return PolyMatrix(rows)


def useful_tiles(decomp: BlockDecomposition) -> list:
    """All interval-product tiles whose immediately-following formal degrees
    strictly dominate the adjacent in-tile ones.  The full tile always
    qualifies."""
    nI = len(decomp.row_groups)
    nJ = len(decomp.col_groups)

    def outer_deg(i, j):
        # identically-zero blocks vanish to all orders: they dominate anything
        return math.inf if (i, j) in decomp.zero_blocks else decomp.D[i][j]

    out = []
    for iL in range(nI):
        for iR in range(iL, nI):
            for jL in range(nJ):
                for jR in range(jL, nJ):
                    iR2 = min(iR + 1, nI - 1)
                    jR2 = min(jR + 1, nJ - 1)
                    after = [
                        (i, j)
                        for i in range(iL, iR2 + 1)
                        for j in range(jL, jR2 + 1)
                        if not (i <= iR and j <= jR)
                    ]
                    ok = True
                    for (i, j) in after:
                        if iL <= i - 1 <= iR and jL <= j <= jR:
                            if not outer_deg(i, j) > decomp.D[i - 1][j]:
                                ok = False
                        if iL <= i <= iR and jL <= j - 1 <= jR:
                            if not outer_deg(i, j) > decomp.D[i][j - 1]:
                                ok = False
                    if ok:
                        out.append(Tile((iL, iR), (jL, jR)))
    return out
