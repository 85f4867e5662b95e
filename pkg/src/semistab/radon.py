"""Radon-like transform frontend: incidence data, curvature forms,
semistability verdicts, and model L^p exponents.

A problem is a defining map phi : R^n x R^(n1-k) -> R^k in graph form.  Its
curvature form at a base point is the mixed-Hessian tensor restricted to the
kernel of the x-Jacobian, after volume-normalized changes of chart that make
the extraction canonical.  The transform exhibits the best-possible
L^p-improving behaviour exactly when that bilinear form is semistable, which
is decided by the machinery of :mod:`semistab.gitnorm` applied to the
z-linear matrix encoding of the form.

Verdicts are certificate-backed: positive comes with a sparse convex-weight
certificate or a converged critical point, unstable with a volume-one frame
plus a diagonal destabilizer that is re-verified exactly whenever the frame
is rational.  Everything else is reported as undetermined, with the best
numeric evidence attached.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .gitnorm import (
    Destabilizer,
    LogWeights,
    criticality_residual,
    find_destabilizer,
    git_norm,
    haar_orthogonal,
    minimize_diagonal,
    polytope_membership,
    rescale_by_weights,
    sparse_criterion,
)
from .polycore import (
    GroupElement,
    Poly,
    PolyMatrix,
    act_group,
    exact_det,
    hs_norm,
    mi_order,
    partial_derivative,
    poly_from_json,
    poly_to_json,
    support_set,
)


class NonTransverse(Exception):
    pass


DRIFT_REL = 1e-6


@dataclass
class RadonProblem:
    """Defining data: phi maps (x in R^n, t in R^(n1-k)) into R^k."""

    n: int
    n1: int
    k: int
    phi: list  # k Polys in n + (n1 - k) variables, x block first

    def __post_init__(self):
        if not (0 < self.k < min(self.n, self.n1)):
            raise ValueError("need 0 < k < min(n, n1)")
        if len(self.phi) != self.k:
            raise ValueError("phi must have k components")
        nv = self.n + self.n1 - self.k
        for f in self.phi:
            if f.dim != nv:
                raise ValueError("phi components live in n + (n1-k) variables")

    @property
    def nt(self) -> int:
        return self.n1 - self.k

    def jacobian_has_generic_rank(self, seed: int = 5) -> bool:
        """Exact rank-k check of d phi / d x at random rational points."""
        rng = np.random.default_rng(seed)
        nv = self.n + self.nt
        for _ in range(2):
            pt = [Fraction(int(rng.integers(-99, 100)), 101) for _ in range(nv)]
            from .polycore import eval_poly_exact

            rows = []
            for i in range(self.k):
                row = []
                for j in range(self.n):
                    ej = tuple(1 if m == j else 0 for m in range(nv))
                    row.append(eval_poly_exact(
                        partial_derivative(self.phi[i], ej), pt))
                rows.append(row)
            if len(_exact_rref(rows)[1]) == self.k:
                return True
        return False

    def to_json(self) -> dict:
        return {"n": self.n, "n1": self.n1, "k": self.k,
                "phi": [poly_to_json(f) for f in self.phi]}

    @staticmethod
    def from_json(obj: dict) -> "RadonProblem":
        nv = obj["n"] + obj["n1"] - obj["k"]
        return RadonProblem(obj["n"], obj["n1"], obj["k"],
                            [poly_from_json(nv, f) for f in obj["phi"]])


@dataclass
class CurvatureForm:
    """Mixed-derivative tensor g[i][j][l]: output i, x-kernel j, t-kernel l.

    ``chart`` records which normalization path produced the tensor:
    exact rational pivoting or double-precision orthogonal reduction.
    """

    tensor: list
    chart: str = "exact"

    @property
    def shape(self):
        k = len(self.tensor)
        b = len(self.tensor[0]) if k else 0
        c = len(self.tensor[0][0]) if b else 0
        return (k, b, c)

    def is_zero(self) -> bool:
        return all(v == 0 for pl in self.tensor for row in pl for v in row)

    def to_polymatrix(self) -> PolyMatrix:
        """Rows = output index, columns = x-kernel index, z = t-kernel."""
        k, b, c = self.shape
        rows = []
        for i in range(k):
            row = []
            for j in range(b):
                terms = {}
                for l in range(c):
                    v = self.tensor[i][j][l]
                    if v != 0:
                        terms[tuple(1 if m == l else 0 for m in range(c))] = v
                row.append(Poly(c, terms))
            rows.append(row)
        return PolyMatrix(rows)

    @staticmethod
    def from_array(arr) -> "CurvatureForm":
        return CurvatureForm(
            [[[Fraction(v) if not isinstance(v, float) else v for v in row]
              for row in plane] for plane in arr])

    def transformed(self, L_out, L_x, L_t) -> "CurvatureForm":
        """Apply linear maps to the three slots (exact for rational maps)."""
        k, b, c = self.shape
        out = [[[Fraction(0) for _ in range(c)] for _ in range(b)]
               for _ in range(k)]
        for i in range(k):
            for j in range(b):
                for l in range(c):
                    acc = Fraction(0)
                    for i2 in range(k):
                        for j2 in range(b):
                            for l2 in range(c):
                                acc += (Fraction(L_out[i][i2])
                                        * Fraction(L_x[j2][j])
                                        * Fraction(L_t[l2][l])
                                        * Fraction(self.tensor[i2][j2][l2]))
                    out[i][j][l] = acc
        return CurvatureForm(out)


@dataclass
class SemistabilityVerdict:
    state: str                     # positive | unstable | undetermined
    certificate: object = None
    value_bound: float = 0.0
    detail: str = ""

    def to_json(self) -> dict:
        out = {"state": self.state, "value_bound": self.value_bound,
               "detail": self.detail}
        if hasattr(self.certificate, "to_json"):
            out["certificate"] = self.certificate.to_json()
        return out


@dataclass
class UnstableCertificate:
    frame: GroupElement | None      # volume-one element; None for trivial
    destabilizer: Destabilizer | None
    exact: bool
    sigma: Fraction = Fraction(0)

    def reverify(self, P: PolyMatrix) -> bool:
        """Exact re-check: transport P through the frame and test every
        support pairing against the margin.  Requires a rational frame."""
        if self.destabilizer is None:
            return P.is_zero()
        Pg = act_group(P, self.frame) if self.frame is not None else P
        return self.destabilizer.verify(support_set(Pg), self.sigma)

    def to_json(self) -> dict:
        out = {"exact": self.exact}
        if self.destabilizer is not None:
            out["destabilizer"] = self.destabilizer.to_json()
        return out


@dataclass
class PositiveCertificate:
    kind: str                      # "sparse" or "critical"
    value: float
    theta: dict | None = None
    foc_residual: float = 0.0

    def to_json(self) -> dict:
        out = {"kind": self.kind, "value": self.value,
               "foc_residual": self.foc_residual}
        if self.theta is not None:
            out["theta"] = [
                {"i": i, "j": j, "alpha": list(a),
                 "num": t.numerator, "den": t.denominator}
                for (i, j, a), t in sorted(self.theta.items())
            ]
        return out


# -- incidence and curvature ---------------------------------------------------------


def build_incidence(prob: RadonProblem) -> PolyMatrix:
    """M_ij = d phi^i / d x_j, exact, in the combined (x, t) variables.

    x is a frozen parameter block; specialize with
    :func:`specialize_incidence` to obtain a matrix in the active variables.
    """
    rows = []
    nv = prob.n + prob.nt
    for i in range(prob.k):
        row = []
        for j in range(prob.n):
            ej = tuple(1 if m == j else 0 for m in range(nv))
            row.append(partial_derivative(prob.phi[i], ej))
        rows.append(row)
    return PolyMatrix(rows)


def specialize_incidence(prob: RadonProblem, x0) -> PolyMatrix:
    """Freeze x = x0; the result is a k x n matrix in the t variables."""
    M = build_incidence(prob)
    if len(x0) != prob.n:
        raise ValueError("x0 must have length n")
    rows = []
    for i in range(prob.k):
        row = []
        for j in range(prob.n):
            terms = {}
            for a, c in M.entries[i][j].terms.items():
                val = c
                for m in range(prob.n):
                    if a[m]:
                        val = val * Fraction(x0[m]) ** a[m]
                key = a[prob.n:]
                if val:
                    terms[key] = terms.get(key, 0) + val
            row.append(Poly(prob.nt, terms))
        rows.append(row)
    return PolyMatrix(rows)


def _exact_rref(rows):
    a = [list(r) for r in rows]
    m = len(a)
    n = len(a[0]) if m else 0
    piv_cols = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = Fraction(1) / a[r][c]
        a[r] = [v * inv for v in a[r]]
        for i in range(m):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        piv_cols.append(c)
        r += 1
        if r == m:
            break
    return a, piv_cols


def curvature_form(prob: RadonProblem, z0) -> CurvatureForm:
    """Extract the curvature form at a base point.

    Normalizes coordinates (translate the base point to the origin, split
    the x-space along the kernel of the x-Jacobian, renormalize the target
    so the Jacobian restricted to the complement is the identity) and
    returns g[i][j][l] = d^2 phi^i / dx_j dt_l at the point, with j running
    over kernel directions.

    Rational data goes through exact pivoting; anything else through the
    double-precision orthogonal path with a 1e-8 rank threshold.  The
    returned form records which chart ran.
    """
    nv = prob.n + prob.nt
    if len(z0) != nv:
        raise ValueError("base point must have n + (n1-k) coordinates")
    if not all(f.exact for f in prob.phi):
        return _curvature_form_float(prob, z0)
    z0 = [Fraction(v) for v in z0]
    from .polycore import diagonal_shift

    shifted = [diagonal_shift(f, z0) for f in prob.phi]
    J = [[Fraction(0)] * prob.n for _ in range(prob.k)]
    for i in range(prob.k):
        for j in range(prob.n):
            ej = tuple(1 if m == j else 0 for m in range(nv))
            J[i][j] = shifted[i].terms.get(ej, Fraction(0))
    rref, piv_cols = _exact_rref(J)
    if len(piv_cols) < prob.k:
        raise NonTransverse(
            f"x-Jacobian rank {len(piv_cols)} < codimension {prob.k}")
    free_cols = [c for c in range(prob.n) if c not in piv_cols]
    # kernel basis from the reduced rows: e_free - sum_r rref[r][free] e_piv
    kernel = []
    for fc in free_cols:
        v = [Fraction(0)] * prob.n
        v[fc] = Fraction(1)
        for r, pc in enumerate(piv_cols):
            v[pc] = -rref[r][fc]
        kernel.append(v)
    # target renormalization T = (J restricted to pivot columns)^{-1}
    sub = [[J[i][c] for c in piv_cols] for i in range(prob.k)]
    T = _exact_inverse(sub)
    # second mixed partials d^2 phi^i / dx_a dt_l at 0
    mixed = {}
    for i in range(prob.k):
        for a in range(prob.n):
            for l in range(prob.nt):
                key = [0] * nv
                key[a] += 1
                key[prob.n + l] += 1
                mixed[(i, a, l)] = shifted[i].terms.get(tuple(key), Fraction(0))
    tensor = []
    for i in range(prob.k):
        plane = []
        for j, kv in enumerate(kernel):
            row = []
            for l in range(prob.nt):
                acc = Fraction(0)
                for i2 in range(prob.k):
                    for a in range(prob.n):
                        if kv[a] == 0 or T[i][i2] == 0:
                            continue
                        acc += T[i][i2] * kv[a] * mixed[(i2, a, l)]
                row.append(acc)
            plane.append(row)
        tensor.append(plane)
    return CurvatureForm(tensor)


def _curvature_form_float(prob: RadonProblem, z0) -> CurvatureForm:
    """Double-precision normalization: orthogonal kernel splitting with a
    1e-8 rank threshold instead of exact pivoting."""
    from .polycore import diagonal_shift

    nv = prob.n + prob.nt
    shifted = [diagonal_shift(f, [float(v) for v in z0]) for f in prob.phi]
    J = np.zeros((prob.k, prob.n))
    for i in range(prob.k):
        for j in range(prob.n):
            ej = tuple(1 if m == j else 0 for m in range(nv))
            J[i, j] = float(shifted[i].terms.get(ej, 0.0))
    U, s, Vt = np.linalg.svd(J)
    rank = int(np.sum(s > 1e-8 * max(s[0], 1e-300))) if s.size else 0
    if rank < prob.k:
        raise NonTransverse(
            f"x-Jacobian rank {rank} < codimension {prob.k}")
    kernel = Vt[prob.k:, :]          # rows span ker J
    comp = Vt[:prob.k, :]            # rows span the complement
    T = np.linalg.inv(J @ comp.T)    # target renormalization
    mixed = np.zeros((prob.k, prob.n, prob.nt))
    for i in range(prob.k):
        for a in range(prob.n):
            for l in range(prob.nt):
                key = [0] * nv
                key[a] += 1
                key[prob.n + l] += 1
                mixed[i, a, l] = float(shifted[i].terms.get(tuple(key), 0.0))
    tensor = np.einsum("im,ja,mal->ijl", T, kernel, mixed, optimize=True)
    return CurvatureForm([[[float(v) for v in row] for row in plane]
                          for plane in tensor], chart="float")


def _exact_inverse(M):
    n = len(M)
    aug = [list(M[i]) + [Fraction(1 if j == i else 0) for j in range(n)]
           for i in range(n)]
    for c in range(n):
        piv = next((i for i in range(c, n) if aug[i][c] != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        aug[c], aug[piv] = aug[piv], aug[c]
        inv = Fraction(1) / aug[c][c]
        aug[c] = [v * inv for v in aug[c]]
        for i in range(n):
            if i != c and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[c])]
    return [row[n:] for row in aug]


# -- pencil destabilizer for z-linear matrices ----------------------------------------


def _rational_nullspace(rows):
    if not rows:
        return []
    m, n = len(rows), len(rows[0])
    rref, piv_cols = _exact_rref(rows)
    free = [c for c in range(n) if c not in piv_cols]
    basis = []
    for fc in free:
        v = [Fraction(0)] * n
        v[fc] = Fraction(1)
        for r, pc in enumerate(piv_cols):
            v[pc] = -rref[r][fc]
        basis.append(v)
    return basis


def pencil_destabilizer(P: PolyMatrix, sigma):
    """Exact destabilizing frame for z-linear two-column matrices.

    For p x 2 matrices with entries linear in z in R^d and p = 2d - 1 (the
    generic tall-pencil shape, e.g. the 5 x 2 x 3 curvature pattern), the
    chained column relation S2 w2 = S1 w3 produces rational bases in which
    the support separates; the diagonal destabilizer is then found by the
    exact margin LP.  Returns (GroupElement, Destabilizer) or None.

    Two-row matrices are handled through the transpose symmetry.
    """
    sigma = Fraction(sigma)
    if not P.exact:
        return None
    if any(e.degree() > 1 or (not e.is_zero() and e.low_order() < 1)
           for row in P.entries for e in row):
        return None
    if P.p == 2 and P.q == 2 * P.d - 1:
        got = pencil_destabilizer(P.transpose(), sigma)
        if got is None:
            return None
        g, dest = got
        swapped = GroupElement(g.B, g.A, g.C, volume_preserving=False)
        return swapped, Destabilizer(dest.w_q, dest.w_p, dest.w_d, dest.margin)
    if P.q != 2 or P.p != 2 * P.d - 1:
        return None
    p, d = P.p, P.d
    S = [[[P.entries[i][j].terms.get(
        tuple(1 if m == l else 0 for m in range(d)), Fraction(0))
        for l in range(d)] for i in range(p)] for j in range(2)]
    S1, S2 = S
    rows = [[S2[i][l] for l in range(d)] + [-S1[i][l] for l in range(d)]
            for i in range(p)]
    ker = _rational_nullspace(rows)
    if not ker:
        return None
    w2, w3 = ker[0][:d], ker[0][d:]

    def matvec(Sx, v):
        return [sum(Sx[i][l] * v[l] for l in range(d)) for i in range(p)]

    if d != 3:
        # the reduction below builds the {2x1, 3x2} chain pattern; other
        # tall-pencil families are left to the frame search
        return None
    candidates = [
        [Fraction(1 if m == kk else 0) for m in range(d)] for kk in range(d)
    ]
    for extra in candidates:
        cols = [extra, w2, w3]
        Vm = [[cols[c][r] for c in range(3)] for r in range(3)]
        if exact_det(Vm) == 0:
            continue
        U = [matvec(S1, extra), matvec(S2, extra),
             matvec(S1, w2), matvec(S2, w2), matvec(S2, w3)]
        Um = [[U[c][r] for c in range(p)] for r in range(p)]
        dU = exact_det(Um)
        if dU == 0:
            continue
        Uinv = _exact_inverse(Um)
        Uinv[0] = [v * dU for v in Uinv[0]]  # normalize det to 1
        A = tuple(tuple(r) for r in Uinv)
        B = ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)))
        C = tuple(tuple(Vm[j][i] for j in range(3)) for i in range(3))
        g = GroupElement(A, B, C, volume_preserving=False)
        Pg = act_group(P, g)
        dest = find_destabilizer(support_set(Pg), sigma)
        if dest is not None:
            return g, dest
    return None


# -- the verdict ------------------------------------------------------------------------


def semistability_verdict(Q: CurvatureForm, restarts: int = 64, seed: int = 0,
                          budget: int = 200) -> SemistabilityVerdict:
    """Decide semistability of a curvature form, with certificates.

    Pipeline: sparse criterion at sigma = 1/(t-kernel dimension); exact
    identity-frame destabilizer; destabilizer search over random orthogonal
    frames; the exact pencil reduction for z-linear shapes it covers; and
    finally the numeric frame descent, whose converged critical points count
    as positive when the first-order residual is below 1e-6 relative.
    """
    k, b, c = Q.shape
    sigma = Fraction(1, c)
    P = Q.to_polymatrix()
    if P.is_zero():
        return SemistabilityVerdict(
            "unstable", UnstableCertificate(None, None, exact=True, sigma=sigma),
            0.0, "zero form")
    if P.exact:
        sv = sparse_criterion(P, sigma)
        if sv.applicable and sv.positive:
            value = minimize_diagonal(P, sigma).value
            return SemistabilityVerdict(
                "positive",
                PositiveCertificate("sparse", value, theta=sv.theta),
                value, "sparse criterion")
        dest = find_destabilizer(support_set(P), sigma)
        if dest is not None:
            cert = UnstableCertificate(None, dest, exact=True, sigma=sigma)
            return SemistabilityVerdict("unstable", cert, 0.0,
                                        "identity-frame destabilizer")
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        frames = (haar_orthogonal(rng, P.p), haar_orthogonal(rng, P.q),
                  haar_orthogonal(rng, P.d))
        g = GroupElement(*frames, volume_preserving=False)
        Pg = act_group(P, g)
        E = support_set(Pg)
        if polytope_membership(E, sigma).member:
            continue
        dest = find_destabilizer(E, sigma)
        if dest is not None:
            cert = UnstableCertificate(g, dest, exact=False, sigma=sigma)
            return SemistabilityVerdict("unstable", cert, 0.0,
                                        "random-frame destabilizer")
    if P.exact:
        got = pencil_destabilizer(P, sigma)
        if got is not None:
            g, dest = got
            cert = UnstableCertificate(g, dest, exact=True, sigma=sigma)
            assert cert.reverify(P)
            return SemistabilityVerdict("unstable", cert, 0.0,
                                        "pencil-reduction destabilizer")
    est = git_norm(P, sigma, restarts=min(restarts, 16), budget=budget,
                   seed=seed)
    hs0 = hs_norm(P)
    if est.status == "converged" and est.value > DRIFT_REL * hs0 \
            and est.foc_residual <= 1e-6 * est.value ** 2:
        return SemistabilityVerdict(
            "positive",
            PositiveCertificate("critical", est.value,
                                foc_residual=est.foc_residual),
            est.value, "converged critical point")
    return SemistabilityVerdict(
        "undetermined", None, est.value,
        f"best upper bound {est.value:.3e}, status {est.status}")


# -- exponents -----------------------------------------------------------------------


def model_exponents(n: int, n1: int, k: int) -> dict:
    """Model L^p-improving exponents and their duals, exact.

    Returns the Lebesgue pair (for the n-side and n1-side functions), the
    dual reciprocals, and asserts the exact identity
    n1 + n = (n+k)/p2 + (n1+k)/p1.
    """
    if not (0 < k < min(n, n1)):
        raise ValueError("need 0 < k < min(n, n1)")
    r2 = Fraction(k * (n1 - k), n1 * (n - k)) + 1
    r1 = Fraction(k * (n - k), n * (n1 - k)) + 1
    inv_p2 = Fraction(n1 * (n - k), n * n1 - k * k)
    inv_p1 = Fraction(n * (n1 - k), n * n1 - k * k)
    assert (n + k) * inv_p2 + (n1 + k) * inv_p1 == n1 + n
    return {"r2": r2, "r1": r1, "inv_p2": inv_p2, "inv_p1": inv_p1}


@dataclass
class BalancedResult:
    ok: bool
    sigma: Fraction | None = None
    N: int = 0
    r: Fraction | None = None
    target: Fraction | None = None
    witness: tuple | None = None
    reason: str = ""


def balanced_check(alphas, type_: int, k: int | None = None,
                   d: int | None = None) -> BalancedResult:
    """Closure and mean conditions for a finite monomial set, exact.

    Type 1 needs the block multiplicity ``k``; type 2 the dimension ``d``
    (which must match the multiindex length).  Returns the degeneracy
    parameter sigma, the cardinality N, the source Lebesgue exponent r and
    the target exponent.
    """
    alphas = [tuple(a) for a in alphas]
    if not alphas:
        return BalancedResult(False, reason="empty set")
    dim = len(alphas[0])
    if any(len(a) != dim for a in alphas):
        return BalancedResult(False, reason="mixed dimensions")
    if any(mi_order(a) == 0 for a in alphas):
        return BalancedResult(False, reason="contains the zero multiindex")
    N = len(alphas)
    aset = set(alphas)

    def sub_indices(a):
        ranges = [range(x + 1) for x in a]
        for combo in itertools.product(*ranges):
            yield combo

    if type_ == 1:
        if k is None or k < 1:
            return BalancedResult(False, reason="type 1 needs k")
        for a in alphas:
            for b in sub_indices(a):
                if mi_order(b) == 0 or b == a:
                    continue
                if b not in aset:
                    return BalancedResult(False, witness=b,
                                          reason=f"closure fails below {a}")
        total = [Fraction(sum(a[m] for a in alphas), N) for m in range(dim)]
        if len(set(total)) != 1 or total[0] <= 0:
            return BalancedResult(False, reason="mean is not sigma * ones")
        sigma = total[0]
        r = Fraction(N * k, 1) * sigma / (N + 1) + 1
        return BalancedResult(True, sigma, N, r, r * Fraction(N + 1, N))
    if type_ == 2:
        if d is None or d != dim:
            return BalancedResult(False, reason="type 2 needs matching d")
        if any(mi_order(a) == 1 for a in alphas):
            return BalancedResult(False, reason="degree-1 multiindex present")
        for a in alphas:
            for b in sub_indices(a):
                if mi_order(b) < 2 or b == a:
                    continue
                if b not in aset:
                    return BalancedResult(False, witness=b,
                                          reason=f"closure fails below {a}")
        mean_dir = [
            Fraction(0)] * dim
        for a in alphas:
            o = mi_order(a)
            for m in range(dim):
                mean_dir[m] += Fraction(a[m], o)
        mean_dir = [v / N for v in mean_dir]
        if len(set(mean_dir)) != 1 or mean_dir[0] != Fraction(1, d):
            return BalancedResult(False, reason="direction mean is not 1/d")
        total = [Fraction(sum(a[m] for a in alphas), N) for m in range(dim)]
        if len(set(total)) != 1:
            return BalancedResult(False, reason="mean is not constant")
        sigma = total[0] - Fraction(1, d)
        if sigma <= 0:
            return BalancedResult(False, reason="sigma not positive")
        r = Fraction(N * d, 1) * sigma / (N + d) + 1
        return BalancedResult(True, sigma, N, r, r * Fraction(N + d, N))
    return BalancedResult(False, reason=f"unknown type {type_}")


# -- balanced incidence families -------------------------------------------------------


def _sorted_alphas(alphas):
    from .polycore import grlex_key

    return sorted((tuple(a) for a in alphas), key=grlex_key)


def moment_family_type1(alphas, k: int):
    """Incidence data for the non-translation-invariant balanced family.

    Returns (M, A, B, P, P_right, sigma): the (Nk) x (Nk + k) incidence
    matrix in s, the unimodular witnesses, the full degree-matched matrix P
    (z understood as t - s), and the z-homogeneous right block to which the
    sparse criterion applies at the balance parameter sigma.
    """
    chk = balanced_check(alphas, 1, k=k)
    if not chk.ok:
        raise ValueError(f"not balanced of type 1: {chk.reason}")
    alphas = _sorted_alphas(alphas)
    N = len(alphas)
    d = len(alphas[0])
    rows = N * k
    cols = N * k + k
    fac = lambda a: Fraction(1, _mi_fact(a))

    def mono(a, coef):
        return Poly(d, {tuple(a): coef})

    def s_mono(a, coef):
        # coefficient block of P: a polynomial in s inside the (s, z) space
        return Poly(2 * d, {tuple(a) + (0,) * d: coef})

    def z_mono(a, coef):
        return Poly(2 * d, {(0,) * d + tuple(a): coef})

    zero = Poly.zero(d)
    one = Poly.constant(d, 1)
    zero2 = Poly.zero(2 * d)
    M = [[zero for _ in range(cols)] for _ in range(rows)]
    B = [[zero for _ in range(cols)] for _ in range(cols)]
    A = [[zero for _ in range(rows)] for _ in range(rows)]
    P = [[zero2 for _ in range(cols)] for _ in range(rows)]
    for r in range(rows):
        M[r][r] = one
    for c in range(cols):
        B[c][c] = one
    for i, a in enumerate(alphas):
        for m in range(k):
            r = i * k + m
            M[r][N * k + m] = mono(a, fac(a))
            B[r][N * k + m] = mono(a, -fac(a))
            P[r][N * k + m] = z_mono(a, -fac(a))
    for i, a in enumerate(alphas):
        for i2, a2 in enumerate(alphas):
            diff = tuple(x - y for x, y in zip(a, a2))
            if any(v < 0 for v in diff):
                continue
            coef = Fraction((-1) ** sum(diff), _mi_fact(diff))
            for m in range(k):
                A[i * k + m][i2 * k + m] = mono(diff, coef)
                P[i * k + m][i2 * k + m] = s_mono(diff, coef)
    Pm = PolyMatrix(P)
    right = PolyMatrix([[Poly(d, {a: -fac(a)}) if r == i * k + m else zero
                         for m in range(k)]
                        for i, a in enumerate(alphas) for r_ in [0]
                        for r in [i * k]
                        ])
    # right block in the z variables alone, for the sparse criterion
    right_rows = []
    for i, a in enumerate(alphas):
        for m in range(k):
            row = [zero] * k
            row[m] = mono(a, -fac(a))
            right_rows.append(row)
    right = PolyMatrix(right_rows)
    return (PolyMatrix(M), PolyMatrix(A), PolyMatrix(B), Pm, right, chk.sigma)


def moment_family_type2(alphas):
    """Translation-invariant balanced family (gradient rows)."""
    d = len(next(iter(alphas)))
    chk = balanced_check(alphas, 2, d=d)
    if not chk.ok:
        raise ValueError(f"not balanced of type 2: {chk.reason}")
    alphas = _sorted_alphas(alphas)
    N = len(alphas)
    cols = N + d
    zero = Poly.zero(d)
    one = Poly.constant(d, 1)

    def dmono(a, l, coef):
        # coef * d/ds_l of s^a / a!
        if a[l] == 0:
            return Poly.zero(d)
        a2 = list(a)
        a2[l] -= 1
        return Poly(d, {tuple(a2): coef * Fraction(1, _mi_fact(tuple(a2)))})

    def to_z(e):
        return Poly(2 * d, {(0,) * d + a: c for a, c in e.terms.items()})

    def to_s(e):
        return Poly(2 * d, {a + (0,) * d: c for a, c in e.terms.items()})

    M = [[zero for _ in range(cols)] for _ in range(N)]
    B = [[zero for _ in range(cols)] for _ in range(cols)]
    A = [[zero for _ in range(N)] for _ in range(N)]
    P = [[Poly.zero(2 * d) for _ in range(cols)] for _ in range(N)]
    right = [[zero for _ in range(d)] for _ in range(N)]
    for r in range(N):
        M[r][r] = one
    for c in range(cols):
        B[c][c] = one
    for i, a in enumerate(alphas):
        sign = Fraction((-1) ** (mi_order(a) - 1))
        for l in range(d):
            M[i][N + l] = dmono(a, l, sign)
            B[i][N + l] = dmono(a, l, -sign)
            # reduced value: -q(t-s) = (-1)^{|a|} d_l z^a / a! in z = t - s
            right[i][l] = dmono(a, l, Fraction((-1) ** mi_order(a)))
            P[i][N + l] = to_z(right[i][l])
    for i, a in enumerate(alphas):
        for i2, a2 in enumerate(alphas):
            diff = tuple(x - y for x, y in zip(a, a2))
            if any(v < 0 for v in diff):
                continue
            coef = Fraction(1, _mi_fact(diff))
            A[i][i2] = Poly(d, {diff: coef})
            P[i][i2] = to_s(Poly(d, {diff: coef}))
    Pm = PolyMatrix(P)
    return (PolyMatrix(M), PolyMatrix(A), PolyMatrix(B), Pm,
            PolyMatrix(right), chk.sigma)


def _mi_fact(a) -> int:
    out = 1
    for v in a:
        out *= math.factorial(v)
    return out


# -- decomposition verification ---------------------------------------------------------


@dataclass
class RadonVerifyReport:
    ok: bool
    det_ok: bool
    degree_monotone: bool
    violations: list

    def to_json(self):
        return {"ok": self.ok, "det_ok": self.det_ok,
                "degree_monotone": self.degree_monotone,
                "violations": [
                    {"entry": list(v[0]), "z_monomial": list(v[1])}
                    for v in self.violations]}


def verify_radon_decomposition(M: PolyMatrix, A: PolyMatrix, B: PolyMatrix,
                               P: PolyMatrix) -> RadonVerifyReport:
    """Exact check that A(s) M(s) B(t) agrees with P through order deg P_ij.

    P entries mix s-dependent coefficients with z-monomials (z = t - s);
    the defect A M B - P|_{z=t-s} must vanish on the diagonal together with
    all derivatives of total order <= deg_z P_ij.  Degrees must be constant
    per entry and nondecreasing in both indexes.
    """
    from .blockdecomp import (inflate_s, inflate_t, pm_det, pm_mul, z_order,
                              z_degree)

    d = M.d
    det_ok = (pm_det(A) == Poly.constant(d, 1)
              and pm_det(B) == Poly.constant(d, 1))
    As = PolyMatrix([[inflate_s(e, d) for e in row] for row in A.entries])
    Ms = PolyMatrix([[inflate_s(e, d) for e in row] for row in M.entries])
    Bt = PolyMatrix([[inflate_t(e, d) for e in row] for row in B.entries])
    R = pm_mul(pm_mul(As, Ms), Bt)

    # P with z in the second block and s-coefficients in the first:
    # a plain d-variable entry is all-z (degree-matched part)
    degs = [[None] * M.q for _ in range(M.p)]  # None: zero entry, no constraint
    viol = []
    for i in range(M.p):
        for j in range(M.q):
            e = P.entries[i][j]
            if e.dim == d:
                E = Poly(2 * d, {(0,) * d + a: c for a, c in e.terms.items()},
                         exact=True)
            elif e.dim == 2 * d:
                E = e
            else:
                raise ValueError("P entries must be in z or (s, z) variables")
            if not E.is_zero():
                degs[i][j] = max(z_degree(E, d), 0)
            defect = R.entries[i][j] - E
            if defect.is_zero():
                continue
            dij = degs[i][j] if degs[i][j] is not None else 0
            if z_order(defect, d) <= dij:
                bad = min((a for a in defect.terms if sum(a[d:]) <= dij),
                          key=lambda a: sum(a[d:]))
                viol.append(((i, j), bad[d:]))

    def mono_pair(a, b):
        return a is None or b is None or a <= b

    monotone = all(
        mono_pair(degs[i][j], degs[i + 1][j])
        for i in range(M.p - 1) for j in range(M.q)
    ) and all(
        mono_pair(degs[i][j], degs[i][j + 1])
        for i in range(M.p) for j in range(M.q - 1)
    )
    ok = det_ok and monotone and not viol
    return RadonVerifyReport(ok, det_ok, monotone, viol)
