"""Convex-combination plans over useful tiles.

Each useful tile T = I x J with degeneracy parameter sigma contributes a
group-indexed marker point (1_I / p_I; 1_J / q_J; sigma).  A plan is a set
of nonnegative rational weights theta summing to one whose weighted marker
average hits the balanced target (1/p, ..., 1/p; 1/q, ..., 1/q; sigma_total);
the sublevel exponent is then tau = 1 / (p sigma_total).  All arithmetic is
exact; the LP treats sigma_total as a free variable unless pinned.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .blockdecomp import BlockDecomposition, Tile
from .lp import solve_eq_lp


@dataclass
class TilePoint:
    """Group-indexed marker (row part; column part; sigma)."""

    row_part: tuple       # length m*+1, Fractions
    col_part: tuple       # length m+1, Fractions
    sigma: Fraction
    tile: Tile | None = None

    def coords(self):
        return tuple(self.row_part) + tuple(self.col_part) + (self.sigma,)

    def to_json(self):
        enc = lambda xs: [{"num": x.numerator, "den": x.denominator} for x in xs]
        out = {"row_part": enc(self.row_part), "col_part": enc(self.col_part),
               "sigma": {"num": self.sigma.numerator, "den": self.sigma.denominator}}
        if self.tile is not None:
            out["tile"] = self.tile.to_json()
        return out


@dataclass
class TilePlan:
    points: list
    theta: list           # Fractions, >= 0, summing to 1
    sigma_total: Fraction
    tau: Fraction

    def to_json(self):
        return {
            "theta": [{"num": t.numerator, "den": t.denominator} for t in self.theta],
            "sigma": {"num": self.sigma_total.numerator,
                      "den": self.sigma_total.denominator},
            "tau": {"num": self.tau.numerator, "den": self.tau.denominator},
            "tiles": [pt.to_json() for pt in self.points],
        }


def tile_point(decomp: BlockDecomposition, tile: Tile, sigma) -> TilePoint:
    """Marker point of a tile: 1/p_I on the row groups in I, 1/q_J on the
    column groups in J, sigma in the last coordinate."""
    sigma = Fraction(sigma)
    iL, iR = tile.I
    jL, jR = tile.J
    p_I = sum(decomp.row_groups[iL:iR + 1])
    q_J = sum(decomp.col_groups[jL:jR + 1])
    row = tuple(
        Fraction(1, p_I) if iL <= i <= iR else Fraction(0)
        for i in range(len(decomp.row_groups))
    )
    col = tuple(
        Fraction(1, q_J) if jL <= j <= jR else Fraction(0)
        for j in range(len(decomp.col_groups))
    )
    return TilePoint(row, col, sigma, Tile(tile.I, tile.J, sigma))


def solve_plan(points: list, p: int, q: int, sigma=None,
               prefer: str = "max") -> TilePlan | None:
    """Exact LP for plan weights hitting the balanced target.

    ``sigma`` pins the total; otherwise the extreme feasible value is taken
    (``prefer`` picks which end).  Returns None when infeasible.  Among
    optimal vertices the simplex's Bland ordering makes the answer
    deterministic; when the solution is unique (the generic case for the
    worked fixtures) the choice doesn't matter.
    """
    if not points:
        return None
    nr = len(points[0].row_part)
    nc = len(points[0].col_part)
    n = len(points)
    # variables: theta (n) | sigma_total
    A = []
    b = []
    for r in range(nr):
        A.append([pt.row_part[r] for pt in points] + [Fraction(0)])
        b.append(Fraction(1, p))
    for c in range(nc):
        A.append([pt.col_part[c] for pt in points] + [Fraction(0)])
        b.append(Fraction(1, q))
    A.append([pt.sigma for pt in points] + [Fraction(-1)])
    b.append(Fraction(0))
    A.append([Fraction(1)] * n + [Fraction(0)])
    b.append(Fraction(1))
    if sigma is not None:
        row = [Fraction(0)] * n + [Fraction(1)]
        A.append(row)
        b.append(Fraction(sigma))
    obj = [Fraction(0)] * n + [Fraction(1)]
    res = solve_eq_lp(A, b, obj, maximize=(prefer == "max"))
    if res.status != "optimal":
        return None
    theta = res.x[:n]
    sig = res.x[n]
    if sig <= 0:
        return None
    tau = Fraction(1, 1) / (p * sig)
    return TilePlan(points, theta, sig, tau)


def feasible_sigma_range(points: list, p: int, q: int):
    """(min, max) of the feasible plan sigma, or None."""
    lo = solve_plan(points, p, q, prefer="min")
    hi = solve_plan(points, p, q, prefer="max")
    if lo is None or hi is None:
        return None
    return (lo.sigma_total, hi.sigma_total)
