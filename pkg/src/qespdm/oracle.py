"""Independent numerical checks.

``discretize_von_roos`` builds the symmetric tridiagonal matrix of

    H = (m^a p m^b p m^g + m^g p m^b p m^a) / 4 + V,   p = -i d/dx,

directly in product form (no expansion into m', m'' terms), with Dirichlet
ends. ``residual_eq2`` evaluates the expanded second-order equation for a
given (m, V, E, psi) under both readings of the ordering bracket.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .mapping import Grid, count_nodes
from .massprofile import MassProfile
from .potentials import MassOrdering, PotentialCurve


class OracleError(RuntimeError):
    pass


@dataclass
class DiscretizedOperator:
    diag: np.ndarray
    off: np.ndarray
    grid: Grid
    profile: MassProfile
    ordering: MassOrdering
    potential: PotentialCurve

    @property
    def size(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)


@dataclass
class OracleResult:
    eigenvalues: np.ndarray
    nodes: list
    vectors: np.ndarray
    grid: Grid
    coarse: np.ndarray | None = None
    richardson: np.ndarray | None = None
    coarser: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def error_estimate(self) -> np.ndarray | None:
        if self.coarse is None:
            return None
        return np.abs(self.eigenvalues - self.coarse) / 3

    @property
    def observed_order(self) -> np.ndarray | None:
        """log2 of successive level differences over the h, 2h, 4h solves (NaN if undefined)."""
        if self.coarser is None:
            return None
        d0 = self.coarse - self.eigenvalues
        d1 = self.coarser - self.coarse
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.log2(d1 / d0)
        return np.where((d0 * d1 > 0) & np.isfinite(p), p, np.nan)

    @property
    def extrapolated(self) -> np.ndarray | None:
        """h^2 Richardson values, replaced by Aitken's estimate for levels that
        visibly converge slower than h^2 (singular cores, for example)."""
        if self.richardson is None:
            return None
        p = self.observed_order
        if p is None:
            return self.richardson
        d0 = self.coarse - self.eigenvalues
        d1 = self.coarser - self.coarse
        slow = p < SLOW_ORDER
        with np.errstate(divide="ignore", invalid="ignore"):
            aitken = self.eigenvalues - d0 * d0 / (d1 - d0)
        return np.where(slow, aitken, self.richardson)


def discretize_von_roos(p: MassProfile, ordering: MassOrdering, V: PotentialCurve, g: Grid) -> DiscretizedOperator:
    x = g.x
    if len(V.x) != g.n or not np.allclose(V.x, x, rtol=0, atol=1e-12 * max(1.0, abs(g.x_max))):
        raise OracleError("potential is not sampled on the operator grid")
    interior = np.arange(1, g.n - 1)
    missing = [i for i in V.excluded if 0 < i < g.n - 1]
    if missing:
        raise OracleError(f"potential undefined at interior grid points {missing[:10]}")
    h = g.h
    m = p.m(x)
    mid = p.m(0.5 * (x[:-1] + x[1:]))
    if np.any(~(mid > 0)) or np.any(~(m[interior] > 0)):
        raise OracleError("mass is not positive on the grid")
    a, b, c = ordering.alpha, ordering.beta, ordering.gamma
    ma, mc = m**a, m**c
    mb = mid**b  # mb[i] sits at x_{i+1/2}
    # A = diag(m^a) L_b diag(m^c), L_b the conservative second difference with m^b at midpoints
    i = interior
    a_diag = -ma[i] * (mb[i] + mb[i - 1]) * mc[i] / h**2
    j = interior[:-1]
    a_up = ma[j] * mb[j] * mc[j + 1] / h**2
    a_lo = ma[j + 1] * mb[j] * mc[j] / h**2
    # H = -(A + A^T)/4 + V is symmetric by construction: only one off-diagonal is stored
    diag = -0.5 * a_diag + V.V[i]
    off = -0.25 * (a_up + a_lo)
    return DiscretizedOperator(diag, off, g, p, ordering, V)


# below this observed order a level is extrapolated with Aitken instead of h^2 Richardson
SLOW_ORDER = 1.5


def _lowest(op: DiscretizedOperator, k: int):
    k = min(k, op.size)
    try:
        w, v = eigh_tridiagonal(op.diag, op.off, select="i", select_range=(0, k - 1),
                                lapack_driver="stebz")
    except np.linalg.LinAlgError:
        # perturb the spectrum shift slightly and retry once
        shift = 1e-12 * max(1.0, float(np.max(np.abs(op.diag))))
        try:
            w, v = eigh_tridiagonal(op.diag + shift, op.off, select="i",
                                    select_range=(0, k - 1), lapack_driver="stebz")
        except np.linalg.LinAlgError as exc:
            raise OracleError(f"inverse iteration failed to converge: {exc}") from exc
        w = w - shift
    full = np.zeros((op.grid.n, len(w)))
    full[1:-1, :] = v
    return w, full


def solve_bound_states(op: DiscretizedOperator, k: int, richardson: bool = True) -> OracleResult:
    """k lowest levels, node counts, and a half-resolution re-solve for extrapolation."""
    w, vecs = _lowest(op, k)
    nodes = [count_nodes(vecs[:, i], rel_floor=1e-9) for i in range(vecs.shape[1])]
    res = OracleResult(np.asarray(w), nodes, vecs, op.grid)
    if richardson and op.grid.n % 2 == 1 and op.grid.n >= 33:
        res.coarse = _coarse_levels(op, 2, len(w))
        res.richardson = (4 * res.eigenvalues - res.coarse) / 3
        if (op.grid.n - 1) % 4 == 0 and op.grid.n >= 65:
            res.coarser = _coarse_levels(op, 4, len(w))
    return res


def _coarse_levels(op: DiscretizedOperator, step: int, k: int) -> np.ndarray:
    g = op.grid
    cg = Grid(g.x_min, g.x_max, (g.n - 1) // step + 1)
    cop = discretize_von_roos(op.profile, op.ordering, op.potential.subsample(step), cg)
    return np.asarray(_lowest(cop, k)[0])


def boundary_leak(vec: np.ndarray, skip: int = 1) -> float:
    """max |psi| at the first/last retained interior point relative to max |psi|."""
    peak = np.max(np.abs(vec))
    return float(max(abs(vec[skip]), abs(vec[-1 - skip])) / peak) if peak > 0 else 0.0


# --- residual of the expanded equation --------------------------------------

READINGS = {
    # coefficient c2 of m'^2 in [(1+b) m m'' - c2 m'^2] psi / (4 m^3)
    "A": lambda a, b: 2 * (b + 1 + a * (a + b + 1)),
    "B": lambda a, b: 2 * (b + 1) + a * (a + b + 1),
}


@dataclass
class ResidualReport:
    max_rel: dict
    profile: dict
    x: np.ndarray
    scale: float

    @property
    def best(self) -> str:
        return min(self.max_rel, key=lambda k: self.max_rel[k])

    def passes(self, tol: float) -> list[str]:
        return [k for k, v in sorted(self.max_rel.items()) if v < tol]


# central-difference weights (first, second derivative) by order of accuracy
STENCILS = {
    4: (np.array([1, -8, 0, 8, -1]) / 12, np.array([-1, 16, -30, 16, -1]) / 12),
    6: (np.array([-1, 9, -45, 0, 45, -9, 1]) / 60, np.array([2, -27, 270, -490, 270, -27, 2]) / 180),
}


def residual_eq2(p: MassProfile, ordering: MassOrdering, V: PotentialCurve, E: float, psi,
                 g: Grid, skip: int = 3, x_from: float | None = None, order: int = 4) -> ResidualReport:
    """Pointwise residual of

        -psi''/(2m) + m' psi'/(2m^2) + (V - E) psi + [(1+b) m m'' - c2 m'^2] psi/(4m^3) = 0

    with central derivatives of the given order (4: five-point, 6: seven-point),
    normalized by the largest individual term over the checked points. The
    first/last ``skip`` points are not checked, nor points below ``x_from``.
    """
    psi = np.asarray(psi, dtype=float)
    n = g.n
    if n < 7:
        raise OracleError("residual check needs at least 7 grid points")
    if not np.any(psi != 0):
        raise OracleError("psi is identically zero")
    if order not in STENCILS:
        raise OracleError(f"stencil order must be one of {sorted(STENCILS)}")
    w1, w2 = STENCILS[order]
    half = len(w1) // 2
    skip = max(skip, half)
    h = g.h
    idx = np.arange(skip, n - skip)
    valid = V.valid
    idx = idx[valid[idx]]
    x = g.x
    if x_from is not None:
        idx = idx[x[idx] >= x_from]
    if len(idx) == 0:
        raise OracleError("no grid points left to check")
    m, m1, m2 = p.derivatives(x[idx])
    d1 = sum(w * psi[idx + k - half] for k, w in enumerate(w1) if w) / h
    d2 = sum(w * psi[idx + k - half] for k, w in enumerate(w2) if w) / h**2
    f = psi[idx]
    base_terms = [-d2 / (2 * m), m1 * d1 / (2 * m**2), (V.V[idx] - E) * f]
    a, b = ordering.alpha, ordering.beta
    max_rel, prof = {}, {}
    terms_by = {}
    for key, coef in READINGS.items():
        c2 = coef(a, b)
        order_term = ((1 + b) * m * m2 - c2 * m1**2) * f / (4 * m**3)
        terms_by[key] = base_terms + [order_term]
    scale = max(float(np.max(np.abs(t))) for ts in terms_by.values() for t in ts)
    if scale == 0:
        scale = 1.0
    for key, ts in terms_by.items():
        res = np.abs(sum(ts)) / scale
        prof[key] = res
        max_rel[key] = float(np.max(res))
    return ResidualReport(max_rel, prof, x[idx], scale)
