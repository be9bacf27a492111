"""End-to-end construction and verification of algebraic states.

``RunConfig`` holds every knob the command line exposes. ``build_state``
turns a config into an algebraic state (epsilon, E, V, psi) on the user grid;
``verify`` checks each one against the residual of the expanded equation
and against the product-form eigensolver.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .algebra import AlgebraParams, build_spectral_table, epsilon_roots, \
    matrix_eigenvalues, sl2_operator_matrix
from .mapping import FamilySpec, Grid, MappingError, MappingSample, Wavefunction, assemble_psi, build_mapping, \
    count_nodes, family
from .massprofile import BUILTIN, MassProfile, builtin, make_profile
from .oracle import READINGS, SLOW_ORDER, boundary_leak, discretize_von_roos, residual_eq2, solve_bound_states
from .potentials import MassOrdering, PotentialCurve, e_coulomb, e_morse, e_sextic, \
    exactly_solvable_epsilons, family_potential, v_general

FAMILIES = ("sextic", "coulomb", "morse", "general")

# default domains; radial ones start just off the r = 0 singularity
DEFAULT_DOMAIN = {"sextic": (1e-3, 6.0), "coulomb": (1e-3, 6.0), "morse": (-2.5, 30.0)}

# near the radial origin psi is a non-integer power of x (x^(l+1) for the sextic,
# a fractional power for Coulomb); five-point stencils cannot resolve it within
# this distance, so the residual check starts here
RADIAL_RESIDUAL_MARGIN = 0.05
LEAK_LIMIT = 1e-8


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    family: str = "sextic"
    ell: float = 0.0
    b: float = 0.0
    q: float = 1.0
    j: float = 0.5
    alpha: float = 0.0
    beta: float = -1.0
    mass: str = "1"
    mass_params: dict = field(default_factory=dict)
    lambda0: float = 0.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    r0: float | None = None
    xmin: float | None = None
    xmax: float | None = None
    n: int = 2001
    epsilon_index: int | None = None
    energy: float | None = None
    out: str | None = None
    format: str = "csv"
    tol_root: float = 1e-12
    tol_residual: float = 1e-8
    tol_match: float = 5e-3
    printed_formulas: bool = False
    debug_shift: float = 0.0
    residual_refine: int = 8
    residual_order: int = 6

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def resolved(self) -> "RunConfig":
        """Copy with family defaults filled in and every field validated."""
        cfg = RunConfig(**self.to_dict())
        if cfg.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {cfg.family!r}")
        if cfg.family == "general":
            if cfg.r0 is None:
                raise ConfigError("the general family needs --r0")
            if cfg.xmin is None or cfg.xmax is None:
                raise ConfigError("the general family needs --xmin and --xmax")
        else:
            lo, hi = DEFAULT_DOMAIN[cfg.family]
            cfg.xmin = lo if cfg.xmin is None else cfg.xmin
            cfg.xmax = hi if cfg.xmax is None else cfg.xmax
        for name in ("ell", "b", "q", "j", "alpha", "beta", "lambda0", "lambda1", "lambda2",
                     "xmin", "xmax", "debug_shift"):
            val = getattr(cfg, name)
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                raise ConfigError(f"{name} must be a finite number, got {val!r}")
            setattr(cfg, name, float(val))
        if abs(2 * cfg.j - round(2 * cfg.j)) > 1e-12 or cfg.j < 0:
            raise ConfigError(f"j must be a nonnegative integer or half-integer, got {cfg.j}")
        for name in ("tol_root", "tol_residual", "tol_match"):
            if not getattr(cfg, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not isinstance(cfg.n, int) or cfg.n < 16:
            raise ConfigError(f"n must be an integer >= 16, got {cfg.n!r}")
        if not cfg.xmin < cfg.xmax:
            raise ConfigError(f"xmin={cfg.xmin} must be below xmax={cfg.xmax}")
        if not isinstance(cfg.residual_refine, int) or cfg.residual_refine < 1:
            raise ConfigError("residual_refine must be a positive integer")
        if cfg.residual_order not in (4, 6):
            raise ConfigError("residual_order must be 4 or 6")
        if cfg.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
        if cfg.ell <= -1:
            raise ConfigError("ell must exceed -1")
        cfg.mass_params = {str(k): float(v) for k, v in sorted(cfg.mass_params.items())}
        return cfg


@dataclass
class Setup:
    cfg: RunConfig
    params: AlgebraParams
    ordering: MassOrdering
    profile: MassProfile
    fam: FamilySpec
    grid: Grid
    anchor: float | None
    _trim: tuple | None = field(default=None, repr=False)

    @property
    def state_grid(self) -> Grid:
        """User grid minus an endpoint where r or r' vanishes; psi lives here."""
        if self._trim is None:
            self._trim = _trim_singular_ends(self)
        return self._trim[0]

    @property
    def boundary_excluded(self) -> list[float]:
        if self._trim is None:
            self._trim = _trim_singular_ends(self)
        return self._trim[1]

    def describe(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "ordering": self.ordering.describe(),
            "mass": self.profile.describe(),
            "family": self.fam.describe(),
            "grid": self.grid.describe(),
            "u_anchor": self.anchor,
            "boundary_excluded_x": None if self._trim is None else self._trim[1],
        }


def make_setup(cfg: RunConfig) -> Setup:
    cfg = cfg.resolved()
    params = AlgebraParams.from_j(cfg.ell, cfg.b, cfg.q, cfg.j)
    ordering = MassOrdering(cfg.alpha, cfg.beta)
    grid = Grid(cfg.xmin, cfg.xmax, cfg.n)
    if cfg.mass in BUILTIN:
        profile = builtin(cfg.mass, **cfg.mass_params)
    else:
        profile = make_profile(cfg.mass, cfg.mass_params, probe=(cfg.xmin, cfg.xmax))
    lo, hi = profile.domain
    if cfg.xmin < lo or cfg.xmax > hi:
        raise ConfigError(f"grid [{cfg.xmin}, {cfg.xmax}] leaves the mass domain {profile.domain}")
    fam = family(cfg.family, cfg.lambda0, cfg.lambda1, cfg.lambda2, cfg.r0)
    # named families measure u from the origin, so V and E match the closed forms;
    # the general family has no origin and starts r at x_min
    anchor = None if cfg.family == "general" else 0.0
    if anchor is not None and anchor < lo:
        raise ConfigError(f"u is measured from x=0, outside the mass domain {profile.domain}")
    return Setup(cfg, params, ordering, profile, fam, grid, anchor)


def _trim_singular_ends(setup: Setup) -> tuple[Grid, list[float]]:
    """Drop a grid endpoint where r or r' vanishes; interior zeros are an error."""
    g = setup.grid
    s = build_mapping(setup.fam, setup.profile, g, setup.anchor)
    bad = np.flatnonzero((s.r == 0) | (s.r1 == 0))
    if bad.size == 0:
        return g, []
    if np.any((bad > 0) & (bad < g.n - 1)):
        raise MappingError("r or r' vanishes inside the grid; the domain crosses a singular point")
    lo = 1 if bad[0] == 0 else 0
    hi = g.n - 2 if bad[-1] == g.n - 1 else g.n - 1
    return Grid(float(g.x[lo]), float(g.x[hi]), hi - lo + 1), g.x[bad].tolist()


# --- spectrum ----------------------------------------------------------------

def epsilon_values(params: AlgebraParams) -> tuple[list[float], str]:
    if params.q == 0:
        return exactly_solvable_epsilons(params), "exactly-solvable"
    return list(epsilon_roots(build_spectral_table(params)).roots), "critical-polynomial"


def state_energy(setup: Setup, epsilon: float, corrected: bool | None = None) -> float:
    cfg, params = setup.cfg, setup.params
    if corrected is None:
        corrected = not cfg.printed_formulas
    if cfg.family == "sextic":
        return e_sextic(params, epsilon)
    if cfg.family == "coulomb":
        return e_coulomb(params, corrected)
    if cfg.family == "morse":
        return e_morse(params)
    if cfg.energy is None:
        raise ConfigError("the general family needs --energy")
    return float(cfg.energy)


def spectrum_report(setup: Setup) -> dict:
    params = setup.params
    eps, source = epsilon_values(params)
    sl2 = matrix_eigenvalues(sl2_operator_matrix(params))
    deltas = [abs(a - b) for a, b in zip(sorted(eps), sorted(sl2))]
    states = []
    for k, e in enumerate(eps):
        entry = {"index": k, "epsilon": e}
        if setup.cfg.family != "general" or setup.cfg.energy is not None:
            entry["E"] = state_energy(setup, e)
        if setup.cfg.family in ("coulomb", "morse"):
            entry["E_printed"] = state_energy(setup, e, corrected=False)
        states.append(entry)
    root_check = None
    if source == "critical-polynomial":
        crit = np.polynomial.Polynomial(build_spectral_table(params).critical)
        scale = float(np.max(np.abs(crit.coef))) * max(1.0, max(abs(e) for e in eps)) ** len(eps)
        root_check = max(abs(float(crit(e))) / scale for e in eps)
    return {
        "epsilon_source": source,
        "epsilon_roots": eps,
        "sl2_eigenvalues": sl2,
        "max_root_delta": max(deltas) if deltas else 0.0,
        "critical_residual": root_check,
        "roots_ok": root_check is None or root_check < setup.cfg.tol_root,
        "states": states,
    }


# --- states ------------------------------------------------------------------

@dataclass
class AlgebraicState:
    index: int
    epsilon: float
    energy: float
    sample: MappingSample
    potential: PotentialCurve
    psi: Wavefunction
    nodes: int


def potential_for(setup: Setup, sample: MappingSample, epsilon: float, E: float) -> PotentialCurve:
    if setup.cfg.family == "general":
        return v_general(setup.params, setup.ordering, setup.profile, sample, epsilon, E)
    return family_potential(setup.cfg.family, setup.params, setup.ordering, setup.profile, sample,
                            epsilon, corrected=not setup.cfg.printed_formulas)


def selected_indices(setup: Setup, count: int) -> list[int]:
    k = setup.cfg.epsilon_index
    if k is None:
        return list(range(count))
    if not 0 <= k < count:
        raise ConfigError(f"epsilon index {k} out of range 0..{count - 1}")
    return [k]


def build_state(setup: Setup, index: int, epsilon: float, grid: Grid | None = None) -> AlgebraicState:
    g = grid or setup.state_grid
    sample = build_mapping(setup.fam, setup.profile, g, setup.anchor)
    E = state_energy(setup, epsilon)
    V = potential_for(setup, sample, epsilon, E)
    psi = assemble_psi(setup.params, epsilon, sample, g)
    return AlgebraicState(index, epsilon, E, sample, V, psi, count_nodes(psi.raw))


def residual_margin(setup: Setup) -> float | None:
    if setup.fam.radial:
        return setup.anchor + RADIAL_RESIDUAL_MARGIN
    return None


def residual_refinements(limit: int) -> list[int]:
    """Powers of two up to ``limit``, plus ``limit`` itself."""
    out, k = [], 1
    while k < limit:
        out.append(k)
        k *= 2
    return out + [limit]


def residual_check(setup: Setup, index: int, epsilon: float) -> dict:
    """Residual of the expanded equation on refined copies of the user grid.

    Difference stencils trade truncation error (coarse grids) against the
    amplified rounding noise of psi (fine grids), so every refinement up to
    ``residual_refine`` is tried and the smallest residual is kept. A wrong
    energy leaves a floor that no step size removes.
    """
    cfg = setup.cfg
    g = setup.state_grid
    tried, best = {}, None
    for k in residual_refinements(cfg.residual_refine):
        fine = Grid(g.x_min, g.x_max, k * (g.n - 1) + 1)
        st = build_state(setup, index, epsilon, fine)
        E = st.energy + cfg.debug_shift
        rep = residual_eq2(setup.profile, setup.ordering, st.potential, E, st.psi.raw, fine,
                           x_from=residual_margin(setup), order=cfg.residual_order)
        tried[str(k)] = {r: rep.max_rel[r] for r in sorted(rep.max_rel)}
        if best is None or min(rep.max_rel.values()) < min(best[2].max_rel.values()):
            best = (k, fine, rep)
    k, fine, rep = best
    passing = rep.passes(cfg.tol_residual)
    return {
        "grid_n": fine.n,
        "refine": k,
        "stencil_order": cfg.residual_order,
        "by_refine": tried,
        "checked_from": float(rep.x[0]),
        "max_rel": {r: rep.max_rel[r] for r in sorted(rep.max_rel)},
        "consistent_readings": passing,
        "passed": bool(passing),
        "reading_formulas": {r: f"c2 = {READINGS[r](setup.ordering.alpha, setup.ordering.beta)!r}"
                             for r in sorted(READINGS)},
    }


# --- oracle ------------------------------------------------------------------

def oracle_grid(setup: Setup) -> Grid:
    """Radial families put the Dirichlet wall at the origin itself."""
    g = setup.grid
    if setup.fam.radial:
        return Grid(setup.anchor, g.x_max, g.n)
    return g


def oracle_levels(setup: Setup, epsilon: float, E: float, count: int, g: Grid):
    sample = build_mapping(setup.fam, setup.profile, g, setup.anchor)
    V = potential_for(setup, sample, epsilon, E)
    op = discretize_von_roos(setup.profile, setup.ordering, V, g)
    res = solve_bound_states(op, count)
    while res.eigenvalues[-1] < E and len(res.eigenvalues) < op.size and count < 512:
        count *= 2
        res = solve_bound_states(op, count)
    return res


def match_state(E: float, nodes: int, res, tol: float) -> dict:
    levels = res.extrapolated if res.extrapolated is not None else res.eigenvalues
    orders = res.observed_order
    diffs = np.abs(levels - E)
    near = [i for i in np.argsort(diffs) if diffs[i] <= tol]
    chosen = None
    for i in near:
        if res.nodes[i] == nodes:
            chosen = int(i)
            break
    nearest = int(np.argmin(diffs))
    out = {
        "nearest_index": nearest,
        "nearest_eigenvalue": float(levels[nearest]),
        "nearest_delta": float(diffs[nearest]),
        "nearest_nodes": int(res.nodes[nearest]),
        "nearest_order": None if orders is None else float(orders[nearest]),
        "matched": chosen is not None,
    }
    if chosen is not None:
        out.update({
            "oracle_index": chosen,
            "oracle_eigenvalue": float(levels[chosen]),
            "oracle_raw_eigenvalue": float(res.eigenvalues[chosen]),
            "delta_E": float(diffs[chosen]),
            "oracle_nodes": int(res.nodes[chosen]),
            "error_estimate": None if res.error_estimate is None else float(res.error_estimate[chosen]),
            "observed_order": None if orders is None else float(orders[chosen]),
            "extrapolation": _method(res, chosen),
            "boundary_leak": boundary_leak(res.vectors[:, chosen]),
        })
    return out


def _method(res, i: int) -> str:
    if res.richardson is None:
        return "none"
    orders = res.observed_order
    if orders is not None and orders[i] < SLOW_ORDER:
        return "aitken"
    return "richardson-h2"


def verify_state(setup: Setup, index: int, epsilon: float) -> dict:
    cfg = setup.cfg
    entry: dict = {"index": index, "epsilon": epsilon}
    try:
        st = build_state(setup, index, epsilon)
    except ValueError as exc:
        entry.update({"error": str(exc), "verified": False})
        return entry
    E = st.energy + cfg.debug_shift
    entry.update({
        "E_algebraic": st.energy,
        "E_checked": E,
        "normalizable": st.psi.normalizable,
        "tail_ratio": st.psi.tail_ratio,
        "psi_nodes": st.nodes,
        "prefactor_sign": st.psi.prefactor_sign,
        "excluded_points": st.potential.excluded,
    })
    if cfg.family in ("coulomb", "morse"):
        printed = state_energy(setup, epsilon, corrected=False)
        entry["E_printed"] = printed
        entry["printed_minus_used"] = printed - st.energy
    if cfg.family != "general":
        gen = v_general(setup.params, setup.ordering, setup.profile, st.sample, epsilon, st.energy)
        ok = st.potential.valid & gen.valid
        entry["family_vs_general_max_dV"] = float(np.max(np.abs(st.potential.V[ok] - gen.V[ok])))
    try:
        entry["residual"] = residual_check(setup, index, epsilon)
    except ValueError as exc:
        entry["residual"] = {"error": str(exc), "passed": False}
    if not st.psi.normalizable:
        entry["verified"] = entry["residual"]["passed"]
        entry["oracle"] = None
        return entry
    count = 2 * (setup.params.two_j + 1) + 4
    g = oracle_grid(setup)
    try:
        res = oracle_levels(setup, epsilon, st.energy, count, g)
        m = match_state(E, st.nodes, res, cfg.tol_match)
        refined = widened = False
        # a level converging slower than h^2 is extrapolated from h, h/2, h/4 solves
        order = m["nearest_order"]
        if res.coarser is not None and not (order is not None and order >= SLOW_ORDER):
            g = Grid(g.x_min, g.x_max, 4 * (g.n - 1) + 1)
            res = oracle_levels(setup, epsilon, st.energy, count, g)
            m = match_state(E, st.nodes, res, cfg.tol_match)
            refined = True
        if m["matched"] and m["boundary_leak"] > LEAK_LIMIT:
            g = Grid(g.x_min, g.x_max + 0.5 * (g.x_max - g.x_min), g.n)
            res = oracle_levels(setup, epsilon, st.energy, count, g)
            m = match_state(E, st.nodes, res, cfg.tol_match)
            widened = True
        m["grid"] = g.describe()
        m["refined"] = refined
        m["widened"] = widened
        entry["oracle"] = m
    except ValueError as exc:
        entry["oracle"] = {"error": str(exc), "matched": False}
    entry["verified"] = bool(entry["residual"]["passed"] and entry["oracle"]["matched"])
    return entry


def verify(setup: Setup) -> dict:
    eps, source = epsilon_values(setup.params)
    states = [verify_state(setup, k, e) for k, e in enumerate(eps)]
    norm = [s for s in states if s.get("normalizable")]
    unmatched = [s["index"] for s in norm if not (s.get("oracle") or {}).get("matched")]
    failed = [s["index"] for s in states if not s["verified"]]
    readings = sorted(set.intersection(*[set(s["residual"].get("consistent_readings", []))
                                         for s in states])) if states else []
    return {
        "epsilon_source": source,
        "states": states,
        "normalizable_states": [s["index"] for s in norm],
        "unmatched_normalizable": unmatched,
        "failed_states": failed,
        "consistent_readings": readings,
        "passed": not failed,
    }
