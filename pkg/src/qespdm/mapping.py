"""Change of variables x -> u -> r, the weight function, and wavefunction assembly.

u(x) is the mass-weighted length, integral of sqrt(m). The three named
families use closed forms for r(u) that solve

    sqrt(lam0 + lam1 / r + lam2 / r^2) dr/dx = -sqrt(m),

and the general family integrates that relation numerically. Derivatives of
r with respect to x follow from derivatives with respect to u by the chain
rule with du/dx = sqrt(m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraParams, R_coefficients
from .massprofile import MassProfile

GL_ORDER = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class FamilySpec:
    variant: str
    lam0: float = 0.0
    lam1: float = 0.0
    lam2: float = 0.0
    r0: float | None = None

    VARIANTS = ("sextic", "coulomb", "morse", "general")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise MappingError(f"unknown family {self.variant!r}")

    @property
    def radial(self) -> bool:
        """Families whose r vanishes at u = 0 (the radial origin)."""
        return self.variant in ("sextic", "coulomb")

    @property
    def lambdas(self) -> tuple[float, float, float]:
        return (self.lam0, self.lam1, self.lam2)

    def describe(self) -> dict:
        d = {"variant": self.variant, "lambda0": self.lam0, "lambda1": self.lam1, "lambda2": self.lam2}
        if self.variant == "general":
            d["r0"] = self.r0
        return d


# r = -u^2 satisfies the relation with lam1 = -1/4 (not +1/4): (lam1/r) r'^2 must equal m.
SEXTIC = FamilySpec("sextic", lam1=-0.25)
COULOMB = FamilySpec("coulomb", lam0=0.25)
MORSE = FamilySpec("morse", lam2=1.0)


def family(name: str, lam0=0.0, lam1=0.0, lam2=0.0, r0=None) -> FamilySpec:
    if name == "sextic":
        return SEXTIC
    if name == "coulomb":
        return COULOMB
    if name == "morse":
        return MORSE
    if r0 is None:
        raise MappingError("general family needs an initial value r0")
    return FamilySpec("general", float(lam0), float(lam1), float(lam2), float(r0))


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise MappingError(f"grid needs n >= 16, got {self.n}")
        if not self.x_min < self.x_max:
            raise MappingError(f"x_min={self.x_min} must be below x_max={self.x_max}")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    def coarsened(self) -> "Grid":
        """Every other point; requires odd n so the end points are kept."""
        if self.n % 2 == 0:
            raise MappingError("coarsening needs an odd point count")
        return Grid(self.x_min, self.x_max, (self.n + 1) // 2)

    def describe(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n}


@dataclass
class MappingSample:
    x: np.ndarray
    m: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    u: np.ndarray
    r: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    family: FamilySpec
    u_anchor: float
    flags: dict = field(default_factory=dict)


# --- quadrature ------------------------------------------------------------

def _gl_integral(f, a: float, b: float, pieces: int = 1) -> float:
    edges = np.linspace(a, b, pieces + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        total += half * float(np.dot(_GL_WEIGHTS, f(lo + half * (_GL_NODES + 1.0))))
    return total


def cumulative_gauss(f, x: np.ndarray) -> np.ndarray:
    """Cumulative integral of f from x[0], Gauss-Legendre on each cell."""
    x = np.asarray(x, dtype=float)
    lo, hi = x[:-1], x[1:]
    half = 0.5 * (hi - lo)
    pts = lo[:, None] + half[:, None] * (_GL_NODES[None, :] + 1.0)
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    cells = half * (vals @ _GL_WEIGHTS)
    return np.concatenate([[0.0], np.cumsum(cells)])


def cumulative_simpson(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative composite Simpson on uniform samples, starting at 0.

    Even indices use the composite rule; each odd index adds the first half of
    the following (or, at the end, preceding) three-point panel.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    out = np.zeros(n)
    if n < 3:
        if n == 2:
            out[1] = 0.5 * h * (y[0] + y[1])
        return out
    panels = (y[0:-2:2] + 4 * y[1:-1:2] + y[2::2]) * h / 3
    out[2::2] = np.cumsum(panels)
    for i in range(1, n, 2):
        if i + 1 < n:
            # integral over [x_{i-1}, x_i] from the panel (i-1, i, i+1)
            part = h * (5 * y[i - 1] + 8 * y[i] - y[i + 1]) / 12
        else:
            part = h * (-y[i - 2] + 8 * y[i - 1] + 5 * y[i]) / 12
        out[i] = out[i - 1] + part
    return out


def integrate_u(p: MassProfile, g: Grid, anchor: float | None = None) -> np.ndarray:
    """u(x) = integral of sqrt(m) from ``anchor`` (default x_min, so u(x_min) = 0)."""
    x = g.x

    def sqrt_m(t):
        return np.sqrt(p.m(t))

    probe = sqrt_m(x)
    if not np.all(np.isfinite(probe)):
        raise MappingError("sqrt(m) is not finite on the grid")
    u = cumulative_gauss(sqrt_m, x)
    if not np.all(np.isfinite(u)):
        raise MappingError("non-finite integrand in u(x)")
    if anchor is not None and anchor != g.x_min:
        # offset from the anchor to x_min, subdivided to resolve end behaviour
        pieces = max(8, int(math.ceil(abs(g.x_min - anchor) / max(g.h, 1e-12))))
        u = u + _gl_integral(sqrt_m, anchor, g.x_min, pieces)
    return u


# --- r(u) ------------------------------------------------------------------

def _r_of_u(fam: FamilySpec, u: np.ndarray):
    """r and its first three u-derivatives for the closed-form families."""
    if fam.variant == "sextic":
        return -u**2, -2 * u, np.full_like(u, -2.0), np.zeros_like(u)
    if fam.variant == "coulomb":
        return -2 * u, np.full_like(u, -2.0), np.zeros_like(u), np.zeros_like(u)
    if fam.variant == "morse":
        e = np.exp(-u)
        return e, -e, e, -e
    raise MappingError(f"no closed form for {fam.variant}")


def radicand(fam: FamilySpec, r):
    r = np.asarray(r, dtype=float)
    out = np.full_like(r, fam.lam0)
    # absent terms are skipped so that r = 0 is allowed when only lam0 is set
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam.lam1:
            out = out + fam.lam1 / r
        if fam.lam2:
            out = out + fam.lam2 / r**2
    return out


def _general_u_derivs(fam: FamilySpec, r: np.ndarray):
    """dr/du = -1/sqrt(Q(r)) and its u-derivatives along the flow."""
    _, lam1, lam2 = fam.lambdas
    Q = radicand(fam, r)
    Qr = np.zeros_like(r)
    Qrr = np.zeros_like(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        if lam1:
            Qr = Qr - lam1 / r**2
            Qrr = Qrr + 2 * lam1 / r**3
        if lam2:
            Qr = Qr - 2 * lam2 / r**3
            Qrr = Qrr + 6 * lam2 / r**4
    g = -Q**-0.5
    g_r = 0.5 * Qr * Q**-1.5
    g_rr = 0.5 * Qrr * Q**-1.5 - 0.75 * Qr**2 * Q**-2.5
    return g, g * g_r, g * (g_r**2 + g * g_rr)


def _rk4_general(fam: FamilySpec, p: MassProfile, x: np.ndarray, r0: float,
                 rtol: float = 1e-13) -> np.ndarray:
    """Classical RK4 for dr/dx = -sqrt(m)/sqrt(Q(r)), step-halving per cell."""

    def rhs(t, r):
        q = float(radicand(fam, r))
        if not q > 0:
            raise MappingError(f"radicand {q!r} is not positive at x={t!r}, r={r!r}")
        return -math.sqrt(float(p.m(t))) / math.sqrt(q)

    def advance(t, r, h, steps):
        dt = h / steps
        for _ in range(steps):
            k1 = rhs(t, r)
            k2 = rhs(t + dt / 2, r + dt * k1 / 2)
            k3 = rhs(t + dt / 2, r + dt * k2 / 2)
            k4 = rhs(t + dt, r + dt * k3)
            r = r + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
            t = t + dt
        return r

    out = np.empty_like(x)
    out[0] = r0
    steps = 1
    for i in range(len(x) - 1):
        h = x[i + 1] - x[i]
        steps = max(1, steps // 2)
        coarse = advance(x[i], out[i], h, steps)
        while True:
            fine = advance(x[i], out[i], h, 2 * steps)
            if abs(fine - coarse) <= rtol * max(1.0, abs(fine)) or steps > 1 << 16:
                break
            steps *= 2
            coarse = fine
        # Richardson combination of the two fourth-order results
        out[i + 1] = fine + (fine - coarse) / 15
    return out


def map_r(fam: FamilySpec, p: MassProfile, g: Grid, u: np.ndarray, u_anchor: float | None = None) -> MappingSample:
    """r, r', r'', r''' on the grid for the given family."""
    x = g.x
    m, m1, m2 = p.derivatives(x)
    if fam.variant == "general":
        if fam.r0 is None:
            raise MappingError("general family needs r0")
        r = _rk4_general(fam, p, x, fam.r0)
        Q = radicand(fam, r)
        if np.any(~(Q > 0)):
            raise MappingError("radicand nonpositive along the trajectory")
        G1, G2, G3 = _general_u_derivs(fam, r)
    else:
        r, G1, G2, G3 = _r_of_u(fam, np.asarray(u, dtype=float))
    s = np.sqrt(m)
    s1 = m1 / (2 * s)
    s2 = m2 / (2 * s) - m1**2 / (4 * m * s)
    r1 = s * G1
    r2 = s1 * G1 + s**2 * G2
    r3 = s2 * G1 + 3 * s * s1 * G2 + s**3 * G3
    flags = {"r_zero": np.flatnonzero(r == 0).tolist(), "r1_zero": np.flatnonzero(r1 == 0).tolist()}
    return MappingSample(x, m, m1, m2, np.asarray(u, dtype=float), r, r1, r2, r3, fam,
                         g.x_min if u_anchor is None else u_anchor, flags)


def build_mapping(fam: FamilySpec, p: MassProfile, g: Grid, anchor: float | None = None) -> MappingSample:
    u = integrate_u(p, g, anchor)
    return map_r(fam, p, g, u, anchor)


def mapping_residual(sample: MappingSample) -> np.ndarray:
    """sqrt(radicand) * r' + sqrt(m), relative to sqrt(m)."""
    Q = radicand(sample.family, sample.r)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.abs(np.sqrt(Q) * sample.r1 + np.sqrt(sample.m)) / np.sqrt(sample.m)


# --- weight function and wavefunction ----------------------------------------

def weight_W(params: AlgebraParams, sample: MappingSample) -> np.ndarray:
    """W = (2m'/m - 6r''/r' + (1 - 2l - 2br + 2qr^2) r'/r) / 4.

    Points where r or r' vanish come back as NaN and are listed in
    ``sample.flags['W_singular']``.
    """
    r, r1, r2 = sample.r, sample.r1, sample.r2
    with np.errstate(divide="ignore", invalid="ignore"):
        W = 0.25 * (
            2 * sample.m1 / sample.m
            - 6 * r2 / r1
            + (1 - 2 * params.ell - 2 * params.b * r + 2 * params.q * r**2) * r1 / r
        )
    bad = (r == 0) | (r1 == 0) | ~np.isfinite(W)
    W = np.where(bad, np.nan, W)
    sample.flags["W_singular"] = np.flatnonzero(bad).tolist()
    return W


def omega(params: AlgebraParams, sample: MappingSample) -> np.ndarray:
    """Antiderivative of W, zero at x_min.

    Every term of W is a logarithmic or polynomial derivative, so

        Omega = ln(m)/2 - 3 ln|r'|/2 + (1 - 2l) ln|r|/4 - b r/2 + q r^2/4.
    """
    r, r1 = sample.r, sample.r1
    if np.any(r == 0) or np.any(r1 == 0):
        raise MappingError("r or r' vanishes on the grid; move x_min off the singular point")
    full = (
        0.5 * np.log(sample.m)
        - 1.5 * np.log(np.abs(r1))
        + 0.25 * (1 - 2 * params.ell) * np.log(np.abs(r))
        - 0.5 * params.b * r
        + 0.25 * params.q * r**2
    )
    return full - full[0]


def omega_simpson(params: AlgebraParams, sample: MappingSample, g: Grid) -> np.ndarray:
    return cumulative_simpson(weight_W(params, sample), g.h)


@dataclass
class Wavefunction:
    x: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    epsilon: float
    coeffs: np.ndarray
    prefactor_sign: int
    normalizable: bool
    tail_ratio: float


def psi_log_parts(params: AlgebraParams, epsilon: float, sample: MappingSample, coeffs=None):
    """log|psi| and sign of psi = -(2r/r'^2) m e^{-Omega} R(r)."""
    if coeffs is None:
        coeffs = R_coefficients(params, epsilon)
    Om = omega(params, sample)
    poly = np.polynomial.Polynomial(coeffs)(sample.r)
    with np.errstate(divide="ignore"):
        log_mag = (
            math.log(2.0) + np.log(np.abs(sample.r)) - 2 * np.log(np.abs(sample.r1))
            + np.log(sample.m) - Om + np.log(np.abs(poly))
        )
    sign = -np.sign(sample.r) * np.sign(poly)
    return log_mag, sign, coeffs


def assemble_psi(params: AlgebraParams, epsilon: float, sample: MappingSample, g: Grid,
                 ends: str | None = None, edges=None) -> Wavefunction:
    log_mag, sign, coeffs = psi_log_parts(params, epsilon, sample)
    if np.nanmax(log_mag) > 700:
        raise MappingError(
            "e^{-Omega} overflows on this grid; truncate the domain "
            f"(max log|psi| = {np.nanmax(log_mag):.1f})"
        )
    raw = sign * np.exp(log_mag)
    if ends is None:
        ends, edges = default_tail_ends(sample.family)
    info = check_normalizable(raw, g, ends=ends, edges=edges or ())
    total = _integrate(raw**2, g.h)
    normalized = raw / math.sqrt(total) if total > 0 else raw.copy()
    prefactor_sign = int(np.sign(-sample.r[len(sample.r) // 2]))
    return Wavefunction(g.x, raw, normalized, float(epsilon), coeffs, prefactor_sign,
                        info["normalizable"], info["tail_ratio"])


def default_tail_ends(fam: FamilySpec):
    """Window/edge choice for check_normalizable by family.

    Radial families have the origin as a regular boundary. The Morse side
    x -> -inf (r -> inf) decays super-exponentially, leaving no room for a
    window, so only its edge density is checked.
    """
    if fam.radial:
        return "right", ()
    if fam.variant == "morse":
        return "right", ("left",)
    return "both", ()


def _integrate(y: np.ndarray, h: float) -> float:
    return float(cumulative_simpson(y, h)[-1])


def check_normalizable(psi, g: Grid, ends: str = "right", edges=(), threshold: float = 1e-4) -> dict:
    """Share of the norm in the outer 10% of the domain.

    ``ends`` picks where the window sits: "right" (x_max; the radial case),
    "left", or "both" (5% at each end). ``edges`` lists ends that have no
    room for a window but must still see the density fall below
    threshold**2 of its peak, e.g. a super-exponentially decaying side.
    """
    dens = np.abs(np.asarray(psi, dtype=float)) ** 2
    total = _integrate(dens, g.h)
    if not total > 0:
        return {"normalizable": False, "tail_ratio": float("nan")}
    n = g.n
    k = max(2, int(round(0.1 * (n - 1))))
    if ends == "right":
        tail = _integrate(dens[n - 1 - k:], g.h)
    elif ends == "left":
        tail = _integrate(dens[: k + 1], g.h)
    elif ends == "both":
        half = max(2, k // 2)
        tail = _integrate(dens[: half + 1], g.h) + _integrate(dens[n - 1 - half:], g.h)
    else:
        raise ValueError(f"ends must be right, left or both, got {ends!r}")
    ratio = tail / total
    ok = ratio < threshold
    peak = float(np.max(dens))
    for edge in edges:
        val = dens[0] if edge == "left" else dens[-1]
        ok = ok and val < threshold**2 * peak
    return {"normalizable": bool(ok), "tail_ratio": float(ratio)}


def count_nodes(psi, rel_floor: float = 1e-10) -> int:
    """Interior sign changes, ignoring samples below rel_floor * max|psi|."""
    psi = np.asarray(psi, dtype=float)
    floor = rel_floor * np.max(np.abs(psi))
    s = np.sign(psi[np.abs(psi) > floor])
    return int(np.count_nonzero(s[1:] != s[:-1]))
