"""Quasi-exactly-solvable potentials for the von Roos position-dependent-mass Hamiltonian.

``v_general`` is the implicit potential for an arbitrary change of variable
r(x); ``v_sextic``, ``v_coulomb`` and ``v_morse`` are the explicit families
written in the mass-weighted length u(x). Two of the printed family results
are not consistent with the general potential: the Coulomb energy carries the
wrong overall sign, and the e^{-2u} coefficient of the Morse family has j
where 2j is required. Both are available as printed (the default) and in the
consistent form via ``corrected=True``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraParams
from .mapping import MappingSample
from .massprofile import MassProfile

SINGULAR_CUTOFF = 1e12


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class MassOrdering:
    alpha: float = 0.0
    beta: float = -1.0

    @property
    def gamma(self) -> float:
        return -1.0 - self.alpha - self.beta

    def describe(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}


BEN_DANIEL_DUKE = MassOrdering(0.0, -1.0)
ZHU_KROEMER = MassOrdering(-0.5, 0.0)


@dataclass
class PotentialCurve:
    x: np.ndarray
    V: np.ndarray
    family: str
    params: AlgebraParams
    ordering: MassOrdering
    mass_name: str
    energy: float | None = None
    epsilon: float | None = None
    excluded: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def valid(self) -> np.ndarray:
        mask = np.ones(len(self.x), dtype=bool)
        mask[self.excluded] = False
        return mask

    def subsample(self, stride: int) -> "PotentialCurve":
        keep = set(range(0, len(self.x), stride))
        excluded = [i // stride for i in self.excluded if i in keep]
        return PotentialCurve(self.x[::stride], self.V[::stride], self.family, self.params,
                              self.ordering, self.mass_name, self.energy, self.epsilon,
                              excluded, dict(self.meta))


def _finish(x, V, family, params, ordering, mass_name, energy, epsilon, extra_bad=None, meta=None):
    V = np.asarray(V, dtype=float)
    bad = ~np.isfinite(V) | (np.abs(V) > SINGULAR_CUTOFF)
    if extra_bad is not None:
        bad |= extra_bad
    excluded = np.flatnonzero(bad).tolist()
    V = np.where(bad, np.nan, V)
    return PotentialCurve(np.asarray(x, dtype=float), V, family, params, ordering, mass_name,
                          energy, epsilon, excluded, dict(meta or {}))


def ordering_terms(ordering: MassOrdering, m, m1, m2):
    """(a(a+b+1) + b + 9/16) m'^2 / (2 m^3) - (1 + 2b) m'' / (8 m^2)."""
    a, b = ordering.alpha, ordering.beta
    return (a * (a + b + 1) + b + 9 / 16) * m1**2 / (2 * m**3) - (1 + 2 * b) * m2 / (8 * m**2)


def v_general(params: AlgebraParams, ordering: MassOrdering, p: MassProfile, sample: MappingSample,
              epsilon: float, E: float | None) -> PotentialCurve:
    """V = E + (1/m) { (b + 1/4 + a(a+b+1)) m'^2/(2m^2) - b m''/(4m)
                       + 3/8 (r''/r')^2 - r'''/(4r')
                       + [b^2 - (2l+8j+5)q + (4eps + b(2l+3))/r + (l(l+1) - 3/4)/r^2
                          - 2bqr + q^2 r^2] r'^2/8 }

    (ordering exponents a, b in the first line; algebra b in the bracket).
    """
    if E is None:
        raise PotentialError("v_general needs the energy E")
    ell, bb, q, j = params.ell, params.b, params.q, params.j
    al, be = ordering.alpha, ordering.beta
    m, m1, m2 = sample.m, sample.m1, sample.m2
    r, r1, r2, r3 = sample.r, sample.r1, sample.r2, sample.r3
    sing = (r == 0) | (r1 == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        bracket = (
            bb**2 - (2 * ell + 8 * j + 5) * q
            + (4 * epsilon + bb * (2 * ell + 3)) / r
            + (ell * (ell + 1) - 0.75) / r**2
            - 2 * bb * q * r
            + q**2 * r**2
        )
        body = (
            (be + 0.25 + al * (al + be + 1)) * m1**2 / (2 * m**2)
            - be * m2 / (4 * m)
            + 0.375 * (r2 / r1) ** 2
            - r3 / (4 * r1)
            + bracket * r1**2 / 8
        )
        V = E + body / m
    return _finish(sample.x, V, "general", params, ordering, p.name, E, epsilon, sing)


def e_sextic(params: AlgebraParams, epsilon: float) -> float:
    return (params.ell + 1.5) * params.b + 2 * epsilon


def v_sextic(params: AlgebraParams, ordering: MassOrdering, p: MassProfile, sample: MappingSample,
             epsilon: float | None = None) -> PotentialCurve:
    """Radial sextic family; independent of epsilon (E carries it)."""
    ell, b, q, j = params.ell, params.b, params.q, params.j
    u = sample.u
    with np.errstate(divide="ignore", invalid="ignore"):
        V = (
            ell * (ell + 1) / (2 * u**2)
            + 0.5 * (b**2 - (2 * ell + 8 * j + 5) * q) * u**2
            + b * q * u**4
            + 0.5 * q**2 * u**6
            + ordering_terms(ordering, sample.m, sample.m1, sample.m2)
        )
    E = None if epsilon is None else e_sextic(params, epsilon)
    return _finish(sample.x, V, "sextic", params, ordering, p.name, E, epsilon, u == 0)


def e_coulomb(params: AlgebraParams, corrected: bool = False) -> float:
    """Printed: -((2l+8j+5)q - b^2)/2. Consistent with v_general: the opposite sign."""
    val = -0.5 * ((2 * params.ell + 8 * params.j + 5) * params.q - params.b**2)
    return -val if corrected else val


def v_coulomb(params: AlgebraParams, ordering: MassOrdering, p: MassProfile, sample: MappingSample,
              epsilon: float, corrected: bool = False) -> PotentialCurve:
    ell, b, q = params.ell, params.b, params.q
    u = sample.u
    with np.errstate(divide="ignore", invalid="ignore"):
        V = (
            (ell * (ell + 1) - 0.75) / (8 * u**2)
            - (4 * epsilon + (2 * ell + 3) * b) / (4 * u)
            + 2 * b * q * u
            + 2 * q**2 * u**2
            + ordering_terms(ordering, sample.m, sample.m1, sample.m2)
        )
    return _finish(sample.x, V, "coulomb", params, ordering, p.name,
                   e_coulomb(params, corrected), epsilon, u == 0, {"corrected": corrected})


def e_morse(params: AlgebraParams) -> float:
    return -(params.ell * (params.ell + 1) + 0.25) / 8


def v_morse(params: AlgebraParams, ordering: MassOrdering, p: MassProfile, sample: MappingSample,
            epsilon: float, corrected: bool = False) -> PotentialCurve:
    ell, b, q, j = params.ell, params.b, params.q, params.j
    u = sample.u
    jj = 2 * j if corrected else j
    if np.any(-4 * u > 700):
        raise PotentialError("e^{-4u} overflows; shift the domain to larger x")
    e1 = np.exp(-u)
    V = (
        0.5 * (epsilon + (ell / 2 + 0.75) * b) * e1
        + 0.5 * (b**2 / 4 - (ell / 2 + jj + 1.25) * q) * e1**2
        - 0.25 * b * q * e1**3
        + 0.125 * q**2 * e1**4
        + ordering_terms(ordering, sample.m, sample.m1, sample.m2)
    )
    return _finish(sample.x, V, "morse", params, ordering, p.name, e_morse(params), epsilon,
                   meta={"corrected": corrected})


def family_potential(name: str, params, ordering, p, sample, epsilon, corrected=True) -> PotentialCurve:
    if name == "sextic":
        return v_sextic(params, ordering, p, sample, epsilon)
    if name == "coulomb":
        return v_coulomb(params, ordering, p, sample, epsilon, corrected)
    if name == "morse":
        return v_morse(params, ordering, p, sample, epsilon, corrected)
    raise PotentialError(f"no explicit formula for family {name!r}")


def exactly_solvable_epsilons(params: AlgebraParams) -> list[float]:
    """q = 0: the polynomial solution of degree n exists for eps = b n, n = 0..2j."""
    if params.q != 0:
        raise PotentialError("exactly-solvable levels need q = 0")
    return [params.b * n for n in range(params.two_j + 1)]
