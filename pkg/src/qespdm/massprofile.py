"""Position-dependent mass profiles m(x) with exact symbolic m' and m''."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .expr import Node, differentiate, evaluate, free_params, parse_mass, render

PROBE_POINTS = 1024


class MassProfileError(ValueError):
    pass


@dataclass(frozen=True)
class MassProfile:
    expr: Node
    d1: Node
    d2: Node
    domain: tuple
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = "custom"

    @property
    def text(self) -> str:
        return render(self.expr)

    def m(self, x):
        return evaluate(self.expr, x, self.params)

    def derivatives(self, x):
        """(m, m', m'') evaluated at x (array or scalar)."""
        return (
            evaluate(self.expr, x, self.params),
            evaluate(self.d1, x, self.params),
            evaluate(self.d2, x, self.params),
        )

    def describe(self) -> dict:
        return {
            "name": self.name,
            "expr": self.text,
            "params": dict(sorted(self.params.items())),
            "domain": list(self.domain),
        }


def make_profile(expr: Node | str, params: Mapping[str, float] | None = None,
                 domain=(-np.inf, np.inf), name: str = "custom",
                 probe=None) -> MassProfile:
    """Build a profile and check positivity on a probe grid.

    ``probe`` is the interval sampled by the 1024-point positivity check; it
    defaults to the domain, clipped to [-10, 10] when the domain is unbounded.
    """
    params = dict(params or {})
    if isinstance(expr, str):
        expr = parse_mass(expr, params)
    missing = free_params(expr) - set(params)
    if missing:
        raise MassProfileError(f"undeclared parameters: {sorted(missing)}")
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise MassProfileError(f"empty domain {domain}")
    d1 = differentiate(expr)
    d2 = differentiate(d1)
    prof = MassProfile(expr, d1, d2, (lo, hi), params, name)
    if probe is None:
        probe = (max(lo, -10.0), min(hi, 10.0))
    xs = np.linspace(probe[0], probe[1], PROBE_POINTS)
    # domain end points may be singular (a mass vanishing at x = 0) and are not probed
    xs = xs[(xs > lo) & (xs < hi)]
    check_positive(prof, xs)
    return prof


def check_positive(prof: MassProfile, xs) -> None:
    m = prof.m(xs)
    bad = ~(np.isfinite(m) & (m > 0))
    if np.any(bad):
        x_bad = float(np.asarray(xs)[bad][0])
        raise MassProfileError(
            f"mass {prof.text} is not positive/finite at x={x_bad!r} (m={float(prof.m(x_bad))!r})"
        )


def eval_profile(prof: MassProfile, x: float) -> tuple[float, float, float]:
    lo, hi = prof.domain
    if not lo <= x <= hi:
        raise MassProfileError(f"x={x} outside domain {prof.domain}")
    m, m1, m2 = (float(v) for v in prof.derivatives(x))
    if not m > 0:
        raise MassProfileError(f"mass is not positive at x={x} (m={m})")
    return m, m1, m2


# built-in profiles

def constant(m0: float = 1.0) -> MassProfile:
    return make_profile("m0", {"m0": m0}, name="constant")


def rational2(a: float = 2.0) -> MassProfile:
    """((a + x^2) / (1 + x^2))^2, positive for a > 0."""
    return make_profile("((a + x^2)/(1 + x^2))^2", {"a": a}, name="rational2")


def quadratic(c: float = 1.0) -> MassProfile:
    """c x^2 on x > 0; the mass vanishes at the origin, which is excluded."""
    return make_profile("c*x^2", {"c": c}, domain=(0.0, np.inf), name="quadratic",
                        probe=(1e-3, 10.0))


BUILTIN = {"constant": constant, "rational2": rational2, "quadratic": quadratic}


def builtin(name: str, **params) -> MassProfile:
    try:
        factory = BUILTIN[name]
    except KeyError:
        raise MassProfileError(f"unknown built-in profile {name!r}; choose from {sorted(BUILTIN)}") from None
    return factory(**params)
