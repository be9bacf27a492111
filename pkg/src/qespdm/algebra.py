"""Polynomial recurrence, critical polynomial roots and the sl(2,R) operator matrix.

The algebraic spectrum of the quasi-exactly-solvable equation

    z R'' + (l + 3/2 + z (b - q z)) R' + (-eps + 2 j q z) R = 0

is obtained two independent ways: as the real roots of the terminal
polynomial of a three-term recurrence (Sturm bisection on the associated
tridiagonal matrix) and as the eigenvalues of the dense matrix of the
generator combination acting on {1, z, ..., z^(2j)}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_TWO_J = 64


class AlgebraError(ValueError):
    """Raised for parameter sets outside the algebraic construction."""


class ExactlySolvableError(AlgebraError):
    """q = 0: the recurrence does not terminate in a critical polynomial."""


class SpectrumError(AlgebraError):
    """The critical polynomial has no (or not only) real roots."""

    def __init__(self, message: str, coeffs=None):
        super().__init__(message)
        self.coeffs = None if coeffs is None else list(coeffs)


@dataclass(frozen=True)
class AlgebraParams:
    ell: float
    b: float
    q: float
    two_j: int

    def __post_init__(self):
        if int(self.two_j) != self.two_j or self.two_j < 0:
            raise AlgebraError(f"two_j must be a nonnegative integer, got {self.two_j!r}")
        if self.two_j > MAX_TWO_J:
            raise AlgebraError(f"two_j={self.two_j} exceeds the cap {MAX_TWO_J}")
        for name in ("ell", "b", "q"):
            if not math.isfinite(getattr(self, name)):
                raise AlgebraError(f"{name} must be finite")
        object.__setattr__(self, "two_j", int(self.two_j))

    @property
    def j(self) -> float:
        return self.two_j / 2

    @classmethod
    def from_j(cls, ell: float, b: float, q: float, j: float) -> "AlgebraParams":
        two_j = 2 * j
        if abs(two_j - round(two_j)) > 1e-12:
            raise AlgebraError(f"j must be an integer or half-integer, got {j!r}")
        return cls(float(ell), float(b), float(q), int(round(two_j)))

    def as_dict(self) -> dict:
        return {"ell": self.ell, "b": self.b, "q": self.q, "j": self.j}


@dataclass(frozen=True)
class SpectralTable:
    """P_0 ... P_{2j+1} as ascending coefficient arrays."""

    params: AlgebraParams
    coeffs: tuple

    @property
    def critical(self) -> np.ndarray:
        return self.coeffs[-1]


@dataclass(frozen=True)
class EpsilonSpectrum:
    roots: tuple
    params: AlgebraParams

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    def __getitem__(self, k):
        return self.roots[k]


def _lower(params: AlgebraParams, m: int) -> float:
    """Coefficient multiplying P_{m-1} in the recurrence."""
    return m * (params.ell + m + 0.5)


def _upper(params: AlgebraParams, m: int) -> float:
    """Coefficient multiplying P_{m+1}; zero at the terminal step."""
    return (params.two_j - m) * params.q


def build_spectral_table(params: AlgebraParams) -> SpectralTable:
    """Run the recurrence

        (2j - m) q P_{m+1} = (eps - b m) P_m - m (l + m + 1/2) P_{m-1},  P_0 = 1,

    for m = 0 .. 2j. At m = 2j the leading factor vanishes and the right-hand
    side itself is taken as P_{2j+1}; its zeros are the algebraic eigenvalues.
    """
    if params.q == 0:
        raise ExactlySolvableError("exactly-solvable reduction, no critical polynomial")
    n = params.two_j
    table = [np.array([1.0])]
    prev = np.zeros(0)
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(n + 1):
            cur = table[-1]
            # (eps - b m) * cur - lower * prev, coefficient by coefficient
            size = len(cur) + 1
            shifted = np.zeros(size)
            shifted[1:] = cur
            terms = [shifted, np.pad(-params.b * m * cur, (0, 1))]
            if m > 0:
                terms.append(np.pad(-_lower(params, m) * prev, (0, size - len(prev))))
            nxt = np.array([math.fsum(t[k] for t in terms) for k in range(size)])
            if m < n:
                nxt = nxt / _upper(params, m)
            if not np.all(np.isfinite(nxt)):
                raise AlgebraError(f"coefficient overflow in P_{m + 1} (m={m})")
            prev = cur
            table.append(nxt)
    return SpectralTable(params=params, coeffs=tuple(table))


def _recurrence_values(params: AlgebraParams, eps: float) -> tuple[float, float]:
    """P_{2j+1}(eps) and its derivative by running the recurrence pointwise."""
    p_prev, p = 0.0, 1.0
    d_prev, d = 0.0, 0.0
    n = params.two_j
    for m in range(n + 1):
        lo = _lower(params, m)
        p_next = (eps - params.b * m) * p - lo * p_prev
        d_next = p + (eps - params.b * m) * d - lo * d_prev
        if m < n:
            up = _upper(params, m)
            p_next /= up
            d_next /= up
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    return p, d


def _off_diagonal_products(params: AlgebraParams) -> np.ndarray:
    n = params.two_j
    return np.array([_upper(params, m) * _lower(params, m + 1) for m in range(n)])


def _sturm_count(diag: np.ndarray, prods: np.ndarray, lam: float) -> int:
    """Number of eigenvalues below lam (negative pivots of T - lam I = L D L^T)."""
    count = 0
    d = diag[0] - lam
    if d < 0:
        count += 1
    with np.errstate(over="ignore", divide="ignore"):
        for k in range(1, len(diag)):
            # an exactly vanishing pivot is nudged to +0, which sends the next one to -inf;
            # subnormal pivots keep their sign and overflow the quotient instead
            d = -math.inf if d == 0 else diag[k] - lam - prods[k - 1] / d
            if d < 0:
                count += 1
    return count


def _bisect_eigenvalues(diag: np.ndarray, prods: np.ndarray) -> list[float]:
    off = np.sqrt(prods)
    radius = np.zeros_like(diag)
    radius[:-1] += off
    radius[1:] += off
    lo0 = float(np.min(diag - radius)) - 1.0
    hi0 = float(np.max(diag + radius)) + 1.0
    eig = []
    for k in range(len(diag)):
        lo, hi = lo0, hi0
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _sturm_count(diag, prods, mid) > k:
                hi = mid
            else:
                lo = mid
        eig.append(0.5 * (lo + hi))
    return eig


def _newton_polish(params: AlgebraParams, root: float) -> float:
    p, dp = _recurrence_values(params, root)
    if dp == 0.0 or not math.isfinite(dp):
        return root
    cand = root - p / dp
    p_new, _ = _recurrence_values(params, cand)
    return cand if abs(p_new) < abs(p) else root


def epsilon_roots(table: SpectralTable) -> EpsilonSpectrum:
    """Real roots of the critical polynomial, ascending, one Newton step each.

    When every product of paired off-diagonal recurrence coefficients is
    positive the problem is a symmetrizable tridiagonal one and the roots are
    bracketed by Sturm bisection. Otherwise the dense operator matrix is
    diagonalized and complex results are reported as a SpectrumError.
    """
    params = table.params
    n = params.two_j + 1
    diag = np.array([params.b * m for m in range(n)], dtype=float)
    prods = _off_diagonal_products(params)
    if np.all(prods > 0):
        roots = _bisect_eigenvalues(diag, prods)
    else:
        try:
            roots = matrix_eigenvalues(sl2_operator_matrix(params))
        except SpectrumError as exc:
            raise SpectrumError(
                f"critical polynomial has non-real roots for {params}", table.critical
            ) from exc
    if len(roots) == 0:
        raise SpectrumError(f"no real roots for {params}", table.critical)
    roots = sorted(_newton_polish(params, r) for r in roots)
    return EpsilonSpectrum(roots=tuple(float(r) for r in roots), params=params)


def spectrum(params: AlgebraParams) -> EpsilonSpectrum:
    return epsilon_roots(build_spectral_table(params))


def sl2_operator_matrix(params: AlgebraParams) -> np.ndarray:
    """Matrix of J-J0 + (l+j+1/2) J- + q J+ + b J0 + j b on {1, z, ..., z^2j}.

    Column k is the image of z^k:
        k (k + l + 1/2) z^(k-1) + b k z^k + q (2j - k) z^(k+1).
    """
    n = params.two_j + 1
    j = params.j
    mat = np.zeros((n, n))
    for k in range(n):
        # J0 z^k = (k - j) z^k, J- z^k = k z^(k-1), J+ z^k = (2j - k) z^(k+1)
        if k > 0:
            mat[k - 1, k] = (k - j) * k + (params.ell + j + 0.5) * k
        mat[k, k] = params.b * (k - j) + j * params.b
        if k + 1 < n:
            mat[k + 1, k] = params.q * (2 * j - k)
    return mat


def matrix_eigenvalues(mat, tol_imag: float = 1e-8) -> list[float]:
    """Eigenvalues of a real square matrix, sorted; must be real."""
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    w = np.linalg.eigvals(a)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and np.max(np.abs(w.imag)) > tol_imag * scale:
        raise SpectrumError(f"complex eigenvalues: {w}")
    return sorted(float(v) for v in w.real)


def R_coefficients(params: AlgebraParams, epsilon: float, normalize: bool = True) -> np.ndarray:
    """Ascending coefficients of the degree-2j polynomial solution.

    The closed-form weights

        (2j)! (2l+1)! (l+m)! / (2 m! (2j-m)! (2l+1+2m)!) * P_m(eps) * (-q)^m

    are written for the variable t = -4 z; in the equation's own variable z
    this becomes weights * P_m * (4 q)^m. The product q^m P_m is run through
    its own recurrence so that q = 0 is also covered. Factorials use log-gamma.
    """
    ell, n = params.ell, params.two_j
    if ell <= -1.0:
        raise AlgebraError(f"factorial weights need l > -1, got l={ell}")
    # scaled[m] = q^m P_m(eps)
    scaled = [1.0]
    for m in range(n):
        prev = scaled[m - 1] if m > 0 else 0.0
        nxt = ((epsilon - params.b * m) * scaled[m] - params.q * _lower(params, m) * prev) / (n - m)
        scaled.append(nxt)
    coeffs = np.empty(n + 1)
    for m in range(n + 1):
        log_w = (
            math.lgamma(n + 1) + math.lgamma(2 * ell + 2) + math.lgamma(ell + m + 1)
            - math.log(2.0) - math.lgamma(m + 1) - math.lgamma(n - m + 1)
            - math.lgamma(2 * ell + 2 + 2 * m)
        )
        coeffs[m] = math.exp(log_w) * 4.0**m * scaled[m]
    if not np.all(np.isfinite(coeffs)):
        raise AlgebraError("non-finite polynomial coefficients")
    if normalize:
        peak = np.max(np.abs(coeffs))
        if peak > 0:
            coeffs = coeffs / peak
    return coeffs


def qes_ode_residual(params: AlgebraParams, epsilon: float, coeffs, z) -> np.ndarray:
    """Pointwise residual of the QES equation, scaled by its largest term."""
    z = np.asarray(z, dtype=float)
    poly = np.polynomial.Polynomial(coeffs)
    r0, r1, r2 = poly(z), poly.deriv(1)(z), poly.deriv(2)(z)
    terms = [
        z * r2,
        (params.ell + 1.5 + z * (params.b - params.q * z)) * r1,
        (-epsilon + 2 * params.j * params.q * z) * r0,
    ]
    total = terms[0] + terms[1] + terms[2]
    scale = max(float(np.max(np.abs(t))) for t in terms)
    return np.abs(total) / (scale if scale > 0 else 1.0)
