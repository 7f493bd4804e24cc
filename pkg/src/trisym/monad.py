"""Linear monads O(−1)^c → O^{2c+r} → O(1)^c on ℂP³ built from ADHM sections.

Homogeneous coordinates are [z : w : x : y] and the framing line is
ℓ = {x = y = 0}. A degree-1 matrix is stored as its four coefficient
matrices, one per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Any

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    ShapeError,
    Tolerance,
    TrisymError,
    as_cmatrix,
    complex_gaussian,
    complex_to_json,
    make_rng,
    matrix_from_json,
    matrix_to_json,
    numerical_rank,
    parallel_map,
    singular_values,
)
from .sections import ADHMSection, is_globally_regular, tri_moment

VARS = ("z", "w", "x", "y")
MONOMIALS = tuple(a + b for a, b in combinations_with_replacement(VARS, 2))
COMPLEX_THRESHOLD = 1e-10


class MonadError(TrisymError):
    pass


class SplittingError(TrisymError):
    pass


@dataclass(frozen=True)
class MonadData:
    r: int
    c: int
    alpha: dict[str, np.ndarray]
    beta: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        r, c = int(self.r), int(self.c)
        n = 2 * c + r
        for name, coeffs, shape in (("alpha", self.alpha, (n, c)), ("beta", self.beta, (c, n))):
            if set(coeffs) != set(VARS):
                raise ShapeError(f"{name} needs coefficients for {VARS}, got {sorted(coeffs)}")
            fixed = {}
            for v in VARS:
                M = as_cmatrix(coeffs[v], name=f"{name}[{v}]")
                if M.shape != shape:
                    raise ShapeError(f"{name}[{v}] has shape {M.shape}, expected {shape}")
                fixed[v] = M
            object.__setattr__(self, name, fixed)

    @property
    def middle(self) -> int:
        return 2 * self.c + self.r

    def alpha_at(self, p: Any) -> np.ndarray:
        return sum(complex(x) * self.alpha[v] for x, v in zip(p, VARS))

    def beta_at(self, p: Any) -> np.ndarray:
        return sum(complex(x) * self.beta[v] for x, v in zip(p, VARS))

    def to_json(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "c": self.c,
            "alpha": {v: matrix_to_json(self.alpha[v]) for v in VARS},
            "beta": {v: matrix_to_json(self.beta[v]) for v in VARS},
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> MonadData:
        return cls(
            int(obj["r"]),
            int(obj["c"]),
            {v: matrix_from_json(obj["alpha"][v]) for v in VARS},
            {v: matrix_from_json(obj["beta"][v]) for v in VARS},
        )


def build_monad(S: ADHMSection, check: bool = True, tol: Tolerance = DEFAULT_TOL) -> MonadData:
    """α = (A(z,w) + x; B(z,w) + y; J(z,w)), β = (−(B(z,w) + y), A(z,w) + x, I(z,w)).

    With ``check=False`` the preconditions (the section solves the equations
    and is globally regular) are skipped, which is useful for fault injection.
    """
    if check:
        res = tri_moment(S).norm()
        if res > COMPLEX_THRESHOLD:
            raise MonadError(f"section does not solve the equations (residual {res:.2e})")
        if not is_globally_regular(S, tol=tol):
            raise MonadError("section is not globally regular")
    r, c = S.r, S.c
    one, zero = np.eye(c), np.zeros((c, c))
    zr, rz = np.zeros((r, c)), np.zeros((c, r))
    X1, X2 = S.X1, S.X2
    alpha = {
        "z": np.vstack([X1.A, X1.B, X1.J]),
        "w": np.vstack([X2.A, X2.B, X2.J]),
        "x": np.vstack([one, zero, zr]),
        "y": np.vstack([zero, one, zr]),
    }
    beta = {
        "z": np.hstack([-X1.B, X1.A, X1.I]),
        "w": np.hstack([-X2.B, X2.A, X2.I]),
        "x": np.hstack([zero, one, rz]),
        "y": np.hstack([-one, zero, rz]),
    }
    return MonadData(r, c, alpha, beta)


def product_coefficients(M: MonadData) -> dict[str, np.ndarray]:
    """The ten quadratic coefficients of βα, keyed by monomial ("zz", "zw", …)."""
    out = {}
    for mono in MONOMIALS:
        u, v = mono
        coeff = M.beta[u] @ M.alpha[v]
        if u != v:
            coeff = coeff + M.beta[v] @ M.alpha[u]
        out[mono] = coeff
    return out


@dataclass(frozen=True)
class ComplexReport:
    coeff_norms: dict[str, float]
    ok: bool

    def violations(self, threshold: float = COMPLEX_THRESHOLD) -> list[str]:
        return [k for k, v in self.coeff_norms.items() if v > threshold]

    def to_json(self) -> dict[str, Any]:
        return {"ok": self.ok, "coeff_norms": dict(self.coeff_norms)}


def verify_complex(M: MonadData, threshold: float = COMPLEX_THRESHOLD) -> ComplexReport:
    norms = {k: float(np.linalg.norm(v)) for k, v in product_coefficients(M).items()}
    return ComplexReport(norms, all(v <= threshold for v in norms.values()))


def charge_rank_report(M: MonadData) -> dict[str, int]:
    return {"rank": M.r, "charge": M.c}


# --- fibres -----------------------------------------------------------------

@dataclass(frozen=True)
class ExactnessReport:
    min_alpha_sv: float
    min_beta_sv: float
    cohomology_ranks: list[int]
    ok: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "min_alpha_sv": self.min_alpha_sv,
            "min_beta_sv": self.min_beta_sv,
            "cohomology_ranks": sorted(set(self.cohomology_ranks)),
        }


def _min_sv(M: np.ndarray) -> float:
    sv = singular_values(M)
    return float(sv[-1]) if sv.size else 0.0


def fiberwise_exactness(
    M: MonadData, n_points: int = 200, seed: int = 0, tol: Tolerance = DEFAULT_TOL
) -> ExactnessReport:
    """α(p) injective and β(p) surjective at random points of ℂP³.

    Points are unit vectors of ℂ⁴, so the smallest singular values reported
    are on a fixed scale.
    """
    def at(k: int):
        p = complex_gaussian(make_rng(seed, k), 4)
        p /= np.linalg.norm(p)
        a, b = M.alpha_at(p), M.beta_at(p)
        ra, rb = numerical_rank(a, tol), numerical_rank(b, tol)
        return _min_sv(a), _min_sv(b), ra, rb

    rows = parallel_map(at, range(n_points))
    ok = all(ra == M.c and rb == M.c for _, _, ra, rb in rows)
    return ExactnessReport(
        min(r[0] for r in rows),
        min(r[1] for r in rows),
        [M.middle - ra - rb for _, _, ra, rb in rows],
        ok,
    )


# --- lines and splitting ----------------------------------------------------------

@dataclass(frozen=True)
class LineParam:
    """A line of ℂP³ through two points given as rows of a 2×4 matrix."""

    points: np.ndarray

    def __post_init__(self) -> None:
        P = as_cmatrix(self.points, name="line")
        if P.shape != (2, 4) or numerical_rank(P) != 2:
            raise ShapeError("a line needs two independent points of ℂ⁴")
        object.__setattr__(self, "points", P)

    def to_json(self) -> list[list[list[float]]]:
        return [[complex_to_json(z) for z in row] for row in self.points]


FRAMING_LINE = LineParam(np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=complex))


def random_line(seed: int) -> LineParam:
    return LineParam(complex_gaussian(make_rng(seed), (2, 4)))


def _restrict(coeffs: dict[str, np.ndarray], L: LineParam) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (M₀, M₁) with M(s·P₀ + t·P₁) = s·M₀ + t·M₁."""
    return tuple(sum(L.points[j, i] * coeffs[v] for i, v in enumerate(VARS)) for j in range(2))


class _Cech:
    """Truncated two-chart Čech complex of O(d)^m on ℙ¹.

    U₀ = {s ≠ 0} carries polynomials in u = t/s up to degree ``top0``,
    U₁ = {t ≠ 0} polynomials in v = s/t up to degree ``top1``, and U₀₁
    Laurent polynomials in u with exponents in [lo, hi]. Everything is
    expressed in the s-trivialisation on U₀ and U₀₁.
    """

    def __init__(self, d: int, m: int, top0: int, top1: int):
        self.d, self.m, self.top0, self.top1 = d, m, top0, top1
        self.lo, self.hi = min(0, d - top1), max(top0, d)

    @property
    def c0(self) -> int:
        return self.m * (self.top0 + 1 + self.top1 + 1)

    @property
    def c1(self) -> int:
        return self.m * (self.hi - self.lo + 1)

    def _i0(self, j: int, e: int) -> int:  # U₀, component j, power u^e
        return j * (self.top0 + 1) + e

    def _i1(self, j: int, e: int) -> int:  # U₁, component j, power v^e
        return self.m * (self.top0 + 1) + j * (self.top1 + 1) + e

    def _i01(self, j: int, e: int) -> int:  # U₀₁, component j, power u^e
        return j * (self.hi - self.lo + 1) + (e - self.lo)

    def delta(self) -> np.ndarray:
        """(p, q) ↦ p − u^d q(1/u)."""
        D = np.zeros((self.c1, self.c0), dtype=complex)
        for j in range(self.m):
            for e in range(self.top0 + 1):
                D[self._i01(j, e), self._i0(j, e)] = 1
            for e in range(self.top1 + 1):
                D[self._i01(j, self.d - e), self._i1(j, e)] = -1
        return D


def _map0(src: _Cech, dst: _Cech, M0: np.ndarray, M1: np.ndarray) -> np.ndarray:
    """Multiplication by s·M₀ + t·M₁ on Č⁰: (M₀ + M₁u) on U₀, (M₀v + M₁) on U₁."""
    out = np.zeros((dst.c0, src.c0), dtype=complex)
    for a in range(dst.m):
        for b in range(src.m):
            for e in range(src.top0 + 1):
                out[dst._i0(a, e), src._i0(b, e)] += M0[a, b]
                out[dst._i0(a, e + 1), src._i0(b, e)] += M1[a, b]
            for e in range(src.top1 + 1):
                out[dst._i1(a, e + 1), src._i1(b, e)] += M0[a, b]
                out[dst._i1(a, e), src._i1(b, e)] += M1[a, b]
    return out


def _map1(src: _Cech, dst: _Cech, M0: np.ndarray, M1: np.ndarray) -> np.ndarray:
    """Multiplication by (M₀ + M₁u) on Č¹."""
    out = np.zeros((dst.c1, src.c1), dtype=complex)
    for a in range(dst.m):
        for b in range(src.m):
            for e in range(src.lo, src.hi + 1):
                out[dst._i01(a, e), src._i01(b, e)] += M0[a, b]
                out[dst._i01(a, e + 1), src._i01(b, e)] += M1[a, b]
    return out


def h0_twist(
    M: MonadData, L: LineParam, k: int, pad: int = 1, tol: Tolerance = DEFAULT_TOL
) -> int:
    """dim H⁰(E|_L(k)) as the degree-0 hypercohomology of the twisted monad.

    The monad O(k−1)^c → O(k)^n → O(k+1)^c is resolved by truncated Čech
    cochains. With polynomial degrees at least max(0, d) on both charts
    each truncated column computes the cohomology of its line bundle, so the
    total complex computes the hypercohomology for every ``pad`` ≥ 0.
    """
    c, n = M.c, M.middle
    a0, a1 = _restrict(M.alpha, L)
    b0, b1 = _restrict(M.beta, L)
    top = max(0, k - 1) + pad
    A = _Cech(k - 1, c, top, top)
    B = _Cech(k, n, top + 1, top + 1)
    C = _Cech(k + 1, c, top + 2, top + 2)
    # T⁻¹ = Č⁰(A); T⁰ = Č⁰(B) ⊕ Č¹(A); T¹ = Č⁰(C) ⊕ Č¹(B)
    d_minus = np.vstack([_map0(A, B, a0, a1), -A.delta()])
    d_zero = np.block([
        [_map0(B, C, b0, b1), np.zeros((C.c0, A.c1))],
        [B.delta(), _map1(A, B, a0, a1)],
    ])
    return d_zero.shape[1] - numerical_rank(d_zero, tol) - numerical_rank(d_minus, tol)


def digits_from_h0(h: dict[int, int], r: int, K: int) -> list[int] | None:
    """Invert h(k) = Σ max(0, aᵢ + k + 1) for digits in [−K, K].

    Needs h at k = −K−2, …, K. Returns None when the counts are inconsistent
    (negative, or not summing to r).
    """
    g = {k: h[k] - h[k - 1] for k in range(-K - 1, K + 1)}  # g(k) = #{aᵢ ≥ −k}
    digits = []
    for j in range(-K, K + 1):
        count = g[-j] - g[-j - 1]
        if count < 0:
            return None
        digits.extend([j] * count)
    if len(digits) != r:
        return None
    return sorted(digits, reverse=True)


@dataclass(frozen=True)
class SplittingReport:
    line: LineParam
    digits: list[int]
    D_used: int
    h0: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"line": self.line.to_json(), "digits": list(self.digits), "D_used": self.D_used}


def splitting_type(
    M: MonadData,
    L: LineParam = FRAMING_LINE,
    D_max: int | None = None,
    tol: Tolerance = DEFAULT_TOL,
    D_start: int = 1,
) -> SplittingReport:
    """Splitting digits a₁ ≥ … ≥ a_r of E restricted to the line L.

    The window D bounds both the digit range and the Čech padding. D grows
    until two consecutive windows give the same digits.
    """
    D_max = 2 * M.c + 4 if D_max is None else D_max
    previous = None
    for D in range(D_start, D_max + 1):
        h = {k: h0_twist(M, L, k, pad=D, tol=tol) for k in range(-D - 2, D + 1)}
        digits = digits_from_h0(h, M.r, D)
        if digits is not None and digits == previous:
            return SplittingReport(L, digits, D, h)
        previous = digits
    raise SplittingError(f"splitting not stabilized at D_max={D_max}")
