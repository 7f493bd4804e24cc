"""Twistor sections σ(z, w) = z·X₁ + w·X₂ of the flat space 𝐁(r, c).

The 1-dimensional ADHM equations say that μ_ℂ(σ(z, w)) vanishes
identically in (z, w); its three coefficients are :func:`tri_moment`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .adhm import (
    ADHMData,
    BalanceError,
    kempf_ness_balance,
    act,
    hermitian_moments,
    hk_pairing,
    infinitesimal_action,
    is_regular,
    mu_c,
    mu_r,
    quaternionic_j,
    random_adhm,
)
from .linalg import (
    DEFAULT_TOL,
    ShapeError,
    Tolerance,
    TrisymError,
    make_rng,
    numerical_rank,
    parallel_map,
    random_unitary,
    rank_gap,
    sub_seed,
)
from .trisymplectic import TriSpan

log = logging.getLogger(__name__)


class SolverError(TrisymError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


class RankDecisionError(TrisymError):
    """The singular-value gap at the rank cutoff is too small to trust."""


class PreconditionError(TrisymError):
    pass


# --- types -------------------------------------------------------------------

@dataclass(frozen=True)
class ADHMSection:
    X1: ADHMData
    X2: ADHMData

    def __post_init__(self) -> None:
        if (self.X1.r, self.X1.c) != (self.X2.r, self.X2.c):
            raise ShapeError("X1 and X2 must have the same (r, c)")

    @property
    def r(self) -> int:
        return self.X1.r

    @property
    def c(self) -> int:
        return self.X1.c

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.X1.to_vector(), self.X2.to_vector()])

    @classmethod
    def from_vector(cls, r: int, c: int, vec: Any) -> ADHMSection:
        vec = np.asarray(vec, dtype=complex)
        half = vec.size // 2
        return cls(ADHMData.from_vector(r, c, vec[:half]), ADHMData.from_vector(r, c, vec[half:]))

    def to_json(self) -> dict[str, Any]:
        return {"X1": self.X1.to_json(), "X2": self.X2.to_json()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> ADHMSection:
        return cls(ADHMData.from_json(obj["X1"]), ADHMData.from_json(obj["X2"]))


@dataclass(frozen=True)
class MomentValue:
    """Coefficients of z², w² and zw in μ_ℂ(σ(z, w))."""

    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray

    def parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.m1, self.m2, self.m3

    def to_vector(self) -> np.ndarray:
        return np.concatenate([m.ravel() for m in self.parts()])

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_vector()))

    def at(self, z: complex, w: complex) -> np.ndarray:
        return z * z * self.m1 + w * w * self.m2 + z * w * self.m3


def act_section(g: Any, S: ADHMSection) -> ADHMSection:
    return ADHMSection(act(g, S.X1), act(g, S.X2))


# --- evaluation and the sphere --------------------------------------------------

INFINITY = "infinity"


def _homogeneous(p: Any) -> tuple[complex, complex]:
    z, w = (complex(x) for x in p)
    if z == 0 and w == 0:
        raise ValueError("[0:0] is not a point of ℂP¹")
    return z, w


def section_eval(S: ADHMSection, p: Any) -> ADHMData:
    """z·X₁ + w·X₂ for p = (z, w); callers normalise |z|² + |w|² = 1."""
    z, w = _homogeneous(p)
    return z * S.X1 + w * S.X2


def chart_point(zeta: complex | str) -> tuple[complex, complex]:
    """Normalised homogeneous coordinates [1 : ζ]/√(1+|ζ|²); ∞ ↦ [0 : 1]."""
    if isinstance(zeta, str):
        if zeta != INFINITY:
            raise ValueError(f"unknown sphere point {zeta!r}")
        return 0j, 1 + 0j
    zeta = complex(zeta)
    s = np.sqrt(1 + abs(zeta) ** 2)
    return 1 / s + 0j, zeta / s


def sphere_convention(zeta: complex | str) -> tuple[float, float, float]:
    """Unit vector (a, b, c) of the point ζ; 0 ↦ I = (1,0,0), ∞ ↦ (−1,0,0)."""
    if isinstance(zeta, str):
        chart_point(zeta)
        return -1.0, 0.0, 0.0
    zeta = complex(zeta)
    if abs(zeta) <= 1:
        s = 1 + abs(zeta) ** 2
        return (1 - abs(zeta) ** 2) / s, 2 * zeta.real / s, 2 * zeta.imag / s
    u = 1 / zeta  # same formulas in the chart at infinity, free of overflow
    s = 1 + abs(u) ** 2
    return (abs(u) ** 2 - 1) / s, 2 * u.real / s, -2 * u.imag / s


def sphere_to_zeta(v: Sequence[float]) -> complex | str:
    a, b, c = v
    if 1 + a <= 1e-15:
        return INFINITY
    return complex(b, c) / (1 + a)


def tri_moment(S: ADHMSection) -> MomentValue:
    A1, B1, I1, J1 = S.X1
    A2, B2, I2, J2 = S.X2
    m3 = A1 @ B2 - B2 @ A1 + A2 @ B1 - B1 @ A2 + I1 @ J2 + I2 @ J1
    return MomentValue(mu_c(S.X1), mu_c(S.X2), m3)


def tri_moment_derivative(S: ADHMSection, dS: ADHMSection) -> MomentValue:
    """Exact derivative of :func:`tri_moment` at S in direction dS."""
    def bil(X: ADHMData, Y: ADHMData) -> np.ndarray:
        return X.A @ Y.B - Y.B @ X.A + X.I @ Y.J

    X1, X2, d1, d2 = S.X1, S.X2, dS.X1, dS.X2
    return MomentValue(
        bil(d1, X1) + bil(X1, d1),
        bil(d2, X2) + bil(X2, d2),
        bil(d1, X2) + bil(X1, d2) + bil(d2, X1) + bil(X2, d1),
    )


def tri_moment_jacobian(S: ADHMSection) -> np.ndarray:
    """Complex Jacobian, 3c² × (4c² + 4rc), columns in :meth:`ADHMSection.to_vector` order."""
    r, c = S.r, S.c
    size = S.to_vector().size
    cols = []
    for k in range(size):
        e = np.zeros(size, dtype=complex)
        e[k] = 1
        cols.append(tri_moment_derivative(S, ADHMSection.from_vector(r, c, e)).to_vector())
    return np.stack(cols, axis=1)


# --- global regularity ------------------------------------------------------------

WITNESS_MARGIN = 1e-7


@dataclass(frozen=True)
class RegularityReport:
    flag: bool
    worst_margin: float
    witnesses: list[tuple[complex, complex]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.flag

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.flag,
            "worst_margin": self.worst_margin,
            "witnesses": [[[p.real, p.imag] for p in w] for w in self.witnesses],
            "notes": list(self.notes),
        }


def _sample_points(n: int, seed: int) -> list[tuple[complex, complex]]:
    """Roots of unity on the equator, moved by a seeded unitary Möbius map."""
    U = random_unitary(make_rng(seed), 2)
    pts = [(1 + 0j, 0j), (0j, 1 + 0j)]
    for k in range(n):
        zeta = np.exp(2j * np.pi * k / n)
        v = U @ np.array([1, zeta]) / np.sqrt(2)
        pts.append((complex(v[0]), complex(v[1])))
    return pts


def _krylov_poly_roots(seed_of, ops_of, c: int, rng: np.random.Generator) -> list[complex]:
    """Affine roots ζ of det(K(ζ)·R), K the Krylov matrix at σ(1, ζ)."""
    def det_at(zeta):
        blocks, level = [], seed_of(zeta)
        ops = ops_of(zeta)
        blocks.append(level)
        for _ in range(c - 1):
            level = np.hstack([T @ level for T in ops])
            blocks.append(level)
        K = np.hstack(blocks)
        return np.linalg.det(K @ R)

    width = sum(seed_of(0).shape[1] * 2**k for k in range(c))
    R = (rng.standard_normal((width, c)) + 1j * rng.standard_normal((width, c))) / np.sqrt(2)
    degree = c * c
    N = degree + 1
    values = np.array([det_at(np.exp(2j * np.pi * j / N)) for j in range(N)])
    coeffs = np.fft.fft(values) / N  # coeffs[k] multiplies ζ^k
    scale = np.max(np.abs(coeffs))
    if scale == 0:
        return []
    nz = np.nonzero(np.abs(coeffs) > 1e-12 * scale)[0]
    top = nz[-1]
    return list(np.roots(coeffs[: top + 1][::-1])) if top > 0 else []


def _candidate_points(S: ADHMSection, seed: int) -> list[tuple[complex, complex]]:
    """Points where regularity can fail, located algebraically."""
    X1, X2, c = S.X1, S.X2, S.c
    cands = []
    # The section vanishes where the 2×2 Gram matrix of (X1, X2) is singular.
    v1, v2 = X1.to_vector(), X2.to_vector()
    gram = np.array([[np.vdot(v1, v1), np.vdot(v1, v2)], [np.vdot(v2, v1), np.vdot(v2, v2)]])
    _, vecs = np.linalg.eigh(gram)
    lowest = vecs[:, 0]
    cands.append((complex(lowest[0]), complex(lowest[1])))

    rng = make_rng(seed, 7)
    t = lambda M: M.T  # noqa: E731
    roots = _krylov_poly_roots(
        lambda z: X1.I + z * X2.I, lambda z: [X1.A + z * X2.A, X1.B + z * X2.B], c, rng
    ) + _krylov_poly_roots(
        lambda z: t(X1.J + z * X2.J), lambda z: [t(X1.A + z * X2.A), t(X1.B + z * X2.B)], c, rng
    )
    cands.extend(chart_point(z) for z in roots)
    return cands


def _c1_certificate(S: ADHMSection, tol: Tolerance) -> tuple[bool, list[tuple[complex, complex]]]:
    """Exact test for charge 1: zI₁ + wI₂ and zJ₁ + wJ₂ must never vanish."""
    witnesses = []
    ok = True
    for pair in ((S.X1.I, S.X2.I), (S.X1.J.T, S.X2.J.T)):
        stack = np.vstack([pair[0].ravel(), pair[1].ravel()])  # 2×r
        rank = numerical_rank(stack, tol)
        if rank == 2:
            continue
        ok = False
        if rank == 1:
            # (z, w) with z·row₁ + w·row₂ = 0
            _, _, vh = np.linalg.svd(stack.T)
            zw = vh[-1].conj()
            zw = zw / np.linalg.norm(zw)
            witnesses.append((complex(zw[0]), complex(zw[1])))
        else:
            witnesses.append((1 + 0j, 0j))
    return ok, witnesses


def is_globally_regular(
    S: ADHMSection, n_samples: int = 16, seed: int = 0, tol: Tolerance = DEFAULT_TOL
) -> RegularityReport:
    """Check regularity of σ(p) over ℂP¹.

    Sampled points are [1:0], [0:1] and rotated roots of unity. They are
    complemented by algebraic candidates: the minimum-norm point of the
    section and roots of det(K(ζ)R) for the stability and costability Krylov
    matrices. Charge 1 additionally gets an exact rank certificate.
    """
    witnesses: list[tuple[complex, complex]] = []
    notes: list[str] = []
    sampled = _sample_points(n_samples, seed)
    flags = parallel_map(lambda p: is_regular(section_eval(S, p), tol), sampled)
    worst = min(f.margin for f in flags)
    witnesses.extend(p for p, f in zip(sampled, flags) if not f)

    cands = _candidate_points(S, seed)
    for p in cands:
        f = is_regular(section_eval(S, p), tol)
        worst = min(worst, f.margin)
        if f.margin < WITNESS_MARGIN:
            witnesses.append(p)
    notes.append(f"{len(sampled)} sampled points, {len(cands)} algebraic candidates")

    if S.c == 1:
        exact, extra = _c1_certificate(S, tol)
        notes.append(f"charge-1 certificate: {'pass' if exact else 'fail'}")
        if not exact:
            witnesses.extend(extra)
            worst = 0.0
    return RegularityReport(not witnesses, float(worst), witnesses, notes)


# --- solver -----------------------------------------------------------------------

ARMIJO_SLOPE = 1e-4
MAX_RETRIES = 5
PERTURBATION = 0.2


def _gauss_newton(
    x: np.ndarray, residual, jacobian, tol: Tolerance
) -> tuple[np.ndarray, float, int]:
    """Pseudo-inverse Gauss–Newton with Armijo backtracking."""
    F = residual(x)
    res = float(np.linalg.norm(F))
    it = 0
    while res > tol.residual_abs and it < tol.max_iter:
        it += 1
        Jac = jacobian(x)
        step = -np.linalg.lstsq(Jac, F, rcond=None)[0]
        slope = 2 * float(np.vdot(F, Jac @ step).real)  # d/dt ‖F(x + t·step)‖² at t = 0
        t = 1.0
        while True:
            x_new = x + t * step
            F_new = residual(x_new)
            res_new = float(np.linalg.norm(F_new))
            if res_new**2 <= res**2 + ARMIJO_SLOPE * t * slope or t < 1e-12:
                break
            t *= 0.5
        if res_new >= res and t < 1e-12:
            break
        x, F, res = x_new, F_new, res_new
    return x, res, it


def _solve_sections(S: ADHMSection, tol: Tolerance) -> tuple[ADHMSection, float, int]:
    r, c = S.r, S.c
    x, res, it = _gauss_newton(
        S.to_vector(),
        lambda v: tri_moment(ADHMSection.from_vector(r, c, v)).to_vector(),
        lambda v: tri_moment_jacobian(ADHMSection.from_vector(r, c, v)),
        tol,
    )
    return ADHMSection.from_vector(r, c, x), res, it


def _solve_point(X: ADHMData, tol: Tolerance) -> tuple[ADHMData, float]:
    """Gauss–Newton for μ_ℂ(X) = 0 on a single quadruple."""
    r, c = X.r, X.c
    zero = ADHMData.zeros(r, c)
    N = X.size

    def jac(v):
        Y = ADHMData.from_vector(r, c, v)
        return tri_moment_jacobian(ADHMSection(Y, zero))[: c * c, :N]

    x, res, _ = _gauss_newton(
        X.to_vector(), lambda v: mu_c(ADHMData.from_vector(r, c, v)).ravel(), jac, tol
    )
    return ADHMData.from_vector(r, c, x), res


def real_section(m: ADHMData) -> ADHMSection:
    """The section ζ ↦ m + ζ𝕁m traced out by a single point of 𝐁."""
    return ADHMSection(m, quaternionic_j(m))


def _starting_section(r: int, c: int, seed: int, tol: Tolerance) -> ADHMSection:
    """A real section through a balanced zero of μ_ℂ, plus a random complex kick.

    Starting next to a real section keeps the solver inside the globally
    regular locus; random starts for r = 2 usually converge to sections that
    are unstable at isolated points of ℂP¹.
    """
    m, _ = _solve_point(random_adhm(r, c, sub_seed(seed, 0)), tol)
    balance_tol = Tolerance(tol.rank_rel, max(tol.residual_abs, 1e-12), 2000)
    m = kempf_ness_balance(m, balance_tol).data
    base = real_section(m)
    kick = ADHMSection(random_adhm(r, c, sub_seed(seed, 1)), random_adhm(r, c, sub_seed(seed, 2)))
    scale = PERTURBATION * np.linalg.norm(base.to_vector()) / np.linalg.norm(kick.to_vector())
    return ADHMSection.from_vector(r, c, base.to_vector() + scale * kick.to_vector())


def solve_adhm1d(
    r: int, c: int, seed: int = 0, tol: Tolerance = DEFAULT_TOL, n_samples: int = 16
) -> ADHMSection:
    """Gauss–Newton solution of the 1-dimensional ADHM equations.

    Each attempt builds its starting section from random quadruples drawn
    from child seeds of ``seed`` (see :func:`_starting_section`). A result is
    returned only when the residual is below ``tol.residual_abs`` and the
    section is globally regular; otherwise up to ``MAX_RETRIES`` further
    attempts are made.
    """
    if r < 1 or c < 1:
        raise ValueError(f"need r ≥ 1 and c ≥ 1, got r={r}, c={c}")
    best = np.inf
    for attempt in range(1 + MAX_RETRIES):
        s = sub_seed(seed, attempt)
        try:
            start = _starting_section(r, c, s, tol)
        except BalanceError as exc:
            log.info("attempt %d: no regular starting point (%s)", attempt, exc)
            continue
        S, res, iters = _solve_sections(start, tol)
        best = min(best, res)
        if res > tol.residual_abs:
            log.info("attempt %d: residual %.3e after %d iterations", attempt, res, iters)
            continue
        if is_globally_regular(S, n_samples, s, tol):
            log.info("attempt %d converged in %d iterations, residual %.3e", attempt, iters, res)
            return S
        log.info("attempt %d converged but the section is not globally regular", attempt)
    raise SolverError("no solution found", float(best))


# --- real moment maps along a section ------------------------------------------------

CONVENTIONS = ("chart", "weight", "twistor")
DEFAULT_CONVENTION = "chart"


def _hermitian_parts(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (M + M.conj().T) / 2, (M - M.conj().T) / 2j


def twistor_point(S: ADHMSection, zeta: complex | str) -> ADHMData:
    """The point m of 𝐁 whose L_ζ-holomorphic coordinates are σ(1, ζ).

    Coordinates holomorphic for L_ζ are w = m + ζ𝕁m, inverted by
    m = (w − ζ𝕁w)/(1 + |ζ|²); at ∞ the point is −𝕁X₂.
    """
    if isinstance(zeta, str):
        chart_point(zeta)
        return -1 * quaternionic_j(S.X2)
    zeta = complex(zeta)
    w = S.X1 + zeta * S.X2
    return (1 / (1 + abs(zeta) ** 2)) * (w - zeta * quaternionic_j(w))


def twistor_structure(zeta: complex | str) -> tuple[float, float, float]:
    """Coefficients of the complex structure for which w = m + ζ𝕁m is holomorphic."""
    a, b, c = sphere_convention(zeta)
    return a, -c, b


def real_moment_at(
    S: ADHMSection, zeta: complex | str, convention: str = DEFAULT_CONVENTION
) -> np.ndarray:
    """μ_L^ℝ along the section at the sphere point ζ.

    ``chart``: a·μ_ℝ(σ̂) + b·Re μ_ℂ(σ̂) + c·Im μ_ℂ(σ̂) with σ̂ the section in
    the normalised chart. ``weight``: μ_ℝ(X₁ + ζX₂)/(1 + |ζ|²).
    ``twistor``: the hyperkähler moment map of the point of 𝐁 traced out by
    the section in the complex structure L_ζ, in the Hermitian normalisation
    of :func:`trisym.adhm.hermitian_moments`.
    """
    if convention == "chart":
        a, b, c = sphere_convention(zeta)
        X = section_eval(S, chart_point(zeta))
        re, im = _hermitian_parts(mu_c(X))
        return a * mu_r(X) + b * re + c * im
    if convention == "weight":
        z, w = chart_point(zeta)
        return mu_r(section_eval(S, (z, w)))
    if convention == "twistor":
        h = hermitian_moments(twistor_point(S, zeta))
        a, b, c = twistor_structure(zeta)
        return a * h["I"] + b * h["J"] + c * h["K"]
    raise ValueError(f"unknown convention {convention!r}; choose from {CONVENTIONS}")


def fibonacci_sphere(n: int, seed: int = 0) -> np.ndarray:
    """n equal-area points on S², rigidly rotated by a seeded rotation."""
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    rho = np.sqrt(1 - z * z)
    phi = np.pi * (3 - np.sqrt(5)) * k
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    return pts @ _rotation(seed).T


def gauss_sphere(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Product rule: Gauss–Legendre in the height, uniform in the azimuth.

    Height is the area coordinate on S², so each band carries its exact
    area. Returns about n points and weights summing to 1, rigidly rotated
    by a seeded rotation.
    """
    n_z = max(1, int(round(np.sqrt(n / 2))))
    n_phi = max(1, n // n_z)
    z, wz = np.polynomial.legendre.leggauss(n_z)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    Z, P = np.meshgrid(z, phi, indexing="ij")
    rho = np.sqrt(1 - Z * Z)
    pts = np.stack([rho * np.cos(P), rho * np.sin(P), Z], axis=-1).reshape(-1, 3)
    weights = np.repeat(wz / 2, n_phi) / n_phi
    return pts @ _rotation(seed).T, weights


def _rotation(seed: int) -> np.ndarray:
    q, r = np.linalg.qr(make_rng(seed).standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def sphere_samples(n: int, seed: int) -> list[complex | str]:
    """n Fibonacci points as sphere parameters ζ."""
    return [sphere_to_zeta(v) for v in fibonacci_sphere(n, seed)]


QUADRATURE_RULES = ("gauss", "fibonacci")


@dataclass(frozen=True)
class ConstancyReport:
    max_spread: float
    mean_norm: float
    ok: bool
    convention: str

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "max_spread": self.max_spread,
            "mean_norm": self.mean_norm,
            "convention": self.convention,
        }


def constancy_spread(
    S: ADHMSection, n_samples: int = 50, seed: int = 0, convention: str = DEFAULT_CONVENTION
) -> ConstancyReport:
    """Largest Frobenius distance of real_moment_at from its sample mean."""
    values = parallel_map(
        lambda z: real_moment_at(S, z, convention), sphere_samples(n_samples, seed)
    )
    stack = np.stack(values)
    mean = stack.mean(axis=0)
    spread = float(max(np.linalg.norm(v - mean) for v in stack))
    mean_norm = float(np.mean([np.linalg.norm(v) for v in stack]))
    return ConstancyReport(spread, mean_norm, spread <= 1e-6 * (1 + mean_norm), convention)


def constancy_check(
    S: ADHMSection,
    n_samples: int = 50,
    seed: int = 0,
    convention: str = DEFAULT_CONVENTION,
    precondition_tol: float = 1e-8,
) -> ConstancyReport:
    """Constancy of μ_L^ℝ along a section in μ_ℂ⁻¹(0)."""
    if tri_moment(S).norm() > precondition_tol:
        raise PreconditionError("section not in μ_ℂ⁻¹(0)")
    return constancy_spread(S, n_samples, seed, convention)


def real_moment_avg(
    S: ADHMSection,
    n_quad: int = 200,
    seed: int = 0,
    convention: str = DEFAULT_CONVENTION,
    rule: str = "gauss",
) -> np.ndarray:
    """Average of real_moment_at over ℂP¹ with total measure 1.

    ``rule="gauss"`` uses :func:`gauss_sphere`; ``rule="fibonacci"`` uses
    equal-weight Fibonacci points, whose error decays only like 1/n.
    """
    if rule == "gauss":
        pts, weights = gauss_sphere(n_quad, seed)
    elif rule == "fibonacci":
        pts = fibonacci_sphere(n_quad, seed)
        weights = np.full(len(pts), 1 / len(pts))
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}; choose from {QUADRATURE_RULES}")
    values = parallel_map(lambda v: real_moment_at(S, sphere_to_zeta(v), convention), pts)
    return np.tensordot(weights, np.stack(values), axes=1)


# --- tangent structure and dimensions --------------------------------------------------

TANGENT_POINTS = (0, 1, 1j)


def omega_i_matrix(r: int, c: int) -> np.ndarray:
    """Matrix P of Ω_I on 𝐁(r, c): Ω_I(x, y) = xᵀ P y in to_vector coordinates."""
    N = ADHMData.zeros(r, c).size
    basis = [ADHMData.from_vector(r, c, np.eye(N)[k]) for k in range(N)]
    return np.array([[hk_pairing(u, v, "Omega_I") for v in basis] for u in basis])


def tangent_trispan(S: ADHMSection) -> TriSpan:
    """Pullbacks of Ω_I along the evaluation maps at ζ = 0, 1, i.

    In section coordinates (u₁, u₂) the pullback at ζ is
    Ω_I(u₁ + ζu₂, v₁ + ζv₂); each of these has half rank.
    """
    P = omega_i_matrix(S.r, S.c)
    forms = [np.kron(np.array([[1, z], [z, z * z]]), P) for z in TANGENT_POINTS]
    return TriSpan(forms)


def group_directions(S: ADHMSection) -> np.ndarray:
    """Columns (ξ*X₁, ξ*X₂) for ξ running over the matrix units of 𝔤𝔩(V)."""
    c = S.c
    cols = []
    for k in range(c * c):
        xi = np.zeros(c * c, dtype=complex)
        xi[k] = 1
        xi = xi.reshape(c, c)
        cols.append(
            ADHMSection(infinitesimal_action(xi, S.X1), infinitesimal_action(xi, S.X2)).to_vector()
        )
    return np.stack(cols, axis=1)


GAP_REQUIRED = 1e3


@dataclass(frozen=True)
class DimensionReport:
    r: int
    c: int
    ker_dim: int
    orbit_dim: int
    moduli_dim: int
    jacobian_rank: int
    sv_gap: float

    def to_json(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "c": self.c,
            "ker_dim": self.ker_dim,
            "orbit_dim": self.orbit_dim,
            "moduli_dim": self.moduli_dim,
            "jacobian_rank": self.jacobian_rank,
            "sv_gap": self.sv_gap,
        }


def moduli_dimension(S: ADHMSection, tol: Tolerance = DEFAULT_TOL) -> DimensionReport:
    jac = tri_moment_jacobian(S)
    rank, gap = rank_gap(jac, tol)
    stab_rank, stab_gap = rank_gap(group_directions(S), tol)
    worst = min(gap, stab_gap)
    if worst < GAP_REQUIRED:
        raise RankDecisionError(f"ill-conditioned rank (singular-value gap {worst:.3g})")
    ker_dim = jac.shape[1] - rank
    orbit_dim = stab_rank  # c² minus the stabiliser dimension
    return DimensionReport(S.r, S.c, ker_dim, orbit_dim, ker_dim - orbit_dim, rank, float(worst))


SL_W_DIM = {2: 3}


def rank2_unframed_report(c: int, seed: int = 0, tol: Tolerance = DEFAULT_TOL) -> int:
    """Dimension of unframed rank-2 instantons: framed dimension minus dim SL(2)."""
    if c < 1:
        raise ValueError("charge must be at least 1")
    rep = moduli_dimension(solve_adhm1d(2, c, seed, tol), tol)
    unframed = rep.moduli_dim - SL_W_DIM[2]
    log.info(
        "rank 2, charge %d: framed dimension %d measured, %d subtracted, %d remain",
        c, rep.moduli_dim, SL_W_DIM[2], unframed,
    )
    return unframed
