"""ADHM data (A, B, I, J), the moment maps, and the flat hyperkähler structure.

Conventions
-----------
* Shapes: A, B are c×c, I is c×r, J is r×c.
* GL(V) acts by (gAg⁻¹, gBg⁻¹, gI, Jg⁻¹).
* Flat metric g(v, w) = Re Σ Tr(v w*), complex structure I = multiplication
  by i, 𝕁(A, B, I, J) = (−B*, A*, −J*, I*) and K = I𝕁.
* ω_L(v, w) = g(v, L w); Ω_I(v, w) = Tr(v_A w_B − w_A v_B + v_I w_J − w_I v_J).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator, NamedTuple

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    ShapeError,
    Tolerance,
    TrisymError,
    as_cmatrix,
    closure_margin,
    complex_gaussian,
    make_rng,
    matrix_from_json,
    matrix_to_json,
    numerical_rank,
    subspace_closure,
)

FIELDS = ("A", "B", "I", "J")


class BalanceError(TrisymError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class ADHMData:
    """One point of 𝐁(r, c); also used for tangent vectors."""

    r: int
    c: int
    A: np.ndarray
    B: np.ndarray
    I: np.ndarray
    J: np.ndarray

    def __post_init__(self) -> None:
        r, c = int(self.r), int(self.c)
        if r < 1 or c < 1:
            raise ShapeError(f"need r ≥ 1 and c ≥ 1, got r={r}, c={c}")
        expected = {"A": (c, c), "B": (c, c), "I": (c, r), "J": (r, c)}
        for name, shape in expected.items():
            M = as_cmatrix(getattr(self, name), name=name)
            if M.shape != shape:
                raise ShapeError(f"{name} has shape {M.shape}, expected {shape}")
            object.__setattr__(self, name, M)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "c", c)

    @classmethod
    def zeros(cls, r: int, c: int) -> ADHMData:
        z = np.zeros
        return cls(r, c, z((c, c)), z((c, c)), z((c, r)), z((r, c)))

    def parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.A, self.B, self.I, self.J

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.parts())

    def _same_shape(self, other: ADHMData) -> None:
        if (self.r, self.c) != (other.r, other.c):
            raise ShapeError(f"(r,c)=({self.r},{self.c}) vs ({other.r},{other.c})")

    def __add__(self, other: ADHMData) -> ADHMData:
        self._same_shape(other)
        return ADHMData(self.r, self.c, *(x + y for x, y in zip(self, other)))

    def __sub__(self, other: ADHMData) -> ADHMData:
        return self + (-1) * other

    def __mul__(self, s: complex) -> ADHMData:
        return ADHMData(self.r, self.c, *(s * x for x in self))

    __rmul__ = __mul__

    def map(self, fn) -> ADHMData:
        return ADHMData(self.r, self.c, *(fn(x) for x in self))

    @property
    def size(self) -> int:
        """Complex dimension 2c² + 2rc of 𝐁(r, c)."""
        return 2 * self.c * self.c + 2 * self.r * self.c

    def to_vector(self) -> np.ndarray:
        return np.concatenate([x.ravel() for x in self])

    @classmethod
    def from_vector(cls, r: int, c: int, vec: Any) -> ADHMData:
        vec = np.asarray(vec, dtype=complex)
        sizes = (c * c, c * c, c * r, r * c)
        if vec.size != sum(sizes):
            raise ShapeError(f"vector of length {vec.size} does not fit (r,c)=({r},{c})")
        a, b, i = np.cumsum(sizes[:3])
        return cls(
            r, c,
            vec[:a].reshape(c, c), vec[a:b].reshape(c, c),
            vec[b:i].reshape(c, r), vec[i:].reshape(r, c),
        )

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_vector()))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"r": self.r, "c": self.c}
        out.update({k: matrix_to_json(getattr(self, k)) for k in FIELDS})
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> ADHMData:
        missing = {"r", "c", *FIELDS} - set(obj)
        if missing:
            raise ValueError(f"ADHM data missing fields {sorted(missing)}")
        return cls(int(obj["r"]), int(obj["c"]), *(matrix_from_json(obj[k]) for k in FIELDS))


@dataclass(frozen=True)
class Flag:
    """Boolean verdict carrying a scale-free margin (0 means failure)."""

    value: bool
    margin: float

    def __bool__(self) -> bool:
        return self.value


@dataclass(frozen=True)
class GroupElement:
    g: np.ndarray
    unitary: bool = False

    def __post_init__(self) -> None:
        g = as_cmatrix(self.g, name="group element")
        if g.shape[0] != g.shape[1] or numerical_rank(g) != g.shape[0]:
            raise ShapeError("group element must be square and invertible")
        if self.unitary and np.linalg.norm(g.conj().T @ g - np.eye(g.shape[0])) > 1e-10:
            raise ValueError("group element flagged unitary but g*g ≠ 1")
        object.__setattr__(self, "g", g)

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return GroupElement(self.g @ other.g, self.unitary and other.unitary)

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.g)


def random_adhm(r: int, c: int, seed: int) -> ADHMData:
    rng = make_rng(seed)
    return ADHMData(
        r, c,
        complex_gaussian(rng, (c, c)), complex_gaussian(rng, (c, c)),
        complex_gaussian(rng, (c, r)), complex_gaussian(rng, (r, c)),
    )


# --- stability ---------------------------------------------------------------

def _closure_flag(seed: np.ndarray, ops: list[np.ndarray], c: int, tol: Tolerance) -> Flag:
    full = subspace_closure(seed, ops, tol).shape[1] == c
    margin = closure_margin(seed, ops, depth=c - 1)
    return Flag(full, margin if full else 0.0)


def is_stable(X: ADHMData, tol: Tolerance = DEFAULT_TOL) -> Flag:
    """No proper subspace of V contains Im I and is invariant under A, B."""
    return _closure_flag(X.I, [X.A, X.B], X.c, tol)


def is_costable(X: ADHMData, tol: Tolerance = DEFAULT_TOL) -> Flag:
    """Dual criterion: closure of Im J* under A*, B* is all of V."""
    h = lambda M: M.conj().T  # noqa: E731
    return _closure_flag(h(X.J), [h(X.A), h(X.B)], X.c, tol)


def is_regular(X: ADHMData, tol: Tolerance = DEFAULT_TOL) -> Flag:
    s, k = is_stable(X, tol), is_costable(X, tol)
    return Flag(bool(s) and bool(k), min(s.margin, k.margin))


# --- moment maps and the group action -------------------------------------------

def mu_c(X: ADHMData) -> np.ndarray:
    return X.A @ X.B - X.B @ X.A + X.I @ X.J


def mu_r(X: ADHMData) -> np.ndarray:
    A, B, I, J = X
    h = lambda M: M.conj().T  # noqa: E731
    m = A @ h(A) - h(A) @ A + B @ h(B) - h(B) @ B + I @ h(I) - h(J) @ J
    return (m + h(m)) / 2


def _as_group(g: GroupElement | Any) -> GroupElement:
    return g if isinstance(g, GroupElement) else GroupElement(as_cmatrix(g))


def act(g: GroupElement | Any, X: ADHMData) -> ADHMData:
    G = _as_group(g)
    if G.g.shape[0] != X.c:
        raise ShapeError(f"group element of size {G.g.shape[0]} acting on charge {X.c}")
    gi = G.inverse()
    return ADHMData(X.r, X.c, G.g @ X.A @ gi, G.g @ X.B @ gi, G.g @ X.I, X.J @ gi)


def infinitesimal_action(xi: Any, X: ADHMData) -> ADHMData:
    """ξ* at X: ([ξ,A], [ξ,B], ξI, −Jξ)."""
    xi = as_cmatrix(xi, name="xi")
    A, B, I, J = X
    return ADHMData(X.r, X.c, xi @ A - A @ xi, xi @ B - B @ xi, xi @ I, -J @ xi)


# --- flat hyperkähler structure -----------------------------------------------------

def quaternionic_j(v: ADHMData) -> ADHMData:
    A, B, I, J = (M.conj().T for M in v)
    return ADHMData(v.r, v.c, -B, A, -J, I)


def complex_structure(which: str, v: ADHMData) -> ADHMData:
    if which == "I":
        return 1j * v
    if which == "J":
        return quaternionic_j(v)
    if which == "K":
        return 1j * quaternionic_j(v)
    raise ValueError(f"unknown complex structure {which!r}")


_PAIRING_ALIASES = {
    "g": "g",
    "omega_I": "omega_I", "ωI": "omega_I", "wI": "omega_I",
    "omega_J": "omega_J", "ωJ": "omega_J", "wJ": "omega_J",
    "omega_K": "omega_K", "ωK": "omega_K", "wK": "omega_K",
    "Omega_I": "Omega_I", "ΩI": "Omega_I", "WI": "Omega_I",
}


def _metric(v: ADHMData, w: ADHMData) -> float:
    return float(sum(np.vdot(y, x) for x, y in zip(v, w)).real)


def hk_pairing(v: ADHMData, w: ADHMData, which: str) -> complex:
    """Evaluate g, ω_I, ω_J, ω_K (real) or Ω_I (complex bilinear) on (v, w)."""
    v._same_shape(w)
    key = _PAIRING_ALIASES.get(which)
    if key is None:
        raise ValueError(f"unknown pairing {which!r}")
    if key == "g":
        return _metric(v, w)
    if key == "Omega_I":
        vA, vB, vI, vJ = v
        wA, wB, wI, wJ = w
        return complex(np.trace(vA @ wB - wA @ vB + vI @ wJ - wI @ vJ))
    return _metric(v, complex_structure(key[-1], w))


# --- moment map compatibility -------------------------------------------------------

# ω_i(ξ*, v) = MU_SCALE · d⟨μ_i, ξ⟩(v) for the raw pairing ⟨H, ξ⟩ = Tr(H ξ).
MU_SCALE = -0.5j


def hermitian_moments(X: ADHMData) -> dict[str, np.ndarray]:
    """Hermitian c×c matrices representing the I, J, K moment maps."""
    m = mu_c(X)
    return {"I": mu_r(X), "J": -1j * (m - m.conj().T), "K": -(m + m.conj().T)}


def moment_compat_check(
    X: ADHMData, xi: Any, v: ADHMData, h: float = 1e-3
) -> dict[str, dict[str, Any]]:
    """Compare a central difference of ⟨μ_i, ξ⟩ with ω_i(ξ*, v) for i = I, J, K.

    For each component the report holds ``lhs`` (the raw difference quotient
    of Tr(μ_i ξ)), ``rhs`` (ω_i(ξ*, v)), ``scale`` = rhs/lhs (NaN when lhs
    vanishes) and ``abs_err`` = |MU_SCALE·lhs − rhs|.
    """
    xi = as_cmatrix(xi, name="xi")
    if np.linalg.norm(xi + xi.conj().T) > 1e-12 * max(1.0, np.linalg.norm(xi)):
        raise ValueError("xi must be anti-Hermitian")
    plus, minus = hermitian_moments(X + h * v), hermitian_moments(X - h * v)
    star = infinitesimal_action(xi, X)
    report = {}
    for i in "IJK":
        lhs = complex(np.trace((plus[i] - minus[i]) @ xi) / (2 * h))
        rhs = hk_pairing(star, v, "omega_" + i)
        report[i] = {
            "lhs": lhs,
            "rhs": rhs,
            "scale": rhs / lhs if lhs != 0 else complex("nan"),
            "abs_err": abs(MU_SCALE * lhs - rhs),
        }
    return report


# --- Kempf–Ness balancing -------------------------------------------------------------

class BalanceResult(NamedTuple):
    group: GroupElement
    data: ADHMData
    iterations: int
    residuals: list[float]


def _hermitian_exp(M: np.ndarray, t: float) -> np.ndarray:
    w, U = np.linalg.eigh((M + M.conj().T) / 2)
    return (U * np.exp(t * w)) @ U.conj().T


ETA_GROWTH = 1.25


def kempf_ness_balance(X: ADHMData, tol: Tolerance = DEFAULT_TOL) -> BalanceResult:
    """Move X along its GL(V) orbit to the zero set of μ_ℝ.

    Iterates g ← exp(−η μ_ℝ(gX)) g starting from η = 0.1/‖X‖². A step that
    would increase the residual is retried with η halved; an accepted step
    lets η grow by ``ETA_GROWTH`` so the slow modes are not starved.
    """
    g = np.eye(X.c, dtype=complex)
    Y = X
    res = float(np.linalg.norm(mu_r(Y)))
    trace = [res]
    eta = 0.1 / max(X.norm() ** 2, 1e-300)
    it = 0
    while res > tol.residual_abs:
        if it >= tol.max_iter:
            raise BalanceError("balance diverged", res)
        it += 1
        while True:
            step = _hermitian_exp(mu_r(Y), -eta)
            g_new = step @ g
            Y_new = act(GroupElement(g_new), X)
            res_new = float(np.linalg.norm(mu_r(Y_new)))
            if res_new <= res or eta < 1e-300:
                break
            eta /= 2
        g, Y, res = g_new, Y_new, res_new
        trace.append(res)
        eta *= ETA_GROWTH
    return BalanceResult(GroupElement(g), Y, it, trace)
