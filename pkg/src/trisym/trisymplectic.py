"""Linear algebra of trisymplectic vector spaces.

A trisymplectic span is a 3-dimensional space of complex 2-forms on ℂ^{2n}
whose members all have rank 0, n or 2n. Each span comes with a 4-dimensional
algebra H ≅ Mat(2), a quadric Q cutting out its degenerate members, and
(after a choice of quaternionic basis in H) an invariant symmetric form g.

Bilinear forms are stored as matrices M with Ω(x, y) = xᵀ M y, and
restriction to a subspace with basis B is therefore Bᵀ M B (transpose, not
adjoint).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg

from .linalg import (
    DEFAULT_TOL,
    Tolerance,
    TrisymError,
    as_cmatrix,
    complex_gaussian,
    make_rng,
    matrix_from_json,
    matrix_to_json,
    nullspace_basis,
    numerical_rank,
    rank_cutoff,
    singular_values,
    subspace_closure,
)


class TrisymplecticError(TrisymError):
    """A span, algebra or basis violates a trisymplectic requirement."""


def _unit_sphere_c3(rng: np.random.Generator) -> np.ndarray:
    v = complex_gaussian(rng, 3)
    return v / np.linalg.norm(v)


# --- types ------------------------------------------------------------------

@dataclass(frozen=True)
class TriSpan:
    """Ordered basis (Ω₁, Ω₂, Ω₃) of a 3-dimensional space of 2-forms."""

    forms: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __init__(self, forms: Sequence[Any]):
        if len(forms) != 3:
            raise TrisymplecticError(f"a TriSpan needs three forms, got {len(forms)}")
        mats = tuple(as_cmatrix(M, name="2-form") for M in forms)
        shape = mats[0].shape
        if shape[0] != shape[1] or shape[0] % 2 or shape[0] == 0:
            raise TrisymplecticError(f"2-forms must be square of even size, got {shape}")
        for M in mats:
            if M.shape != shape:
                raise TrisymplecticError("forms act on spaces of different dimension")
            if np.max(np.abs(M + M.T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
                raise TrisymplecticError("form is not skew-symmetric")
        if numerical_rank(np.stack([M.ravel() for M in mats])) != 3:
            raise TrisymplecticError("forms are linearly dependent")
        object.__setattr__(self, "forms", mats)

    @property
    def dim(self) -> int:
        return self.forms[0].shape[0]

    @property
    def n(self) -> int:
        return self.dim // 2

    def combine(self, coeffs: Sequence[complex]) -> np.ndarray:
        a, b, c = coeffs
        return a * self.forms[0] + b * self.forms[1] + c * self.forms[2]

    def to_json(self) -> dict[str, Any]:
        return {"dim": self.dim, "forms": [matrix_to_json(M) for M in self.forms]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> TriSpan:
        span = cls([matrix_from_json(m) for m in obj["forms"]])
        if int(obj.get("dim", span.dim)) != span.dim:
            raise ValueError("declared dim does not match form size")
        return span


@dataclass(frozen=True)
class RankReport:
    ranks: list[int]
    ok: bool
    notes: list[str] = field(default_factory=list)

    def histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(self.ranks).items()))

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "ranks": {str(k): v for k, v in self.histogram().items()},
            "residuals": {},
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class Cluster:
    value: complex
    multiplicity: int


@dataclass(frozen=True)
class HAlgebra:
    """Basis (𝟙, e₁, e₂, e₃) of an associative subalgebra of End(ℂ^{2n}).

    ``structure[i, j]`` holds the coordinates of ``generators[i] @
    generators[j]`` in the basis.
    """

    generators: tuple[np.ndarray, ...]
    structure: np.ndarray
    closure_residual: float
    trace_form: np.ndarray

    @classmethod
    def from_generators(cls, mats: Sequence[Any], tol: Tolerance = DEFAULT_TOL) -> HAlgebra:
        mats = [as_cmatrix(M) for M in mats]
        dim = mats[0].shape[0]
        ident = np.eye(dim, dtype=complex)
        traceless = [M - np.trace(M) / dim * ident for M in mats]
        stack = np.stack([M.ravel() for M in traceless], axis=1)
        u, sv, _ = np.linalg.svd(stack, full_matrices=False)
        keep = int(np.count_nonzero(sv > tol.rank_rel * max(sv[0], 1e-300) * max(stack.shape)))
        if keep != 3:
            raise TrisymplecticError(
                f"generators span an algebra of dimension {keep + 1}, expected 4"
            )
        # Frobenius-orthonormal traceless part, rescaled to operator size O(1).
        basis = [ident] + [np.sqrt(dim) * u[:, k].reshape(dim, dim) for k in range(3)]
        flat = np.stack([b.ravel() for b in basis], axis=1)
        structure = np.empty((4, 4, 4), dtype=complex)
        worst = 0.0
        for i, x in enumerate(basis):
            for j, y in enumerate(basis):
                prod = (x @ y).ravel()
                coef, *_ = np.linalg.lstsq(flat, prod, rcond=None)
                structure[i, j] = coef
                worst = max(worst, float(np.linalg.norm(flat @ coef - prod)))
        trace_form = np.array([[np.trace(x @ y) for y in basis] for x in basis])
        return cls(tuple(basis), structure, worst, trace_form)

    @property
    def dimension(self) -> int:
        return len(self.generators)

    def is_closed(self, tol: float = 1e-8) -> bool:
        return self.closure_residual <= tol

    def trace_form_rank(self, tol: Tolerance = DEFAULT_TOL) -> int:
        return numerical_rank(self.trace_form, tol)

    def commutator_norm(self) -> float:
        e = self.generators[1:]
        return max(float(np.linalg.norm(x @ y - y @ x)) for x in e for y in e)


@dataclass(frozen=True)
class QuaternionicBasis:
    I: np.ndarray
    J: np.ndarray
    K: np.ndarray

    def relation_residuals(self) -> dict[str, float]:
        I, J, K = self.I, self.J, self.K
        one = np.eye(I.shape[0])
        return {
            "I^2+1": float(np.linalg.norm(I @ I + one)),
            "J^2+1": float(np.linalg.norm(J @ J + one)),
            "K^2+1": float(np.linalg.norm(K @ K + one)),
            "IJ-K": float(np.linalg.norm(I @ J - K)),
            "JK-I": float(np.linalg.norm(J @ K - I)),
            "KI-J": float(np.linalg.norm(K @ I - J)),
        }

    def max_residual(self) -> float:
        return max(self.relation_residuals().values())

    def operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.I, self.J, self.K


@dataclass(frozen=True)
class QForm:
    """Symmetric 3×3 form on the coefficient space, largest entry pinned to 1."""

    matrix: np.ndarray
    fit_residual: float

    def __call__(self, coeffs: Sequence[complex]) -> complex:
        c = np.asarray(coeffs, dtype=complex)
        return complex(c @ self.matrix @ c)

    def normalized_value(self, coeffs: Sequence[complex]) -> float:
        """|Q(c, c)| for c rescaled to the unit sphere."""
        c = np.asarray(coeffs, dtype=complex)
        return abs(self(c / np.linalg.norm(c)))


# --- pencils and sampling ---------------------------------------------------

def pencil_degenerate_params(
    O1: Any, O2: Any, tol: Tolerance = DEFAULT_TOL
) -> list[Cluster]:
    """Values λ at which Ω₁ − λΩ₂ drops rank, merged into clusters.

    Clusters use radius 1e-6·max|λ|; the reported value is the cluster mean.
    """
    O1, O2 = as_cmatrix(O1), as_cmatrix(O2)
    if O1.shape != O2.shape:
        raise TrisymplecticError("pencil forms have different shapes")
    if numerical_rank(O2, tol) != O2.shape[0]:
        raise TrisymplecticError("pencil base degenerate")
    lam = scipy.linalg.eigvals(O1, O2)
    radius = 1e-6 * max(1.0, float(np.max(np.abs(lam))))
    groups: list[list[complex]] = []
    for z in sorted(lam, key=lambda z: (z.real, z.imag)):
        for g in groups:
            if abs(z - np.mean(g)) <= radius:
                g.append(z)
                break
        else:
            groups.append([z])
    return [Cluster(complex(np.mean(g)), len(g)) for g in groups]


def _degenerate_coefficients(
    span: TriSpan, rng: np.random.Generator, tol: Tolerance
) -> list[tuple[np.ndarray, int]]:
    """Coefficient vectors of degenerate members from one random pencil."""
    a, b = _unit_sphere_c3(rng), _unit_sphere_c3(rng)
    out = []
    for cl in pencil_degenerate_params(span.combine(a), span.combine(b), tol):
        c = a - cl.value * b
        out.append((c / np.linalg.norm(c), cl.multiplicity))
    return out


def rank_profile(
    span: TriSpan,
    n_samples: int = 100,
    seed: int = 0,
    tol: Tolerance = DEFAULT_TOL,
    n_pencils: int | None = None,
) -> RankReport:
    """Ranks of random members, the basis forms, and pencil-degenerate members.

    Generic members almost surely have full rank, so the trichotomy is only
    probed meaningfully by the degenerate samples; ``n_pencils`` random
    pencils (default ``max(2, n_samples // 10)``) contribute those.
    """
    n, dim = span.n, span.dim
    ranks = [numerical_rank(M, tol) for M in span.forms]
    for k in range(n_samples):
        ranks.append(numerical_rank(span.combine(_unit_sphere_c3(make_rng(seed, k))), tol))
    notes = []
    n_pencils = max(2, n_samples // 10) if n_pencils is None else n_pencils
    for k in range(n_pencils):
        rng = make_rng(seed, n_samples + k)
        try:
            samples = _degenerate_coefficients(span, rng, tol)
        except TrisymplecticError as exc:
            notes.append(f"pencil {k} skipped: {exc}")
            continue
        ranks.extend(numerical_rank(span.combine(c), tol) for c, _ in samples)
    allowed = {0, n, dim}
    bad = sorted(set(ranks) - allowed)
    if bad:
        notes.append(f"ranks outside {{0, {n}, {dim}}}: {bad}")
    return RankReport(ranks, not bad, notes)


def _two_degenerate(span: TriSpan, rng: np.random.Generator, tol: Tolerance):
    n = span.n
    a, b = _unit_sphere_c3(rng), _unit_sphere_c3(rng)
    clusters = pencil_degenerate_params(span.combine(a), span.combine(b), tol)
    if len(clusters) != 2 or any(c.multiplicity != n for c in clusters):
        raise TrisymplecticError(
            "not trisymplectic: pencil clusters "
            f"{[(c.value, c.multiplicity) for c in clusters]}"
        )
    kernels = []
    for cl in clusters:
        S = nullspace_basis(span.combine(a - cl.value * b), tol)
        if S.shape[1] != n:
            raise TrisymplecticError(
                f"not trisymplectic: degenerate member has kernel of dim {S.shape[1]}"
            )
        kernels.append(S)
    return kernels


def web_projector(S: np.ndarray, S2: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Projection onto span(S) along span(S2)."""
    P = np.hstack([S, S2])
    if P.shape[0] != P.shape[1] or numerical_rank(P, tol) != P.shape[0]:
        raise TrisymplecticError("annihilator overlap")
    coords = np.linalg.solve(P, np.eye(P.shape[0]))
    return S @ coords[: S.shape[1]]


def build_h_algebra(
    span: TriSpan, tol: Tolerance = DEFAULT_TOL, seed: int = 0
) -> HAlgebra:
    """Algebra generated by projections between null spaces of degenerate forms."""
    pilot = rank_profile(span, n_samples=8, seed=seed, tol=tol, n_pencils=2)
    if not pilot.ok:
        raise TrisymplecticError("not trisymplectic: " + "; ".join(pilot.notes))
    kernels = []
    for k in range(2):
        kernels.extend(_two_degenerate(span, make_rng(seed, 1000 + k), tol))
    projections = [
        web_projector(S, T, tol)
        for i, S in enumerate(kernels)
        for j, T in enumerate(kernels)
        if i != j
    ]
    H = HAlgebra.from_generators([np.eye(span.dim)] + projections, tol)
    if not H.is_closed(1e-8 * np.sqrt(span.dim)):
        raise TrisymplecticError(f"algebra not closed (residual {H.closure_residual:.2e})")
    if H.trace_form_rank(tol) != 4:
        raise TrisymplecticError("trace form of H is degenerate")
    if H.commutator_norm() <= 1e-8:
        raise TrisymplecticError("H is commutative")
    return H


# --- quaternions and metrics ------------------------------------------------

def quaternionic_basis_from_h(H: HAlgebra, relation_tol: float = 1e-8) -> QuaternionicBasis:
    """Gram–Schmidt on the traceless part of H for b(x,y) = Tr(xy)/2n.

    In Mat(2) every traceless x satisfies x² = b(x,x)·𝟙, so unit vectors with
    b = −1 square to −𝟙. K is defined as IJ, fixing the orientation.
    """
    dim = H.generators[0].shape[0]

    def b(x, y):
        return np.trace(x @ y) / dim

    pool = list(H.generators[1:])
    pool += [x + y for i, x in enumerate(pool) for y in pool[i + 1 :]]
    pool += [x + 1j * y for i, x in enumerate(pool[:3]) for y in pool[i + 1 : 3]]

    def pick(cands):
        biggest = max(np.linalg.norm(x) for x in cands)
        cands = [x for x in cands if np.linalg.norm(x) > 1e-6 * biggest]
        best = max(cands, key=lambda x: abs(b(x, x)) / (np.linalg.norm(x) ** 2 / dim))
        val = b(best, best)
        if abs(val) <= 1e-12 * np.linalg.norm(best) ** 2 / dim:
            raise TrisymplecticError("algebra not quaternionic: traceless part is isotropic")
        return best / np.sqrt(-val)

    I = pick(pool)
    rest = [x - b(x, I) / b(I, I) * I for x in pool]
    J = pick(rest)
    qb = QuaternionicBasis(I, J, I @ J)
    if qb.max_residual() > relation_tol:
        raise TrisymplecticError(
            f"algebra not quaternionic: relation residual {qb.max_residual():.2e}"
        )
    return qb


def _is_invariant(G: np.ndarray, qb: QuaternionicBasis, tol: float) -> bool:
    scale = max(np.linalg.norm(G), 1e-300)
    return all(np.linalg.norm(X.T @ G @ X - G) <= tol * scale for X in qb.operators())


def trispan_from_metric(
    g: Any, qb: QuaternionicBasis, tol: Tolerance = DEFAULT_TOL, invariance_tol: float = 1e-8
) -> TriSpan:
    """(Ω_I, Ω_J, Ω_K) with Ω_L(x, y) = g(x, L y)."""
    G = as_cmatrix(g, name="metric")
    if G.shape != qb.I.shape:
        raise TrisymplecticError("metric and quaternionic basis have different sizes")
    if np.linalg.norm(G - G.T) > 1e-10 * max(np.linalg.norm(G), 1e-300):
        raise TrisymplecticError("metric is not symmetric")
    if numerical_rank(G, tol) != G.shape[0]:
        raise TrisymplecticError("metric degenerate")
    if not _is_invariant(G, qb, invariance_tol):
        raise TrisymplecticError("metric not SL(2)-invariant")
    forms = [G @ L for L in qb.operators()]
    return TriSpan([(M - M.T) / 2 for M in forms])


def metric_from_trispan(
    span: TriSpan, H: HAlgebra, qb: QuaternionicBasis, tol: Tolerance = DEFAULT_TOL
) -> np.ndarray:
    """Recover g, up to scale, from the member of the span fixed by I.

    The result is normalised so its largest-magnitude entry equals 1.
    """
    I = qb.I
    # Infinitesimal rotation by I acting on each basis form.
    moved = np.stack([(I.T @ M + M @ I).ravel() for M in span.forms], axis=1)
    kernel = nullspace_basis(moved, Tolerance(max(tol.rank_rel, 1e-9), tol.residual_abs))
    if kernel.shape[1] != 1:
        raise TrisymplecticError(
            f"span/basis mismatch: {kernel.shape[1]}-dimensional space of I-fixed forms"
        )
    omega_I = span.combine(kernel[:, 0])
    G = -omega_I @ I
    G = (G + G.T) / 2
    if numerical_rank(G, tol) != G.shape[0]:
        raise TrisymplecticError("span/basis mismatch: recovered metric is degenerate")
    pivot = G.flat[np.argmax(np.abs(G))]
    return G / pivot


# --- the quadric --------------------------------------------------------------

def _sym_monomials(c: np.ndarray) -> np.ndarray:
    c1, c2, c3 = c
    return np.array([c1 * c1, c2 * c2, c3 * c3, 2 * c1 * c2, 2 * c1 * c3, 2 * c2 * c3])


def _sym_from_vector(q: np.ndarray) -> np.ndarray:
    return np.array([[q[0], q[3], q[4]], [q[3], q[1], q[5]], [q[4], q[5], q[2]]])


def degenerate_samples(
    span: TriSpan, count: int, seed: int = 0, tol: Tolerance = DEFAULT_TOL
) -> list[np.ndarray]:
    """At least ``count`` unit coefficient vectors of degenerate members."""
    out: list[np.ndarray] = []
    k = 0
    while len(out) < count:
        rng = make_rng(seed, 2000 + k)
        k += 1
        for S in _two_degenerate_coeffs(span, rng, tol):
            out.append(S)
    return out


def _two_degenerate_coeffs(span: TriSpan, rng, tol):
    samples = _degenerate_coefficients(span, rng, tol)
    if len(samples) != 2 or any(m != span.n for _, m in samples):
        raise TrisymplecticError(
            f"not trisymplectic: pencil multiplicities {[m for _, m in samples]}"
        )
    return [c for c, _ in samples]


def quadratic_form_q(
    span: TriSpan,
    tol: Tolerance = DEFAULT_TOL,
    seed: int = 0,
    n_points: int = 12,
    fit_tol: float = 1e-8,
) -> QForm:
    """Least-squares symmetric form vanishing on the degenerate members."""
    pts = degenerate_samples(span, max(n_points, 12), seed, tol)
    design = np.stack([_sym_monomials(c) for c in pts])
    _, sv, vh = np.linalg.svd(design)
    residual = float(sv[-1] / sv[0])
    if residual > fit_tol or sv[-2] / sv[0] <= fit_tol:
        raise TrisymplecticError("no quadric through degenerate locus")
    Q = _sym_from_vector(vh[-1].conj())
    Q = Q / Q.flat[np.argmax(np.abs(Q))]
    return QForm(Q, residual)


def conic_point(Q: np.ndarray) -> np.ndarray:
    """A deterministic nonzero isotropic vector of the symmetric form Q."""
    u, v = np.eye(3, dtype=complex)[:2]
    quv, qvv, quu = u @ Q @ v, v @ Q @ v, u @ Q @ u
    if abs(qvv) <= 1e-14:
        return v
    disc = np.sqrt(quv * quv - qvv * quu + 0j)
    s = (-quv + disc) / qvv
    p = u + s * v
    return p / np.linalg.norm(p)


def conic_parametrization(Q: np.ndarray, t: Any) -> np.ndarray:
    """Stereographic map ℂP¹ → {Q = 0} through the base point of :func:`conic_point`.

    ``t`` is a complex affine parameter, a pair ``(t0, t1)``, or ``"infinity"``.
    """
    p0 = conic_point(Q)
    comp = nullspace_basis(p0.conj()[None, :])  # Hermitian complement, 2 columns
    if isinstance(t, str):
        if t != "infinity":
            raise ValueError(f"unknown ℂP¹ point {t!r}")
        t0, t1 = 0.0, 1.0
    elif np.ndim(t) == 0:
        t0, t1 = 1.0, complex(t)
    else:
        t0, t1 = t
    q = t0 * comp[:, 0] + t1 * comp[:, 1]
    x = (q @ Q @ q) * p0 - 2 * (p0 @ Q @ q) * q
    return x / np.linalg.norm(x)


def null_family(
    span: TriSpan, qform: QForm, t_samples: Sequence[Any], tol: Tolerance = DEFAULT_TOL
) -> list[tuple[Any, np.ndarray]]:
    """Null spaces S_t of the degenerate members Ω_t along the conic."""
    if numerical_rank(qform.matrix, tol) != 3:
        raise TrisymplecticError("degenerate quadric")
    out = []
    for t in t_samples:
        S = nullspace_basis(span.combine(conic_parametrization(qform.matrix, t)), tol)
        if S.shape[1] != span.n:
            raise TrisymplecticError(
                f"null space at t={t!r} has dimension {S.shape[1]}, expected {span.n}"
            )
        out.append((t, S))
    return out


# --- subspaces and quotients --------------------------------------------------

def _restrict(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    return B.T @ M @ B


def _restricted_rank(M: np.ndarray, B: np.ndarray, tol: Tolerance) -> int:
    """Rank of M on the orthonormal columns B, judged on the scale of M itself.

    A relative cutoff on the restriction alone would promote roundoff to
    full rank when the restriction vanishes.
    """
    sv = singular_values(_restrict(M, B))
    scale = singular_values(M)
    if sv.size == 0 or scale.size == 0:
        return 0
    return int(np.count_nonzero(sv > rank_cutoff(scale, M.shape, tol)))


def is_nondegenerate_subspace(
    span: TriSpan, H: HAlgebra, W: Any, tol: Tolerance = DEFAULT_TOL, seed: int = 0
) -> bool:
    """Whether a generic member of the span restricts non-degenerately to H·W."""
    HW = subspace_closure(as_cmatrix(W), H.generators, tol)
    if HW.shape[1] == 0:
        return True
    omega = span.combine(_unit_sphere_c3(make_rng(seed)))
    return _restricted_rank(omega, HW, tol) == HW.shape[1]


def quotient_tangent(
    span: TriSpan, H: HAlgebra, g: Any, gm: Any, tol: Tolerance = DEFAULT_TOL
) -> TriSpan:
    """Restrict the span to the g-orthogonal complement of H·gm."""
    G = as_cmatrix(g, name="metric")
    gm = as_cmatrix(gm, name="group directions")
    if gm.shape[1] == 0:
        return span
    W1 = subspace_closure(gm, H.generators, tol)
    if _restricted_rank(G, W1, tol) != W1.shape[1]:
        raise TrisymplecticError("degenerate group direction")
    W = nullspace_basis(W1.T @ G, tol)
    return TriSpan([_restrict(M, W) for M in span.forms])


# --- the flat model -----------------------------------------------------------

EPS2 = np.array([[0, 1], [-1, 0]], dtype=complex)
_Q2 = (
    np.array([[1j, 0], [0, -1j]]),
    np.array([[0, 1], [-1, 0]], dtype=complex),
    np.array([[0, 1j], [1j, 0]]),
)


def standard_symplectic(m: int) -> np.ndarray:
    """Standard symplectic matrix on ℂ^{2m}."""
    return np.kron(EPS2, np.eye(m))


def flat_model(n: int, omega0: Any | None = None) -> tuple[np.ndarray, QuaternionicBasis]:
    """The metric Ω_{V₀}⊗Ω_{ℂ²} on V₀⊗ℂ² with its quaternionic basis.

    ``n`` is dim V₀, so the model lives on ℂ^{2n}. Any non-degenerate skew
    ``omega0`` on V₀ yields an SL(2)-invariant symmetric metric. The product
    needs n even for the default standard form.
    """
    if omega0 is None:
        if n % 2:
            raise ValueError("default symplectic V₀ needs even dimension")
        omega0 = standard_symplectic(n // 2)
    omega0 = as_cmatrix(omega0)
    one = np.eye(omega0.shape[0])
    qb = QuaternionicBasis(*(np.kron(one, q) for q in _Q2))
    return np.kron(omega0, EPS2), qb
