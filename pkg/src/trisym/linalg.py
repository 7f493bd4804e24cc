"""Dense complex linear algebra shared by the rest of the package.

Every rank decision in the package goes through :func:`numerical_rank`, so
the tolerance policy lives in one place.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


class TrisymError(Exception):
    """Base class for all errors raised by this package."""


class NumericalKernelError(TrisymError):
    """A dense decomposition failed to converge."""


class ShapeError(TrisymError, ValueError):
    """Operands have incompatible shapes."""


@dataclass(frozen=True)
class Tolerance:
    rank_rel: float = 1e-9
    residual_abs: float = 1e-12
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not self.rank_rel > 0:
            raise ValueError(f"rank_rel must be positive, got {self.rank_rel}")
        if not self.residual_abs > 0:
            raise ValueError(f"residual_abs must be positive, got {self.residual_abs}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


DEFAULT_TOL = Tolerance()


def as_cmatrix(M: Any, *, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D complex128 array."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def singular_values(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.complex128)
    if M.size == 0:
        return np.zeros(0)
    try:
        return np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalKernelError(f"SVD did not converge: {exc}") from exc


def _svd(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(M, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalKernelError(f"SVD did not converge: {exc}") from exc


def rank_cutoff(sv: np.ndarray, shape: tuple[int, int], tol: Tolerance) -> float:
    """Absolute threshold below which singular values count as zero."""
    if sv.size == 0:
        return 0.0
    return tol.rank_rel * float(sv[0]) * max(shape)


def _rank_from_sv(sv: np.ndarray, shape: tuple[int, int], tol: Tolerance) -> int:
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > rank_cutoff(sv, shape, tol)))


def numerical_rank(M: Any, tol: Tolerance = DEFAULT_TOL) -> int:
    A = as_cmatrix(M)
    return _rank_from_sv(singular_values(A), A.shape, tol)


def rank_gap(M: Any, tol: Tolerance = DEFAULT_TOL) -> tuple[int, float]:
    """Numerical rank together with the singular-value ratio across the cutoff.

    When the matrix has full rank (or is zero) there is no singular value on
    the far side, so the ratio is taken against the cutoff itself.
    """
    A = as_cmatrix(M)
    sv = singular_values(A)
    rank = _rank_from_sv(sv, A.shape, tol)
    if sv.size == 0 or sv[0] == 0.0:
        return 0, float("inf")
    cut = rank_cutoff(sv, A.shape, tol)
    if rank == 0:
        return 0, float("inf")
    below = sv[rank] if rank < sv.size else 0.0
    return rank, float(sv[rank - 1] / max(below, cut))


def nullspace_basis(M: Any, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal columns spanning the numerical kernel of ``M``."""
    A = as_cmatrix(M)
    n = A.shape[1]
    if A.shape[0] == 0 or n == 0:
        return np.eye(n, dtype=np.complex128)
    _, sv, vh = _svd(A)
    rank = _rank_from_sv(sv, A.shape, tol)
    return vh[rank:].conj().T.copy()


def range_basis(M: Any, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal columns spanning the numerical column space of ``M``."""
    A = as_cmatrix(M)
    if A.size == 0:
        return np.zeros((A.shape[0], 0), dtype=np.complex128)
    u, sv, _ = _svd(A)
    rank = _rank_from_sv(sv, A.shape, tol)
    return u[:, :rank].copy()


def subspace_closure(
    seed: Any, operators: Sequence[Any], tol: Tolerance = DEFAULT_TOL
) -> np.ndarray:
    """Smallest subspace containing ``seed`` and invariant under ``operators``.

    The columns of ``seed`` need not be independent. The result has
    orthonormal columns.
    """
    U0 = as_cmatrix(seed, name="seed")
    ops = [as_cmatrix(T, name="operator") for T in operators]
    n = U0.shape[0]
    for T in ops:
        if T.shape != (n, n):
            raise ShapeError(
                f"operator of shape {T.shape} does not act on seed with {n} rows"
            )
    # Normalise operators so the relative cutoff is not dominated by one of them.
    scaled = [T / s for T in ops if (s := np.linalg.norm(T)) > 0]
    U = range_basis(U0, tol) if U0.shape[1] else np.zeros((n, 0), complex)
    for _ in range(n + 1):
        if U.shape[1] in (0, n):
            break
        grown = range_basis(np.hstack([U] + [T @ U for T in scaled]), tol)
        if grown.shape[1] == U.shape[1]:
            break
        U = grown
    return U


def closure_margin(
    seed: Any, operators: Sequence[Any], depth: int
) -> float:
    """σ_n / σ_1 of the normalised Krylov matrix of words of length ≤ depth.

    This is a scale-free measure of how far the closure is from dropping
    dimension. It is zero when the closure is a proper subspace.
    """
    U0 = as_cmatrix(seed, name="seed")
    n = U0.shape[0]
    if n == 0:
        return 1.0
    s0 = np.linalg.norm(U0)
    if s0 == 0:
        return 0.0
    ops = [T / s for T in map(as_cmatrix, operators) if (s := np.linalg.norm(T)) > 0]
    level = U0 / s0
    blocks = [level]
    for _ in range(depth):
        level = np.hstack([T @ level for T in ops]) if ops else level[:, :0]
        if level.shape[1] == 0:
            break
        blocks.append(level)
    sv = singular_values(np.hstack(blocks))
    if sv.size < n or sv[0] == 0:
        return 0.0
    return float(sv[n - 1] / sv[0])


# --- randomness -----------------------------------------------------------

def sub_seed(master: int, counter: int) -> int:
    """Derive the ``counter``-th 64-bit child seed of ``master``.

    The scheme is ``SeedSequence(entropy=master, spawn_key=(counter,))``, so
    children are independent of how work is scheduled.
    """
    ss = np.random.SeedSequence(entropy=int(master) % 2**64, spawn_key=(int(counter),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(master: int, counter: int | None = None) -> np.random.Generator:
    seed = int(master) % 2**64 if counter is None else sub_seed(master, counter)
    return np.random.default_rng(seed)


def complex_gaussian(rng: np.random.Generator, shape: int | tuple[int, ...]) -> np.ndarray:
    """Entries distributed as (N(0,1) + i N(0,1)) / √2."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(complex_gaussian(rng, (n, n)))
    d = np.diag(r)
    return q * (d / np.abs(d))


# --- parallel helper --------------------------------------------------------

def thread_count() -> int:
    raw = os.environ.get("TRISYM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Ordered map, threaded when ``TRISYM_THREADS`` > 1."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- serialisation ----------------------------------------------------------

def complex_to_json(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(obj: Any) -> complex:
    if not (isinstance(obj, (list, tuple)) and len(obj) == 2):
        raise ValueError(f"complex number must be [re, im], got {obj!r}")
    re, im = obj
    return complex(float(re), float(im))


def matrix_to_json(M: Any) -> dict[str, Any]:
    A = as_cmatrix(M)
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in A.ravel()],
    }


def matrix_from_json(obj: Any) -> np.ndarray:
    if not isinstance(obj, dict) or not {"rows", "cols", "data"} <= obj.keys():
        raise ValueError("matrix must be an object with rows, cols and data")
    rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    if rows < 0 or cols < 0 or len(data) != rows * cols:
        raise ValueError(f"matrix data has {len(data)} entries, expected {rows}x{cols}")
    flat = np.array([complex_from_json(z) for z in data], dtype=np.complex128)
    return as_cmatrix(flat.reshape(rows, cols))
