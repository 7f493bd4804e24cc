import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import solved
from trisym.adhm import ADHMData, random_adhm
from trisym.linalg import ShapeError, complex_gaussian, make_rng, numerical_rank
from trisym.monad import (
    FRAMING_LINE,
    MONOMIALS,
    LineParam,
    MonadData,
    MonadError,
    SplittingError,
    build_monad,
    charge_rank_report,
    digits_from_h0,
    fiberwise_exactness,
    h0_twist,
    product_coefficients,
    random_line,
    splitting_type,
    verify_complex,
)
from trisym.sections import ADHMSection, act_section, tri_moment

ADHM_MONOMIALS = {"zz", "ww", "zw"}


def random_section(r, c, seed):
    return ADHMSection(random_adhm(r, c, seed), random_adhm(r, c, seed + 1))


def line_monad(r, c, alpha, beta):
    """Monad whose x, y coefficients vanish; only its restriction to ℓ matters."""
    n = 2 * c + r
    zeros = {"x": np.zeros((n, c)), "y": np.zeros((n, c))}
    zeros_b = {"x": np.zeros((c, n)), "y": np.zeros((c, n))}
    return MonadData(r, c, {**alpha, **zeros}, {**beta, **zeros_b})


def split_1_minus_1():
    e = np.eye(4)
    return line_monad(
        2, 1,
        {"z": e[:, :1], "w": e[:, 1:2]},
        {"z": e[2:3], "w": e[3:4]},
    )


def split_2_minus_2():
    az, aw = np.zeros((6, 2)), np.zeros((6, 2))
    bz, bw = np.zeros((2, 6)), np.zeros((2, 6))
    az[0, 0] = az[1, 1] = 1  # [[s,0],[t,s],[0,t]] on the first three rows
    aw[1, 0] = aw[2, 1] = 1
    bz[0, 3] = bz[1, 4] = 1  # [[s,t,0],[0,s,t]] on the last three columns
    bw[0, 4] = bw[1, 5] = 1
    return line_monad(2, 2, {"z": az, "w": aw}, {"z": bz, "w": bw})


# --- independent h⁰ oracle -------------------------------------------------------------

def _restrict(coeffs, L):
    return [sum(L.points[j, i] * coeffs[v] for i, v in enumerate("zwxy")) for j in range(2)]


def _graded_kernel_dim(M0, M1, k):
    """dim of degree-k polynomial vectors v(s,t) with (s·M0 + t·M1)·v = 0."""
    rows, cols = M0.shape
    big = np.zeros(((k + 2) * rows, (k + 1) * cols), dtype=complex)
    for e in range(k + 1):  # coefficient of s^(k−e) t^e
        big[e * rows:(e + 1) * rows, e * cols:(e + 1) * cols] += M0
        big[(e + 1) * rows:(e + 2) * rows, e * cols:(e + 1) * cols] += M1
    return big.shape[1] - numerical_rank(big)


def h0_oracle(M, L, k):
    """h⁰(E|_L(k)) from graded kernels (k ≥ 0) or Serre duality (k ≤ −2)."""
    a0, a1 = _restrict(M.alpha, L)
    b0, b1 = _restrict(M.beta, L)
    if k >= 0:
        return _graded_kernel_dim(b0, b1, k) - M.c * k
    assert k <= -2
    # E* is the cohomology of O(−1)^c → O^n → O(1)^c with maps βᵀ, αᵀ.
    dual = _graded_kernel_dim(a0.T, a1.T, -k - 2) - M.c * (-k - 2)
    return M.r * (k + 1) + dual


# --- construction ----------------------------------------------------------------------

def test_product_expansion_symbolic():
    S = random_section(2, 2, 3)
    coeffs = product_coefficients(build_monad(S, check=False))
    m = tri_moment(S)
    assert set(coeffs) == set(MONOMIALS) and len(MONOMIALS) == 10
    assert np.allclose(coeffs["zz"], m.m1)
    assert np.allclose(coeffs["ww"], m.m2)
    assert np.allclose(coeffs["zw"], m.m3)
    for mono in set(MONOMIALS) - ADHM_MONOMIALS:
        assert np.linalg.norm(coeffs[mono]) == 0.0


def test_zero_data_is_complex():
    S = ADHMSection(ADHMData.zeros(2, 2), ADHMData.zeros(2, 2))
    assert verify_complex(build_monad(S, check=False)).ok


def test_random_nonsolution_localized():
    rep = verify_complex(build_monad(random_section(2, 2, 0), check=False))
    assert not rep.ok
    assert set(rep.violations()) == ADHM_MONOMIALS


def test_perturbation_sensitivity(section22):
    delta = 1e-3 * complex_gaussian(make_rng(1), (2, 2))
    X1 = section22.X1
    bad = ADHMSection(ADHMData(2, 2, X1.A + delta, X1.B, X1.I, X1.J), section22.X2)
    rep = verify_complex(build_monad(bad, check=False))
    expected = np.linalg.norm(delta @ X1.B - X1.B @ delta)
    assert rep.coeff_norms["zz"] > 1e-5
    assert abs(rep.coeff_norms["zz"] - expected) < 1e-12


def test_build_monad_preconditions(section21):
    with pytest.raises(MonadError, match="does not solve"):
        build_monad(random_section(2, 1, 0))
    X = section21.X1
    with pytest.raises(MonadError, match="globally regular"):
        build_monad(ADHMSection(X, X))


def test_monad_shapes_and_json(section22):
    M = build_monad(section22)
    assert M.middle == 6
    assert all(A.shape == (6, 2) for A in M.alpha.values())
    back = MonadData.from_json(json.loads(json.dumps(M.to_json())))
    for v in "zwxy":
        assert np.array_equal(back.alpha[v], M.alpha[v])
        assert np.array_equal(back.beta[v], M.beta[v])
    with pytest.raises(ShapeError):
        MonadData(2, 1, {"z": np.zeros((4, 1))}, M.beta)


def test_charge_rank_report():
    assert charge_rank_report(build_monad(solved(2, 1, 0))) == {"rank": 2, "charge": 1}
    assert charge_rank_report(build_monad(solved(3, 2, 0))) == {"rank": 3, "charge": 2}


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32))
def test_gl_equivariance(seed):
    S = solved(2, 2, 1)
    g = complex_gaussian(make_rng(seed), (2, 2)) + 2 * np.eye(2)
    gi = np.linalg.inv(g)
    D = np.block([
        [g, np.zeros((2, 2)), np.zeros((2, 2))],
        [np.zeros((2, 2)), g, np.zeros((2, 2))],
        [np.zeros((2, 4)), np.eye(2)],
    ])
    M, Mg = build_monad(S), build_monad(act_section(g, S), check=False)
    for v in "zwxy":
        assert np.allclose(Mg.alpha[v], D @ M.alpha[v] @ gi, atol=1e-10)
        assert np.allclose(Mg.beta[v], g @ M.beta[v] @ np.linalg.inv(D), atol=1e-10)
    assert fiberwise_exactness(Mg, 20, seed).ok


# --- fibres --------------------------------------------------------------------------------

@pytest.mark.parametrize("rc", [(2, 1), (2, 2), (3, 2)])
def test_fiberwise_exactness(rc):
    M = build_monad(solved(*rc, 0))
    rep = fiberwise_exactness(M, 200)
    assert rep.ok
    assert set(rep.cohomology_ranks) == {rc[0]}
    assert rep.min_alpha_sv > 1e-6 and rep.min_beta_sv > 1e-6


def test_fiberwise_failure_at_witness():
    # c = 1 with I₂ = λI₁: I(z,w) vanishes at [−λ:1], and β drops rank at
    # p = (z, w, −A(z,w), −B(z,w)).
    lam = 0.5 + 0.5j
    rng = make_rng(2)
    I1 = complex_gaussian(rng, (1, 2))
    z1 = np.zeros((1, 1))
    X1 = ADHMData(2, 1, complex_gaussian(rng, (1, 1)), complex_gaussian(rng, (1, 1)), I1, complex_gaussian(rng, (2, 1)))
    X2 = ADHMData(2, 1, complex_gaussian(rng, (1, 1)), complex_gaussian(rng, (1, 1)), lam * I1, complex_gaussian(rng, (2, 1)))
    S = ADHMSection(X1, X2)
    M = build_monad(S, check=False)
    z, w = -lam, 1
    A = z * X1.A + w * X2.A
    B = z * X1.B + w * X2.B
    p = (z, w, -A[0, 0], -B[0, 0])
    assert numerical_rank(M.beta_at(p)) == 0
    assert numerical_rank(M.alpha_at(p)) == 1


# --- lines and splitting ------------------------------------------------------------------

def test_line_validation():
    with pytest.raises(ShapeError):
        LineParam(np.array([[1, 0, 0, 0], [2, 0, 0, 0]]))


def test_digits_from_h0_inversion():
    digits = [3, 0, -1, -2]
    K = 4
    h = {k: sum(max(0, a + k + 1) for a in digits) for k in range(-K - 2, K + 1)}
    assert digits_from_h0(h, 4, K) == digits
    assert digits_from_h0(h, 3, K) is None


@pytest.mark.parametrize("rc", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
def test_framing_line_trivial(rc):
    rep = splitting_type(build_monad(solved(*rc, 0)))
    assert rep.digits == [0] * rc[0]


@pytest.mark.parametrize("seed", range(4))
def test_random_lines_degree_zero(seed, section22):
    rep = splitting_type(build_monad(section22), random_line(seed))
    assert sum(rep.digits) == 0


def test_synthetic_splittings():
    assert splitting_type(split_1_minus_1()).digits == [1, -1]
    assert splitting_type(split_2_minus_2()).digits == [2, -2]


def test_stabilization_oracle(section21):
    M = build_monad(section21)
    L = random_line(5)
    rep = splitting_type(M, L)
    again = splitting_type(M, L, D_start=rep.D_used + 2)
    assert again.digits == rep.digits


@pytest.mark.parametrize("k", [-5, -4, -3, -2, 0, 1, 2, 3])
def test_h0_against_graded_oracle(k, section22):
    cases = [
        (build_monad(section22), FRAMING_LINE),
        (build_monad(section22), random_line(3)),
        (split_1_minus_1(), FRAMING_LINE),
        (split_2_minus_2(), FRAMING_LINE),
    ]
    for M, L in cases:
        assert h0_twist(M, L, k) == h0_oracle(M, L, k)


@pytest.mark.parametrize("pad", [0, 1, 3])
def test_h0_independent_of_padding(pad):
    M = split_2_minus_2()
    expected = [max(0, k + 3) + max(0, k - 1) for k in range(-4, 3)]  # O(2) ⊕ O(−2)
    assert [h0_twist(M, FRAMING_LINE, k, pad=pad) for k in range(-4, 3)] == expected


def test_splitting_not_stabilized():
    with pytest.raises(SplittingError, match="not stabilized"):
        splitting_type(split_2_minus_2(), D_max=1)
