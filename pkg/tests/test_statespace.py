import numpy as np
import hypothesis.strategies as st
from hypothesis import given, settings

from nesth2.statespace import (
    StateSpace,
    add,
    conjugate_transpose,
    hcat,
    is_block_lower_tf,
    lft_lower,
    lft_upper,
    minreal,
    series,
    triangularize_realization,
    vcat,
)

EVAL_POINTS = [0.3 + 0.7j, -1.2 + 2.0j, 2.5 - 0.4j, 0.0 + 1.0j]


def _random_system(rng, nx, nu, ny, stable=False):
    A = rng.standard_normal((nx, nx))
    if stable:
        A = A - (np.max(np.linalg.eigvals(A).real) + 1.0) * np.eye(nx)
    return StateSpace(A, rng.standard_normal((nx, nu)),
                      rng.standard_normal((ny, nx)), rng.standard_normal((ny, nu)))


def _tf_close(g1, g2, tol=1e-9):
    for s in EVAL_POINTS:
        if np.linalg.norm(g1.eval_at(s) - g2.eval_at(s)) > tol:
            return False
    return True


def test_shapes_and_defaults():
    g = StateSpace([[-1.0, 0.0], [0.0, -2.0]], [[1.0], [1.0]], [[1.0, 0.0]])
    assert g.nx == 2 and g.nu == 1 and g.ny == 1
    assert np.all(g.D == 0.0)
    s = 1.0 + 0.5j
    expect = 1.0 / (s + 1.0)
    assert abs(g.eval_at(s) - expect) < 1e-12


def test_scalar_and_gain_systems():
    g = StateSpace.gain([[2.0, 0.0], [1.0, 3.0]])
    assert g.nx == 0
    assert np.allclose(g.eval_at(1.0 + 1.0j), [[2.0, 0.0], [1.0, 3.0]])
    h = StateSpace(-4.0, 2.0, 1.0, 0.5)
    assert h.nx == 1 and h.nu == 1 and h.ny == 1
    assert abs(h.eval_at(0.0) - (0.5 + 2.0 / 4.0)) < 1e-12


def test_series_matches_pointwise_product():
    rng = np.random.default_rng(7)
    g1 = _random_system(rng, 3, 2, 4)
    g2 = _random_system(rng, 2, 3, 2)
    g = series(g1, g2)
    assert g.nx == 5 and g.nu == 3 and g.ny == 4
    for s in EVAL_POINTS:
        assert np.linalg.norm(g.eval_at(s) - g1.eval_at(s) @ g2.eval_at(s)) < 1e-9


def test_add_sub_neg():
    rng = np.random.default_rng(8)
    g1 = _random_system(rng, 3, 2, 2)
    g2 = _random_system(rng, 2, 2, 2)
    for s in EVAL_POINTS:
        assert np.linalg.norm(add(g1, g2).eval_at(s)
                              - (g1.eval_at(s) + g2.eval_at(s))) < 1e-9
        assert np.linalg.norm((g1 - g2).eval_at(s)
                              - (g1.eval_at(s) - g2.eval_at(s))) < 1e-9
        assert np.linalg.norm((-g1).eval_at(s) + g1.eval_at(s)) < 1e-12


def test_transpose_and_adjoint():
    rng = np.random.default_rng(9)
    g = _random_system(rng, 4, 2, 3)
    gt = g.transpose()
    ga = conjugate_transpose(g)
    for s in EVAL_POINTS:
        assert np.linalg.norm(gt.eval_at(s) - g.eval_at(s).T) < 1e-9
        # adjoint realization evaluates G(-s)^T
        assert np.linalg.norm(ga.eval_at(s) - g.eval_at(-s).T) < 1e-9


def test_hcat_vcat():
    rng = np.random.default_rng(10)
    g1 = _random_system(rng, 2, 2, 3)
    g2 = _random_system(rng, 3, 1, 3)
    h = hcat(g1, g2)
    assert h.nu == 3 and h.ny == 3
    g3 = _random_system(rng, 2, 2, 1)
    v = vcat(g1, g3)
    assert v.nu == 2 and v.ny == 4
    for s in EVAL_POINTS:
        assert np.linalg.norm(h.eval_at(s)
                              - np.hstack([g1.eval_at(s), g2.eval_at(s)])) < 1e-9
        assert np.linalg.norm(v.eval_at(s)
                              - np.vstack([g1.eval_at(s), g3.eval_at(s)])) < 1e-9


def test_subsystem_selects_rows_and_cols():
    rng = np.random.default_rng(11)
    g = _random_system(rng, 3, 3, 3)
    sub = g.subsystem([0, 2], [1])
    for s in EVAL_POINTS:
        assert np.linalg.norm(sub.eval_at(s) - g.eval_at(s)[np.ix_([0, 2], [1])]) < 1e-10


def test_markov_parameters():
    rng = np.random.default_rng(12)
    g = _random_system(rng, 3, 2, 2)
    mp = g.markov_parameters(4)
    assert len(mp) == 4
    assert np.allclose(mp[0], g.D)
    assert np.allclose(mp[1], g.C @ g.B)
    assert np.allclose(mp[2], g.C @ g.A @ g.B)
    assert np.allclose(mp[3], g.C @ g.A @ g.A @ g.B)


def _partition_eval(P, nz, nw, s):
    M = P.eval_at(s)
    return M[:nz, :nw], M[:nz, nw:], M[nz:, :nw], M[nz:, nw:]


def test_lft_lower_matches_formula():
    rng = np.random.default_rng(13)
    # plant with 2 performance outs / 2 dist ins, 1x1 control channel
    P = _random_system(rng, 3, 3, 3)
    P.D[2, 2] = 0.0  # keep the loop well posed at s = inf
    K = _random_system(rng, 2, 1, 1)
    cl = lft_lower(P, K, nz=2, nw=2)
    assert cl.nx == 5 and cl.ny == 2 and cl.nu == 2
    for s in EVAL_POINTS:
        P11, P12, P21, P22 = _partition_eval(P, 2, 2, s)
        Kv = K.eval_at(s)
        want = P11 + P12 @ Kv @ np.linalg.solve(np.eye(1) - P22 @ Kv, P21)
        assert np.linalg.norm(cl.eval_at(s) - want) < 1e-8


def test_lft_lower_rejects_ill_posed_loop():
    P = StateSpace.gain(np.array([[0.0, 1.0], [1.0, 1.0]]))
    K = StateSpace.gain(np.array([[1.0]]))
    try:
        lft_lower(P, K, nz=1, nw=1)
        assert False, "expected ValueError"
    except ValueError:
        pass


def test_lft_upper_matches_formula():
    rng = np.random.default_rng(14)
    P = _random_system(rng, 2, 3, 3)
    P.D[0, 0] = 0.0
    K = _random_system(rng, 1, 1, 1)
    cl = lft_upper(P, K, nq=1, np_=1)
    for s in EVAL_POINTS:
        M = P.eval_at(s)
        P11, P12 = M[:1, :1], M[:1, 1:]
        P21, P22 = M[1:, :1], M[1:, 1:]
        Kv = K.eval_at(s)
        want = P22 + P21 @ Kv @ np.linalg.solve(np.eye(1) - P11 @ Kv, P12)
        assert np.linalg.norm(cl.eval_at(s) - want) < 1e-8


def test_is_block_lower_tf():
    # block-lower by construction: x1 feeds only from u1
    A = np.array([[-1.0, 0.0], [2.0, -3.0]])
    B = np.eye(2)
    C = np.eye(2)
    g = StateSpace(A, B, C, np.zeros((2, 2)))
    assert is_block_lower_tf(g, (1, 1), (1, 1))
    g2 = StateSpace(np.array([[-1.0, 1.0], [2.0, -3.0]]), B, C, np.zeros((2, 2)))
    assert not is_block_lower_tf(g2, (1, 1), (1, 1))


def test_minreal_removes_cancelling_states():
    rng = np.random.default_rng(15)
    g = _random_system(rng, 3, 2, 2, stable=True)
    z = g - g
    assert z.nx == 6
    zr = minreal(z)
    assert zr.nx == 0
    assert _tf_close(zr, StateSpace.gain(np.zeros((2, 2))))


def test_minreal_keeps_transfer_function():
    rng = np.random.default_rng(16)
    g = _random_system(rng, 3, 2, 2, stable=True)
    # pad with an unreachable and an unobservable state
    A = np.zeros((5, 5))
    A[:3, :3] = g.A
    A[3, 3] = -0.5
    A[4, 4] = -0.7
    B = np.vstack([g.B, np.zeros((1, 2)), np.ones((1, 2))])
    C = np.hstack([g.C, np.ones((2, 1)), np.zeros((2, 1))])
    padded = StateSpace(A, B, C, g.D)
    red = minreal(padded)
    assert red.nx == 3
    assert _tf_close(red, g, tol=1e-8)


def test_triangularize_realization_recovers_structure():
    rng = np.random.default_rng(17)
    # build a 3-state block-lower system, then scramble the state basis
    A = np.array([[-1.0, 0.0, 0.0], [0.5, -2.0, 0.3], [1.0, 0.2, -3.0]])
    B = np.array([[1.0, 0.0], [0.4, 1.0], [0.2, 0.5]])
    C = np.array([[1.0, 0.0, 0.0], [0.3, 1.0, 0.7]])
    g = StateSpace(A, B, C, np.zeros((2, 2)))
    T = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
    Ti = np.linalg.inv(T)
    scrambled = StateSpace(Ti @ A @ T, Ti @ B, C @ T, g.D)
    tri, (n1, n2) = triangularize_realization(scrambled, (1, 1), (1, 1))
    assert (n1, n2) == (1, 2)
    assert np.all(tri.A[:n1, n1:] == 0.0)
    assert np.all(tri.B[:n1, 1:] == 0.0)
    assert np.all(tri.C[:1, n1:] == 0.0)
    assert _tf_close(tri, g, tol=1e-7)


def test_triangularize_realization_identity_on_already_triangular():
    A = np.array([[-1.0, 0.0], [0.5, -2.0]])
    g = StateSpace(A, np.eye(2), np.eye(2), np.zeros((2, 2)))
    tri, (n1, n2) = triangularize_realization(g, (1, 1), (1, 1))
    assert (n1, n2) == (1, 1)
    assert np.array_equal(tri.A, g.A)
    assert np.array_equal(tri.B, g.B)


def test_triangularize_realization_rejects_full_coupling():
    A = np.array([[-1.0, 1.0], [0.5, -2.0]])
    g = StateSpace(A, np.eye(2), np.eye(2), np.zeros((2, 2)))
    try:
        triangularize_realization(g, (1, 1), (1, 1))
        assert False, "expected ValueError"
    except ValueError:
        pass


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**6))
def test_series_associativity_pointwise(seed):
    rng = np.random.default_rng(seed)
    g1 = _random_system(rng, 2, 2, 2)
    g2 = _random_system(rng, 3, 2, 2)
    g3 = _random_system(rng, 1, 2, 2)
    left = series(series(g1, g2), g3)
    right = series(g1, series(g2, g3))
    s = 0.37 + 1.1j
    assert np.linalg.norm(left.eval_at(s) - right.eval_at(s)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**6))
def test_adjoint_is_involutive(seed):
    rng = np.random.default_rng(seed)
    g = _random_system(rng, 3, 2, 2)
    gg = conjugate_transpose(conjugate_transpose(g))
    s = -0.8 + 0.45j
    assert np.linalg.norm(gg.eval_at(s) - g.eval_at(s)) < 1e-9
