"""Dense solvers for the small matrix equations behind H2 synthesis.

Algorithms are chosen for desk-scale robustness rather than asymptotic speed:
Riccati equations go through the eigendecomposition of the associated 2n x 2n
Hamiltonian, and Lyapunov / Sylvester equations are vectorized with Kronecker
products into one dense solve. Sizes here are at most a few hundred states, so
neither choice is a bottleneck.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .statespace import StateSpace, _mat

HURWITZ_MARGIN = 1e-9
AXIS_TOL = 1e-7
RESIDUAL_TOL = 1e-8
RANK_TOL = 1e-9


class SolverError(RuntimeError):
    """A solver's preconditions failed or its result did not verify."""


def is_hurwitz(A, margin=HURWITZ_MARGIN):
    """True iff every eigenvalue of A satisfies Re(lambda) < -margin."""
    A = _mat(A, "A")
    if A.shape[0] == 0:
        return True
    return bool(np.max(np.linalg.eigvals(A).real) < -margin)


def solve_lyapunov(A, Q):
    """Solve A P + P A^T + Q = 0 by Kronecker vectorization.

    Raises SolverError when the equation is singular (A and -A^T share an
    eigenvalue). If Q is symmetric the result is symmetrized.
    """
    A = _mat(A, "A")
    Q = _mat(Q, "Q")
    n = A.shape[0]
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
    if n == 0:
        return np.zeros((0, 0))
    M = np.kron(np.eye(n), A) + np.kron(A, np.eye(n))
    try:
        vec = np.linalg.solve(M, -Q.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular Lyapunov operator: {exc}") from exc
    P = vec.reshape((n, n), order="F")
    if np.linalg.norm(Q - Q.T) <= 1e-12 * max(1.0, np.linalg.norm(Q)):
        P = 0.5 * (P + P.T)
    res = np.linalg.norm(A @ P + P @ A.T + Q)
    scale = 1.0 + np.linalg.norm(Q) + 2.0 * np.linalg.norm(A) * np.linalg.norm(P)
    if res > RESIDUAL_TOL * scale:
        raise SolverError(f"Lyapunov residual {res:.2e} exceeds tolerance")
    return P


def solve_sylvester(A1, A0, A2):
    """Solve A1 * Om + Om * A2 + A0 = 0 for Om by Kronecker vectorization."""
    A1 = _mat(A1, "A1")
    A0 = _mat(A0, "A0")
    A2 = _mat(A2, "A2")
    n, m = A0.shape
    if A1.shape != (n, n) or A2.shape != (m, m):
        raise ValueError("incompatible Sylvester dimensions")
    if n == 0 or m == 0:
        return np.zeros((n, m))
    M = np.kron(np.eye(m), A1) + np.kron(A2.T, np.eye(n))
    try:
        vec = np.linalg.solve(M, -A0.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular Sylvester operator: {exc}") from exc
    Om = vec.reshape((n, m), order="F")
    res = np.linalg.norm(A1 @ Om + Om @ A2 + A0)
    scale = (1.0 + np.linalg.norm(A0)
             + (np.linalg.norm(A1) + np.linalg.norm(A2)) * np.linalg.norm(Om))
    if res > RESIDUAL_TOL * scale:
        raise SolverError(f"Sylvester residual {res:.2e} exceeds tolerance")
    return Om


def pbh_stabilizable(A, B, margin=HURWITZ_MARGIN, rank_tol=RANK_TOL):
    """PBH test: every eigenvalue with Re(lambda) >= -margin is controllable."""
    A = _mat(A, "A")
    B = _mat(B, "B")
    n = A.shape[0]
    if n == 0:
        return True
    scale = max(1.0, np.linalg.norm(A) + np.linalg.norm(B))
    for lam in np.linalg.eigvals(A):
        if lam.real < -margin:
            continue
        M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
        if np.linalg.svd(M, compute_uv=False)[-1] <= rank_tol * scale:
            return False
    return True


def pbh_detectable(C, A, margin=HURWITZ_MARGIN, rank_tol=RANK_TOL):
    """PBH test: every eigenvalue with Re(lambda) >= -margin is observable."""
    return pbh_stabilizable(_mat(A, "A").T, _mat(C, "C").T, margin, rank_tol)


def _finite_pencil_eigs(M, N):
    """Finite generalized eigenvalues of (M, N), infinite ones dropped."""
    import scipy.linalg as sla

    w = sla.eig(M, N, right=False, homogeneous_eigvals=True)
    alpha = np.asarray(w[0]).ravel()
    beta = np.asarray(w[1]).ravel()
    keep = np.abs(beta) > 1e-10 * np.maximum(1.0, np.abs(alpha))
    return alpha[keep] / beta[keep]


def axis_rank_ok(A, B, C, D, side="column", tol=AXIS_TOL):
    """Check full column (or row) rank of [A - iwI, B; C, D] for all real w.

    Equivalent to: the system pencil ([A, B; C, D], diag(I, 0)) has full normal
    rank and no finite generalized eigenvalue (invariant zero) within `tol` of
    the imaginary axis. Non-square pencils are squared up with two seeded
    random augmentations and only axis zeros appearing in both runs count, so
    spurious augmentation zeros cannot trigger a failure.
    """
    A = _mat(A, "A")
    B = _mat(B, "B")
    C = _mat(C, "C")
    D = _mat(D, "D")
    if side == "row":
        return axis_rank_ok(A.T, C.T, B.T, D.T, side="column", tol=tol)
    if side != "column":
        raise ValueError("side must be 'column' or 'row'")
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]
    if p < m:
        return False  # fewer rows than columns below the state block
    # Normal rank at a generic off-axis point.
    s0 = 0.9501 + 1.2311j
    pencil0 = np.block([[A - s0 * np.eye(n), B], [C, D]])
    if np.linalg.matrix_rank(pencil0, tol=None) < n + m:
        return False
    scale = max(1.0, np.linalg.norm(A))

    def axis_zeros(Baug, Daug):
        M = np.block([[A, Baug], [C, Daug]])
        N = np.zeros_like(M)
        N[:n, :n] = np.eye(n)
        zeros = _finite_pencil_eigs(M, N)
        return zeros[np.abs(zeros.real) <= tol * max(1.0, scale)]

    if p == m:
        return axis_zeros(B, D).size == 0
    # Tall pencil: add p - m random input columns, twice, and intersect.
    hits = []
    for seed in (20260822, 20260823):
        rng = np.random.default_rng(seed)
        Bx = rng.standard_normal((n, p - m))
        Dx = rng.standard_normal((p, p - m))
        hits.append(axis_zeros(np.hstack([B, Bx]), np.hstack([D, Dx])))
    for z in hits[0]:
        if hits[1].size and np.min(np.abs(hits[1] - z)) <= 1e-5 * (1.0 + abs(z)):
            return False
    return True


@dataclass
class AreSolution:
    """Stabilizing Riccati solution X, its gain K and the verified residual."""

    X: np.ndarray
    K: np.ndarray
    residual: float


def solve_are(A, B, C, D, hurwitz_margin=HURWITZ_MARGIN, axis_tol=AXIS_TOL,
              residual_tol=RESIDUAL_TOL):
    """Stabilizing solution of the Riccati equation with cross weights.

        A^T X + X A + C^T C
            - (X B + C^T D) (D^T D)^{-1} (B^T X + D^T C) = 0

    returning AreSolution(X, K, residual) with K = -(D^T D)^{-1}(B^T X + D^T C)
    and A + B K Hurwitz.

    Method: absorb the cross term, form the 2n x 2n Hamiltonian, take the
    eigenvectors of its n strictly-stable eigenvalues (complex arithmetic is
    fine at this scale) and solve X from the stacked basis. The result is
    symmetrized and verified: residual, positive semidefiniteness and the
    closed-loop Hurwitz property are all checked.

    Raises SolverError if (A, B) is not stabilizable, the axis-rank condition
    fails, D^T D is not positive definite, a Hamiltonian eigenvalue falls in
    the +-hurwitz_margin band, or any verification fails.
    """
    A = _mat(A, "A")
    B = _mat(B, "B")
    C = _mat(C, "C")
    D = _mat(D, "D")
    n = A.shape[0]
    m = B.shape[1]
    R = D.T @ D
    if np.linalg.eigvalsh(0.5 * (R + R.T)).min() <= 0.0:
        raise SolverError("control weight D^T D is not positive definite")
    if not pbh_stabilizable(A, B, margin=hurwitz_margin):
        raise SolverError("(A, B) is not stabilizable")
    if not axis_rank_ok(A, B, C, D, side="column", tol=axis_tol):
        raise SolverError("axis-rank condition fails: the pencil "
                          "[A - iwI, B; C, D] loses column rank on the axis")
    S = C.T @ D
    Qm = C.T @ C
    Rinv = np.linalg.inv(R)
    At = A - B @ Rinv @ S.T
    Qt = Qm - S @ Rinv @ S.T
    H = np.block([[At, -B @ Rinv @ B.T], [-Qt, -At.T]])
    w, V = np.linalg.eig(H)
    if np.any(np.abs(w.real) <= hurwitz_margin):
        raise SolverError("Hamiltonian eigenvalue inside the margin band; "
                          "no strictly stabilizing solution")
    sel = w.real < -hurwitz_margin
    if int(np.sum(sel)) != n:
        raise SolverError(
            f"Hamiltonian has {int(np.sum(sel))} stable eigenvalues, expected {n}")
    V1 = V[:n, sel]
    V2 = V[n:, sel]
    try:
        X = np.real(np.linalg.solve(V1.T, V2.T).T)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"stable-subspace basis is singular: {exc}") from exc
    X = 0.5 * (X + X.T)
    K = -Rinv @ (B.T @ X + D.T @ C)
    quad = (X @ B + S) @ Rinv @ (B.T @ X + S.T)
    res = np.linalg.norm(A.T @ X + X @ A + Qm - quad)
    scale = 1.0 + 2.0 * np.linalg.norm(A.T @ X) + np.linalg.norm(Qm) + np.linalg.norm(quad)
    if res > residual_tol * scale:
        raise SolverError(f"Riccati residual {res:.2e} exceeds tolerance")
    if np.linalg.eigvalsh(X).min() < -1e-8 * (1.0 + np.linalg.norm(X)):
        raise SolverError("Riccati solution is not positive semidefinite")
    if not is_hurwitz(A + B @ K, margin=0.0):
        raise SolverError("closed loop A + B K is not Hurwitz")
    return AreSolution(X=X, K=K, residual=float(res))


def gramian(sys, kind="controllability"):
    """Controllability or observability Gramian of a Hurwitz system."""
    if not is_hurwitz(sys.A):
        raise SolverError("Gramian of a non-Hurwitz system is undefined")
    if kind == "controllability":
        return solve_lyapunov(sys.A, sys.B @ sys.B.T)
    if kind == "observability":
        return solve_lyapunov(sys.A.T, sys.C.T @ sys.C)
    raise ValueError("kind must be 'controllability' or 'observability'")


def h2_norm(sys, consistency_tol=1e-6):
    """H2 norm sqrt(trace(C Wc C^T)), cross-checked via the observability form.

    Raises SolverError for a non-Hurwitz A, and ValueError for a nonzero
    feedthrough (the norm is infinite).
    """
    if np.linalg.norm(sys.D) != 0.0:
        raise ValueError("nonzero feedthrough: the H2 norm is unbounded")
    if sys.nx == 0:
        return 0.0
    Wc = gramian(sys, "controllability")
    Wo = gramian(sys, "observability")
    sq_c = float(np.trace(sys.C @ Wc @ sys.C.T))
    sq_o = float(np.trace(sys.B.T @ Wo @ sys.B))
    if abs(sq_c - sq_o) > consistency_tol * (1.0 + abs(sq_c)):
        raise SolverError(
            f"Gramian forms disagree: {sq_c:.12e} vs {sq_o:.12e}")
    return float(np.sqrt(max(sq_c, 0.0)))


def stable_antistable_decompose(sys, margin=HURWITZ_MARGIN):
    """Additive split G = Gs + Ga with Gs Hurwitz and Ga anti-Hurwitz.

    The feedthrough is carried by the stable part; the antistable part is
    strictly proper. An eigenvalue of A within `margin` of the imaginary axis
    is an error: the split would not be well defined.

    The stable invariant subspace comes from an ordered real Schur form
    rather than an eigenvector basis: eigenvectors of clustered or defective
    eigenvalues can be nearly dependent, while the Schur basis stays
    orthonormal no matter how the spectrum clusters. The state is balanced
    first (an exact powers-of-two similarity); long product chains otherwise
    reach block separations poor enough to wreck the decoupling shear.
    """
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    n = sys.nx
    if n:
        A, Tb = scipy.linalg.matrix_balance(A)
        B = np.linalg.solve(Tb, sys.B)
        C = sys.C @ Tb
    empty = StateSpace(np.zeros((0, 0)), np.zeros((0, sys.nu)),
                       np.zeros((sys.ny, 0)), np.zeros_like(D))
    if n == 0:
        return StateSpace.gain(D), empty
    w = np.linalg.eigvals(A)
    if np.any(np.abs(w.real) <= margin):
        raise SolverError("eigenvalue inside the margin band around the axis; "
                          "stable/antistable split is ill defined")
    ns = int(np.sum(w.real < 0.0))
    if ns == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, sys.nu)),
                          np.zeros((sys.ny, 0)), D), StateSpace(A, B, C, np.zeros_like(D))
    if ns == n:
        return sys, empty
    At, T, sdim = scipy.linalg.schur(A, output="real", sort="lhp")
    if sdim != ns:
        raise SolverError("Schur reordering split the spectrum inconsistently")
    As, A12, Au = At[:ns, :ns], At[:ns, ns:], At[ns:, ns:]
    # Decouple the triangular form with a Sylvester-driven shear.
    Z = solve_sylvester(As, A12, -Au)
    Sinv_rows = np.block([[np.eye(ns), -Z], [np.zeros((n - ns, ns)), np.eye(n - ns)]]) @ T.T
    S_cols = T @ np.block([[np.eye(ns), Z], [np.zeros((n - ns, ns)), np.eye(n - ns)]])
    Bt = Sinv_rows @ B
    Ct = C @ S_cols
    Gs = StateSpace(As, Bt[:ns], Ct[:, :ns], D)
    Ga = StateSpace(Au, Bt[ns:], Ct[:, ns:], np.zeros_like(D))
    return Gs, Ga
