"""Optimal synthesis for the nested two-player problem.

The optimum is assembled in three stages: four standard Riccati solutions
(two centralized, two local), a pair of simultaneously solved linear matrix
equations whose unknowns couple the local solutions to the centralized ones,
and two structured gain matrices built from all of the above. The controller
itself carries 2n states: player 1's estimate of the plant state given only
its own measurement history, and the full-measurement estimate that player 2
can maintain, with the input blending the two.
"""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import RESIDUAL_TOL, SolverError, is_hurwitz, solve_are
from .plant import (AssumptionError, Partition, TwoPlayerPlant,
                    check_assumptions, cost_cov_matrices)
from .stabilization import NominalGains, nominal_gains
from .statespace import StateSpace, lft_lower


@dataclass
class AreBundle:
    """Stabilizing solutions of the four Riccati equations behind the optimum.

    Two are centralized: (X_cen, K_cen) for full-information state feedback
    and (Y_cen, L_cen) for full-measurement filtering. Two are local:
    (X_loc2, K_loc2) solves player 2's control problem restricted to
    subsystem 2, and (Y_loc1, L_loc1) solves player 1's filtering problem
    restricted to subsystem 1. The four closed-loop matrices A_ctrl, A_filt,
    A_ctrl2, A_filt1 are Hurwitz by construction; `residuals` carries the
    verified equation residuals in the same order as the solutions.
    """

    X_cen: np.ndarray
    K_cen: np.ndarray
    Y_cen: np.ndarray
    L_cen: np.ndarray
    X_loc2: np.ndarray
    K_loc2: np.ndarray
    Y_loc1: np.ndarray
    L_loc1: np.ndarray
    A_ctrl: np.ndarray
    A_filt: np.ndarray
    A_ctrl2: np.ndarray
    A_filt1: np.ndarray
    residuals: tuple


@dataclass
class CouplingSolution:
    """Solution of the pair of linear matrix equations tying the four AREs.

    Both unknowns are n2 x n1. X_cross feeds the control-side structured
    gain (it measures how player 2's local control solution must react to
    subsystem 1's state); Y_cross plays the dual role on the filter side.
    `residuals` holds the verified residuals of the two matrix equations.
    """

    X_cross: np.ndarray
    Y_cross: np.ndarray
    residuals: tuple


@dataclass
class SynthesisResult:
    """Everything the optimal design produces.

    K_private is the feedback applied to the private part of the state
    estimate (its first block row is zero), L_common the injection applied
    to the shared measurement y1 (its second block column is zero), and
    cross_gain is the (2,1) block of K_private. A_gap drives the gap between
    the two internal estimates and is Hurwitz with diagonal blocks A_filt1
    and A_ctrl2. A_zeta and A_xi are the diagonal blocks of the controller
    state matrix in the order (zeta, xi) = (player-1 estimate,
    full-measurement estimate). `controller` is the realization in those
    coordinates; `controller_alt` is the second displayed realization with
    the same transfer function.
    """

    bundle: AreBundle
    coupling: CouplingSolution
    K_private: np.ndarray
    L_common: np.ndarray
    cross_gain: np.ndarray
    A_gap: np.ndarray
    A_zeta: np.ndarray
    A_xi: np.ndarray
    gains: NominalGains
    controller: StateSpace
    controller_alt: StateSpace


def solve_four_ares(plant):
    """Solve the two centralized and the two local Riccati equations.

    Parameters
    ----------
    plant : TwoPlayerPlant
        Must satisfy the admissibility checks; failures surface here as
        solver errors naming the offending equation.

    Returns
    -------
    AreBundle
        All four stabilizing solutions, their gains, the four Hurwitz
        closed-loop matrices and the verified residuals.

    Raises
    ------
    SolverError
        If any of the four equations has no stabilizing solution or fails
        its residual check; the message lists which ones failed.
    """
    n1, m1, k1 = plant.n1, plant.m1, plant.k1
    jobs = (
        ("full-information control",
         (plant.A, plant.B2, plant.C1, plant.D12)),
        ("full-measurement filter",
         (plant.A.T, plant.C2.T, plant.B1.T, plant.D21.T)),
        ("player-2 local control",
         (plant.A22, plant.B2_22, plant.C1[:, n1:], plant.D12[:, m1:])),
        ("player-1 local filter",
         (plant.A11.T, plant.C2_11.T, plant.B1[:n1, :].T, plant.D21[:k1, :].T)),
    )
    sols = []
    failures = []
    for name, args in jobs:
        try:
            sols.append(solve_are(*args))
        except SolverError as exc:
            sols.append(None)
            failures.append(f"{name}: {exc}")
    if failures:
        raise SolverError("ARE solve failed for " + "; ".join(failures))
    ctrl, filt, loc2, loc1 = sols
    K_cen = ctrl.K
    L_cen = filt.K.T
    K_loc2 = loc2.K
    L_loc1 = loc1.K.T
    return AreBundle(
        X_cen=ctrl.X, K_cen=K_cen, Y_cen=filt.X, L_cen=L_cen,
        X_loc2=loc2.X, K_loc2=K_loc2, Y_loc1=loc1.X, L_loc1=L_loc1,
        A_ctrl=plant.A + plant.B2 @ K_cen,
        A_filt=plant.A + L_cen @ plant.C2,
        A_ctrl2=plant.A22 + plant.B2_22 @ K_loc2,
        A_filt1=plant.A11 + L_loc1 @ plant.C2_11,
        residuals=(ctrl.residual, filt.residual, loc2.residual, loc1.residual),
    )


class _CouplingTerms:
    """Shared coefficients of the two coupling equations.

    With dX = X_loc2 - X_cen|22 and dY = Y_loc1 - Y_cen|11, the equations
    read (primes denote transposes, P = X_cross, T = Y_cross)

        A_ctrl2' P + P A_filt1 - dX (T C11' + U12') V11^-1 C11 + G1 = 0
        A_ctrl2 T + T A_filt1' - B22 R22^-1 (B22' P + S12') dY + G2 = 0

    where G1 and G2 collect the data-only terms. The constant parts of the
    mixed terms are folded into G_phi and G_psi below, so each equation
    becomes "linear map of (P, T) plus constant".
    """

    def __init__(self, plant, bundle):
        cc = cost_cov_matrices(plant)
        n1 = plant.n1
        self.n1 = n1
        self.n2 = plant.n2
        self.AJ = bundle.A_ctrl2
        self.AM = bundle.A_filt1
        self.dX = bundle.X_loc2 - bundle.X_cen[n1:, n1:]
        self.dY = bundle.Y_loc1 - bundle.Y_cen[:n1, :n1]
        self.C11 = plant.C2_11
        self.B22 = plant.B2_22
        self.V11 = cc.V11
        self.R22 = cc.R22
        # V11^-1 C11 and R22^-1 B22' appear in every mixed term
        self.ViC = np.linalg.solve(self.V11, self.C11)
        self.RiB = np.linalg.solve(self.R22, self.B22.T)
        X21 = bundle.X_cen[n1:, :n1]
        Y21 = bundle.Y_cen[n1:, :n1]
        self.G_phi = (bundle.X_loc2 @ plant.A21 + bundle.K_loc2.T @ cc.S12.T
                      + cc.Q21 - X21 @ bundle.L_loc1 @ self.C11
                      - self.dX @ cc.U12.T @ self.ViC)
        self.G_psi = (plant.A21 @ bundle.Y_loc1 + cc.U12.T @ bundle.L_loc1.T
                      + cc.W21 - self.B22 @ (bundle.K_loc2 @ Y21)
                      - self.B22 @ np.linalg.solve(self.R22, cc.S12.T) @ self.dY)

    def stacked_system(self):
        I1 = np.eye(self.n1)
        I2 = np.eye(self.n2)
        CVC = self.C11.T @ self.ViC
        BRB = self.B22 @ self.RiB
        row_phi = np.hstack([
            np.kron(I1, self.AJ.T) + np.kron(self.AM.T, I2),
            -np.kron(CVC.T, self.dX),
        ])
        row_psi = np.hstack([
            -np.kron(self.dY.T, BRB),
            np.kron(I1, self.AJ) + np.kron(self.AM, I2),
        ])
        M = np.vstack([row_phi, row_psi])
        b = -np.concatenate([self.G_phi.flatten(order="F"),
                             self.G_psi.flatten(order="F")])
        return M, b

    def unpack(self, z):
        N = self.n1 * self.n2
        shape = (self.n2, self.n1)
        return (z[:N].reshape(shape, order="F"),
                z[N:].reshape(shape, order="F"))

    def residuals(self, Phi, Psi):
        """Residual norms of both matrix equations with relative scales."""
        mix_phi = self.dX @ (Psi @ self.C11.T) @ self.ViC
        t_phi = (self.AJ.T @ Phi, Phi @ self.AM, -mix_phi, self.G_phi)
        mix_psi = self.B22 @ (self.RiB @ Phi) @ self.dY
        t_psi = (self.AJ @ Psi, Psi @ self.AM.T, -mix_psi, self.G_psi)
        r_phi = np.linalg.norm(sum(t_phi))
        r_psi = np.linalg.norm(sum(t_psi))
        s_phi = 1.0 + sum(np.linalg.norm(t) for t in t_phi)
        s_psi = 1.0 + sum(np.linalg.norm(t) for t in t_psi)
        return r_phi, r_psi, s_phi, s_psi


def build_phi_psi_system(plant, bundle):
    """Stack both coupling equations into one dense linear system.

    Unknowns are vec(X_cross) then vec(Y_cross), column-major. Returns
    (M, b) with M square of side 2 * n1 * n2 and M z = b equivalent to the
    two matrix equations.
    """
    return _CouplingTerms(plant, bundle).stacked_system()


def solve_phi_psi(plant, bundle, residual_tol=RESIDUAL_TOL):
    """Solve the coupled pair of linear matrix equations.

    A direct dense solve of the stacked system, falling back to the
    minimum-norm least-squares solution when the operator is singular.
    Whatever route produced the candidate, both matrix equations are
    re-evaluated and must pass a relative residual check.

    Returns
    -------
    CouplingSolution

    Raises
    ------
    SolverError
        If no candidate meets the residual tolerance, which signals either
        an assumption violation upstream or numerical breakdown.
    """
    terms = _CouplingTerms(plant, bundle)
    M, b = terms.stacked_system()

    def attempt(z):
        Phi, Psi = terms.unpack(z)
        r_phi, r_psi, s_phi, s_psi = terms.residuals(Phi, Psi)
        ok = r_phi <= residual_tol * s_phi and r_psi <= residual_tol * s_psi
        return Phi, Psi, (float(r_phi), float(r_psi)), ok

    try:
        candidate = attempt(np.linalg.solve(M, b))
    except np.linalg.LinAlgError:
        candidate = None
    if candidate is None or not candidate[3]:
        fallback = attempt(np.linalg.lstsq(M, b, rcond=None)[0])
        candidate = fallback if candidate is None or fallback[3] else candidate
    Phi, Psi, residuals, ok = candidate
    if not ok:
        raise SolverError(
            "coupling equations did not verify: residuals "
            f"{residuals[0]:.2e}, {residuals[1]:.2e}")
    return CouplingSolution(X_cross=Phi, Y_cross=Psi, residuals=residuals)


def structured_gains(plant, bundle, coupling):
    """Assemble the structured feedback and injection gains.

    Returns (K_private, L_common, cross_gain). K_private is m x n with zero
    first block row, its (2,2) block is K_loc2 and its (2,1) block is the
    returned cross_gain. L_common is n x k with zero second block column and
    L_loc1 in its (1,1) block.
    """
    cc = cost_cov_matrices(plant)
    n1, m1, k1 = plant.n1, plant.m1, plant.k1
    H = -np.linalg.solve(cc.R22, plant.B2_22.T @ coupling.X_cross + cc.S12.T)
    K_private = np.zeros((plant.m, plant.n))
    K_private[m1:, :n1] = H
    K_private[m1:, n1:] = bundle.K_loc2
    L_common = np.zeros((plant.n, plant.k))
    L_common[:n1, :k1] = bundle.L_loc1
    num = coupling.Y_cross @ plant.C2_11.T + cc.U12.T
    L_common[n1:, :k1] = -np.linalg.solve(cc.V11.T, num.T).T
    return K_private, L_common, H


def controller_realizations(plant, bundle, K_private, L_common):
    """Both displayed 2n-state realizations of the optimal controller.

    State order is (zeta, xi): the player-1-information estimate first, the
    full-measurement estimate second. The two realizations share a transfer
    function; the first is the package default.
    """
    A, Bp, Cp = plant.A, plant.B2, plant.C2
    K, L = bundle.K_cen, bundle.L_cen
    n, m, k = plant.n, plant.m, plant.k
    A_zeta = A + Bp @ K + L_common @ Cp
    A_xi = A + L @ Cp + Bp @ K_private
    Z = np.zeros((n, n))
    primary = StateSpace(
        np.block([[A_zeta, Z], [Bp @ (K - K_private), A_xi]]),
        np.vstack([-L_common, -L]),
        np.hstack([K - K_private, K_private]),
        np.zeros((m, k)),
    )
    alternative = StateSpace(
        np.block([[A_zeta, Z], [(L - L_common) @ Cp, A_xi]]),
        np.vstack([L_common, L - L_common]),
        np.hstack([-K, -K_private]),
        np.zeros((m, k)),
    )
    return primary, alternative


def optimal_controller(plant):
    """Synthesize the optimal controller for the nested information pattern.

    Runs the admissibility checks, solves the four Riccati equations and the
    coupling pair, assembles the structured gains and both controller
    realizations, and verifies that the estimate-gap dynamics and the closed
    loop are Hurwitz.

    Parameters
    ----------
    plant : TwoPlayerPlant

    Returns
    -------
    SynthesisResult

    Raises
    ------
    AssumptionError
        If the admissibility checks fail (this includes the existence of
        any stabilizing controller with the required structure).
    SolverError
        If a subproblem fails numerically or a post-condition does not hold.
    """
    report = check_assumptions(plant)
    if not report.passed:
        raise AssumptionError(
            "plant fails admissibility checks: " + ", ".join(report.failures))
    bundle = solve_four_ares(plant)
    coupling = solve_phi_psi(plant, bundle)
    K_private, L_common, cross_gain = structured_gains(plant, bundle, coupling)
    A_gap = plant.A + plant.B2 @ K_private + L_common @ plant.C2
    if not is_hurwitz(A_gap, margin=0.0):
        raise SolverError("estimate-gap dynamics are not Hurwitz")
    gains = nominal_gains(plant)
    controller, controller_alt = controller_realizations(
        plant, bundle, K_private, L_common)
    closed = lft_lower(plant.generalized(), controller, plant.nz, plant.nw)
    if not is_hurwitz(closed.A, margin=0.0):
        raise SolverError("synthesized closed loop is not Hurwitz")
    n = plant.n
    return SynthesisResult(
        bundle=bundle, coupling=coupling,
        K_private=K_private, L_common=L_common, cross_gain=cross_gain,
        A_gap=A_gap,
        A_zeta=controller.A[:n, :n], A_xi=controller.A[n:, n:],
        gains=gains, controller=controller, controller_alt=controller_alt,
    )


def centralized_h2(plant, tol=1e-6):
    """Centralized (information-unconstrained) design and its closed-loop norm.

    Accepts any object with attributes A, B1, B2, C1, C2, D12, D21; the
    two-player structure is not used. The squared norm is evaluated through
    the two standard trace formulas

        tr(X W) + tr(Y K' R K)  and  tr(Y Q) + tr(X L V L')

    which must agree within `tol` relative; their mean is returned under the
    square root.

    Returns
    -------
    (StateSpace, float)
        The observer-form controller and the closed-loop norm.

    Raises
    ------
    SolverError
        If either Riccati equation fails (for instance the pair (A, B2) is
        not stabilizable) or the two formulas disagree.
    """
    A = np.asarray(plant.A, dtype=float)
    B1 = np.asarray(plant.B1, dtype=float)
    B2 = np.asarray(plant.B2, dtype=float)
    C1 = np.asarray(plant.C1, dtype=float)
    C2 = np.asarray(plant.C2, dtype=float)
    D12 = np.asarray(plant.D12, dtype=float)
    D21 = np.asarray(plant.D21, dtype=float)
    ctrl = solve_are(A, B2, C1, D12)
    filt = solve_are(A.T, C2.T, B1.T, D21.T)
    X, K = ctrl.X, ctrl.K
    Y, L = filt.X, filt.K.T
    Q, R = C1.T @ C1, D12.T @ D12
    W, V = B1 @ B1.T, D21 @ D21.T
    cost_x = float(np.trace(X @ W) + np.trace(Y @ K.T @ R @ K))
    cost_y = float(np.trace(Y @ Q) + np.trace(X @ L @ V @ L.T))
    if abs(cost_x - cost_y) > tol * (1.0 + abs(cost_y)):
        raise SolverError(
            f"centralized trace formulas disagree: {cost_x:.6e} vs {cost_y:.6e}")
    K_cen = StateSpace(A + B2 @ K + L @ C2, -L, K,
                       np.zeros((B2.shape[1], C2.shape[0])))
    return K_cen, math.sqrt(max(0.5 * (cost_x + cost_y), 0.0))


def _swapped(sizes):
    s1, s2 = int(sizes[0]), int(sizes[1])
    return np.concatenate([np.arange(s1, s1 + s2), np.arange(s1)])


def swap_transpose(M, row_split, col_split):
    """Transpose M and swap the two-block ordering on both axes.

    For M = [[M11, M12], [M21, M22]] partitioned by row_split x col_split,
    the result is [[M22', M12'], [M21', M11']].
    """
    M = np.asarray(M, dtype=float)
    return M.T[np.ix_(_swapped(col_split), _swapped(row_split))]


def dual_plant(plant):
    """The plant whose control problem is the original's filter problem.

    Transposing all maps and swapping the player ordering exchanges the
    roles of actuation and measurement while preserving the nested
    structure. Synthesis on the result reproduces the original's
    filter-side quantities as control-side quantities (and vice versa),
    after the same swap-transpose reindexing.
    """
    p = plant.partition
    rn = _swapped(p.n)
    rm = _swapped(p.m)
    rk = _swapped(p.k)
    return TwoPlayerPlant(
        A=swap_transpose(plant.A, p.n, p.n),
        B1=plant.C1.T[rn, :],
        B2=swap_transpose(plant.C2, p.k, p.n),
        C1=plant.B1.T[:, rn],
        C2=swap_transpose(plant.B2, p.n, p.m),
        D12=plant.D21.T[:, rk],
        D21=plant.D12.T[rm, :],
        partition=Partition(n=(p.n[1], p.n[0]), m=(p.k[1], p.k[0]),
                            k=(p.m[1], p.m[0])),
    )
