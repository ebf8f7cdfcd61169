"""Structured stabilizability, nominal gains, and the controller parameterization.

A block-lower controller exists iff each player's diagonal subsystem is
stabilizable through its own input and detectable from its own measurement.
When it does, block-diagonal gains K_d and L_d give a nominal controller K0,
and every stabilizing block-lower controller is reached from K0 by closing a
stable block-lower parameter Q through a fixed two-port system. That two-port
and the stable model-matching data (T11, T12, T21) are produced here.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .statespace import StateSpace, lft_lower, lft_upper
from .linalg import SolverError, is_hurwitz, pbh_detectable, pbh_stabilizable, solve_are


@dataclass
class StabilizabilityDiagnostics:
    """Per-subsystem stabilizability/detectability verdicts."""

    player1_stabilizable: bool
    player1_detectable: bool
    player2_stabilizable: bool
    player2_detectable: bool

    @property
    def passed(self):
        return (self.player1_stabilizable and self.player1_detectable
                and self.player2_stabilizable and self.player2_detectable)

    def __bool__(self):
        return self.passed

    @property
    def failures(self):
        names = {
            "player1_stabilizable": "player 1 subsystem not stabilizable",
            "player1_detectable": "player 1 subsystem not detectable",
            "player2_stabilizable": "player 2 subsystem not stabilizable",
            "player2_detectable": "player 2 subsystem not detectable",
        }
        return [msg for attr, msg in names.items() if not getattr(self, attr)]


def exists_triangular_stabilizing(plant):
    """Can any block-lower controller stabilize this plant?

    True iff (A11, B2_11) and (A22, B2_22) are stabilizable and (C2_11, A11)
    and (C2_22, A22) are detectable. Returns diagnostics that are truthy on
    success.
    """
    return StabilizabilityDiagnostics(
        player1_stabilizable=pbh_stabilizable(plant.A11, plant.B2_11),
        player1_detectable=pbh_detectable(plant.C2_11, plant.A11),
        player2_stabilizable=pbh_stabilizable(plant.A22, plant.B2_22),
        player2_detectable=pbh_detectable(plant.C2_22, plant.A22),
    )


@dataclass
class NominalGains:
    """Block-diagonal state feedback K_d and injection L_d, with derived loops.

    K_d = diag(K1, K2) and L_d = diag(L1, L2) are pinned to ARE-derived
    gains: K2 and L1 are exactly the gains of the small player-2 control and
    player-1 filter AREs reused by the optimal synthesis, which makes the
    downstream simplifications exact rather than merely admissible.
    """

    K_d: np.ndarray
    L_d: np.ndarray
    A_Kd: np.ndarray
    A_Ld: np.ndarray
    C_Kd: np.ndarray
    B_Ld: np.ndarray


def nominal_gains(plant):
    diag = exists_triangular_stabilizing(plant)
    if not diag:
        raise SolverError("no block-lower stabilizing controller exists: "
                          + "; ".join(diag.failures))
    n1, m1, k1 = plant.n1, plant.m1, plant.k1
    K1 = solve_are(plant.A11, plant.B2_11,
                   plant.C1[:, :n1], plant.D12[:, :m1]).K
    K2 = solve_are(plant.A22, plant.B2_22,
                   plant.C1[:, n1:], plant.D12[:, m1:]).K
    L1 = solve_are(plant.A11.T, plant.C2_11.T,
                   plant.B1[:n1, :].T, plant.D21[:k1, :].T).K.T
    L2 = solve_are(plant.A22.T, plant.C2_22.T,
                   plant.B1[n1:, :].T, plant.D21[k1:, :].T).K.T
    K_d = scipy.linalg.block_diag(K1, K2)
    L_d = scipy.linalg.block_diag(L1, L2)
    A_Kd = plant.A + plant.B2 @ K_d
    A_Ld = plant.A + L_d @ plant.C2
    if not is_hurwitz(A_Kd, margin=0.0) or not is_hurwitz(A_Ld, margin=0.0):
        raise SolverError("nominal gains failed the closed-loop Hurwitz check")
    return NominalGains(
        K_d=K_d, L_d=L_d, A_Kd=A_Kd, A_Ld=A_Ld,
        C_Kd=plant.C1 + plant.D12 @ K_d,
        B_Ld=plant.B1 + L_d @ plant.D21,
    )


def nominal_controller(plant, gains=None):
    """The observer-based nominal stabilizing controller K0 (block-lower)."""
    g = gains if gains is not None else nominal_gains(plant)
    A0 = plant.A + plant.B2 @ g.K_d + g.L_d @ plant.C2
    return StateSpace(A0, -g.L_d, g.K_d, np.zeros((plant.m, plant.k)))


@dataclass
class ModelMatchData:
    """Controller parameterization two-port and the model-matching systems.

    lft_lower(J_d, Q) runs over all stabilizing block-lower controllers as Q
    runs over stable block-lower parameters, and the closed loop satisfies
    F(P, K) = T11 + T12 Q T21 with T11, T12, T21 all stable. J_d_inverse is
    the exact state-space inverse of J_d (same state dimension).
    """

    J_d: StateSpace
    J_d_inverse: StateSpace
    T11: StateSpace
    T12: StateSpace
    T21: StateSpace
    gains: NominalGains
    partition: object = None


def youla_data(plant, gains=None):
    g = gains if gains is not None else nominal_gains(plant)
    n, m, k = plant.n, plant.m, plant.k
    A0 = plant.A + plant.B2 @ g.K_d + g.L_d @ plant.C2
    D_swap = np.block([
        [np.zeros((m, k)), np.eye(m)],
        [np.eye(k), np.zeros((k, m))],
    ])
    J_d = StateSpace(A0, np.hstack([-g.L_d, plant.B2]),
                     np.vstack([g.K_d, -plant.C2]), D_swap)
    D_swap_inv = np.block([
        [np.zeros((k, m)), np.eye(k)],
        [np.eye(m), np.zeros((m, k))],
    ])
    J_d_inverse = StateSpace(plant.A, np.hstack([plant.B2, -g.L_d]),
                             np.vstack([plant.C2, -g.K_d]), D_swap_inv)
    A_T = np.block([
        [g.A_Kd, -plant.B2 @ g.K_d],
        [np.zeros((n, n)), g.A_Ld],
    ])
    B_w = np.vstack([plant.B1, g.B_Ld])
    C_z = np.hstack([g.C_Kd, -plant.D12 @ g.K_d])
    T11 = StateSpace(A_T, B_w, C_z, np.zeros((plant.nz, plant.nw)))
    T12 = StateSpace(A_T, np.vstack([plant.B2, np.zeros((n, m))]), C_z, plant.D12)
    T21 = StateSpace(A_T, B_w, np.hstack([np.zeros((k, n)), plant.C2]), plant.D21)
    return ModelMatchData(J_d=J_d, J_d_inverse=J_d_inverse,
                          T11=T11, T12=T12, T21=T21, gains=g,
                          partition=plant.partition)


def controller_from_q(data, Q):
    """Close the parameter Q through J_d: the resulting controller maps y to u."""
    J_d = data.J_d if isinstance(data, ModelMatchData) else data
    nz = J_d.ny - Q.nu
    nw = J_d.nu - Q.ny
    return lft_lower(J_d, Q, nz=nz, nw=nw)


def q_from_controller(data, K):
    """Invert the parameterization: recover Q from a stabilizing controller."""
    J_inv = data.J_d_inverse if isinstance(data, ModelMatchData) else data
    nq = J_inv.ny - K.ny
    np_top = J_inv.nu - K.nu
    return lft_upper(J_inv, K, nq=nq, np_=np_top)
