"""Two-player plant model: partitioned matrices, structural checks, JSON I/O.

The plant is

    xdot = A x + B1 w + B2 u
    z    = C1 x          + D12 u
    y    = C2 x + D21 w

with every signal split between the two players. A, B2 and C2 must be
block-lower-triangular for the given partition: player 1's subsystem is not
influenced by player 2's state or input, and player 1's measurement does not
see player 2's state. The (1,1) feedthroughs D11 and D22 are identically zero
and are not stored.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .statespace import StateSpace, _mat
from .linalg import (
    axis_rank_ok,
    pbh_detectable,
    pbh_stabilizable,
)


def _pair(v, name):
    t = tuple(int(x) for x in v)
    if len(t) != 2:
        raise ValueError(f"{name} split must have exactly two entries")
    if min(t) < 1:
        raise ValueError(f"{name} split must be positive, got {t}")
    return t


@dataclass(frozen=True)
class Partition:
    """Two-block splits of the state (n), input (m) and measurement (k)."""

    n: tuple
    m: tuple
    k: tuple

    def __post_init__(self):
        object.__setattr__(self, "n", _pair(self.n, "n"))
        object.__setattr__(self, "m", _pair(self.m, "m"))
        object.__setattr__(self, "k", _pair(self.k, "k"))


def selector(sizes, which):
    """Block selector [I; 0] (which=0) or [0; I] (which=1) for a 2-split."""
    total = sizes[0] + sizes[1]
    E = np.zeros((total, sizes[which]))
    off = 0 if which == 0 else sizes[0]
    E[off:off + sizes[which], :] = np.eye(sizes[which])
    return E


def _upper_block_error(name, M, rows, cols):
    blk = M[:rows, cols:]
    if blk.size and np.any(blk != 0.0):
        return (f"{name} has a nonzero upper-right block "
                f"(rows :{rows}, cols {cols}:); it must be exactly zero")
    return None


class TwoPlayerPlant:
    """Validated container for the partitioned plant matrices."""

    def __init__(self, A, B1, B2, C1, C2, D12, D21, partition):
        if not isinstance(partition, Partition):
            partition = Partition(*partition)
        self.partition = partition
        n = sum(partition.n)
        m = sum(partition.m)
        k = sum(partition.k)
        self.A = _mat(A, "A")
        self.B1 = _mat(B1, "B1")
        self.B2 = _mat(B2, "B2")
        self.C1 = _mat(C1, "C1")
        self.C2 = _mat(C2, "C2")
        self.D12 = _mat(D12, "D12")
        self.D21 = _mat(D21, "D21")
        if self.A.shape != (n, n):
            raise ValueError(f"A must be {n}x{n}, got {self.A.shape}")
        if self.B2.shape != (n, m):
            raise ValueError(f"B2 must be {n}x{m}, got {self.B2.shape}")
        if self.C2.shape != (k, n):
            raise ValueError(f"C2 must be {k}x{n}, got {self.C2.shape}")
        if self.B1.shape[0] != n:
            raise ValueError(f"B1 must have {n} rows, got {self.B1.shape[0]}")
        if self.C1.shape[1] != n:
            raise ValueError(f"C1 must have {n} columns, got {self.C1.shape[1]}")
        nw = self.B1.shape[1]
        nz = self.C1.shape[0]
        if self.D12.shape != (nz, m):
            raise ValueError(f"D12 must be {nz}x{m}, got {self.D12.shape}")
        if self.D21.shape != (k, nw):
            raise ValueError(f"D21 must be {k}x{nw}, got {self.D21.shape}")
        for M in (self.A, self.B1, self.B2, self.C1, self.C2, self.D12, self.D21):
            if not np.all(np.isfinite(M)):
                raise ValueError("plant matrices must be finite")
        problems = [
            _upper_block_error("A", self.A, partition.n[0], partition.n[0]),
            _upper_block_error("B2", self.B2, partition.n[0], partition.m[0]),
            _upper_block_error("C2", self.C2, partition.k[0], partition.n[0]),
        ]
        problems = [p for p in problems if p]
        if problems:
            raise ValueError("; ".join(problems))

    # -- sizes ------------------------------------------------------------

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B2.shape[1]

    @property
    def k(self):
        return self.C2.shape[0]

    @property
    def nw(self):
        return self.B1.shape[1]

    @property
    def nz(self):
        return self.C1.shape[0]

    @property
    def n1(self):
        return self.partition.n[0]

    @property
    def n2(self):
        return self.partition.n[1]

    @property
    def m1(self):
        return self.partition.m[0]

    @property
    def m2(self):
        return self.partition.m[1]

    @property
    def k1(self):
        return self.partition.k[0]

    @property
    def k2(self):
        return self.partition.k[1]

    # -- blocks of the structured matrices --------------------------------

    @property
    def A11(self):
        return self.A[:self.n1, :self.n1]

    @property
    def A21(self):
        return self.A[self.n1:, :self.n1]

    @property
    def A22(self):
        return self.A[self.n1:, self.n1:]

    @property
    def B2_11(self):
        return self.B2[:self.n1, :self.m1]

    @property
    def B2_21(self):
        return self.B2[self.n1:, :self.m1]

    @property
    def B2_22(self):
        return self.B2[self.n1:, self.m1:]

    @property
    def C2_11(self):
        return self.C2[:self.k1, :self.n1]

    @property
    def C2_21(self):
        return self.C2[self.k1:, :self.n1]

    @property
    def C2_22(self):
        return self.C2[self.k1:, self.n1:]

    # -- derived systems ---------------------------------------------------

    def generalized(self):
        """The 2x2-block system mapping (w, u) to (z, y) for LFT closure."""
        B = np.hstack([self.B1, self.B2])
        C = np.vstack([self.C1, self.C2])
        D = np.block([
            [np.zeros((self.nz, self.nw)), self.D12],
            [self.D21, np.zeros((self.k, self.m))],
        ])
        return StateSpace(self.A, B, C, D)

    def measurement_system(self):
        """StateSpace from (w, u) to y."""
        return StateSpace(self.A, np.hstack([self.B1, self.B2]), self.C2,
                          np.hstack([self.D21, np.zeros((self.k, self.m))]))

    def cost_cov(self):
        return cost_cov_matrices(self)

    def __repr__(self):
        return (f"TwoPlayerPlant(n={self.partition.n}, m={self.partition.m}, "
                f"k={self.partition.k}, nw={self.nw}, nz={self.nz})")


@dataclass
class CostCovariance:
    """Quadratic cost blocks (Q, S, R) and noise covariance blocks (W, U, V).

    Q = C1'C1, S = C1'D12, R = D12'D12 come from the performance output;
    W = B1 B1', U = D21 B1', V = D21 D21' from the disturbance input. The
    stacked matrices [Q S; S' R] and [W U'; U V] are Gram matrices, hence
    positive semidefinite by construction.
    """

    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    W: np.ndarray
    U: np.ndarray
    V: np.ndarray
    partition: Partition = field(repr=False, default=None)

    @property
    def Q21(self):
        n1 = self.partition.n[0]
        return self.Q[n1:, :n1]

    @property
    def S12(self):
        n1, m1 = self.partition.n[0], self.partition.m[0]
        return self.S[:n1, m1:]

    @property
    def R22(self):
        m1 = self.partition.m[0]
        return self.R[m1:, m1:]

    @property
    def W21(self):
        n1 = self.partition.n[0]
        return self.W[n1:, :n1]

    @property
    def U12(self):
        k1, n1 = self.partition.k[0], self.partition.n[0]
        return self.U[:k1, n1:]

    @property
    def V11(self):
        k1 = self.partition.k[0]
        return self.V[:k1, :k1]


def cost_cov_matrices(plant):
    """Cost and covariance data derived from the plant's output/input maps."""
    C1, D12, B1, D21 = plant.C1, plant.D12, plant.B1, plant.D21
    return CostCovariance(
        Q=C1.T @ C1, S=C1.T @ D12, R=D12.T @ D12,
        W=B1 @ B1.T, U=D21 @ B1.T, V=D21 @ D21.T,
        partition=plant.partition,
    )


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------

class AssumptionError(ValueError):
    """A plant fails the admissibility preconditions for synthesis."""


@dataclass
class AssumptionResult:
    label: str
    passed: bool
    description: str


@dataclass
class AssumptionReport:
    """Outcome of the six structural checks plus a minimality warning.

    The labels A1..A6 are this package's own numbering of the conditions,
    in the order they are checked:

      A1  control weight D12'D12 positive definite
      A2  (A11, B2_11) and (A22, B2_22) stabilizable
      A3  no control-side invariant zero on the imaginary axis
      A4  noise covariance D21 D21' positive definite
      A5  (C2_11, A11) and (C2_22, A22) detectable
      A6  no filter-side invariant zero on the imaginary axis

    Minimality of the supplied realization is diagnostic only: synthesis
    needs A1-A6, not minimality, so a non-minimal plant yields a warning.
    """

    checks: list
    minimal: bool

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c.label for c in self.checks if not c.passed]

    def __getitem__(self, label):
        for c in self.checks:
            if c.label == label:
                return c
        raise KeyError(label)


def check_assumptions(plant, axis_tol=1e-7):
    """Evaluate the six synthesis preconditions; failures are reported, not raised."""
    cc = plant.cost_cov()
    checks = []

    def record(label, passed, description):
        checks.append(AssumptionResult(label, bool(passed), description))

    record("A1", np.linalg.eigvalsh(cc.R).min() > 0.0,
           "control weight D12'D12 is positive definite")
    record("A2",
           pbh_stabilizable(plant.A11, plant.B2_11)
           and pbh_stabilizable(plant.A22, plant.B2_22),
           "each player's subsystem is stabilizable through its own input")
    record("A3", axis_rank_ok(plant.A, plant.B2, plant.C1, plant.D12,
                              side="column", tol=axis_tol),
           "no control-side invariant zero on the imaginary axis")
    record("A4", np.linalg.eigvalsh(cc.V).min() > 0.0,
           "measurement noise covariance D21 D21' is positive definite")
    record("A5",
           pbh_detectable(plant.C2_11, plant.A11)
           and pbh_detectable(plant.C2_22, plant.A22),
           "each player's subsystem is detectable from its own measurement")
    record("A6", axis_rank_ok(plant.A, plant.B1, plant.C2, plant.D21,
                              side="row", tol=axis_tol),
           "no filter-side invariant zero on the imaginary axis")

    minimal = (pbh_controllable(plant.A, np.hstack([plant.B1, plant.B2]))
               and pbh_observable(np.vstack([plant.C1, plant.C2]), plant.A))
    return AssumptionReport(checks=checks, minimal=minimal)


def pbh_controllable(A, B, rank_tol=1e-9):
    """Full PBH controllability (every mode, not only the unstable ones)."""
    A = _mat(A, "A")
    B = _mat(B, "B")
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A) + np.linalg.norm(B))
    for lam in np.linalg.eigvals(A):
        M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
        if np.linalg.svd(M, compute_uv=False)[-1] <= rank_tol * scale:
            return False
    return True


def pbh_observable(C, A, rank_tol=1e-9):
    return pbh_controllable(_mat(A, "A").T, _mat(C, "C").T, rank_tol)


# ---------------------------------------------------------------------------
# JSON plant files
# ---------------------------------------------------------------------------

_MATRIX_KEYS = ("A", "B1", "B2", "C1", "C2", "D12", "D21")


def plant_from_dict(data):
    """Build a TwoPlayerPlant from the documented JSON structure.

    Expects {"partitions": {"n": [n1, n2], "m": [m1, m2], "k": [k1, k2]},
    "A": ..., ..., "D21": ...} with matrices as row-major nested lists.
    Optional "D11"/"D22" entries must be zero if present.
    """
    if not isinstance(data, dict):
        raise ValueError("plant description must be a JSON object")
    if "partitions" not in data:
        raise ValueError("missing 'partitions' entry")
    parts = data["partitions"]
    for key in ("n", "m", "k"):
        if key not in parts:
            raise ValueError(f"partitions must contain '{key}'")
    partition = Partition(parts["n"], parts["m"], parts["k"])
    mats = {}
    for key in _MATRIX_KEYS:
        if key not in data:
            raise ValueError(f"missing matrix '{key}'")
        mats[key] = np.array(data[key], dtype=float)
    for key in ("D11", "D22"):
        if key in data and np.any(np.asarray(data[key], dtype=float) != 0.0):
            raise ValueError(f"{key} must be zero: the model is strictly "
                             "proper in that channel")
    return TwoPlayerPlant(partition=partition, **mats)


def plant_to_dict(plant):
    return {
        "partitions": {
            "n": list(plant.partition.n),
            "m": list(plant.partition.m),
            "k": list(plant.partition.k),
        },
        **{key: getattr(plant, key).tolist() for key in _MATRIX_KEYS},
    }


def load_plant(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid JSON in {path}: {exc}") from exc
    return plant_from_dict(data)


def save_plant(plant, path):
    with open(path, "w") as fh:
        json.dump(plant_to_dict(plant), fh, indent=2)
        fh.write("\n")
