from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = -1, 0, 1
_SENSE_TEXT = {LE: "<=", EQ: "=", GE: ">="}


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class DimensionError(ValueError):
    pass


class NotOptimalError(RuntimeError):
    pass


def _num(v) -> str:
    return repr(float(v))  # numpy scalars repr as np.float64(...)


def _sense_code(s) -> int:
    if s in (LE, EQ, GE):
        return int(s)
    table = {"<=": LE, "L": LE, "=": EQ, "==": EQ, "E": EQ, ">=": GE, "G": GE}
    try:
        return table[s]
    except KeyError:
        raise ValueError(f"unknown row sense {s!r}") from None


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``min c'x + constant  s.t.  A x (<=|=|>=) b,  lb <= x <= ub``."""

    c: np.ndarray
    A: sp.csc_matrix
    sense: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        n = len(self.c)
        m = len(self.b)
        if self.A.shape != (m, n):
            raise DimensionError(f"A has shape {self.A.shape}, expected {(m, n)}")
        if len(self.sense) != m:
            raise DimensionError(f"{len(self.sense)} senses for {m} rows")
        if len(self.lb) != n or len(self.ub) != n:
            raise DimensionError("bound vectors must match the number of variables")
        if np.any(self.lb > self.ub):
            bad = int(np.flatnonzero(self.lb > self.ub)[0])
            raise ValueError(f"variable {bad}: lower bound {self.lb[bad]} exceeds upper bound {self.ub[bad]}")

    @classmethod
    def build(cls, c, A=None, sense=(), b=(), lb=None, ub=None, constant=0.0) -> "LinearProgram":
        c = np.asarray(c, dtype=float).ravel()
        n = len(c)
        b = np.asarray(b, dtype=float).ravel()
        if A is None:
            A = sp.csc_matrix((len(b), n))
        A = sp.csc_matrix(A, dtype=float)
        A.sort_indices()
        sense = np.array([_sense_code(s) for s in sense], dtype=np.int8)
        lb = np.zeros(n) if lb is None else np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
        ub = np.full(n, np.inf) if ub is None else np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
        return cls(c, A, sense, b, lb, ub, float(constant))

    @property
    def num_vars(self) -> int:
        return len(self.c)

    @property
    def num_rows(self) -> int:
        return len(self.b)

    def residuals(self, x) -> np.ndarray:
        """Signed violation per row (positive = violated)."""
        ax = self.A @ x
        out = np.zeros(self.num_rows)
        le = self.sense == LE
        ge = self.sense == GE
        eq = self.sense == EQ
        out[le] = ax[le] - self.b[le]
        out[ge] = self.b[ge] - ax[ge]
        out[eq] = np.abs(ax[eq] - self.b[eq])
        return out

    def is_feasible(self, x, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        return bool(np.all(self.residuals(x) <= tol)) if self.num_rows else True

    def dump(self, path) -> None:
        """Plain-text standard form, one line per row and bound."""
        lines = [f"minimize {_num(self.constant)}"]
        lines += [f"  {_num(v)} x{j}" for j, v in enumerate(self.c) if v]
        lines.append("subject to")
        A = self.A.tocsr()
        for i in range(self.num_rows):
            s, e = A.indptr[i], A.indptr[i + 1]
            terms = " ".join(f"{_num(A.data[k])} x{A.indices[k]}" for k in range(s, e))
            lines.append(f"  r{i}: {terms} {_SENSE_TEXT[int(self.sense[i])]} {_num(self.b[i])}")
        lines.append("bounds")
        lines += [f"  {_num(lo)} <= x{j} <= {_num(hi)}" for j, (lo, hi) in enumerate(zip(self.lb, self.ub))]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass(eq=False)
class LPSolution:
    status: LPStatus
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    iterations: int = 0
    reduced_costs: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


def extract_duals(solution: LPSolution) -> np.ndarray:
    """Row multipliers: >= 0 for inequality rows, objective sensitivity for equality rows."""
    if solution.status is not LPStatus.OPTIMAL:
        raise NotOptimalError(f"no duals for a {solution.status.value} LP")
    return solution.duals.copy()
