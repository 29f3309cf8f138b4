"""Entanglement and mixedness measures for two-qubit states.

Implements the Wootters concurrence/tangle, the linear entropy
S_L = (4/3)(1 - Tr rho^2), the positive-partial-transpose separability
test (exact for two qubits), the analytic tangle-vs-entropy frontier
curves of the Werner and MEMS families, and the nonlocality region
classification of both families.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .states import check_density_matrix

WERNER = "werner"
MEMS = "mems"

_SIGMA_Y_PAIR = np.kron(
    np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]])
)

S_L_WERNER_SEPARABLE = 8 / 9
S_L_CHSH_BOUNDARY_WERNER = 0.5
# linear entropy of the MEMS with p = 1/sqrt(2): (8/3) p (1 - p)
S_L_CHSH_BOUNDARY_MEMS = (8 / 3) * (1 / math.sqrt(2)) * (1 - 1 / math.sqrt(2))


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence C(rho) of a two-qubit density matrix.

    C = max(0, l1 - l2 - l3 - l4) where the l_i are the decreasing
    square roots of the eigenvalues of rho (sy x sy) rho* (sy x sy).
    """
    rho = check_density_matrix(rho)
    rho_tilde = rho @ _SIGMA_Y_PAIR @ rho.conj() @ _SIGMA_Y_PAIR
    evals = np.linalg.eigvals(rho_tilde).real
    # tiny negatives from round-off
    lams = np.sqrt(np.clip(np.sort(evals)[::-1], 0.0, None))
    return float(max(0.0, lams[0] - lams[1] - lams[2] - lams[3]))


def tangle(rho: np.ndarray) -> float:
    """Tangle T = C(rho)^2; zero iff the state is separable."""
    return concurrence(rho) ** 2


def linear_entropy(rho: np.ndarray) -> float:
    """Linear entropy S_L = (4/3)(1 - Tr rho^2), in [0, 1]."""
    rho = check_density_matrix(rho)
    purity = np.trace(rho @ rho).real
    return float((4 / 3) * (1 - purity))


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Partial transpose over the second qubit."""
    rho = np.asarray(rho, dtype=complex)
    return rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def is_separable_ppt(rho: np.ndarray) -> tuple[bool, float]:
    """Peres-Horodecki test, exact in 2x2.

    Returns (separable, negativity) where negativity is
    2 * max(0, -min eigenvalue of the partial transpose) and separability
    means the minimum eigenvalue is >= -1e-10.
    """
    rho = check_density_matrix(rho)
    min_eig = float(np.linalg.eigvalsh(partial_transpose(rho)).min())
    separable = min_eig >= -1e-10
    negativity = 2 * max(0.0, -min_eig)
    return separable, negativity


def tangle_curve(family: str, s_l: float) -> float:
    """Analytic tangle at a given linear entropy along a state family.

    Werner:  T = (1 - 3 sqrt(1 - S_L))^2 / 4 for S_L <= 8/9, else 0.
    MEMS:    T = (1 + sqrt(1 - (3/2) S_L))^2 / 4 for S_L <= 16/27,
             4/3 - (3/2) S_L for 16/27 < S_L <= 8/9, else 0.

    The MEMS branch is the frontier: no physical two-qubit state lies
    above it.
    """
    if not 0.0 <= s_l <= 1.0:
        raise ValueError(f"linear entropy must be in [0, 1], got {s_l}")
    if family == WERNER:
        if s_l >= 8 / 9:
            return 0.0
        return 0.25 * (1 - 3 * math.sqrt(1 - s_l)) ** 2
    if family == MEMS:
        if s_l <= 16 / 27:
            return 0.25 * (1 + math.sqrt(1 - 1.5 * s_l)) ** 2
        if s_l <= 8 / 9:
            return 4 / 3 - 1.5 * s_l
        return 0.0
    raise ValueError(f"family must be {WERNER!r} or {MEMS!r}, got {family!r}")


class Region(enum.Enum):
    """Nonlocality regions of the Werner/MEMS families."""

    VIOLATES_LOCAL_REALISM = "violates_local_realism"
    NONSEPARABLE_NO_CHSH_VIOLATION = "nonseparable_no_CHSH_violation"
    SEPARABLE_LOCAL = "separable_local"


@dataclass(frozen=True)
class NonlocalityClass:
    """Region assignment for a family member, with its S_L interval."""

    family: str
    region: Region
    s_l_interval: tuple[float, float]


def classify(family: str, p: float) -> NonlocalityClass:
    """Nonlocality region of werner(p) or mems(p).

    Werner: CHSH violation for p > 1/sqrt(2) (S_L < 1/2), nonseparable
    without violation for 1/3 < p <= 1/sqrt(2) (1/2 <= S_L < 8/9),
    separable and local for p <= 1/3 (S_L >= 8/9).  MEMS have no
    separable region: violation for p > 1/sqrt(2) (S_L < 0.552...),
    nonseparable without violation otherwise.  Both thresholds are
    strict: p = 1/sqrt(2) does not violate.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    violation = p > 1 / math.sqrt(2)
    if family == WERNER:
        if violation:
            return NonlocalityClass(
                WERNER, Region.VIOLATES_LOCAL_REALISM, (0.0, S_L_CHSH_BOUNDARY_WERNER)
            )
        if p > 1 / 3:
            return NonlocalityClass(
                WERNER,
                Region.NONSEPARABLE_NO_CHSH_VIOLATION,
                (S_L_CHSH_BOUNDARY_WERNER, S_L_WERNER_SEPARABLE),
            )
        return NonlocalityClass(
            WERNER, Region.SEPARABLE_LOCAL, (S_L_WERNER_SEPARABLE, 1.0)
        )
    if family == MEMS:
        if violation:
            return NonlocalityClass(
                MEMS, Region.VIOLATES_LOCAL_REALISM, (0.0, S_L_CHSH_BOUNDARY_MEMS)
            )
        return NonlocalityClass(
            MEMS,
            Region.NONSEPARABLE_NO_CHSH_VIOLATION,
            (S_L_CHSH_BOUNDARY_MEMS, S_L_WERNER_SEPARABLE),
        )
    raise ValueError(f"family must be {WERNER!r} or {MEMS!r}, got {family!r}")


@dataclass(frozen=True)
class EntropyPoint:
    """One point of a tangle-vs-linear-entropy series."""

    linear_entropy: float
    tangle: float
    family: str
    p: float


def entropy_points_to_csv(points: list[EntropyPoint], path) -> None:
    """Write an (S_L, T) series with header ``S_L,T,family,p``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["S_L", "T", "family", "p"])
        for pt in points:
            writer.writerow(
                [f"{pt.linear_entropy:.12g}", f"{pt.tangle:.12g}", pt.family, f"{pt.p:.12g}"]
            )
