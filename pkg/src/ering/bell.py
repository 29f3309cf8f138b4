"""CHSH correlation functions, Bell-parameter evaluation and optimization.

Analyzer directions live on the Bloch sphere as (Theta, Phi); the
corresponding polarization-analyzer angle is theta = Theta/2.  The
dichotomic observable of a direction is

    O(Theta, Phi) = [[cos Theta,              e^{-i Phi} sin Theta],
                     [e^{i Phi} sin Theta,   -cos Theta          ]]

which equals u . sigma for the unit vector u(Theta, Phi).  The CHSH
combination is S = P(a1,a2) - P(a1,a2') + P(a1',a2) + P(a1',a2') with
P = Tr(rho O1 x O2); |S| <= 2 for local realism and <= 2 sqrt(2) always.

S is returned *signed* everywhere in this module so that the trace and
counts-based evaluations agree exactly; report abs(S) when comparing
against the classical bound.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, InputFormatError
from .states import check_density_matrix

TSIRELSON_BOUND = 2 * math.sqrt(2)

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class BlochSetting:
    """One analyzer direction (Theta, Phi) on the Bloch sphere.

    Normalized on construction to Theta in [0, pi], Phi in (-pi, pi].
    The polarization-analyzer angle is theta = Theta / 2.
    """

    theta: float
    phi: float

    def __post_init__(self):
        u = _unit_vector(self.theta, self.phi)
        r_xy = math.hypot(u[0], u[1])
        theta_n = math.atan2(r_xy, u[2])
        if r_xy == 0.0:
            phi_n = 0.0
        else:
            phi_n = math.atan2(u[1], u[0])
            if phi_n <= -math.pi:
                phi_n = math.pi
        object.__setattr__(self, "theta", theta_n)
        object.__setattr__(self, "phi", phi_n)

    def unit_vector(self) -> np.ndarray:
        return _unit_vector(self.theta, self.phi)


def _unit_vector(theta: float, phi: float) -> np.ndarray:
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


@dataclass(frozen=True)
class ChshSettings:
    """The four analyzer directions of a CHSH measurement."""

    a1: BlochSetting
    a1p: BlochSetting
    a2: BlochSetting
    a2p: BlochSetting


def observable(setting: BlochSetting) -> np.ndarray:
    """2x2 Hermitian, traceless, unit-square observable of a direction."""
    t, f = setting.theta, setting.phi
    return np.array(
        [
            [math.cos(t), np.exp(-1j * f) * math.sin(t)],
            [np.exp(1j * f) * math.sin(t), -math.cos(t)],
        ]
    )


def correlation(rho: np.ndarray, s1: BlochSetting, s2: BlochSetting) -> float:
    """Correlation function P = Tr(rho O1 x O2), real, in [-1, 1]."""
    rho = check_density_matrix(rho)
    value = np.trace(rho @ np.kron(observable(s1), observable(s2)))
    if abs(value.imag) > 1e-10:
        raise ValueError(f"correlation has imaginary part {value.imag:.3e}")
    return float(value.real)


def correlation_matrix(rho: np.ndarray) -> np.ndarray:
    """3x3 real matrix t_ij = Tr(rho sigma_i x sigma_j)."""
    rho = np.asarray(rho, dtype=complex)
    return np.array(
        [
            [np.trace(rho @ np.kron(si, sj)).real for sj in _PAULI]
            for si in _PAULI
        ]
    )


def chsh(rho: np.ndarray, settings: ChshSettings) -> float:
    """Signed CHSH parameter S for a state and four analyzer directions."""
    s = (
        correlation(rho, settings.a1, settings.a2)
        - correlation(rho, settings.a1, settings.a2p)
        + correlation(rho, settings.a1p, settings.a2)
        + correlation(rho, settings.a1p, settings.a2p)
    )
    if abs(s) > TSIRELSON_BOUND + 1e-9:
        raise ValueError(f"CHSH value {s} exceeds the quantum bound 2*sqrt(2)")
    return s


def chsh_max_from_correlation_matrix(rho: np.ndarray) -> float:
    """Certified maximum |S| over all settings: 2 sqrt(t1^2 + t2^2).

    t1^2, t2^2 are the two largest eigenvalues of T^T T with T the
    correlation matrix.  Used as the independent oracle for the
    numerical optimizer.
    """
    t = correlation_matrix(check_density_matrix(rho))
    eigs = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return float(2 * math.sqrt(max(0.0, eigs[0] + eigs[1])))


def chsh_optimal_family(p: float, b_diag: float | None = None) -> tuple[float, ChshSettings]:
    """Extremal |S| = 2 sqrt(2) p of the singlet-coupled diagonal family.

    For any density matrix that is diagonal (A, B, B, D) with a real
    coupling -p/2 between |HV> and |VH>, the stationary equatorial
    settings below give |S| = 2 sqrt(2) p independently of the diagonal
    entries A, B, D.  The optional ``b_diag`` is validated against the
    family's positivity constraints (p/2 <= B <= 1/2).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"singlet weight p must be in [0, 1], got {p}")
    if b_diag is not None and not (p / 2 - 1e-12 <= b_diag <= 0.5 + 1e-12):
        raise ValueError(
            f"diagonal entry B={b_diag} incompatible with coupling p/2={p / 2}"
        )
    settings = ChshSettings(
        a1=BlochSetting(-math.pi / 2, math.pi / 4),
        a1p=BlochSetting(math.pi / 2, -math.pi / 4),
        a2=BlochSetting(math.pi / 2, math.pi / 2),
        a2p=BlochSetting(-math.pi / 2, 0.0),
    )
    return TSIRELSON_BOUND * p, settings


def _chsh_from_vectors(t: np.ndarray, x: np.ndarray) -> float:
    u1, u1p, v2, v2p = (_unit_vector(x[2 * k], x[2 * k + 1]) for k in range(4))
    return float(u1 @ t @ (v2 - v2p) + u1p @ t @ (v2 + v2p))


def _neg_s_squared(x: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    # S and its analytic gradient over the 8 angles; minimize -S^2.
    us = []
    dth = []
    dph = []
    for k in range(4):
        theta, phi = x[2 * k], x[2 * k + 1]
        st, ct = math.sin(theta), math.cos(theta)
        sp, cp = math.sin(phi), math.cos(phi)
        us.append(np.array([st * cp, st * sp, ct]))
        dth.append(np.array([ct * cp, ct * sp, -st]))
        dph.append(np.array([-st * sp, st * cp, 0.0]))
    u1, u1p, v2, v2p = us
    w1 = t @ (v2 - v2p)
    w1p = t @ (v2 + v2p)
    s = float(u1 @ w1 + u1p @ w1p)
    y = (u1 + u1p) @ t
    ym = (u1 - u1p) @ t
    ds = np.array(
        [
            dth[0] @ w1,
            dph[0] @ w1,
            dth[1] @ w1p,
            dph[1] @ w1p,
            y @ dth[2],
            y @ dph[2],
            -(ym @ dth[3]),
            -(ym @ dph[3]),
        ]
    )
    return -s * s, -2 * s * ds


def chsh_optimize(
    rho: np.ndarray, n_starts: int = 32, seed: int = 0
) -> tuple[float, ChshSettings]:
    """Numerically maximize |S| over all 8 analyzer angles.

    Multi-start quasi-Newton search with analytic gradients; the number
    of seeded random starts is ``n_starts`` (at least 8).  Returns
    (max |S|, extremal settings).  Raises ConvergenceError if no start
    converges or the best stationary point has a non-vanishing gradient.
    """
    rho = check_density_matrix(rho)
    t = correlation_matrix(rho)
    rng = np.random.default_rng(seed)
    n_starts = max(8, int(n_starts))
    best = None
    n_ok = 0
    for _ in range(n_starts):
        x0 = np.empty(8)
        x0[0::2] = rng.uniform(0.0, math.pi, 4)
        x0[1::2] = rng.uniform(-math.pi, math.pi, 4)
        res = minimize(
            _neg_s_squared,
            x0,
            args=(t,),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-12},
        )
        if res.success:
            n_ok += 1
        if best is None or res.fun < best.fun:
            best = res
    if n_ok == 0:
        raise ConvergenceError(
            f"CHSH optimizer failed to converge in {n_starts} restarts"
        )
    grad_norm = float(np.max(np.abs(best.jac)))
    s_max = math.sqrt(max(0.0, -best.fun))
    if s_max > 1e-9 and grad_norm > 1e-5:
        raise ConvergenceError(
            f"CHSH optimizer gradient {grad_norm:.2e} not stationary at best point"
        )
    x = best.x
    settings = ChshSettings(
        a1=BlochSetting(x[0], x[1]),
        a1p=BlochSetting(x[2], x[3]),
        a2=BlochSetting(x[4], x[5]),
        a2p=BlochSetting(x[6], x[7]),
    )
    return s_max, settings


# ---------------------------------------------------------------------------
# Polarizer-counts machinery.  Polarizer angles are radians in the library
# and degrees in every file and CLI surface.
# ---------------------------------------------------------------------------


def polarizer_ket(theta: float) -> np.ndarray:
    """Single-photon linear polarization ket (cos theta, sin theta)."""
    return np.array([math.cos(theta), math.sin(theta)], dtype=complex)


def joint_detection_probability(rho: np.ndarray, theta1: float, theta2: float) -> float:
    """Tr(rho P_theta1 x P_theta2) for linear analyzers on both arms."""
    k1 = polarizer_ket(theta1)
    k2 = polarizer_ket(theta2)
    pair = np.kron(k1, k2)
    return float(np.real(pair.conj() @ np.asarray(rho, dtype=complex) @ pair))


def angle_label(theta: float) -> str:
    """Canonical degree label of a polarizer angle (period 180 degrees)."""
    deg = round(math.degrees(theta), 9) % 180.0
    return f"{deg:.10g}"


@dataclass(frozen=True)
class AnglePlan:
    """The four base polarizer angles of a CHSH run, in radians."""

    theta1: float
    theta1p: float
    theta2: float
    theta2p: float

    def base_pairs(self) -> list[tuple[float, float]]:
        return [
            (self.theta1, self.theta2),
            (self.theta1, self.theta2p),
            (self.theta1p, self.theta2),
            (self.theta1p, self.theta2p),
        ]

    def all_settings(self) -> list[tuple[float, float]]:
        """All 16 joint settings: each base pair plus its orthogonal combos."""
        out: list[tuple[float, float]] = []
        seen = set()
        for t1, t2 in self.base_pairs():
            for a, b in _orthogonal_combos(t1, t2):
                key = (angle_label(a), angle_label(b))
                if key not in seen:
                    seen.add(key)
                    out.append((a, b))
        return out

    def bloch_settings(self) -> ChshSettings:
        """The Bloch-sphere directions Theta = 2 theta, Phi = 0 of the plan."""
        return ChshSettings(
            a1=BlochSetting(2 * self.theta1, 0.0),
            a1p=BlochSetting(2 * self.theta1p, 0.0),
            a2=BlochSetting(2 * self.theta2, 0.0),
            a2p=BlochSetting(2 * self.theta2p, 0.0),
        )


#: The standard singlet test plan: theta1 = 0, theta1' = 45 deg,
#: theta2 = 22.5 deg, theta2' = 67.5 deg.
STANDARD_PLAN = AnglePlan(0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)


def _orthogonal_combos(t1: float, t2: float) -> list[tuple[float, float]]:
    h = math.pi / 2
    return [(t1, t2), (t1 + h, t2 + h), (t1, t2 + h), (t1 + h, t2)]


@dataclass
class CountsTable:
    """Coincidence counts keyed by canonical (theta1, theta2) degree labels.

    Measured tables hold integers; noise-free expectation tables (used as
    oracles against the trace formulas) may hold real values.
    """

    entries: dict[tuple[str, str], float] = field(default_factory=dict)
    duration: float = 1.0

    def get(self, theta1: float, theta2: float) -> float:
        key = (angle_label(theta1), angle_label(theta2))
        if key not in self.entries:
            raise ValueError(f"counts table is missing the joint setting {key}")
        return self.entries[key]

    def set(self, theta1: float, theta2: float, counts: float) -> None:
        if counts < 0:
            raise ValueError("counts must be nonnegative")
        self.entries[(angle_label(theta1), angle_label(theta2))] = counts

    def scaled(self, factor: float) -> "CountsTable":
        """New table with every count multiplied by ``factor``."""
        return CountsTable(
            {k: v * factor for k, v in self.entries.items()}, self.duration
        )


def correlation_from_counts(counts: CountsTable, theta1: float, theta2: float) -> tuple[float, float]:
    """Polarization correlation P(theta1, theta2) and its Poisson variance.

    P = (C(t1,t2) + C(t1+90,t2+90) - C(t1,t2+90) - C(t1+90,t2)) / (sum of the four).
    """
    combos = _orthogonal_combos(theta1, theta2)
    a, b, c, d = (counts.get(t1, t2) for t1, t2 in combos)
    total = a + b + c + d
    if total == 0:
        raise ValueError(
            f"zero total counts for base pair ({angle_label(theta1)}, {angle_label(theta2)})"
        )
    p = (a + b - c - d) / total
    var = ((1 - p) ** 2 * (a + b) + (1 + p) ** 2 * (c + d)) / total**2
    return p, var


def chsh_from_counts(counts: CountsTable, plan: AnglePlan) -> tuple[float, float]:
    """Signed CHSH parameter and its 1-sigma Poisson error from counts.

    Every count is treated as an independent Poisson variable with
    variance equal to its value; the error is propagated to first order.
    """
    p11, v11 = correlation_from_counts(counts, plan.theta1, plan.theta2)
    p12, v12 = correlation_from_counts(counts, plan.theta1, plan.theta2p)
    p21, v21 = correlation_from_counts(counts, plan.theta1p, plan.theta2)
    p22, v22 = correlation_from_counts(counts, plan.theta1p, plan.theta2p)
    s = p11 - p12 + p21 + p22
    sigma = math.sqrt(v11 + v12 + v21 + v22)
    return s, sigma


def expected_counts(
    rho: np.ndarray, plan: AnglePlan, flux: float = 1e6, duration: float = 1.0
) -> CountsTable:
    """Noise-free expected counts of a CHSH plan (for oracle tests)."""
    table = CountsTable(duration=duration)
    for t1, t2 in plan.all_settings():
        table.set(t1, t2, flux * joint_detection_probability(rho, t1, t2))
    return table


def counts_to_csv(counts: CountsTable, path) -> None:
    """Write ``theta1_deg,theta2_deg,counts`` rows, one per joint setting."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# duration_s {counts.duration:.10g}\n")
        writer = csv.writer(fh)
        writer.writerow(["theta1_deg", "theta2_deg", "counts"])
        for (l1, l2), n in sorted(counts.entries.items()):
            writer.writerow([l1, l2, int(n) if float(n).is_integer() else f"{n:.10g}"])


def counts_from_csv(path) -> CountsTable:
    """Parse a counts CSV; raises InputFormatError with the offending line."""
    entries: dict[tuple[str, str], int] = {}
    duration = 1.0
    with open(path) as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "duration_s":
                try:
                    duration = float(parts[1])
                except ValueError:
                    raise InputFormatError(f"{path}:{i + 1}: bad duration {parts[1]!r}")
            body_start = i + 1
        else:
            break
    if body_start >= len(lines) or lines[body_start].strip() != "theta1_deg,theta2_deg,counts":
        raise InputFormatError(
            f"{path}:{body_start + 1}: expected header 'theta1_deg,theta2_deg,counts'"
        )
    for i, line in enumerate(lines[body_start + 1 :], start=body_start + 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InputFormatError(f"{path}:{i}: expected 3 fields, got {len(parts)}")
        try:
            t1 = float(parts[0])
            t2 = float(parts[1])
            n = float(parts[2])
            if n.is_integer():
                n = int(n)
        except ValueError as exc:
            raise InputFormatError(f"{path}:{i}: {exc}")
        if n < 0:
            raise InputFormatError(f"{path}:{i}: negative counts {n}")
        entries[(angle_label(math.radians(t1)), angle_label(math.radians(t2)))] = n
    return CountsTable(entries, duration)
