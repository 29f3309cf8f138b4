"""Two-qubit polarization state families as 4x4 density matrices.

Everything in this package works in the fixed product basis

    |HH>, |HV>, |VH>, |VV>

(first letter = photon 1, second = photon 2), and density matrices are
plain complex numpy arrays in that ordering.  A valid density matrix is
Hermitian, has unit trace and is positive semidefinite; ``check_density_matrix``
enforces those three invariants at the tolerances used throughout.

The state families provided here are the phase-tunable Bell pairs, the
non-maximally entangled pairs produced by unbalancing the pump, Werner
states (singlet + white noise), the maximally entangled mixed states
(MEMS, maximum tangle at fixed linear entropy) and the Werner family
rotated by a nonlocal unitary that trades entanglement for the parameter
``a`` of its dominant eigenvector.
"""

from __future__ import annotations

import json
import math

import numpy as np

BASIS = ("HH", "HV", "VH", "VV")

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
PSD_EIGENVALUE_FLOOR = -1e-10
WEIGHT_SUM_ATOL = 1e-9


def check_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Validate a 4x4 density matrix and return it as a complex array.

    Raises ValueError if the matrix is not 4x4, not Hermitian within
    1e-12, not unit trace within 1e-12, or has an eigenvalue below -1e-10.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"density matrix must be 4x4, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=HERMITIAN_ATOL, rtol=0):
        raise ValueError("density matrix is not Hermitian within 1e-12")
    if abs(np.trace(rho) - 1.0) > TRACE_ATOL:
        raise ValueError(f"density matrix trace {np.trace(rho):.3e} is not 1 within 1e-12")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < PSD_EIGENVALUE_FLOOR:
        raise ValueError(f"density matrix has negative eigenvalue {eigs.min():.3e}")
    return rho


def is_physical(rho: np.ndarray) -> bool:
    """True iff ``rho`` passes all density-matrix invariants."""
    try:
        check_density_matrix(rho)
    except ValueError:
        return False
    return True


def repair_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Clip tiny negative eigenvalues to zero and renormalize the trace.

    This is the only place where an unphysical matrix is silently made
    physical; use it for optimizer initialization, never for results.
    """
    rho = np.asarray(rho, dtype=complex)
    rho = (rho + rho.conj().T) / 2
    eigs, vecs = np.linalg.eigh(rho)
    eigs = np.clip(eigs, 0.0, None)
    if eigs.sum() == 0.0:
        raise ValueError("cannot repair matrix with no positive eigenvalue")
    eigs /= eigs.sum()
    return (vecs * eigs) @ vecs.conj().T


def check_pure_state(psi: np.ndarray) -> np.ndarray:
    """Validate a 4-component state vector (unit norm within 1e-12)."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (4,):
        raise ValueError(f"pure state must have 4 amplitudes, got shape {psi.shape}")
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-12:
        raise ValueError("pure state is not normalized within 1e-12")
    return psi


def projector(psi: np.ndarray) -> np.ndarray:
    """Rank-1 density matrix |psi><psi| of a normalized state vector."""
    psi = check_pure_state(psi)
    return np.outer(psi, psi.conj())


def bell_state(kind: str, phase: float = 0.0) -> np.ndarray:
    """Phase-tunable Bell pair.

    Parameters
    ----------
    kind : "phi" or "psi"
        "phi" gives (|HH> + e^{i phase}|VV>)/sqrt(2),
        "psi" gives (|HV> + e^{i phase}|VH>)/sqrt(2).
    phase : float
        Relative phase in radians.  phase = 0 and pi recover the four
        standard Bell states; ("psi", pi) is the singlet.
    """
    amp = np.exp(1j * float(phase)) / math.sqrt(2)
    if kind == "phi":
        return np.array([1 / math.sqrt(2), 0, 0, amp], dtype=complex)
    if kind == "psi":
        return np.array([0, 1 / math.sqrt(2), amp, 0], dtype=complex)
    raise ValueError(f"kind must be 'phi' or 'psi', got {kind!r}")


def singlet() -> np.ndarray:
    """The singlet state vector (|HV> - |VH>)/sqrt(2)."""
    return bell_state("psi", math.pi)


def nonmax_state(theta_p: float) -> np.ndarray:
    """Non-maximally entangled pair from a pump-waveplate rotation.

    Rotating the pump waveplate by theta_p unbalances the two emission
    cones, producing alpha|HH> + beta|VV> with amplitude ratio
    gamma = |alpha/beta| = cos^2(2 theta_p).  gamma falls monotonically
    from 1 (maximally entangled, theta_p=0) to 0 (product state |VV>,
    theta_p=pi/4).

    theta_p is in radians and must lie in [0, pi/4].
    """
    if not 0.0 <= theta_p <= math.pi / 4 + 1e-15:
        raise ValueError(f"theta_p must be in [0, pi/4], got {theta_p}")
    gamma = math.cos(2 * theta_p) ** 2
    norm = math.sqrt(1 + gamma**2)
    return np.array([gamma / norm, 0, 0, 1 / norm], dtype=complex)


def entanglement_ratio(theta_p: float) -> float:
    """The amplitude ratio gamma = cos^2(2 theta_p) of ``nonmax_state``."""
    if not 0.0 <= theta_p <= math.pi / 4 + 1e-15:
        raise ValueError(f"theta_p must be in [0, pi/4], got {theta_p}")
    return math.cos(2 * theta_p) ** 2


def werner(p: float) -> np.ndarray:
    """Werner state: p * singlet projector + (1-p)/4 * identity.

    In the standard basis the matrix is diagonal (A, B, B, A) with
    A = (1-p)/4 and B = (1+p)/4, plus a real coupling C = -p/2 between
    |HV> and |VH>.  Requires 0 <= p <= 1.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"singlet weight p must be in [0, 1], got {p}")
    a = (1 - p) / 4
    b = (1 + p) / 4
    c = -p / 2
    rho = np.diag([a, b, b, a]).astype(complex)
    rho[1, 2] = c
    rho[2, 1] = c
    return rho


def werner_from_fidelity(fidelity: float) -> np.ndarray:
    """Werner state parameterized by its overlap F with the singlet.

    F = (3p + 1)/4, so this returns werner((4F - 1)/3).  Requires
    1/4 <= F <= 1.
    """
    if not 0.25 <= fidelity <= 1.0:
        raise ValueError(f"singlet fidelity must be in [1/4, 1], got {fidelity}")
    return werner((4 * fidelity - 1) / 3)


def mems_weight(p: float) -> float:
    """Diagonal weight g(p) of the MEMS family: p/2 for p >= 2/3, else 1/3."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"singlet weight p must be in [0, 1], got {p}")
    return p / 2 if p >= 2 / 3 else 1 / 3


def mems(p: float) -> np.ndarray:
    """Maximally entangled mixed state with singlet weight p.

    Diagonal (1-2g, g, g, 0) with g = mems_weight(p) and coupling -p/2
    between |HV> and |VH>.  These states carry the maximum tangle (p^2)
    achievable at their linear entropy.
    """
    g = mems_weight(p)
    rho = np.diag([1 - 2 * g, g, g, 0.0]).astype(complex)
    rho[1, 2] = -p / 2
    rho[2, 1] = -p / 2
    return rho


def tune_entanglement(fidelity: float, a: float) -> np.ndarray:
    """Werner mixture with its entangled eigenvector rotated to sqrt(a)|HH> + sqrt(1-a)|VV>.

    Returns ((1-F)/3) I + ((4F-1)/3) |psi><psi| where
    |psi> = sqrt(a)|HH> + sqrt(1-a)|VV>.  At a = 1/2 the spectrum matches
    werner_from_fidelity(F); raising a toward 1 removes the entanglement
    without changing the eigenvalues.  Requires F in [1/4, 1], a in [1/2, 1].
    """
    if not 0.25 <= fidelity <= 1.0:
        raise ValueError(f"fidelity must be in [1/4, 1], got {fidelity}")
    if not 0.5 <= a <= 1.0:
        raise ValueError(f"a must be in [1/2, 1], got {a}")
    psi = np.array([math.sqrt(a), 0, 0, math.sqrt(1 - a)], dtype=complex)
    return ((1 - fidelity) / 3) * np.eye(4, dtype=complex) + (
        (4 * fidelity - 1) / 3
    ) * np.outer(psi, psi.conj())


def tuning_entanglement_bound(fidelity: float) -> float:
    """Largest a below which ``tune_entanglement(F, a)`` is still entangled.

    a_max = (1 + sqrt(3(4F^2 - 1)) / (4F - 1)) / 2, clamped to 1.  States
    with F <= 1/2 are never entangled; the empty interval is signalled by
    returning 1/2.
    """
    if not 0.25 <= fidelity <= 1.0:
        raise ValueError(f"fidelity must be in [1/4, 1], got {fidelity}")
    if fidelity <= 0.5:
        return 0.5
    a_max = 0.5 * (1 + math.sqrt(3 * (4 * fidelity**2 - 1)) / (4 * fidelity - 1))
    return min(a_max, 1.0)


def mix(components: list[tuple[float, np.ndarray]]) -> np.ndarray:
    """Convex mixture of density matrices.

    ``components`` is a list of (weight, rho) with nonnegative weights
    summing to 1 within 1e-9.  The result passes all density-matrix
    invariants.
    """
    if not components:
        raise ValueError("mix() requires at least one component")
    weights = [w for w, _ in components]
    if any(w < 0 for w in weights):
        raise ValueError("mixture weights must be nonnegative")
    total = sum(weights)
    if abs(total - 1.0) > WEIGHT_SUM_ATOL:
        raise ValueError(f"mixture weights sum to {total}, expected 1 within 1e-9")
    out = np.zeros((4, 4), dtype=complex)
    for w, rho in components:
        out += w * check_density_matrix(rho)
    return out


# ---------------------------------------------------------------------------
# Serialization.  The on-disk format for every density matrix in this repo:
# {"basis": ["HH","HV","VH","VV"], "re": 4x4, "im": 4x4}, row-major.
# ---------------------------------------------------------------------------


def density_matrix_to_dict(rho: np.ndarray) -> dict:
    rho = np.asarray(rho, dtype=complex)
    return {
        "basis": list(BASIS),
        "re": rho.real.tolist(),
        "im": rho.imag.tolist(),
    }


def density_matrix_from_dict(obj: dict) -> np.ndarray:
    if list(obj.get("basis", [])) != list(BASIS):
        raise ValueError(f"unexpected basis {obj.get('basis')}, want {list(BASIS)}")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != (4, 4) or im.shape != (4, 4):
        raise ValueError("re and im must both be 4x4 arrays")
    return re + 1j * im


def save_density_matrix(rho: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        json.dump(density_matrix_to_dict(rho), fh, indent=2)
        fh.write("\n")


def load_density_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return density_matrix_from_dict(json.load(fh))
