import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ering.bell import (
    AnglePlan,
    BlochSetting,
    ChshSettings,
    CountsTable,
    STANDARD_PLAN,
    angle_label,
    chsh,
    chsh_from_counts,
    chsh_max_from_correlation_matrix,
    chsh_optimal_family,
    chsh_optimize,
    correlation,
    counts_from_csv,
    counts_to_csv,
    expected_counts,
    joint_detection_probability,
    observable,
)
from ering.errors import InputFormatError
from ering.sampling import random_density_matrix
from ering.states import mems, projector, singlet, werner

SQ2 = math.sqrt(2)


def random_family_state(rng):
    """Random diagonal (A, B, B, D) state with a real -p/2 coupling."""
    b = rng.uniform(0.0, 0.5)
    p = rng.uniform(0.0, min(1.0, 2 * b))
    rest = 1 - 2 * b
    a = rng.uniform(0.0, rest)
    rho = np.diag([a, b, b, rest - a]).astype(complex)
    rho[1, 2] = rho[2, 1] = -p / 2
    return rho, p, b


def test_observable_pauli_limits():
    assert np.allclose(observable(BlochSetting(0.0, 0.0)), np.diag([1, -1]))
    assert np.allclose(
        observable(BlochSetting(math.pi / 2, 0.0)), np.array([[0, 1], [1, 0]]), atol=1e-15
    )
    assert np.allclose(
        observable(BlochSetting(math.pi / 2, math.pi / 2)),
        np.array([[0, -1j], [1j, 0]]),
        atol=1e-15,
    )


def test_observable_algebra(rng):
    for _ in range(50):
        s = BlochSetting(rng.uniform(-6, 6), rng.uniform(-6, 6))
        o = observable(s)
        assert np.allclose(o, o.conj().T)
        assert abs(np.trace(o)) < 1e-12
        assert np.allclose(o @ o, np.eye(2), atol=1e-12)


@given(theta=st.floats(-10, 10), phi=st.floats(-10, 10))
def test_bloch_setting_normalization_preserves_direction(theta, phi):
    s = BlochSetting(theta, phi)
    assert 0.0 <= s.theta <= math.pi
    assert -math.pi < s.phi <= math.pi
    raw = np.array(
        [
            math.sin(theta) * math.cos(phi),
            math.sin(theta) * math.sin(phi),
            math.cos(theta),
        ]
    )
    assert np.allclose(s.unit_vector(), raw, atol=1e-9)


def test_correlation_singlet_anticorrelated(rng):
    rho = projector(singlet())
    for _ in range(20):
        s = BlochSetting(rng.uniform(0, math.pi), rng.uniform(-math.pi, math.pi))
        assert correlation(rho, s, s) == pytest.approx(-1.0, abs=1e-12)


def test_correlation_werner_equatorial():
    s = BlochSetting(math.pi / 2, 0.0)
    for p in (0.0, 0.3, 0.7, 1.0):
        assert correlation(werner(p), s, s) == pytest.approx(-p, abs=1e-12)


def test_correlation_closed_form_for_family(rng):
    # Tr(rho O1 x O2) must reproduce
    # (1 - 4B) cos T1 cos T2 - p cos(F1 - F2) sin T1 sin T2
    for _ in range(1000):
        rho, p, b = random_family_state(rng)
        t1, t2 = rng.uniform(0, math.pi, 2)
        f1, f2 = rng.uniform(-math.pi, math.pi, 2)
        got = correlation(rho, BlochSetting(t1, f1), BlochSetting(t2, f2))
        want = (1 - 4 * b) * math.cos(t1) * math.cos(t2) - p * math.cos(
            f1 - f2
        ) * math.sin(t1) * math.sin(t2)
        assert abs(got - want) < 1e-10


def section_v_settings():
    return ChshSettings(
        a1=BlochSetting(0.0, 0.0),
        a1p=BlochSetting(math.pi / 2, 0.0),
        a2=BlochSetting(math.pi / 4, 0.0),
        a2p=BlochSetting(3 * math.pi / 4, 0.0),
    )


def test_chsh_singlet_known_settings():
    s = chsh(projector(singlet()), section_v_settings())
    # trace convention: the singlet extremum at these settings is negative
    assert s == pytest.approx(-2 * SQ2, abs=1e-12)
    assert abs(s) == pytest.approx(2 * SQ2, abs=1e-12)


def test_chsh_maximally_mixed_vanishes(rng):
    rho = np.eye(4, dtype=complex) / 4
    for _ in range(10):
        settings = ChshSettings(
            *(BlochSetting(rng.uniform(0, math.pi), rng.uniform(-math.pi, math.pi)) for _ in range(4))
        )
        assert chsh(rho, settings) == pytest.approx(0.0, abs=1e-12)


def test_chsh_at_family_optimal_settings():
    # the quoted extremal settings; the trace evaluates to +2 sqrt(2) p there
    s_opt, settings = chsh_optimal_family(0.5)
    assert s_opt == pytest.approx(SQ2)
    assert chsh(werner(0.5), settings) == pytest.approx(SQ2, abs=1e-12)


def test_chsh_optimal_family_values():
    assert chsh_optimal_family(1.0)[0] == pytest.approx(2 * SQ2)
    assert chsh_optimal_family(1 / SQ2)[0] == pytest.approx(2.0)
    assert chsh_optimal_family(0.47)[0] == pytest.approx(2 * SQ2 * 0.47)


def test_chsh_optimal_family_independent_of_diagonal(rng):
    # |S| at the quoted settings depends only on the coupling weight p
    for _ in range(50):
        rho, p, b = random_family_state(rng)
        s_opt, settings = chsh_optimal_family(p, b)
        assert abs(chsh(rho, settings)) == pytest.approx(s_opt, abs=1e-10)


def test_chsh_optimal_family_validation():
    with pytest.raises(ValueError):
        chsh_optimal_family(1.2)
    with pytest.raises(ValueError):
        chsh_optimal_family(0.8, 0.1)  # B < p/2 breaks positivity


def test_chsh_optimize_singlet():
    s_max, settings = chsh_optimize(projector(singlet()), seed=1)
    assert s_max == pytest.approx(2 * SQ2, abs=1e-9)
    assert abs(chsh(projector(singlet()), settings)) == pytest.approx(s_max, abs=1e-9)


def test_chsh_optimize_werner_and_mems():
    s_max, _ = chsh_optimize(werner(0.6), seed=2)
    assert s_max == pytest.approx(2 * SQ2 * 0.6, abs=1e-6)
    s_max, _ = chsh_optimize(mems(0.8), seed=2)
    assert s_max == pytest.approx(2 * SQ2 * 0.8, abs=1e-6)


def test_chsh_optimize_beats_random_settings(rng):
    rho = random_density_matrix(rng)
    s_max, _ = chsh_optimize(rho, seed=3)
    for _ in range(10_000):
        settings = ChshSettings(
            *(BlochSetting(rng.uniform(0, math.pi), rng.uniform(-math.pi, math.pi)) for _ in range(4))
        )
        assert abs(chsh(rho, settings)) <= s_max + 1e-9


def test_chsh_optimize_matches_oracle_random(rng):
    for _ in range(25):
        rho = random_density_matrix(rng)
        s_max, _ = chsh_optimize(rho, seed=4)
        assert s_max == pytest.approx(chsh_max_from_correlation_matrix(rho), abs=1e-6)


def test_chsh_optimize_stationary(rng):
    # central finite differences at the optimum must vanish
    rho = werner(0.8)
    _, settings = chsh_optimize(rho, seed=5)
    x = []
    for s in (settings.a1, settings.a1p, settings.a2, settings.a2p):
        x.extend([s.theta, s.phi])
    step = 1e-5

    def s_of(vec):
        st = ChshSettings(
            BlochSetting(vec[0], vec[1]),
            BlochSetting(vec[2], vec[3]),
            BlochSetting(vec[4], vec[5]),
            BlochSetting(vec[6], vec[7]),
        )
        return chsh(rho, st)

    for k in (0, 2, 4, 6):  # the four Theta angles
        up = list(x)
        dn = list(x)
        up[k] += step
        dn[k] -= step
        deriv = (s_of(up) - s_of(dn)) / (2 * step)
        assert abs(deriv) <= 1e-4


def test_tsirelson_never_exceeded(rng):
    for _ in range(200):
        rho = random_density_matrix(rng)
        s_max, _ = chsh_optimize(rho, n_starts=8, seed=6)
        assert s_max <= 2 * SQ2 + 1e-9


# ---------------------------------------------------------------------------
# counts path
# ---------------------------------------------------------------------------


def test_chsh_from_counts_ideal_singlet():
    table = expected_counts(projector(singlet()), STANDARD_PLAN, flux=1e6)
    s, sigma = chsh_from_counts(table, STANDARD_PLAN)
    assert abs(s) == pytest.approx(2 * SQ2, abs=1e-12)
    assert sigma > 0


def test_chsh_from_counts_flat_table_is_zero():
    table = CountsTable(duration=1.0)
    for t1, t2 in STANDARD_PLAN.all_settings():
        table.set(t1, t2, 1000)
    s, _ = chsh_from_counts(table, STANDARD_PLAN)
    assert s == 0.0


def test_counts_equal_trace_evaluation(rng):
    # noiseless counts reproduce the density-matrix evaluation exactly
    for _ in range(25):
        rho = random_density_matrix(rng)
        plan = AnglePlan(*rng.uniform(0, math.pi, 4))
        table = expected_counts(rho, plan, flux=1.0)
        s_counts, _ = chsh_from_counts(table, plan)
        s_trace = chsh(rho, plan.bloch_settings())
        assert s_counts == pytest.approx(s_trace, abs=1e-12)


def test_scaled_count_invariance():
    table = expected_counts(werner(0.8), STANDARD_PLAN, flux=1e5)
    s1, sig1 = chsh_from_counts(table, STANDARD_PLAN)
    s2, sig2 = chsh_from_counts(table.scaled(4.0), STANDARD_PLAN)
    assert s2 == pytest.approx(s1, abs=1e-12)
    assert sig2 == pytest.approx(sig1 / 2.0, rel=1e-9)


def test_chsh_from_counts_missing_entry():
    table = expected_counts(werner(0.8), STANDARD_PLAN, flux=1e5)
    del table.entries[("0", "22.5")]
    with pytest.raises(ValueError, match="missing"):
        chsh_from_counts(table, STANDARD_PLAN)


def test_chsh_from_counts_zero_denominator():
    table = CountsTable(duration=1.0)
    for t1, t2 in STANDARD_PLAN.all_settings():
        table.set(t1, t2, 0)
    with pytest.raises(ValueError, match="zero total"):
        chsh_from_counts(table, STANDARD_PLAN)


def test_angle_labels_canonical():
    assert angle_label(math.radians(22.5)) == "22.5"
    assert angle_label(math.radians(22.5 + 180)) == "22.5"
    assert angle_label(0.0) == "0"


def test_all_settings_dedupes_and_covers():
    settings = STANDARD_PLAN.all_settings()
    assert len(settings) == 16
    labels = {(angle_label(a), angle_label(b)) for a, b in settings}
    assert len(labels) == 16


def test_counts_csv_round_trip(tmp_path):
    table = expected_counts(werner(0.9), STANDARD_PLAN, flux=1e5)
    table = CountsTable({k: round(v) for k, v in table.entries.items()}, duration=42.0)
    path = tmp_path / "counts.csv"
    counts_to_csv(table, path)
    loaded = counts_from_csv(path)
    assert loaded.duration == 42.0
    assert loaded.entries == table.entries


def test_counts_csv_parse_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("theta1_deg,theta2_deg,counts\n0,22.5,12,99\n")
    with pytest.raises(InputFormatError, match="bad.csv:2"):
        counts_from_csv(bad)
    bad.write_text("wrong,header\n")
    with pytest.raises(InputFormatError, match="header"):
        counts_from_csv(bad)
    bad.write_text("theta1_deg,theta2_deg,counts\n0,22.5,-5\n")
    with pytest.raises(InputFormatError, match="negative"):
        counts_from_csv(bad)


def test_joint_detection_probability_singlet():
    rho = projector(singlet())
    assert joint_detection_probability(rho, 0.3, 0.3) == pytest.approx(0.0, abs=1e-12)
    assert joint_detection_probability(rho, 0.0, math.pi / 2) == pytest.approx(0.5)
