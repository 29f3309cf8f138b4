import math

import numpy as np
import pytest

from ering.entanglement import (
    MEMS,
    Region,
    WERNER,
    classify,
    concurrence,
    entropy_points_to_csv,
    EntropyPoint,
    is_separable_ppt,
    linear_entropy,
    partial_transpose,
    tangle,
    tangle_curve,
)
from ering.sampling import random_density_matrix
from ering.states import mems, projector, singlet, werner, werner_from_fidelity

INV_SQ2 = 1 / math.sqrt(2)


def test_tangle_singlet():
    assert tangle(projector(singlet())) == pytest.approx(1.0, abs=1e-12)


def test_tangle_separability_boundary():
    assert tangle(werner(1 / 3)) == pytest.approx(0.0, abs=1e-12)
    assert tangle(werner(1 / 3 + 1e-6)) > 0


def test_tangle_werner_closed_form():
    # concurrence of werner(p) is (3p-1)/2 above the boundary
    assert tangle(werner(0.82)) == pytest.approx(0.5329, abs=1e-12)
    for p in (0.4, 0.6, 0.9):
        assert concurrence(werner(p)) == pytest.approx((3 * p - 1) / 2, abs=1e-12)


def test_linear_entropy_limits():
    assert linear_entropy(projector(singlet())) == pytest.approx(0.0, abs=1e-12)
    assert linear_entropy(np.eye(4, dtype=complex) / 4) == pytest.approx(1.0)


def test_linear_entropy_werner():
    for p in np.linspace(0, 1, 51):
        assert linear_entropy(werner(p)) == pytest.approx(1 - p * p, abs=1e-12)


def test_partial_transpose_involution(rng):
    rho = random_density_matrix(rng)
    assert np.allclose(partial_transpose(partial_transpose(rho)), rho)


def test_ppt_regions():
    separable, _ = is_separable_ppt(werner(0.2))
    assert separable
    separable, neg = is_separable_ppt(werner(0.5))
    assert not separable
    assert neg > 0


def test_ppt_product_state():
    v = np.array([0, 1, 0, 0], dtype=complex)
    separable, neg = is_separable_ppt(projector(v))
    assert separable
    assert neg == 0.0


def test_tangle_curve_werner_endpoints():
    assert tangle_curve(WERNER, 0.0) == pytest.approx(1.0)
    assert tangle_curve(WERNER, 8 / 9) == pytest.approx(0.0, abs=1e-12)
    assert tangle_curve(WERNER, 0.95) == 0.0


def test_tangle_curve_mems_threshold_point():
    s_l = linear_entropy(mems(INV_SQ2))
    assert round(s_l, 3) == 0.552
    assert tangle_curve(MEMS, s_l) == pytest.approx(0.5, abs=1e-12)
    assert tangle(mems(INV_SQ2)) == pytest.approx(0.5, abs=1e-12)


def test_tangle_curve_domain():
    with pytest.raises(ValueError):
        tangle_curve(WERNER, -0.1)
    with pytest.raises(ValueError):
        tangle_curve(MEMS, 1.2)
    with pytest.raises(ValueError):
        tangle_curve("bell", 0.5)
    assert tangle_curve(MEMS, 0.93) == 0.0


def test_werner_curve_consistency_wootters_oracle():
    for p in np.linspace(0, 1, 101):
        rho = werner(p)
        assert abs(tangle(rho) - tangle_curve(WERNER, linear_entropy(rho))) < 1e-10


def test_mems_curve_consistency_both_branches():
    for p in np.linspace(0, 1, 101):
        rho = mems(p)
        t = tangle(rho)
        assert abs(t - p * p) < 1e-10
        assert abs(t - tangle_curve(MEMS, linear_entropy(rho))) < 1e-10


def test_mems_curve_dominates_werner_curve():
    for s in np.linspace(0, 8 / 9, 400):
        assert tangle_curve(WERNER, s) <= tangle_curve(MEMS, s) + 1e-12


def test_tangle_from_fidelity_form():
    for fid in np.linspace(0.25, 1, 101):
        expected = max(0.0, 2 * fid - 1) ** 2
        assert tangle(werner_from_fidelity(fid)) == pytest.approx(expected, abs=1e-10)


def test_tangle_iff_npt_on_random_mixtures(rng):
    for _ in range(1000):
        rho = random_density_matrix(rng)
        entangled = tangle(rho) > 1e-12
        separable, _ = is_separable_ppt(rho)
        assert entangled == (not separable)


def test_classify_werner():
    cls = classify(WERNER, 0.9)
    assert cls.region is Region.VIOLATES_LOCAL_REALISM
    assert cls.s_l_interval == (0.0, 0.5)
    assert classify(WERNER, 0.5).region is Region.NONSEPARABLE_NO_CHSH_VIOLATION
    assert classify(WERNER, 0.2).region is Region.SEPARABLE_LOCAL
    assert classify(WERNER, 0.2).s_l_interval == (8 / 9, 1.0)


def test_classify_boundary_is_strict():
    # exactly p = 1/sqrt(2) sits on the non-violating side
    assert classify(WERNER, INV_SQ2).region is Region.NONSEPARABLE_NO_CHSH_VIOLATION
    assert classify(MEMS, INV_SQ2).region is Region.NONSEPARABLE_NO_CHSH_VIOLATION
    assert classify(MEMS, INV_SQ2 + 1e-9).region is Region.VIOLATES_LOCAL_REALISM


def test_classify_mems_has_no_separable_region():
    for p in np.linspace(0, 1, 101):
        assert classify(MEMS, p).region is not Region.SEPARABLE_LOCAL


def test_classify_mems_interval():
    cls = classify(MEMS, 0.9)
    assert cls.s_l_interval[0] == 0.0
    assert round(cls.s_l_interval[1], 3) == 0.552


def test_classify_range_errors():
    with pytest.raises(ValueError):
        classify(WERNER, 1.2)
    with pytest.raises(ValueError):
        classify("other", 0.5)


def test_entropy_points_csv(tmp_path):
    points = [
        EntropyPoint(linear_entropy(werner(p)), tangle(werner(p)), WERNER, p)
        for p in (0.27, 0.47, 0.82)
    ]
    path = tmp_path / "points.csv"
    entropy_points_to_csv(points, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "S_L,T,family,p"
    assert len(lines) == 4
    s_l, t, family, p = lines[1].split(",")
    assert family == WERNER
    assert float(s_l) == pytest.approx(1 - 0.27**2)
    assert float(t) == pytest.approx(tangle(werner(0.27)))
