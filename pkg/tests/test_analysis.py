import numpy as np
import pytest

from nvoptics.analysis import (
    CorrelationPoint,
    PowerLawFit,
    compare_stages,
    map_pair_compare,
    monotonic_trend,
    over_irradiation_flag,
    power_law_fit,
    superlinear_flag,
)
from nvoptics.birefringence import DeltaNMap
from nvoptics.synth import stage_scenario, standard_normals
from nvoptics.types import StageLabel, ValidationError, WavelengthGrid

from conftest import absorption


def pts(x, y):
    return [CorrelationPoint(float(a), float(b), sample_id=f"s{i}") for i, (a, b) in enumerate(zip(x, y))]


# --- power law ------------------------------------------------------------

def test_exact_power_law():
    x = np.array([0.3, 1.0, 2.2, 5.0, 12.0])
    fit = power_law_fit(pts(x, 0.01 * x**1.5))
    assert fit.a == pytest.approx(0.01, rel=1e-9)
    assert fit.b == pytest.approx(1.5, rel=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-9)


def test_two_point_fit():
    fit = power_law_fit(pts([1, 10], [2, 20]))
    assert (fit.a, fit.b, fit.r2) == (pytest.approx(2.0), pytest.approx(1.0), pytest.approx(1.0))
    assert fit.n_points == 2


def test_noisy_synthetic_exponent():
    x = np.geomspace(0.2, 20.0, 20)
    noise = 0.05 * standard_normals(2024, 20)
    y = 0.05 * x**1.4 * 10**noise
    fit = power_law_fit(pts(x, y))
    assert 1.2 <= fit.b <= 1.6
    assert superlinear_flag(fit)


@pytest.mark.parametrize("s", [1e-3, 0.5, 7.0])
def test_scaling_equivariance(s):
    x = np.array([0.5, 1.0, 3.0, 8.0])
    y = np.array([0.02, 0.05, 0.3, 0.8])
    f1 = power_law_fit(pts(x, y))
    f2 = power_law_fit(pts(x, s * y))
    assert f2.a == pytest.approx(s * f1.a, rel=1e-12)
    assert f2.b == pytest.approx(f1.b, rel=1e-12, abs=1e-14)
    assert f2.r2 == pytest.approx(f1.r2, rel=1e-12)


def test_weighted_fit_downweights_noisy_point():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    y = 0.1 * x**1.2
    y[-1] *= 3
    points = [CorrelationPoint(a, b, y_err=(10 * b if i == 3 else 0.01 * b)) for i, (a, b) in enumerate(zip(x, y))]
    assert abs(power_law_fit(points, weighted=True).b - 1.2) < abs(power_law_fit(points).b - 1.2)


@pytest.mark.parametrize("bad", [pts([1], [1]), pts([1, 2], [1, -1]), pts([0, 2], [1, 2]), pts([2, 2], [1, 3])])
def test_power_law_errors(bad):
    with pytest.raises(ValueError):
        power_law_fit(bad)


@pytest.mark.parametrize("b, flag", [(1.5, True), (1.0, False), (0.8, False)])
def test_superlinear(b, flag):
    assert superlinear_flag(PowerLawFit(a=1.0, b=b, r2=1.0, n_points=2)) is flag


# --- monotonic trend ------------------------------------------------------

def test_trend_decreasing():
    t = monotonic_trend(pts([1, 2, 3, 4], [9, 5, 2, 1]))
    assert t.spearman_rho == pytest.approx(-1.0) and t.decreasing_flag


def test_trend_increasing():
    t = monotonic_trend(pts([1, 2, 3, 4], [1, 5, 6, 9]))
    assert t.spearman_rho == pytest.approx(1.0) and not t.decreasing_flag


def test_trend_constant():
    t = monotonic_trend(pts([1, 2, 3], [4, 4, 4]))
    assert t.spearman_rho == 0.0 and not t.decreasing_flag


def test_trend_ties_average_ranks():
    # ranks x: 1,2,3,4 ; y: 4,2.5,2.5,1 -> rho = -0.9486832980505138 (hand computed)
    t = monotonic_trend(pts([1, 2, 3, 4], [9, 5, 5, 1]))
    assert t.spearman_rho == pytest.approx(-0.9486832980505138, rel=1e-12)


def test_trend_invariant_under_monotone_transform():
    rng = np.random.default_rng(4)
    x, y = rng.uniform(0.1, 10, 15), rng.uniform(1e-6, 1e-4, 15)
    a = monotonic_trend(pts(x, y))
    b = monotonic_trend(pts(x, np.log(y) * 3 + 2))
    assert a.spearman_rho == pytest.approx(b.spearman_rho, rel=1e-14)


def test_trend_needs_three_points():
    with pytest.raises(ValueError):
        monotonic_trend(pts([1, 2], [1, 2]))


# --- stages ---------------------------------------------------------------

def test_identical_stages_zero_deltas(uv_grid):
    s = stage_scenario("low", uv_grid)[0][1]
    cmp = compare_stages([(StageLabel.AS_GROWN, s), (StageLabel.ANNEALED, s)])
    assert cmp.deltas[0]["band_avg_680_760"] == 0.0
    assert cmp.deltas[0]["gr1_metric"] == 0.0


def test_high_fluence_scenario():
    cmp = compare_stages(stage_scenario("high"))
    irr, ann = cmp.deltas
    assert irr["band_avg_680_760"] > 0
    assert ann["band_avg_680_760"] < 0
    assert cmp.stages[2].band_avg_680_760 > cmp.stages[0].band_avg_680_760
    assert over_irradiation_flag(cmp)
    assert cmp.flags == {"over_irradiated": True, "anneal_recovered": True}


def test_low_fluence_scenario():
    cmp = compare_stages(stage_scenario("low"))
    assert all(abs(d["band_avg_680_760"]) < 1e-3 for d in cmp.deltas)
    assert not over_irradiation_flag(cmp)


def test_zero_thresholds_any_gr1():
    cmp = compare_stages(stage_scenario("high"))
    assert over_irradiation_flag(cmp, gr1_min=0.0, residual_700_min=0.0)


def test_deltas_antisymmetric(uv_grid):
    (_, a), (_, b), _ = stage_scenario("high", uv_grid)
    fwd = compare_stages([(StageLabel.AS_GROWN, a), (StageLabel.IRRADIATED, b)])
    rev = compare_stages([(StageLabel.AS_GROWN, b), (StageLabel.IRRADIATED, a)])
    for key in ("band_avg_680_760", "gr1_metric", "nv_band_metric"):
        assert fwd.deltas[0][key] == pytest.approx(-rev.deltas[0][key], rel=1e-12, abs=1e-12)


def test_stage_order_enforced(uv_grid):
    s = absorption(uv_grid, 1.0)
    with pytest.raises(ValidationError):
        compare_stages([(StageLabel.ANNEALED, s), (StageLabel.AS_GROWN, s)])


def test_over_irradiation_needs_irradiated(uv_grid):
    s = absorption(uv_grid, 1.0)
    cmp = compare_stages([(StageLabel.AS_GROWN, s), (StageLabel.ANNEALED, s)])
    with pytest.raises(ValidationError):
        over_irradiation_flag(cmp)


# --- map pairs ------------------------------------------------------------

def test_identical_maps():
    m = DeltaNMap(np.full((3, 3), 2e-5), np.ones((3, 3), bool))
    r = map_pair_compare(m, m)
    assert r.mean_delta == 0.0 and not r.reduced_flag


def test_uniform_reduction():
    before = DeltaNMap(np.full((3, 3), 2e-5), np.ones((3, 3), bool))
    after = DeltaNMap(before.values - 1e-6, before.mask)
    r = map_pair_compare(before, after)
    assert r.mean_delta == pytest.approx(-1e-6, rel=1e-9) and r.reduced_flag


def test_random_pair_against_pixel_loop():
    rng = np.random.default_rng(12)
    a, b = rng.uniform(0, 1e-4, (2, 9, 11))
    ma, mb = rng.random((2, 9, 11)) > 0.25
    r = map_pair_compare(DeltaNMap(a, ma), DeltaNMap(b, mb))
    diffs = [b[i, j] - a[i, j] for i in range(9) for j in range(11) if ma[i, j] and mb[i, j]]
    mean = sum(diffs) / len(diffs)
    std = (sum((d - mean) ** 2 for d in diffs) / len(diffs)) ** 0.5
    assert r.n_joint == len(diffs)
    assert r.mean_delta == pytest.approx(mean, rel=1e-12)
    assert r.std_delta == pytest.approx(std, rel=1e-10)


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        map_pair_compare(DeltaNMap(np.ones((2, 2)), np.ones((2, 2), bool)),
                         DeltaNMap(np.ones((2, 3)), np.ones((2, 3), bool)))
