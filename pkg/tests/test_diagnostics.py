import csv
import json
import math

import numpy as np
import pytest
from oracles import convolve_truncated

from rgfvar import diagnostics as dg
from rgfvar.covariance import HorizontalCovarianceOp
from rgfvar.grid import Grid2D, uniform_scale


@pytest.mark.parametrize("order,k", [(1, 1), (1, 5), (1, 10), (3, 1)])
def test_impulse_report_recomputes_exactly(order, k):
    rep = dg.impulse_response(2.0, order, k)
    d = rep.h / rep.h.sum() - rep.g / rep.g.sum()
    assert rep.err_h_l2 == float(np.linalg.norm(d))
    assert rep.err_h_max == float(np.max(np.abs(d)))
    assert rep.sum_h == float(rep.h.sum())
    assert rep.h.size == 300 and rep.offsets[150] == 0 and rep.g[150] == 1.0


def test_impulse_orderings():
    e = {k: dg.impulse_response(2.0, 1, k).err_h_l2 for k in (1, 5, 10)}
    assert e[1] > e[5] > e[10]
    assert dg.impulse_response(2.0, 3).err_h_l2 <= 1.1 * e[10]


def test_impulse_sum_third_order():
    assert dg.impulse_response(2.0, 3).sum_h == pytest.approx(math.sqrt(2 * math.pi) * 2.0, rel=0.005)


def test_impulse_files(tmp_path):
    rep = dg.impulse_response(2.0, 3, length=64)
    rep.to_csv(tmp_path / "h.csv")
    rep.to_json(tmp_path / "h.json")
    with open(tmp_path / "h.csv") as f:
        rows = list(csv.DictReader(f))
    h = np.array([float(r["h"]) for r in rows])
    g = np.array([float(r["g"]) for r in rows])
    assert np.array_equal(h, rep.h) and np.array_equal(g, rep.g)
    assert json.loads((tmp_path / "h.json").read_text())["err_h_l2"] == rep.err_h_l2


def test_impulse_length_and_quality():
    with pytest.raises(ValueError):
        dg.impulse_response(2.0, 3, length=3)
    with pytest.warns(dg.QualityWarning):
        rep = dg.impulse_response(0.2, 3, length=32)
    assert rep.quality and np.all(np.isfinite(rep.h))


def test_filter_1d_argument_checks():
    with pytest.raises(ValueError):
        dg.filter_1d(np.ones(10), 2.0, 3, k=2)
    with pytest.raises(ValueError):
        dg.filter_1d(np.ones(10), 2.0, 2)


def test_convolve_direct_matches_loop_oracle():
    x = np.random.default_rng(0).standard_normal(90)
    np.testing.assert_allclose(dg.convolve_direct(x, dg.gaussian_kernel(2.5)), convolve_truncated(x, 2.5),
                               rtol=1e-13, atol=1e-15)
    assert dg.gaussian_kernel(2.0).sum() == pytest.approx(1.0, rel=1e-15)
    assert dg.gaussian_kernel(2.0).size == 33


@pytest.mark.parametrize("order,k", [(1, 1), (1, 10), (3, 1)])
def test_error_bound_dirac_equality(order, k):
    x = np.zeros(300)
    x[150] = 1.0
    rep = dg.remark1_bound_check(x, 2.0, order, k)
    assert rep.holds
    assert rep.lhs == pytest.approx(rep.rhs, rel=1e-12)
    assert rep.norm_s0 == 1.0


def test_error_bound_zero_and_nonfinite():
    rep = dg.remark1_bound_check(np.zeros(100), 2.0, 3)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.holds
    with pytest.raises(ValueError):
        dg.remark1_bound_check(np.array([1.0, np.nan, 0.0, 0.0]), 2.0, 3)


def test_rational_gauss_check():
    err, t = dg.rational_gauss_check()
    assert err < dg.RATIONAL_BOUND
    assert abs(t) == pytest.approx(3.049, abs=2e-3)
    e0, _ = dg.rational_gauss_check(t_max=0.0)
    assert e0 == pytest.approx(abs(1 / 2.490895 - 1 / math.sqrt(2 * math.pi)), rel=1e-12)
    assert e0 == pytest.approx(2.52e-3, abs=1e-5)
    from rgfvar.rf import rational_gauss
    assert abs(rational_gauss(6.0) - math.exp(-18) / math.sqrt(2 * math.pi)) < dg.RATIONAL_BOUND


def test_predict_time():
    m, t = 1000, 1e-9
    assert dg.predict_time(1, 5, m, t) / dg.predict_time(3, 1, m, t) == pytest.approx(30 / 14)
    assert dg.predict_time(1, 1, m, t) == 6 * m * t
    assert dg.predict_time(3, 1, m, t) == 14 * m * t
    third = dg.predict_time(3, 1, m, t)
    assert dg.predict_time(1, 2, m, t) < third < dg.predict_time(1, 3, m, t)
    assert dg.predict_time(3, 1, m, 0.0) == 0.0
    base = (1, 2, 100, 1e-9)
    for pos in range(4):
        bigger = list(base)
        bigger[pos] = bigger[pos] * 2
        assert dg.predict_time(*bigger) > dg.predict_time(*base)
    with pytest.raises(ValueError):
        dg.predict_time(0, 1, 1, 1.0)
    assert dg.ComplexityModel(3, 1, m, t).seconds == third
    assert dg.ComplexityModel(1, 5, m, t).flops == 30 * m


def test_calibrate_t_calc():
    t = dg.calibrate_t_calc(1_000_000)
    assert 0.0 < t < 1e-6


def test_measure_filter_time():
    g = Grid2D.uniform(32, 32, 1000.0)
    op1 = HorizontalCovarianceOp(g, uniform_scale(g, 2000.0), order=1, k=5, threads=1)
    op3 = HorizontalCovarianceOp(g, uniform_scale(g, 2000.0), order=3, threads=1)
    x = np.ones(g.shape)
    r1 = dg.measure_filter_time(op1, x, 2)
    r3 = dg.measure_filter_time(op3, x, 2)
    assert r3["memory_bytes"] / r1["memory_bytes"] == 2.0
    assert len(r1["times_s"]) == 2 and r1["median_s"] > 0 and r1["threads"] == 1
    with pytest.raises(ValueError):
        dg.measure_filter_time(op1, x, 0)


def test_run_benchmark_report():
    rep = dg.run_benchmark(48, repeats=1, t_calc=1e-9)
    assert rep["low_confidence"] and rep["threads"] == 1 and rep["t_calc_s"] == 1e-9
    rows = {(r["order"], r["k"]): r for r in rep["results"]}
    assert set(rows) == {(1, 1), (1, 5), (1, 10), (3, 1)}
    assert rows[(1, 5)]["predicted_speedup_of_third_order"] == pytest.approx(30 / 14)
    assert rows[(3, 1)]["memory_bytes"] == 2 * rows[(1, 10)]["memory_bytes"]
    json.dumps(rep)
    assert not dg.run_benchmark(16, configs=((3, 1),), repeats=3, t_calc=1e-9)["low_confidence"]
    with pytest.raises(ValueError):
        dg.run_benchmark(16, repeats=0, t_calc=1e-9)
