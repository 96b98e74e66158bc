import io
import math

import numpy as np
import pytest

from overtest.cli import main
from overtest.problems import make_problem
from overtest.study import (StudyResult, noise_bound, node_set, rate_estimate, run_convergence_study,
                            run_mlpg_norm_check, run_nodal_study, run_noise_study, run_stability_study)
from overtest.trialspaces import PolynomialSpace, rebase


def test_rate_estimate_examples(rng):
    h = np.array([0.4, 0.2, 0.1, 0.05, 0.025])
    assert rate_estimate(zip(h, h**2)) == pytest.approx(2.0)
    assert rate_estimate(zip(h, np.full(5, 0.3))) == pytest.approx(0.0, abs=1e-12)
    e = 3 * h**1.5 * (1 + 0.01 * rng.uniform(-1, 1, 5))
    assert rate_estimate(zip(h, e)) == pytest.approx(1.5, abs=0.1)
    with pytest.raises(ValueError):
        rate_estimate([(0.1, 1.0)])
    with pytest.raises(ValueError):
        rate_estimate([(0.1, 1.0), (0.1, 2.0)])


def test_csv_round_trip(tmp_path):
    res = StudyResult("demo", [{"M": 3, "err": 1 / 3, "ok": True, "name": "a"},
                               {"M": 4, "err": math.pi * 1e-17, "ok": False, "name": "b", "extra": 2.5}],
                      {"seed": 1}, 1.25)
    res.to_csv(tmp_path / "r.csv")
    back = StudyResult.from_csv(tmp_path / "r.csv")
    assert back.rows == res.rows
    assert back.fitted_rate == res.fitted_rate and back.metadata == res.metadata and back.study == "demo"
    buf = io.StringIO()
    res.write_csv(buf)
    header = buf.getvalue().splitlines()[0]
    assert header == "M,err,ok,name,extra"
    assert "3.33333333333333315e-01" in buf.getvalue()


def test_stability_study_examples():
    res = run_stability_study([2, 3, 20], ["equidistant", "chebyshev"], reference_density=2001)
    by = {(r["M"], r["rule"]): r["stability"] for r in res.rows}
    assert by[(2, "equidistant")] == pytest.approx(1.0, abs=1e-9)
    assert by[(3, "equidistant")] == pytest.approx(1.25, abs=1e-9)
    ref = 2 / math.pi * math.log(20) + 1
    assert ref / 1.5 <= by[(20, "chebyshev")] <= ref * 1.5
    assert all(r["certified"] for r in res.rows)


def test_node_sets():
    assert np.allclose(node_set("chebyshev", 3), [-1, 0, 1])
    assert len(node_set("equidistant-oversampled", 5)) == 25
    with pytest.raises(ValueError):
        node_set("random", 3)


def test_stability_study_deterministic():
    a = run_stability_study([4, 6], reference_density=501, seed=3)
    b = run_stability_study([4, 6], reference_density=501, seed=3)
    assert a.rows == b.rows


def _poly_problem():
    return make_problem("interpolation-strong", "interval", "linear-1d", pool_density=200, reference_density=400)


def test_convergence_with_solution_in_space():
    res = run_convergence_study(_poly_problem(), [PolynomialSpace(d) for d in (1, 2, 3)])
    assert all(r["wp_error"] <= 1e-8 for r in res.rows)
    assert all(r["stability"] <= 2.0 for r in res.rows)
    with pytest.raises(ValueError):
        run_convergence_study(_poly_problem(), [PolynomialSpace(1)])


def test_noise_bound_algebra():
    ca, e = 1.2, 0.01
    assert noise_bound(ca, e, 0.0, 1.7) == pytest.approx((2 * ca + 3) * e)
    base = noise_bound(ca, e, 0.0)
    assert noise_bound(ca, e, 2e-3) - base == pytest.approx(2 * (noise_bound(ca, e, 1e-3) - base))


def test_noise_study_small():
    pb = make_problem("interpolation-strong", "interval", "runge", pool_density=200, reference_density=400)
    res = run_noise_study(pb, PolynomialSpace(6), [0.0, 1e-3], seeds=3)
    assert len(res.rows) == 6
    assert all(r["satisfied"] for r in res.rows)
    assert all(r["noise"] <= r["eps"] for r in res.rows)


def test_nodal_study_solution_in_space():
    spaces = [rebase(PolynomialSpace(d), node_set("chebyshev", d + 1)[:, None]) for d in (2, 3, 4)]
    res = run_nodal_study(_poly_problem(), spaces)
    assert all(r["nodal_error"] <= 1e-8 for r in res.rows)


def test_nodal_error_within_wp_error():
    pb = make_problem("interpolation-strong", "interval", "runge", pool_density=300, reference_density=600)
    spaces = [rebase(PolynomialSpace(d), node_set("chebyshev", d + 1)[:, None]) for d in (4, 8, 12)]
    res = run_nodal_study(pb, spaces)
    for r in res.rows:
        assert r["nodal_error"] <= r["wp_error"] + 1e-12
    assert res.metadata["trend_ok"]


def test_mlpg_small():
    res = run_mlpg_norm_check(2, [0.2, 0.1])
    assert len(res.rows) == 4
    assert all(r["monotone"] for r in res.rows)
    assert all(0 <= r["relative_gap"] < 1 for r in res.rows)


def test_cli_stability(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["stability-study", "--degrees", "2,3", "--rules", "equidistant",
                 "--reference-density", "501", "--out", str(out)]) == 0
    res = StudyResult.from_csv(out)
    assert [r["stability"] for r in res.rows] == pytest.approx([1.0, 1.25])
    assert main(["stability-study", "--degrees", "2", "--rules", "equidistant",
                 "--reference-density", "501"]) == 0
    assert capsys.readouterr().out.startswith("M,N,rule,stability")


def test_cli_converge_interval(tmp_path):
    out = tmp_path / "c.csv"
    rc = main(["converge", "--problem", "interpolation-strong", "--domain", "interval", "--solution", "smooth-1d",
               "--kernel", "gaussian", "--shape", "0.5", "--fill-distances", "0.5,0.25,0.125",
               "--pool-density", "300", "--reference-density", "600", "--out", str(out)])
    assert rc == 0
    res = StudyResult.from_csv(out)
    assert len(res.rows) == 3 and res.fitted_rate is not None


def test_cli_errors(capsys):
    assert main(["stability-study", "--rules", "bogus", "--degrees", "2"]) == 2
    assert "unknown node rule" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["converge", "--solver", "simplex"])
