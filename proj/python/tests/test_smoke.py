import math

import pytest

import lobmf


def test_duopoly_equilibrium():
    g = lobmf.solve_linear_game(2, A=1.0, B=2.0, C=1.0)
    prices = [s["price"] for s in g["sellers"]]
    assert prices == pytest.approx([1 / 3, 1 / 3], abs=1e-8)
    assert all(s["class"] == "interior" for s in g["sellers"])


def test_actual_demand_worked_example():
    h = lobmf.actual_demand([0.1, 10.0], 1.0, 2.0, 1.0)
    assert h[0] == pytest.approx(1.35, abs=1e-15)
    assert h[1] == 0.0


def test_meanfield_limit():
    p_star, p_bar = lobmf.meanfield_limit(1, 1, 0.5, 0.2, 0.1)
    assert p_star == pytest.approx(0.8 / 1.3, abs=1e-12)
    assert p_bar == pytest.approx(0.8 / 1.3, abs=1e-12)


def test_skorokhod_regulator():
    x, k = lobmf.solve_dsp([0, 1, 2, 3], [1.0, -0.5, 0.5, -1.0], [(3.0, -2.0)])
    assert min(x["values"]) >= 0.0
    assert k["values"][0] == 0.0
    assert k["values"] == sorted(k["values"])


def test_wasserstein_shift():
    assert lobmf.wasserstein(1, [0, 1, 2], [1, 2, 3]) == pytest.approx(1.0)
    assert lobmf.wasserstein(2, [0, 1, 2], [1, 2, 3]) == pytest.approx(1.0)


def test_config_round_trip_and_strictness():
    cfg = lobmf.default_config("simulate")
    assert lobmf.parse_config(cfg) == cfg
    with pytest.raises(ValueError, match="particels"):
        lobmf.parse_config({"kind": "simulate", "particels": 3})


def test_simulate_run(tmp_path):
    cfg = {"kind": "simulate", "preset": "poisson-unit", "seed": 7, "particles": 4000, "out": str(tmp_path)}
    code, summary = lobmf.run(cfg)
    assert code == 0
    r = summary["result"]
    assert abs(r["final_q_mean"] - 2.0) <= 3 * r["final_q_se"] + 1e-12
    assert (tmp_path / "law.csv").exists()


def test_presets_listed():
    names = {p["name"] for p in lobmf.presets()}
    assert {"linear-duopoly", "poisson-unit", "degenerate-hjb"} <= names


def test_acceptance_subset():
    rows = lobmf.run_acceptance([1, 3])
    assert [r["id"] for r in rows] == [1, 3]
    assert all(r["pass"] for r in rows)
    assert all(r["line"].startswith("PASS") for r in rows)
