import json
import math
from pathlib import Path

import numpy as np
import pytest

import apsing

ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture(scope="module")
def grid():
    d = apsing.Domain.interval(0.0, 1.0, apsing.Boundary.Dirichlet, 199)
    return apsing.Laplacian(d)


def test_ground_eigenvalue_matches_stencil(grid):
    h = grid.domain.hx
    mu1 = grid.free_eigenvalues(1)[0]
    assert mu1 == pytest.approx(2.0 / h**2 * (1.0 - math.cos(math.pi * h)), rel=1e-12)


def test_constant_shift(grid):
    mu1 = grid.free_eigenvalues(1)[0]
    f = apsing.Nonlinearity("linear", {"slope": 4.0})
    u = np.zeros(grid.domain.nodes)
    v = apsing.functionals(grid, u, f)
    assert v["lambda"] == pytest.approx(mu1 - 4.0, abs=1e-9)
    assert v["delta"] == 0.0


def test_balance(grid):
    theta, lam = apsing.balance_theta(grid, 5.0, 15.0)
    assert 0.0 < theta < 2 * math.pi
    assert abs(lam) <= 1e-9
    assert abs(apsing.two_valued_lambda(grid, 5.0, 15.0, theta)) <= 1e-9


def test_four_preimages(grid):
    f = apsing.Nonlinearity(
        "sigmoid_bump", {"m": 2.0, "M": 15.0, "bump_center": -3.0, "bump_width": 0.5, "bump_height": 5.0}
    )
    r = apsing.four_preimages(grid, f)
    assert len(r["solutions"]) >= 4
    assert max(r["residuals"]) <= 1e-8
    # Independent check of one solution through F.
    u = r["solutions"][0]
    res = apsing.apply_F(grid, u, f) - r["y"]
    assert math.sqrt(grid.domain.weight) * np.linalg.norm(res) <= 1e-8


def test_errors_carry_the_stage(grid):
    convex = apsing.Nonlinearity("poly_clamped", {"m": 2.0, "M": 15.0, "x0": -2.0, "x1": 2.0})
    with pytest.raises(apsing.Error, match="find_positive_delta_nonfold"):
        apsing.four_preimages(grid, convex)


def test_cli_runner(tmp_path):
    code, _ = apsing.run("spectrum", str(ROOT / "configs" / "spectrum.toml"), str(tmp_path))
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "ok"
    lines = (tmp_path / "traces" / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "k,mu_k,residual"
    assert len(lines) == 7

    bad = tmp_path / "bad.toml"
    bad.write_text("pipeline = \n")
    code, log = apsing.run("spectrum", str(bad), str(tmp_path / "never"))
    assert code == 3
    assert not (tmp_path / "never").exists()
