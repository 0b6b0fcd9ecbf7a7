import json
import math
import os
import pathlib
import shutil

import numpy as np
import pytest

import bgrass

SOURCE = pathlib.Path(os.environ.get("BGRASS_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
TOY = SOURCE / "data" / "toy"


def test_pg_mean_matches_samples():
    draws = bgrass.sample_pg(1, 2.0, 20000, seed=3)
    assert draws.shape == (20000,)
    assert (draws > 0).all()
    expected = math.tanh(1.0) / 4.0
    assert bgrass.pg_mean(1, 2.0) == pytest.approx(expected)
    se = math.sqrt(bgrass.pg_variance(1, 2.0) / draws.size)
    assert abs(draws.mean() - expected) < 4 * se


def test_pg_seed_determinism():
    assert np.array_equal(bgrass.sample_pg(5, 0.5, 100, seed=9), bgrass.sample_pg(5, 0.5, 100, seed=9))


def test_two_node_correlation():
    omega = bgrass.correlation(2, {"G": [0, 1]}, 1.0)
    assert np.allclose(omega, [[1.0, 0.5], [0.5, 1.0]], atol=1e-12)
    assert np.allclose(bgrass.correlation(2, {"G": [0, 1]}, "inf"), np.eye(2))


def test_laplacian_triangle():
    lap = bgrass.laplacian(3, {"G": [0, 1, 2]})
    assert np.allclose(np.diag(lap), 1.0)
    assert lap[0, 1] == pytest.approx(-0.5)


def test_auc_example():
    assert bgrass.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)


def test_validate_toy():
    report = bgrass.validate(str(TOY / "config.json"))
    assert report["num_aes"] == 24
    assert report["num_groups"] == 5


def test_fit_toy(tmp_path):
    for name in ("reports.csv", "ontology.csv", "negative_controls.txt"):
        shutil.copy(TOY / name, tmp_path / name)
    text = (TOY / "config.json").read_text()
    config = json.loads("\n".join(line for line in text.splitlines() if not line.lstrip().startswith("//")))
    config["schedule"] = {"iterations": 300, "burn_in": 100, "thin": 2}
    config["epsilon"] = {"fixed": 1.0}
    (tmp_path / "config.json").write_text(json.dumps(config))
    out = bgrass.fit(str(tmp_path / "config.json"), out_dir=str(tmp_path / "run"), allow_nonconverged=True)
    assert out["model"] == "BGrass"
    assert len(out["aes"]) == 24
    assert (tmp_path / "run" / "summary.csv").exists()
    assert all(0.0 <= a["selection_prob"] <= 1.0 for a in out["aes"])


def test_missing_config_raises(tmp_path):
    with pytest.raises(bgrass.ConfigError):
        bgrass.validate(str(tmp_path / "nope.json"))
