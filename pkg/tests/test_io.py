import json

import numpy as np
import pytest

from src.inls.grid import Field, make_grid
from src.inls.io import read_field_csv, safe_filename, to_python, write_field_csv, write_json


@pytest.fixture(scope="module")
def grid():
    return make_grid(3, 0.5, 64, 6.0)


def test_field_csv_keeps_real_and_complex_values(tmp_path, grid):
    real = Field(grid, np.exp(-grid.nodes ** 2))
    back = read_field_csv(write_field_csv(real, tmp_path / "u.csv"), grid)
    assert not back.is_complex
    assert np.allclose(back.values, real.values, rtol=1e-14, atol=0.0)

    wave = Field(grid, real.values * np.exp(0.5j * grid.nodes))
    back = read_field_csv(write_field_csv(wave, tmp_path / "nested" / "psi.csv"), grid)
    assert back.is_complex
    assert np.allclose(back.values, wave.values, rtol=1e-14, atol=1e-300)


def test_field_csv_rejects_other_grid(tmp_path, grid):
    path = write_field_csv(Field(grid, np.ones(grid.n)), tmp_path / "u.csv")
    with pytest.raises(ValueError):
        read_field_csv(path, make_grid(3, 0.5, 128, 6.0))


def test_json_payloads_are_plain(tmp_path):
    payload = {"c": np.float64(1.5), "n": np.int64(3), "v": np.arange(3.0), "bad": float("nan"), "ok": np.bool_(True)}
    data = json.loads((write_json(payload, tmp_path / "r.json")).read_text())
    assert data["c"] == 1.5 and data["n"] == 3 and data["v"] == [0.0, 1.0, 2.0] and data["ok"] is True
    assert isinstance(data["bad"], str)
    assert to_python((np.float32(0.25),)) == [0.25]
    assert safe_filename("N3 b0.5/q=3.5") == "N3 b0.5_q_3.5"
