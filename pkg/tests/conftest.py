import math

import numpy as np
import pytest

from tfkeyforge.protocol import Intensities, ProtocolParams


def random_intensities(rng: np.random.Generator, mu2_zero: bool = False) -> Intensities:
    """Random valid intensity triple with mu0 > mu1 > mu2 >= 0 and positive probabilities."""
    mu0 = rng.uniform(0.1, 1.5)
    mu1 = rng.uniform(0.05, 0.8) * mu0
    mu2 = 0.0 if mu2_zero else rng.uniform(1e-5, 0.5) * mu1
    p = rng.dirichlet([2.0, 2.0, 2.0])
    p = np.maximum(p, 0.02)
    p = p / p.sum()
    return Intensities(mu0, mu1, mu2, float(p[0]), float(p[1]), float(1.0 - p[0] - p[1]))


@pytest.fixture
def ref_intensities() -> Intensities:
    return Intensities(0.5, 0.1, 1e-4, 1 / 3, 1 / 3, 1 - 2 / 3)


@pytest.fixture
def ref_params(ref_intensities) -> ProtocolParams:
    return ProtocolParams(1e10, 0.7, math.sqrt(0.02), ref_intensities)


def reference_config(**overrides) -> dict:
    """Run configuration with the nominal channel and the hand-tuned protocol point."""
    cfg = {
        "protocol": {
            "n_rounds": 1e10,
            "p_x": 0.7,
            "alpha2": 0.02,
            "s_cut": 4,
            "intensities": {"mu": [0.5, 0.1, 1e-4], "p": [1 / 3, 1 / 3, 1 - 2 / 3]},
        },
        "channel": {"loss_db": 50.0, "p_d": 1e-8, "delta_ph": 0.091, "delta_pol": 0.0, "f": 1.16},
        "security": {"eps_cor": 1e-10, "eps_s": 1e-10},
        "modes": {"eps_budget": "strict", "intensity_convention": "intensity"},
        "optimizer": {"budget": 500, "seed": 0, "mu2": 1e-4},
        "sweep": {"from_db": 40.0, "to_db": 60.0, "step_db": 10.0},
    }
    for path, value in overrides.items():
        node = cfg
        keys = path.split(".")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return cfg


@pytest.fixture
def write_config(tmp_path):
    import json

    def _write(cfg: dict, name: str = "config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return str(path)

    return _write


ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Store one PASS/FAIL line for the acceptance summary."""
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
