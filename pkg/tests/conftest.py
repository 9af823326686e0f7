import json
from pathlib import Path

import numpy as np
import pytest

from elicit import analytic_moments, make_link, make_model
from elicit.config import resolve
from elicit.optimize import OptimizerConfig
from elicit.sweep import SweepSpec, default_grid, run_sweep

REPO_ROOT = Path(__file__).resolve().parent.parent
SWEEP_CONFIG_DIR = REPO_ROOT / "configs" / "sweeps"
DIAGNOSTIC_CONFIG_DIR = REPO_ROOT / "configs" / "diagnostics"


@pytest.fixture(scope="session")
def poisson_em_3_15():
    """Analytic moments (3, 15): poisson(3) pushed off-curve in the second moment."""
    return analytic_moments(make_model("poisson"), [3.0], perturb=[0.0, 3.0])


def make_variance_spec(model_name, fixed, theta0, perturb, index=0, grid_points=15,
                       multistart=2):
    model = make_model(model_name, fixed)
    em = analytic_moments(model, theta0, perturb=perturb)
    return SweepSpec(
        model=model,
        link=make_link("variance"),
        em=em,
        index=index,
        fixed_c=np.ones(2),
        k=np.ones(2),
        grid=default_grid(grid_points),
        optimizer=OptimizerConfig(multistart=multistart),
    )


@pytest.fixture(scope="session")
def poisson_variance_curve(poisson_em_3_15):
    spec = SweepSpec(
        model=make_model("poisson"),
        link=make_link("variance"),
        em=poisson_em_3_15,
        index=0,
        fixed_c=np.ones(2),
        k=np.ones(2),
    )
    return run_sweep(spec)


def load_shipped_configs(directory=SWEEP_CONFIG_DIR):
    paths = sorted(directory.glob("*.json"))
    assert paths, f"no configs found under {directory}"
    return [(p.stem, json.loads(p.read_text())) for p in paths]


@pytest.fixture(scope="session")
def shipped_sweeps():
    """Every figure-family config, resolved and swept once for the whole session."""
    out = {}
    for name, cfg in load_shipped_configs():
        exp = resolve(cfg)
        out[name] = (exp, run_sweep(exp.spec))
    return out
