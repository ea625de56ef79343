import functools

import numpy as np
import pytest

from tcoquant import cycle_features as cf
from tcoquant import plsr, synth

ORTHO_TOL = 1e-8

# every PLSR fit made anywhere in the suite passes through this check
_ortho_log = {"n": 0, "worst": 0.0}
_acceptance_lines = []


def score_orthogonality(model):
    """Largest |t_i . t_j| / (|t_i| |t_j|) over i != j."""
    T = model.x_scores
    if T is None or T.shape[1] < 2:
        return 0.0
    G = T.T @ T
    norms = np.sqrt(np.diag(G))
    R = np.abs(G) / np.outer(norms, norms)
    np.fill_diagonal(R, 0.0)
    return float(R.max())


def _checked(fit):
    @functools.wraps(fit)
    def wrapper(*args, **kwargs):
        model = fit(*args, **kwargs)
        worst = score_orthogonality(model)
        _ortho_log["n"] += 1
        _ortho_log["worst"] = max(_ortho_log["worst"], worst)
        assert worst <= ORTHO_TOL, f"score orthogonality violated: {worst:.3e}"
        return model
    return wrapper


plsr.fit = _checked(plsr.fit)


def ortho_stats():
    return dict(_ortho_log)


def record_acceptance(line):
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"PLSR fits checked for score orthogonality: {_ortho_log['n']} "
        f"(worst ratio {_ortho_log['worst']:.2e})")


def rising_exact_config(**overrides):
    """Noiseless config whose log features are exactly affine in ln(c + 1)."""
    kw = dict(baseline=np.linspace(1e-6, 4e-6, 160), sensitivity=1.0, exponent=1.0,
              noise_sigma=0.0, drift_rate=0.0,
              schedule=[(c, 3) for c in (0.0, 2.5, 5.0, 10.0, 20.0, 40.0)])
    kw.update(overrides)
    return synth.SynthConfig(**kw)


@pytest.fixture(scope="session")
def paper_dataset():
    """Synthetic features on the default exposure schedule: b = 0.5, 2 % noise, drift 0.0005/cycle."""
    cfg = synth.SynthConfig(exponent=0.5, noise_sigma=0.02, drift_rate=0.0005, seed=1)
    return cf.build_feature_matrix(synth.generate(cfg))


@pytest.fixture
def rng():
    return np.random.default_rng(20160101)
