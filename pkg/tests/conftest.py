import numpy as np
import pytest

from spliceglm.glm import Dataset

_CRITERIA = []


def record_criterion(number, title, passed, detail=""):
    """Remember one acceptance verdict for the terminal summary."""
    _CRITERIA.append((number, title, bool(passed), detail))


@pytest.fixture
def report():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        verdict = "PASS" if passed else "FAIL"
        line = f"[{verdict}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


def random_dataset(rng, family, n, p, signal=1.0, k=None, intercept=False):
    """Small random GLM problem with a sparse truth."""
    X = rng.standard_normal((n, p))
    k = min(p, 2) if k is None else k
    beta = np.zeros(p)
    idx = rng.choice(p, size=k, replace=False)
    beta[idx] = signal * rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.5, 1.0, size=k)
    eta = X @ beta
    if family == "gaussian":
        y = eta + rng.standard_normal(n)
    elif family == "logistic":
        y = rng.binomial(1, 1 / (1 + np.exp(-eta))).astype(float)
    else:
        y = rng.poisson(np.exp(np.clip(eta, None, 5))).astype(float)
    return Dataset.from_raw(X, y, family, fit_intercept=intercept), np.sort(idx)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
