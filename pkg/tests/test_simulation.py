import csv
import io

import numpy as np
import pytest

from spliceglm import simulation
from spliceglm.exceptions import InvalidInputError, NumericalFailure
from spliceglm.simulation import (
    AGGREGATE_COLUMNS,
    REPLICATION_COLUMNS,
    ExperimentConfig,
    aggregate_csv,
    generate_design,
    place_true_beta,
    preset,
    replication_rng,
    replications_csv,
    run_experiment,
    simulate_response,
)


def small_config(**kw):
    base = dict(family="logistic", n_grid=(200, 300), p=40, beta_pattern=(3, -3, 3),
                replications=3, seed=11, name="small")
    base.update(kw)
    return ExperimentConfig(**base)


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- data generation -----------------------------------------------------

def test_independent_design_is_uncorrelated():
    X = generate_design(10000, 10, "independent", rng=np.random.default_rng(0))
    corr = np.corrcoef(X, rowvar=False)
    assert np.max(np.abs(corr - np.eye(10))) < 0.05


def test_constant_design_has_the_requested_correlation():
    X = generate_design(10000, 6, "constant", 0.4, rng=np.random.default_rng(1))
    corr = np.corrcoef(X, rowvar=False)
    off = corr[~np.eye(6, dtype=bool)]
    assert np.all(np.abs(off - 0.4) < 0.05)
    np.testing.assert_allclose(X.var(axis=0), 1.0, atol=0.05)


def test_design_rejects_unknown_structure():
    with pytest.raises(InvalidInputError):
        generate_design(10, 3, "toeplitz", rng=np.random.default_rng(0))


def test_true_beta_placement():
    beta = place_true_beta(500, (2, 2, 8, 8, 8, 8, 10, 10, 10, 10))
    assert (beta.support + 1).tolist() == [1, 51, 101, 151, 201, 251, 301, 351, 401, 451]
    assert beta.beta[beta.support].tolist() == [2, 2, 8, 8, 8, 8, 10, 10, 10, 10]
    assert (place_true_beta(500, (1, 1, 1)).support + 1).tolist() == [1, 167, 334]
    assert place_true_beta(4, (1, 2, 3, 4)).support.tolist() == [0, 1, 2, 3]
    with pytest.raises(InvalidInputError):
        place_true_beta(2, (1, 1, 1))


def test_null_responses():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(10000, 3))
    zero = place_true_beta(3, ())
    y = simulate_response(X, zero, "logistic", rng)
    assert 0.45 <= y.mean() <= 0.55
    y = simulate_response(X, zero, "poisson", rng)
    assert y.mean() == pytest.approx(1.0, abs=0.05)


def test_noiseless_gaussian_response():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 5))
    beta = place_true_beta(5, (1.5, -2))
    np.testing.assert_array_equal(simulate_response(X, beta, "gaussian", rng, noise_sd=0), X @ beta.beta)


def test_poisson_responses_use_the_clamp():
    X = np.full((5, 1), 100.0)
    y = simulate_response(X, place_true_beta(1, (1.0,)), "poisson", np.random.default_rng(4))
    assert np.all(np.isfinite(y))
    assert np.all(y < 2 * np.exp(30))


def test_replication_streams_are_distinct_and_reproducible():
    a = replication_rng(0, 500, 1).standard_normal(4)
    b = replication_rng(0, 500, 1).standard_normal(4)
    c = replication_rng(0, 500, 2).standard_normal(4)
    d = replication_rng(0, 1000, 1).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)


# -- configuration -------------------------------------------------------

def test_presets_carry_the_documented_parameters():
    cfg = preset("poisson-constant")
    assert (cfg.family, cfg.p, cfg.rho, cfg.beta_pattern) == ("poisson", 500, 0.2, (1.0, 1.0, 1.0))
    cfg = preset("logistic-constant")
    assert cfg.rho == 0.4 and cfg.beta_pattern == (2, 2, 8, 8, 8, 8, 10, 10, 10, 10)
    assert preset("logistic-independent").rho == 0.0
    assert preset("poisson-independent", replications=3).replications == 3
    with pytest.raises(InvalidInputError):
        preset("gamma-independent")


@pytest.mark.parametrize("bad", [
    dict(correlation="banded"), dict(rho=1.2, correlation="constant"), dict(replications=0),
    dict(family="gamma"), dict(p=2), dict(seed=-1), dict(n_grid=()),
])
def test_config_validation(bad):
    with pytest.raises(InvalidInputError):
        small_config(**bad)


# -- experiment runs -----------------------------------------------------

def test_rows_are_consistent():
    rows = run_experiment(small_config())
    assert [(r.n, r.replication) for r in rows] == [(n, r) for n in (200, 300) for r in range(3)]
    beta_star = place_true_beta(40, (3, -3, 3)).beta
    for r in rows:
        assert r.exact == (r.covered_active and r.covered_inactive)
        expected = np.linalg.norm(r.beta_hat - beta_star) / np.linalg.norm(beta_star)
        assert r.re_err == pytest.approx(expected, rel=1e-15)
        assert r.selected_size == np.count_nonzero(r.beta_hat)
        assert r.runtime_seconds == 0.0 and r.failed == 0


def test_csv_schema_and_aggregation():
    rows = run_experiment(small_config())
    text = replications_csv(rows)
    assert "\r" not in text
    assert text.splitlines()[0] == ",".join(REPLICATION_COLUMNS)
    per_rep = read_rows(text)
    agg = read_rows(aggregate_csv(rows))
    assert list(agg[0]) == list(AGGREGATE_COLUMNS)
    for line in agg:
        grp = [r for r in per_rep if r["n"] == line["n"]]
        for col, src in (("prob_cover_active", "covered_active"),
                         ("prob_cover_inactive", "covered_inactive"), ("prob_exact", "exact")):
            assert float(line[col]) == pytest.approx(np.mean([float(r[src]) for r in grp]))
        assert float(line["median_re_err"]) == pytest.approx(np.median([float(r["re_err"]) for r in grp]))
        assert int(line["replications"]) == len(grp)
        assert 0 <= float(line["prob_exact"]) <= 1


def test_outputs_are_byte_identical_across_runs_and_threads(tmp_path):
    cfg = small_config(replications=2)
    run_experiment(cfg, output_dir=tmp_path / "a")
    run_experiment(cfg, output_dir=tmp_path / "b", threads=3)
    for suffix in ("replications", "aggregate"):
        a = (tmp_path / "a" / f"small_{suffix}.csv").read_bytes()
        b = (tmp_path / "b" / f"small_{suffix}.csv").read_bytes()
        assert a == b


def test_failures_are_kept(monkeypatch):
    def broken(data, cfg=None):
        raise NumericalFailure("forced", [])

    monkeypatch.setattr(simulation, "abess", broken)
    rows = run_experiment(small_config(replications=2, n_grid=(200,)))
    assert len(rows) == 2
    for r in rows:
        assert r.failed == 1 and r.exact == 0 and r.covered_active == 0
        assert r.re_err == pytest.approx(1.0)


def test_runtime_is_recorded_on_request():
    rows = run_experiment(small_config(replications=1, n_grid=(200,), record_runtime=True))
    assert rows[0].runtime_seconds > 0


def test_recovery_on_an_easy_problem():
    rows = run_experiment(small_config(n_grid=(400,), replications=5))
    assert np.mean([r.exact for r in rows]) >= 0.8
