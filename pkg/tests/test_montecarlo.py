import itertools
import math

import numpy as np
import pytest

from delaycode.coding.universal import UniversalCode
from delaycode.exponents import block_upper
from delaycode.montecarlo import (
    RESULTS_HEADER, SimConfig, UnknownScheme, block_length_distribution,
    estimate_error_vs_delay, isotonic_violation, lemma1_tail_check, make_estimate,
    prefix_queue_samples, queue_chi_square, regression_extrapolate, results_csv,
)
from delaycode.queue_analysis import QueueWalkParams, delay_error_bound, stationary
from delaycode.source_model import JointDistribution, SingleDistribution, ternary_source

AN = stationary(QueueWalkParams.from_source(0.65))


def prefix_cfg(**kw):
    base = dict(scheme="prefix", source="ternary065", rate_num=3, rate_den=2,
                delays=[5, 7, 9, 11], trials=4, symbols_per_trial=100_000, seed=42)
    base.update(kw)
    return SimConfig(**base)


def test_unknown_scheme():
    with pytest.raises(UnknownScheme):
        prefix_cfg(scheme="arithmetic")


def test_full_rate_prefix_is_error_free():
    est = estimate_error_vs_delay(prefix_cfg(rate_num=2, rate_den=1, delays=[3, 5, 9]))
    assert all(e.errors == 0 for e in est)
    assert all(e.flag == "rare" for e in est)


def test_soundness_at_delta_11():
    (e,) = estimate_error_vs_delay(prefix_cfg(delays=[11], trials=10, symbols_per_trial=400_000))
    assert e.p_hat <= delay_error_bound(AN, 11) + 3 * e.sigma


def test_determinism_and_thread_independence():
    a = results_csv(prefix_cfg(), estimate_error_vs_delay(prefix_cfg(threads=1)))
    b = results_csv(prefix_cfg(), estimate_error_vs_delay(prefix_cfg(threads=4)))
    c = results_csv(prefix_cfg(), estimate_error_vs_delay(prefix_cfg()))
    assert a == b == c
    assert a.splitlines()[0] == ",".join(RESULTS_HEADER)


def test_estimates_nonincreasing():
    est = estimate_error_vs_delay(prefix_cfg(delays=list(range(3, 22, 2))))
    assert isotonic_violation(est) < 3.0
    for e in est:
        assert 0 <= e.ci_lo <= e.p_hat <= e.ci_hi <= 1


def test_wilson_interval():
    e = make_estimate(5, [(10, 1000), (20, 1000)])
    assert e.p_hat == pytest.approx(0.015)
    assert e.ci_lo < 0.015 < e.ci_hi
    assert e.flag == ""
    assert make_estimate(5, [(3, 1000)]).flag == "rare"


def test_block_scheme_matches_exact():
    from delaycode.coding.baseline import codebook_for
    cfg = SimConfig("block", "ternary065", 3, 2, [12], trials=4, symbols_per_trial=60_000, seed=3)
    (e,) = estimate_error_vs_delay(cfg)
    exact = codebook_for(ternary_source().probs, 12, (3, 2)).symbol_error_probability()
    assert abs(e.p_hat - exact) <= 4 * max(e.sigma, 1e-4)


def test_universal_scheme_runs():
    cfg = SimConfig("universal", "bsc(0.1)", 7, 8, [64, 128, 256], trials=2,
                    symbols_per_trial=64_000, seed=1, block_len=64, burn_in_blocks=50)
    est = estimate_error_vs_delay(cfg)
    assert est[0].p_hat >= est[-1].p_hat


def test_config_json_round_trip():
    cfg = prefix_cfg()
    back = SimConfig.from_json(cfg.to_json())
    assert back.to_json() == cfg.to_json()
    with pytest.raises(ValueError):
        SimConfig.from_json({**cfg.to_json(), "bogus": 1})


# -- regression ------------------------------------------------------------------


def test_regression_exact_line():
    pts = [(d, -0.02 * d) for d in (10, 50, 90)]
    assert regression_extrapolate(pts, -6) == pytest.approx(300)


def test_regression_on_analytic_points():
    pts = [(d, math.log10(delay_error_bound(AN, d))) for d in range(21, 62, 2)]
    assert 34 <= regression_extrapolate(pts, -6) <= 44


def test_regression_degenerate():
    with pytest.raises(ValueError):
        regression_extrapolate([(5, -1.0), (5, -2.0)], -6)
    with pytest.raises(ValueError):
        regression_extrapolate([(5, -1.0), (7, -1.0)], -6)


# -- queue histogram ---------------------------------------------------------------


def test_queue_histogram_chi_square():
    samples = prefix_queue_samples(0.65, 1_000_000, seed=1)
    _, pval, cells = queue_chi_square(samples, 0.65)
    assert cells >= 5
    assert pval > 0.05


@pytest.mark.slow
def test_queue_chi_square_is_calibrated():
    # Under the exact stationary law the p-values should be uniform.
    from scipy import stats
    pvals = [queue_chi_square(prefix_queue_samples(0.65, 1_000_000, seed=s), 0.65)[1]
             for s in range(100, 140)]
    assert stats.kstest(pvals, "uniform").pvalue > 0.01


# -- universal length tail ----------------------------------------------------------


def test_length_distribution_exhaustive():
    p = JointDistribution([[0.3, 0.2], [0.1, 0.4]])
    n = 4
    code = UniversalCode(2, 2, n)
    oracle = {}
    for x in itertools.product(range(2), repeat=n):
        for y in itertools.product(range(2), repeat=n):
            prob = math.prod(p.probs[a, b] for a, b in zip(x, y))
            ell = len(code.encode(x, y))
            oracle[ell] = oracle.get(ell, 0.0) + prob
    lengths, probs = block_length_distribution(p, n)
    assert dict(zip(lengths.tolist(), probs.tolist())) == pytest.approx(oracle)


def test_length_tail_near_full_rate():
    # Needs a block long enough that the type-index overhead fits under log2|X| - r.
    p = SingleDistribution([0.7, 0.3])
    assert UniversalCode(2, 1, 2048).epsilon_bound() < 0.02
    (rep,) = lemma1_tail_check(p, 2048, [2], 0.999, trials=20_000)
    assert rep.hits == 0 and rep.empirical_exponent == math.inf
    assert rep.exact_tail < 1e-30


def test_length_tail_ternary():
    p = ternary_source()
    reps = lemma1_tail_check(p, 16, [1, 8], 1.5, trials=200_000, seed=7)
    ref = block_upper(p, 1.5)
    for rep in reps:
        assert rep.empirical_exponent >= ref - 0.15
        assert rep.frequency == pytest.approx(rep.exact_tail, abs=5 * math.sqrt(
            rep.exact_tail * (1 - rep.exact_tail) / rep.trials) + 1e-9)


def test_length_tail_rejects_infeasible_rate():
    with pytest.raises(ValueError):
        lemma1_tail_check(ternary_source(), 16, [1], 1.0)
    with pytest.raises(ValueError):
        lemma1_tail_check(ternary_source(), 4, [1], 1.5)
