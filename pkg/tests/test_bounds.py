import math

import numpy as np
import pytest

from stabsim.bounds import BoundError, BoundParams, eval_bound, optimal_params

D1 = dict(d=1, R=1.0, R_O=0.0, norm_O=1.0, supp_O_size=1)


def test_t1_constants_d1():
    # v = 2e, mu = 1, K_1 = 1, M = 10e for a unit single-site observable
    par = BoundParams(**D1, t=1.0, delta=1e-3)
    rep = eval_bound("T1", par)
    assert par.v == pytest.approx(2 * math.e)
    assert par.mu == 1.0
    assert par.k_d == pytest.approx(1.0)
    assert rep.terms["M"] == pytest.approx(10 * math.e)
    assert rep.rhs == pytest.approx(27.18281828, rel=1e-8) or rep.rhs == pytest.approx(
        10 * math.e * 1e-3
    )
    assert rep.rhs == pytest.approx(10 * math.e * 1e-3 * 1.0)


def test_t1_scaling_in_t():
    par1 = eval_bound("T1", BoundParams(**D1, t=1.0, delta=1e-3)).rhs
    par2 = eval_bound("T1", BoundParams(**D1, t=2.0, delta=1e-3)).rhs
    assert par2 / par1 == pytest.approx(4.0)  # t^(d+1) with d=1


def test_trotter_bound_halves_p_times():
    par_n = BoundParams(**D1, t=1.0, p=2, n=10, l=4.0)
    par_2n = BoundParams(**D1, t=1.0, p=2, n=20, l=4.0)
    assert eval_bound("trotter", par_n).rhs / eval_bound("trotter", par_2n).rhs == pytest.approx(4.0)


def test_zero_delta_zero_rhs():
    par = BoundParams(
        **D1, t=1.0, delta=0.0, p=2, n=8, l=None, lam=0.5, m=1, theta_count=4, n_jumps=4
    )
    # analog noise theorems vanish entirely at delta=0 (untruncated)
    for theorem in ("T1", "T4", "T5", "T5b", "T9"):
        assert eval_bound(theorem, par).rhs == pytest.approx(0.0, abs=1e-15), theorem
    # digital ones keep only the deterministic Trotter term
    for theorem in ("T6", "T7", "T8"):
        rep = eval_bound(theorem, par)
        assert rep.terms["stochastic"] == pytest.approx(0.0, abs=1e-15)
        trotter = eval_bound("trotter", par).rhs
        assert rep.rhs == pytest.approx(2.0 * trotter, rel=1e-12), theorem


def test_t2_t3_structure():
    par = BoundParams(**D1, t=1.0, delta=1e-2, p=2, n=10, l=6.0, theta_count=5)
    t2 = eval_bound("T2", par)
    t3 = eval_bound("T3", par)
    # M2's gate term carries the extra factor n relative to M1's
    assert t3.terms["gate"] / t2.terms["gate"] == pytest.approx(par.n / par.t)
    assert t2.rhs > 0 and t3.rhs > t2.rhs


def test_t2_internal_consistency_at_optimum():
    # explicit three-term sum at the un-rounded optimal parameters tracks the
    # balanced asymptotic expression within a constant factor
    d, p, t, delta = 1, 2, 2.0, 1e-4
    base = BoundParams(d=d, R=1.0, R_O=0.0, norm_O=1.0, supp_O_size=1, t=t, delta=delta, p=p)
    n_exact = t / delta ** (1.0 / p)
    phi = delta * t ** (d + 1)
    l_exact = base.v * t - math.log(phi) / base.mu
    theta = 2.0**d * base.lambda_d * l_exact**d
    par = BoundParams(
        d=d, R=1.0, R_O=0.0, norm_O=1.0, supp_O_size=1, t=t, delta=delta, p=p,
        n=n_exact, l=l_exact, theta_count=theta,
    )
    rep = eval_bound("T2", par)
    assert rep.rhs_asymptotic is not None
    ratio = rep.rhs / rep.rhs_asymptotic
    assert 0.5 <= ratio <= 2.0


def test_t4_lambda_regimes():
    par_fin = BoundParams(**D1, t=2.0, delta=1e-2, lam=0.3, m=2, l=6.0, theta_count=4)
    par_inf = BoundParams(**D1, t=2.0, delta=1e-2, lam=math.inf, m=2, l=6.0, theta_count=4)
    fin = eval_bound("T4", par_fin)
    inf = eval_bound("T4", par_inf)
    assert fin.terms["double_integral"] == pytest.approx(math.sqrt(2 * math.pi) * 0.3 * 2.0)
    assert inf.terms["double_integral"] == pytest.approx(4.0)
    assert fin.rhs < inf.rhs


def test_t5_tail_monotone():
    par = BoundParams(**D1, t=1.0, delta=5e-2, m=1, l=6.0, theta_count=4)
    rep = eval_bound("T5", par)
    thresholds = [rep.tail_threshold(s) for s in (1, 2, 3)]
    assert thresholds[0] < thresholds[1] < thresholds[2]
    probs = [rep.tail_probability(s) for s in (1, 2, 3)]
    assert probs[0] > probs[1] > probs[2]


def test_t7_has_interior_minimum_in_n():
    rhs = []
    ns = [1, 2, 4, 8, 16, 32, 64, 128]
    for n in ns:
        par = BoundParams(**D1, t=1.0, delta=1e-2, p=2, n=n, l=6.0, theta_count=5)
        rhs.append(eval_bound("T7", par).rhs)
    k = int(np.argmin(rhs))
    assert 0 < k < len(ns) - 1  # interior minimum: the delta*sqrt(n) walk grows


def test_randomsum():
    par = BoundParams(**D1, T_draws=64)
    rep = eval_bound("randomsum", par)
    assert rep.rhs == pytest.approx(math.sqrt(2 * math.pi * 64))
    assert rep.tail_threshold(2.0) == pytest.approx(2 * math.sqrt(128))


def test_missing_parameter_raises():
    with pytest.raises(BoundError):
        eval_bound("T6", BoundParams(**D1, t=1.0, delta=0.1))
    with pytest.raises(BoundError):
        eval_bound("nope", BoundParams(**D1))


def test_optimal_params_examples():
    par = BoundParams(**D1, t=10.0, delta=1e-4, p=2)
    assert optimal_params("T2", par)["n_opt"] == 1000
    par3 = BoundParams(**D1, t=10.0, delta=1e-3, p=2)
    assert optimal_params("T3", par3)["n_opt"] == 100


def test_optimal_l_grows_as_delta_shrinks():
    par_a = BoundParams(**D1, t=2.0, delta=1e-2, p=2)
    par_b = BoundParams(**D1, t=2.0, delta=1e-4, p=2)
    assert optimal_params("T2", par_b)["l_opt"] > optimal_params("T2", par_a)["l_opt"]


def test_optimal_params_domain():
    with pytest.raises(BoundError):
        optimal_params("T2", BoundParams(**D1, t=1.0, delta=1.5, p=2))


def test_optimal_l_capacity_clip():
    par = BoundParams(**D1, t=4.0, delta=1e-4, p=2)
    out = optimal_params("T2", par, l_cap=8)
    assert out["l_opt"] == 8
    assert not out["l_feasible"]


def test_t9_trace_form():
    par = BoundParams(**D1, t=2.0, delta=0.1, n_jumps=3, l=None)
    rep = eval_bound("T9", par)
    assert rep.terms["trace_distance"] == pytest.approx(2 * 0.1 * math.sqrt(6.0))


def test_assumption_flags_attached_not_rejected():
    par = BoundParams(**D1, t=0.1, delta=0.9)  # vt < 1 and delta*t^2 fine
    rep = eval_bound("T1", par)
    assert rep.assumptions["vt_gt_1"] is False
    assert rep.rhs > 0  # flagged, not rejected
