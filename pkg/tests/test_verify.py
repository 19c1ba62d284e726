import json

import numpy as np

from slipflow import verify
from slipflow.verify import (CheckReport, check_form_identities,
                             check_gateaux, check_inf_sup,
                             check_pointwise_monotonicity,
                             check_trace_constant, monotonicity_margins,
                             reports_to_json, theta1_equal_order,
                             theta1_taylor_hood)


def test_monotonicity_margins_nonnegative(rng):
    x = rng.standard_normal((5000, 2))
    y = rng.standard_normal((5000, 2))
    for r in (1.0, 3.0, 5.0):
        monotone, strong = monotonicity_margins(x, y, r)
        assert monotone.min() >= -1e-12
        assert strong.min() >= -1e-12


def test_strong_margin_tight_on_opposite_pairs(rng):
    # y = -x attains the strong inequality with equality:
    # (F(x) - F(-x)) . 2x = 2 |x|^{r+1} * 2 = 2^{1-r} |2x|^{r+1}
    x = rng.standard_normal((1000, 2))
    for r in (2.0, 3.0, 3.5):
        monotone, strong = monotonicity_margins(x, -x, r)
        assert np.max(np.abs(strong) / np.maximum(monotone, 1e-300)) < 1e-12


def test_pointwise_monotonicity_check_passes(rng):
    rep = check_pointwise_monotonicity(rng, num_pairs=20_000)
    assert rep.passed
    for r in (1.0, 2.0, 3.0, 3.5, 5.0):
        assert rep.details[f"r={r}"]["violations"] == 0


def test_gateaux_check_passes(rng):
    rep = check_gateaux(rng, num=500)
    assert rep.passed
    assert all(v["max_rel_err"] <= 1e-7
               for k, v in rep.details.items() if k.startswith("s="))


def test_form_identities_check_passes(rng):
    rep = check_form_identities(rng, n=4, transport_n=8, num_fields=20)
    assert rep.passed
    assert rep.details["max_rel_err_a"] < 1e-12
    assert rep.details["max_rel_err_c"] < 1e-12
    assert rep.details["max_abs_skew"] < 1e-6


def test_form_identities_flag_nonskew_transport(rng):
    # a transport field with nonzero divergence breaks the skewness
    rep = check_form_identities(rng, n=4, transport_n=8, num_fields=5,
                                transport_field=lambda x, y: (x, y))
    assert not rep.passed
    assert rep.details["max_abs_skew"] > 1e-3


def test_inf_sup_frozen_values():
    assert np.isclose(theta1_taylor_hood(2), 0.40039453387005536, rtol=1e-6)
    assert np.isclose(theta1_taylor_hood(4), 0.40238401940047447, rtol=1e-6)


def test_equal_order_pair_is_unstable():
    assert theta1_equal_order(8) < 1e-8


def test_inf_sup_check_passes():
    rep = check_inf_sup(ns=(2, 4), unstable_n=4)
    assert rep.passed
    assert rep.details["variation"] < 0.2


def test_trace_constant_check_passes(rng):
    rep = check_trace_constant(rng, ns=(4, 8), num_fields=30)
    assert rep.passed
    assert np.isclose(rep.details["n=4"]["lambda0"], 2.178628972287351,
                      rtol=1e-6)
    assert np.isclose(rep.details["n=8"]["lambda0"], 2.166471391436141,
                      rtol=1e-6)
    assert rep.details["relative_drift"] < 0.05


def test_report_summary_and_json_round_trip():
    reports = [CheckReport("alpha", True, {"x": 1.0}),
               CheckReport("beta", False, {"why": "because"})]
    assert reports[0].summary() == "alpha: PASS"
    assert reports[1].summary() == "beta: FAIL"
    payload = json.loads(reports_to_json(reports))
    assert payload["alpha"]["passed"] is True
    assert payload["beta"]["details"]["why"] == "because"


def test_run_all_is_deterministic():
    a = verify.run_all(seed=3)
    b = verify.run_all(seed=3)
    assert reports_to_json(a) == reports_to_json(b)
    assert all(r.passed for r in a)
