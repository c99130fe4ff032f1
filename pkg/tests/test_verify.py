import pytest

from rokdeepc import verify


def test_small_battery_passes():
    assert verify.check_grad_u(n_instances=3).passed
    assert verify.check_g_closed_form(n_instances=5).passed
    assert verify.check_lemma2(n_instances=10, n_samples=50).passed
    assert verify.check_prop1_kkt(n_instances=3).passed
    assert verify.check_prop1_monotone(n_instances=2).passed
    assert verify.check_fundamental_lemma(n_systems=8).passed


@pytest.mark.parametrize("target, prop, check", [
    ("grad_u", "grad_u", lambda: verify.check_grad_u(n_instances=2)),
    ("solve_g_closed_form", "g_closed_form", lambda: verify.check_g_closed_form(n_instances=3)),
])
def test_sabotage_breaks_only_its_property(target, prop, check):
    original = verify.FUNCTIONS[target]
    with verify.sabotage(target):
        assert verify.FUNCTIONS[target] is not original
        res = check()
        assert res.name == prop and not res.passed
        assert verify.check_fundamental_lemma(n_systems=3).passed
    assert verify.FUNCTIONS[target] is original
    assert check().passed


def test_sabotage_rejects_unknown_names():
    with pytest.raises(KeyError):
        with verify.sabotage("fit_linear"):
            pass


def test_run_all_subset_reports_each_property():
    lines = []
    res = verify.run_all(only={"fundamental_lemma"}, report=lines.append)
    assert [r.name for r in res] == ["fundamental_lemma"]
    assert lines and lines[0].startswith("PASS fundamental_lemma")
    assert set(verify.PROPERTIES) == {"lemma2_tightness", "prop1_kkt", "prop1_monotonicity", "grad_u",
                                      "g_closed_form", "fundamental_lemma", "theorem1_slack"}


def test_theorem1_short_run_has_no_violations():
    res, rep = verify.check_theorem1(steps=40)
    assert res.passed and rep.cycles == 39
    assert rep.min_slack > rep.beta_e > 0.0
    # the recovered lambda_k saturates as lambda_k' grows, below the magnitude threshold
    assert 0 <= rep.condition_met <= rep.cycles and rep.lambda_k_threshold > 0.0
