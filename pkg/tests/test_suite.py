import json
import math

import pytest

from graphwiener.report import (
    VerificationReport,
    clean,
    inequality_report,
    skipped_report,
)
from graphwiener.suite import RunConfig, run_suite, weight_guard

SMALL = dict(
    graphs=[{"kind": "path", "n": 17}, {"kind": "cycle", "n": 32}],
    matrices=[{"kind": "identity"}, {"kind": "kappa", "kappa": 0.5}],
    weights=[0.0, 0.3],
    ps=[1.0, 2.0],
    second_weights=[[1.0, 0.0]],
    batch_size=40,
    boundedness_vectors=50,
)


@pytest.fixture(scope="module")
def small_result():
    return run_suite(RunConfig.from_dict(dict(SMALL)))


def test_small_suite_passes(small_result):
    assert small_result.all_passed
    ids = {r.check_id for r in small_result.reports}
    for cid in ("covering", "weighted_doubling", "truncation_error", "product_b10", "restriction", "lift",
                "s_matrix", "fusion_b10", "series_norm", "domination", "entrywise_inverse",
                "theorem_stability", "theorem_inversion", "localized_stability", "lift_norm"):
        assert cid in ids


def test_guarded_combinations_listed(small_result):
    reasons = [e["reason"] for e in small_result.excluded]
    # theta = 0.3 is not an A_1 weight
    assert any("A_1" in r for r in reasons)
    assert all(not (r.instance.get("p") == 1.0 and r.instance.get("w", "").startswith("w0.3"))
               for r in small_result.reports)


def test_each_check_runs_on_its_own_parameters(small_result):
    cov = [r for r in small_result.reports if r.check_id == "covering"]
    # covering depends on the graph and N only
    assert len(cov) == len({(r.instance["graph"], r.instance["N"]) for r in cov})
    trunc = [r for r in small_result.reports if r.check_id == "truncation_error"]
    assert all("p" not in r.instance and "w" not in r.instance for r in trunc)


def test_reports_carry_seed(small_result):
    chain = [r for r in small_result.reports if r.check_id == "theorem_stability"]
    assert chain and all(r.seed == 0 for r in chain)


def test_singular_instance_skipped():
    cfg = RunConfig.from_dict(dict(SMALL, graphs=[{"kind": "cycle", "n": 16}],
                                   matrices=[{"kind": "identity", "scale": 0.0}], weights=[0.0]))
    res = run_suite(cfg)
    skipped = [r for r in res.reports if r.status == "skipped"]
    assert skipped and all(r.detail["beta"] == [0.0, 0.0] for r in skipped)
    assert {r.check_id for r in skipped} >= {"theorem_stability", "theorem_inversion"}
    assert res.all_passed


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig.from_dict({"colour": "blue"})
    with pytest.raises(ValueError):
        RunConfig.from_dict({"ps": [0.5]})
    with pytest.raises(ValueError):
        RunConfig.from_dict({"weights": [-1.5]})
    cfg = RunConfig.from_json(json.dumps({"seed": 3}))
    assert cfg.seed == 3 and RunConfig.from_dict(cfg.to_dict()) == cfg


def test_weight_guard():
    assert weight_guard(0.0, 1.0) is None
    assert weight_guard(-0.4, 1.0) is None
    assert weight_guard(0.3, 1.0) is not None
    assert weight_guard(0.3, 1.5) is None
    assert weight_guard(0.6, 1.5) is not None


def test_outputs_deterministic(small_result):
    again = run_suite(RunConfig.from_dict(dict(SMALL)))
    assert again.jsonl() == small_result.jsonl()
    assert again.summary_csv() == small_result.summary_csv()
    assert again.excluded_csv() == small_result.excluded_csv()


# ---------------------------------------------------------------------------
# report records


def test_inequality_report_fields():
    rep = inequality_report("x", "label", {"a": 1}, 1.0, 2.0, extracted=0.5, seed=4)
    d = json.loads(rep.to_json())
    assert d["pass"] and d["slack"] == 2.0 and d["seed"] == 4 and d["status"] == "pass"
    assert not inequality_report("x", "l", {}, 2.0, 1.0).passed


def test_skipped_report_is_json_safe():
    rep = skipped_report("x", "l", {}, "why", minimal=7)
    d = json.loads(rep.to_json())
    assert d["lhs"] is None and d["detail"]["minimal"] == 7
    assert isinstance(rep, VerificationReport)


def test_clean():
    assert clean({"a": math.inf, "b": [math.nan, 1.0]}) == {"a": "inf", "b": [None, 1.0]}
