import json
import xml.etree.ElementTree as ET
from fractions import Fraction

import pytest

from quantua.activations import get_activation, tabulate
from quantua.construct import Cube, build_approximator, build_deep_indicator, build_indicator
from quantua.fxp import FxFormat
from quantua.net import param_count
from quantua.targets import make_target
from quantua.verify import (FAIL, PASS, SAMPLED, audit_params, mutation_check, mutate_weight,
                            naive_quantized_net, repro_hardtanh, repro_naive_quantization,
                            smallest_hardtanh_format, verify_approximation, verify_indicator)


@pytest.fixture(scope="module")
def relu_ind():
    fmt = FxFormat(3, 2)
    return build_indicator(tabulate(get_activation("relu"), fmt), Cube((0,), (2,)), Fraction(1, 2))


def test_indicator_pass_and_mutation(relu_ind):
    run = verify_indicator(relu_ind.net, relu_ind.cube, relu_ind.gamma)
    assert run.passed and run.checks[0].count == 15
    assert mutation_check(relu_ind).status == PASS


def test_mutant_fails_with_witness(relu_ind):
    mutant = mutate_weight(relu_ind.net, len(relu_ind.net.layers) - 1, 0, 0)
    c = verify_indicator(mutant, relu_ind.cube, relu_ind.gamma).checks[0]
    assert c.status == FAIL and c.witness is not None and len(c.witness) == 1


def test_point_cube():
    fmt = FxFormat(3, 2)
    t = tabulate(get_activation("silu"), fmt)
    ind = build_indicator(t, Cube.point((3,)), Fraction(1, 4))
    assert verify_indicator(ind.net, ind.cube, ind.gamma).passed


def test_sampling_fallback(relu_ind):
    run = verify_indicator(relu_ind.net, relu_ind.cube, relu_ind.gamma, budget=4)
    assert run.checks[0].status == SAMPLED and run.passed


def test_approximation_bound_detects_failure():
    fmt = FxFormat(4, 4)
    t = tabulate(get_activation("relu"), fmt)
    target = make_target("sin3", fmt)
    A = build_approximator(t, target, Fraction(1), delta=Fraction(1, 2))
    assert verify_approximation(A.net, target, 1).passed
    bad = verify_approximation(A.net, target, Fraction(1, 100), exact=True)
    assert not bad.passed and all(c.witness for c in bad.checks)


def test_parallel_matches_serial():
    fmt = FxFormat(4, 4)
    t = tabulate(get_activation("relu"), fmt)
    target = make_target("sin3", fmt)
    A = build_approximator(t, target, Fraction(1, 8))
    a = verify_approximation(A.net, target, Fraction(1, 8), exact=True).to_json()
    b = verify_approximation(A.net, target, Fraction(1, 8), exact=True, jobs=3).to_json()
    assert a == b and a["passed"]


def test_reports_serialize(relu_ind):
    run = verify_indicator(relu_ind.net, relu_ind.cube, relu_ind.gamma)
    js = run.to_json()
    assert "timing" not in js and "seconds" not in js["checks"][0]
    assert "timing" in run.to_json(timing=True)
    json.dumps(js)
    root = ET.fromstring(run.to_junit())
    assert root.get("failures") == "0" and len(root) == 1


def test_naive_quantization():
    run = repro_naive_quantization()
    assert run.passed
    assert run.meta["real"] == ["-1", "1"] and run.meta["quantized"] == ["1", "-1"]
    assert param_count(naive_quantized_net()) == 593


@pytest.mark.parametrize("binary", [False, True])
def test_hardtanh_repro(binary):
    assert smallest_hardtanh_format(binary) == FxFormat(3, 1)
    run = repro_hardtanh(binary)
    assert run.passed and len(run.meta["missing"]) == 5


def test_audits():
    fmt = FxFormat(3, 2)
    t = tabulate(get_activation("relu"), fmt)
    ind = build_indicator(t, Cube((0,), (2,)), Fraction(1, 2))
    run = audit_params(ind.net, "shallow")
    assert run.passed and len(run.checks) == 2
    deep = build_deep_indicator(tabulate(get_activation("relu"), FxFormat(6, 3)), 0, 3)
    assert audit_params(deep.net, "deep").passed
    A = build_approximator(t, make_target("sin3", fmt), Fraction(1, 8))
    assert audit_params(A.net, "approximator").passed
    tight = audit_params(ind.net, "shallow", {"param_bound": 3})
    assert not tight.passed
