import json
import math

import numpy as np
import pytest

from dcflow.caseio import (
    AdaptRules,
    CaseSchemaError,
    CaseSyntaxError,
    UnknownCase,
    UnsupportedFeature,
    builtin_case,
    list_cases,
    parse_case_json,
    parse_matpower_subset,
    write_case_json,
)
from dcflow.netmodel import Bus, CostFunction, Line, Network

from helpers import two_bus

MINIMAL = """
{
 "schema": "dcflow-case/1",
 "name": "mini",
 "base_mva": 10.0,
 "buses": [
  {"id": 1, "p_min": -1.0, "p_max": 5.0, "v_min": 0.95, "v_max": 1.05},
  {"id": 2, "p_min": -2.0, "p_max": null, "v_min": 0.95, "v_max": 1.05}
 ],
 "lines": [{"i": 1, "j": 2, "r": 0.001}]
}
"""

MATPOWER = """
function mpc = tiny3
% a tiny three-bus case
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0    0  0  0  1  1.0  0  12.6  1  1.1  0.9;
    2  1  10   4  0  0  1  1.0  0  12.6  1  1.1  0.9;
    3  1  5    2  0  0  1  1.0  0  12.6  1  1.1  0.9;
];
mpc.gen = [
    1  0  0  10  -10  1.0  100  1  50  0;
    3  0  0  10  -10  1.0  100  1  20  0;
    3  0  0  10  -10  1.0  100  0  99  0;
];
mpc.branch = [
    1  2  0.02  0.06  0  0  0  0  0  0  1  -360  360;
    2  3  0     0.05  0  0  0  0  0  0  1  -360  360;
    1  3  0.04  0.10  0  0  0  0  0  0  0  -360  360;
];
"""


def test_parse_minimal_json():
    net = parse_case_json(MINIMAL)
    assert net.n == 2
    assert len(net.lines) == 1
    # powers are MW on base_mva; r = 0.001 -> y = 1000 p.u.
    assert np.isclose(net.buses[0].p_min, -0.1)
    assert net.buses[1].p_max == math.inf
    assert np.isclose(net.lines[0].y, 1000.0)


def test_missing_field_is_schema_error():
    doc = json.loads(MINIMAL)
    del doc["buses"][0]["v_max"]
    with pytest.raises(CaseSchemaError):
        parse_case_json(json.dumps(doc))


def test_bad_json_is_syntax_error():
    with pytest.raises(CaseSyntaxError):
        parse_case_json("{not json")


def test_r_y_exclusive():
    doc = json.loads(MINIMAL)
    doc["lines"][0]["y"] = 5.0
    with pytest.raises(CaseSchemaError):
        parse_case_json(json.dumps(doc))


def test_roundtrip_is_exact():
    net = two_bus(y=10.0, p1=(0.0, 1.0), p2=(-0.196, -0.196), i_max=0.7)
    text = write_case_json(net)
    back = parse_case_json(text)
    assert back.buses == net.buses
    assert back.lines == net.lines
    # a second trip is byte-identical
    assert write_case_json(back) == text


def test_roundtrip_slack_and_cost():
    net = Network(
        buses=(
            Bus(0, -math.inf, math.inf, 1.02, 1.02, kind="slack"),
            Bus(1, -0.2, 0.5, 0.95, 1.05,
                cost=CostFunction("quadratic", (2.0, 1.0, 0.0))),
        ),
        lines=(Line(0, 1, 25.0),),
        name="slackcase",
    )
    back = parse_case_json(write_case_json(net))
    assert back.buses == net.buses


def test_matpower_adaptation_rules():
    net = parse_matpower_subset(MATPOWER)
    assert net.name == "tiny3"
    assert net.adapt_applied
    # r = 0.02 scaled to 0.002 -> y = 500; x ignored
    l12 = net.line_between(1, 2)
    assert np.isclose(l12.y, 500.0)
    # r = 0 replaced by 1e-3 -> y = 1000
    l23 = net.line_between(2, 3)
    assert np.isclose(l23.y, 1000.0)
    # out-of-service branch dropped
    assert net.line_between(1, 3) is None
    # slack bus from type 3
    assert net.bus(1).kind == "slack"
    # load bus: fixed injection -Pd/base
    assert np.isclose(net.bus(2).p_min, -0.1)
    assert np.isclose(net.bus(2).p_max, -0.1)
    # gen at bus 3 merges with its load; the off gen is skipped
    assert np.isclose(net.bus(3).p_min, -0.05)
    assert np.isclose(net.bus(3).p_max, -0.05 + 0.2)
    # voltage bounds overridden
    assert net.bus(2).v_min == 0.95 and net.bus(2).v_max == 1.05


def test_matpower_wrong_column_count():
    bad = MATPOWER.replace("1  2  0.02  0.06  0  0  0  0  0  0  1  -360  360;",
                           "1  2  0.02  0.06  0  0  0  0  0  1  -360  360;")
    with pytest.raises(CaseSyntaxError):
        parse_matpower_subset(bad)


def test_matpower_unsupported_section():
    bad = MATPOWER + "\nmpc.dcline = [1 2 3];\n"
    with pytest.raises(UnsupportedFeature):
        parse_matpower_subset(bad)


def test_matpower_gencost_ignored():
    ok = MATPOWER + "\nmpc.gencost = [2 0 0 3 0.1 1.0 0];\n"
    net = parse_matpower_subset(ok)
    assert net.bus(1).cost == CostFunction()


def test_builtin_cases():
    st = builtin_case("dc16_st")
    assert st.n == 16
    assert all(b.kind == "standalone" for b in st.buses)
    assert st.line_between(5, 11) is None  # tie lines absent in tree mode
    gm = builtin_case("dc16_gm")
    slacks = [b.id for b in gm.buses if b.kind == "slack"]
    assert slacks == [1, 2, 3]
    assert gm.line_between(5, 11) is not None
    with pytest.raises(UnknownCase):
        builtin_case("nonexistent")
    assert set(list_cases()) >= {"dc16_gt", "dc33_tree", "dc70_tree", "dc94_tree"}


def test_builtin_tree_sizes():
    assert builtin_case("dc33_tree").n == 33
    assert builtin_case("dc70_tree").n == 70
    assert builtin_case("dc94_tree").n == 94
