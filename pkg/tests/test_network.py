import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_incidence
from wdnsolve import fixtures as fx
from wdnsolve.errors import (
    DanglingNodeRef,
    DisconnectedGraph,
    DuplicateId,
    InputError,
    InpSyntaxError,
    NoFixedHead,
    UnsupportedSection,
)
from wdnsolve.network import (
    DemandScenario,
    FixedHead,
    HeadlossModel,
    Junction,
    Network,
    Pipe,
    from_json_dict,
    load_network,
    parse_inp,
    save_json,
    to_inp,
    to_json_dict,
)

SMALLEST = """
[JUNCTIONS]
J1  0  10
[RESERVOIRS]
R1  50
[PIPES]
P1  R1  J1  1000  300  100
[END]
"""


def test_smallest_network():
    net = parse_inp(SMALLEST)
    assert (net.n_p, net.n_n, net.n_0, net.n_l) == (1, 1, 1, 0)
    # default LPS / mm units converted to SI
    assert net.demands[0] == pytest.approx(0.01)
    assert net.pipes[0].diameter == pytest.approx(0.3)
    np.testing.assert_array_equal(net.A12.to_dense(), [[1]])
    np.testing.assert_array_equal(net.A10.to_dense(), [[-1]])


def test_pump_is_unsupported():
    text = SMALLEST.replace("[END]", "[PUMPS]\nPU1 R1 J1 HEAD 1\n[END]")
    with pytest.raises(UnsupportedSection):
        parse_inp(text)


def test_check_valve_is_unsupported():
    with pytest.raises(UnsupportedSection):
        parse_inp(SMALLEST.replace("100\n", "100 0 CV\n"))


def test_empty_pumps_section_is_fine():
    assert parse_inp(SMALLEST.replace("[END]", "[PUMPS]\n[END]")).n_p == 1


@pytest.mark.parametrize("text, err", [
    (SMALLEST.replace("P1  R1  J1", "P1  R1  J9"), DanglingNodeRef),
    (SMALLEST.replace("J1  0  10", "J1  0  10\nJ1  0  3"), DuplicateId),
    (SMALLEST.replace("R1  50", "R1  50\nJ1  3"), DuplicateId),
    (SMALLEST.replace("J1  0  10", "J1  0  10\nJ2  0  1"), DisconnectedGraph),
    (SMALLEST.replace("R1  50", "").replace("P1  R1  J1", "P1  J1  J2").replace("J1  0  10", "J1 0 1\nJ2 0 1"),
     NoFixedHead),
    ("junk before header\n" + SMALLEST, InpSyntaxError),
    (SMALLEST.replace("1000", "abc"), InpSyntaxError),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        parse_inp(text)


def test_us_units_and_dw():
    text = """
[OPTIONS]
Units GPM
Headloss D-W
[JUNCTIONS]
J1 0 100
[RESERVOIRS]
R1 100
[PIPES]
P1 R1 J1 1000 12 0.85
"""
    net = parse_inp(text)
    p = net.pipes[0]
    assert p.model is HeadlossModel.DARCY_WEISBACH
    assert p.length == pytest.approx(304.8)
    assert p.diameter == pytest.approx(0.3048)
    assert p.roughness == pytest.approx(0.85 * 0.3048e-3)  # millifeet
    assert net.demands[0] == pytest.approx(100 * 6.30901964e-5)
    assert net.h0[0] == pytest.approx(30.48)


def test_demands_section_and_tanks_and_closed_pipes():
    text = """
[JUNCTIONS]
J1 0 10 pat
J2 0 0
[DEMANDS]
J2 4
J2 1
[RESERVOIRS]
R1 50
[TANKS]
T1 20 5 0 10 20 0
[PIPES]
P1 R1 J1 100 200 100
P2 J1 J2 100 200 100
P3 J2 T1 100 200 100
P4 J1 T1 100 200 100 0 Closed
[PATTERNS]
pat 1 2
pat 3
"""
    net = parse_inp(text)
    assert net.n_p == 3
    assert net.demands == pytest.approx([0.01, 0.005])
    assert net.h0 == pytest.approx([50.0, 25.0])
    assert net.patterns["pat"] == [1.0, 2.0, 3.0]
    sc = DemandScenario.from_patterns(net, 4)
    assert [s[0] for s in sc] == pytest.approx([0.01, 0.02, 0.03, 0.01])


def test_incidence_sign_convention():
    net = fx.triangle()
    a12, a10 = net.A12.to_dense(), net.A10.to_dense()
    both = np.hstack((a12, a10))
    assert np.all(both.sum(axis=1) == 0)
    assert np.all((both != 0).sum(axis=1) == 2)
    # pipe P2 goes A -> B: leaves A (-1), enters B (+1)
    assert a12[1].tolist() == [-1, 1, 0]


def _random_nets():
    return st.builds(lambda seed: fx.random_network(seed, max_pipes=120), st.integers(0, 10_000))


@settings(max_examples=40, deadline=None)
@given(net=_random_nets())
def test_incidence_invariants(net):
    a12, a10 = dense_incidence(net)
    np.testing.assert_array_equal(net.A12.to_dense(), a12)
    np.testing.assert_array_equal(net.A10.to_dense(), a10)
    both = np.hstack((a12, a10))
    assert np.all(both.sum(axis=1) == 0)
    assert np.all((both != 0).sum(axis=1) == 2)
    assert np.linalg.matrix_rank(a12) == net.n_n


@settings(max_examples=40, deadline=None)
@given(net=_random_nets(), dw=st.booleans())
def test_inp_roundtrip(net, dw):
    if dw:
        net = Network.build(net.junctions, net.fixed_heads,
                            [Pipe(p.id, p.from_node, p.to_node, p.length, p.diameter, 0.26e-3,
                                  HeadlossModel.DARCY_WEISBACH) for p in net.pipes])
    again = parse_inp(to_inp(net))
    assert again == net
    assert parse_inp(to_inp(again)) == again


def test_json_roundtrip(tmp_path):
    net = fx.grid(4, 3)
    assert from_json_dict(to_json_dict(net)) == net
    save_json(net, tmp_path / "g.json")
    assert load_network(tmp_path / "g.json") == net
    (tmp_path / "g.inp").write_text(to_inp(net))
    assert load_network(tmp_path / "g.inp") == net
    with pytest.raises(InputError):
        load_network(tmp_path / "missing.inp")
    with pytest.raises(InputError):
        from_json_dict({"junctions": []})


def test_fixture_sizes():
    g = fx.grid()
    assert (g.n_p, g.n_n, g.n_0, g.n_l) == (180, 99, 1, 81)
    assert fx.square_loop().n_l == 1
    assert fx.triangle().n_p == 4 and fx.triangle().n_n == 3
    assert fx.branched().n_l == 0


def test_scenarios(tmp_path):
    net = fx.triangle()
    sc = DemandScenario.synthetic(net, 96, seed=3)
    assert len(sc) == 96 and all(np.all(s >= 0) for s in sc)
    again = DemandScenario.synthetic(net, 96, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(sc, again))
    f = tmp_path / "steps.csv"
    f.write_text("# multipliers or full vectors\n1.0\n0.5\n0.001, 0.002, 0.003\n")
    sc = DemandScenario.from_file(f, net)
    assert len(sc) == 3
    np.testing.assert_allclose(sc.steps[1], 0.5 * net.demands)
    f.write_text("1 2\n")
    with pytest.raises(InputError):
        DemandScenario.from_file(f, net)
    with pytest.raises(InputError):
        DemandScenario((np.array([-1.0]),))
    with pytest.raises(InputError):
        DemandScenario.constant(fx.single_pipe()).check(net)


def test_network_build_validation():
    with pytest.raises(InputError):
        Network.build([], [FixedHead("R", 1.0)], [])
    with pytest.raises(InputError):
        Network.build([Junction("J", 0.0)], [FixedHead("R", 1.0)],
                      [Pipe("P", "R", "J", -1.0, 0.1, 100.0)])
