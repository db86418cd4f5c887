import pytest

from consrep import consensus_model as cm
from consrep import lts, verifier
from consrep.calculus_ast import BOT, CHAN_OK
from consrep.errors import TiAlreadySet
from consrep.lts import TAU, action_str


def test_select_ti_one_per_live_agent():
    inst = cm.make_instance(3, [1, 2, 3])
    cfg = cm.make_initial(inst)
    chosen = lts.select_ti(cm.build_system(inst), cfg)
    assert [c.ti for c in chosen] == [1, 2, 3]
    assert all(c.net == cfg.net and c.live == cfg.live for c in chosen)


def test_select_ti_rejects_a_second_choice(sys1):
    cfg = cm.make_initial(sys1.inst)
    chosen = lts.select_ti(sys1, cfg)[0]
    with pytest.raises(TiAlreadySet):
        lts.select_ti(sys1, chosen)


def test_single_agent_initial_has_one_transition(sys1):
    rep = lts.initial_reps(sys1)[0]
    for mode in ("representative", "calculus"):
        (tr,) = lts.successors(sys1, rep, mode)
        assert tr.action == TAU
        assert tr.target.out3 == ((1, cm.nat(4)),)


def test_zero_budget_means_no_crashes():
    inst = cm.make_instance(2, [5, 7], budget=0)
    sys_ = cm.build_system(inst)
    graph = verifier.explore(sys_, "representative")
    families = {tr.rule.split()[0] for tr in graph.edges}
    assert "SR7" not in families and "Stop" not in families


def test_final_state_emits_ok_and_nothing_else(sys1, graph1):
    final = next(rep for rep in graph1.nodes if rep.wrap[0] == 0)
    succs = lts.successors(sys1, final, "representative")
    assert [tr.action for tr in succs] == [("snd", CHAN_OK, BOT)]
    assert succs[0].target == final
    assert lts.successors(sys1, final, "calculus") == succs


def test_modes_agree_on_small_graphs(sys1, sys2, graph1, graph2):
    for sys_, graph in ((sys1, graph1), (sys2, graph2)):
        other = verifier.explore(sys_, "calculus")
        assert set(other.nodes) == set(graph.nodes)
        assert {t[:3] for t in other.edges} == {t[:3] for t in graph.edges}


def test_weak_reach(graph1):
    reps = sorted(graph1.nodes, key=graph1.node_ids.get)
    first, mid, final = reps
    assert lts.weak_reach(graph1, final) == {final}
    assert lts.weak_reach(graph1, first) == {first, mid, final}
    # Monotone: anything reachable from a reachable state stays reachable.
    for rep in graph1.nodes:
        reach = lts.weak_reach(graph1, rep)
        for other in reach:
            assert lts.weak_reach(graph1, other) <= reach


def test_only_ok_is_observable(graph2):
    for tr in graph2.edges:
        assert tr.action == TAU or tr.action == ("snd", CHAN_OK, BOT)


def test_action_rendering():
    assert action_str(TAU) == "tau"
    assert action_str(("snd", CHAN_OK, BOT)) == "ok!_"
    assert action_str(("rcv", ("b", 1, 2), cm.nat(3))) == "b_1_2?3"
