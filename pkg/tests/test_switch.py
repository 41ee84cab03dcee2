"""2-switch engine: round mechanics, measurements, fusions, carry-over."""

import numpy as np
import pytest

from ghzdist import dm as dmod
from ghzdist.dm import Qubit
from ghzdist.params import TAG_SWITCH, SimParams, shot_rng
from ghzdist.switch import (
    Component,
    NetworkState,
    ProtocolInvariantError,
    advance_round,
    advance_to_link_event,
    do_fusions,
    do_switch_bsms,
    estimate_switch,
    run_executions,
    run_to_ghz,
)


def make_params(**kwargs):
    base = dict(n_end_nodes=5, q_link=0.5, q_bsm=1.0, seed=1, shots=50)
    base.update(kwargs)
    return SimParams(**base)


def bell_component(a: Qubit, b: Qubit, born_round=0) -> Component:
    return Component(dmod.make_bell(a, b), {a: born_round, b: born_round})


class TestAdvanceRound:
    def test_certain_links_fill_all_connections(self):
        state = NetworkState()
        events = advance_round(state, make_params(q_link=1.0), shot_rng(0, 0, 9))
        assert sorted(events) == [("link", c) for c in range(1, 6)]
        assert len(state.components) == 5
        for comp in state.components:
            assert comp.dm.num_qubits == 2
            assert len(comp.switch_qubits()) == 1

    def test_busy_connection_does_not_attempt(self):
        state = NetworkState()
        params = make_params(q_link=1.0)
        advance_round(state, params, shot_rng(0, 0, 9))
        events = advance_round(state, params, shot_rng(0, 1, 9))
        assert events == []

    def test_perfect_memory_leaves_components_unchanged(self):
        state = NetworkState()
        params = make_params(q_link=1.0, p_mem=1.0)
        advance_round(state, params, shot_rng(0, 0, 9))
        before = [c.dm.mat.copy() for c in state.components]
        for _ in range(5):
            advance_round(state, params, shot_rng(0, 2, 9))
        for comp, mat in zip(state.components, before):
            comp.flush_memory(comp.qubits, state.round, params.p_mem)
            np.testing.assert_array_equal(comp.dm.mat, mat)

    def test_lazy_memory_aging_matches_direct_channel(self):
        # a pair stored for k rounds must carry p_mem^k per qubit once flushed
        params = make_params(q_link=1.0, p_mem=0.9, p_link=0.95)
        state = NetworkState()
        advance_round(state, params, shot_rng(0, 0, 9))
        comp = state.components[0]
        reference = comp.dm
        for _ in range(3):
            advance_round(
                state, params.with_overrides(q_link=1e-9), shot_rng(0, 1, 9)
            )
        comp.flush_memory(comp.qubits, state.round, params.p_mem)
        for q in reference.labels:
            reference = dmod.depolarize(reference, (q,), 0.9**3)
        assert dmod.max_abs_diff(comp.dm, reference) < 1e-12

    def test_success_frequency(self):
        params = make_params(q_link=0.01)
        rng = shot_rng(4, 0, 9)
        rounds = 100_000
        hits = 0
        for _ in range(rounds):
            state = NetworkState()  # keep all five links free
            hits += len(advance_round(state, params, rng))
        mean = rounds * 5 * 0.01
        sigma = np.sqrt(rounds * 5 * 0.01 * 0.99)
        assert abs(hits - mean) < 3 * sigma

    def test_event_jump_matches_round_loop_distribution(self):
        params = make_params(q_link=0.2, n_end_nodes=3)
        jump_rounds = []
        loop_rounds = []
        for s in range(4000):
            state = NetworkState()
            advance_to_link_event(state, params, shot_rng(11, s, 9))
            jump_rounds.append(state.round)
            state = NetworkState()
            rng = shot_rng(12, s, 9)
            while not advance_round(state, params, rng):
                pass
            loop_rounds.append(state.round)
        # same geometric first-event law: compare means within 5 sigma
        jump_rounds, loop_rounds = np.array(jump_rounds), np.array(loop_rounds)
        pooled = np.sqrt(jump_rounds.var() / 4000 + loop_rounds.var() / 4000)
        assert abs(jump_rounds.mean() - loop_rounds.mean()) < 5 * pooled


class TestSwitchBsms:
    def test_two_pairs_merge_into_end_to_end_bell(self):
        state = NetworkState()
        state.components = [
            bell_component(Qubit(0, 1), Qubit(1, 0)),
            bell_component(Qubit(0, 2), Qubit(2, 0)),
        ]
        events = do_switch_bsms(state, make_params(n_end_nodes=2), shot_rng(0, 0, 9))
        assert events == [("bsm", 1, 2, True)]
        assert len(state.components) == 1
        comp = state.components[0]
        assert set(comp.qubits) == {Qubit(1, 0), Qubit(2, 0)}
        assert not comp.switch_qubits()
        assert dmod.fidelity_to_ghz(comp.dm) == pytest.approx(1.0, abs=1e-12)
        assert comp.pairs_consumed == 2

    def test_failed_measurement_destroys_both_pairs(self):
        state = NetworkState()
        state.components = [
            bell_component(Qubit(0, 1), Qubit(1, 0)),
            bell_component(Qubit(0, 2), Qubit(2, 0)),
        ]
        events = do_switch_bsms(
            state, make_params(n_end_nodes=2, q_bsm=1e-12), shot_rng(0, 0, 9)
        )
        assert events == [("bsm", 1, 2, False)]
        assert state.components == []

    def test_three_pairs_single_uniform_measurement(self):
        params = make_params(n_end_nodes=3)
        counts = {(1, 2): 0, (1, 3): 0, (2, 3): 0}
        trials = 3000
        for s in range(trials):
            state = NetworkState()
            state.components = [
                bell_component(Qubit(0, c), Qubit(c, 0)) for c in (1, 2, 3)
            ]
            events = do_switch_bsms(state, params, shot_rng(13, s, 9))
            assert len(events) == 1
            counts[events[0][1:3]] += 1
        sigma = np.sqrt(trials * (1 / 3) * (2 / 3))
        for pair_count in counts.values():
            assert abs(pair_count - trials / 3) < 3 * sigma

    def test_pairs_to_already_entangled_nodes_wait(self):
        # nodes 1 and 2 already share a Bell state: their fresh link pairs
        # must not be measured into a redundant second one
        state = NetworkState()
        state.components = [
            bell_component(Qubit(1, 0), Qubit(2, 0)),
            bell_component(Qubit(0, 1), Qubit(1, 1)),
            bell_component(Qubit(0, 2), Qubit(2, 1)),
        ]
        events = do_switch_bsms(state, make_params(n_end_nodes=2), shot_rng(0, 0, 9))
        assert events == []
        assert len(state.components) == 3


class TestFusions:
    def test_fuses_two_bells_at_shared_node(self):
        state = NetworkState()
        state.components = [
            bell_component(Qubit(1, 0), Qubit(2, 0)),
            bell_component(Qubit(1, 1), Qubit(3, 0)),
        ]
        events = do_fusions(state, make_params(n_end_nodes=3), shot_rng(0, 0, 9))
        assert len(events) == 1 and events[0][0] == "fusion"
        comp = state.components[0]
        assert {q.node for q in comp.qubits} == {1, 2, 3}
        assert dmod.fidelity_to_ghz(comp.dm) == pytest.approx(1.0, abs=1e-12)

    def test_no_shared_node_no_fusion(self):
        state = NetworkState()
        state.components = [
            bell_component(Qubit(1, 0), Qubit(2, 0)),
            bell_component(Qubit(3, 0), Qubit(4, 0)),
        ]
        assert do_fusions(state, make_params(), shot_rng(0, 0, 9)) == []
        assert len(state.components) == 2

    def test_fusion_cascade_builds_ghz4(self):
        state = NetworkState()
        state.components = [
            bell_component(Qubit(1, 0), Qubit(2, 0)),
            bell_component(Qubit(2, 1), Qubit(3, 0)),
            bell_component(Qubit(3, 1), Qubit(4, 0)),
        ]
        events = do_fusions(state, make_params(n_end_nodes=4), shot_rng(0, 0, 9))
        assert len(events) == 2
        comp = state.components[0]
        assert {q.node for q in comp.qubits} == {1, 2, 3, 4}
        assert dmod.fidelity_to_ghz(comp.dm) == pytest.approx(1.0, abs=1e-12)

    def test_link_pair_is_not_absorbed(self):
        state = NetworkState()
        state.components = [
            bell_component(Qubit(1, 0), Qubit(2, 0)),
            bell_component(Qubit(0, 1), Qubit(1, 1)),
        ]
        assert do_fusions(state, make_params(), shot_rng(0, 0, 9)) == []

    def test_same_component_twice_at_node_is_flagged(self):
        ghz = dmod.make_ghz(3, (Qubit(1, 0), Qubit(1, 1), Qubit(2, 0)))
        state = NetworkState()
        state.components = [Component(ghz, {q: 0 for q in ghz.labels})]
        with pytest.raises(ProtocolInvariantError):
            do_fusions(state, make_params(n_end_nodes=2), shot_rng(0, 0, 9))


class TestRunToGhz:
    def test_perfect_links_two_rounds(self):
        params = make_params(q_link=1.0)
        state = NetworkState()
        rec, state = run_to_ghz(state, params, shot_rng(2, 0, TAG_SWITCH))
        assert rec.duration_rounds == 2
        assert rec.fidelity == pytest.approx(1.0, abs=1e-12)

    def test_noiseless_always_unit_fidelity(self):
        rng_outer = np.random.default_rng(33)
        for trial in range(250):
            params = make_params(
                n_end_nodes=int(rng_outer.integers(2, 6)),
                q_link=float(rng_outer.uniform(0.2, 1.0)),
                q_bsm=float(rng_outer.uniform(0.5, 1.0)),
            )
            state = NetworkState()
            rng = shot_rng(int(rng_outer.integers(2**32)), 0, TAG_SWITCH)
            for _ in range(4):
                rec, state = run_to_ghz(state, params, rng)
                assert rec.fidelity == pytest.approx(1.0, abs=1e-10)

    def test_pair_accounting_with_certain_measurements(self):
        # every delivered GHZ absorbs exactly 2(N-1) link pairs when no
        # measurement can fail
        params = make_params(n_end_nodes=4, q_link=0.3, q_bsm=1.0)
        state = NetworkState()
        rng = shot_rng(8, 0, TAG_SWITCH)
        for _ in range(30):
            rec, state = run_to_ghz(state, params, rng)
            assert rec.pairs_consumed == 2 * (4 - 1)

    def test_invariants_hold_along_a_run(self):
        params = make_params(
            n_end_nodes=4, q_link=0.4, q_bsm=0.7, p_link=0.95, p_mem=0.999, p_bsm=0.97
        )
        state = NetworkState()
        rng = shot_rng(3, 0, TAG_SWITCH)
        deliveries = 0
        while deliveries < 12:
            advance_round(state, params, rng)
            state.validate(params.n_end_nodes)
            do_switch_bsms(state, params, rng)
            state.validate(params.n_end_nodes)
            do_fusions(state, params, rng)
            state.validate(params.n_end_nodes)
            full = state.full_component(params.n_end_nodes)
            if full is not None:
                assert len(full.qubits) == params.n_end_nodes
                assert not full.switch_qubits()
                state.components.remove(full)
                deliveries += 1


class TestJumpEquivalence:
    def test_full_delivery_statistics_match_literal_round_loop(self):
        # system-level check of the fast-forward: complete GHZ deliveries via
        # the event jump must follow the same duration/fidelity law as the
        # literal one-round loop
        params = make_params(
            n_end_nodes=4, q_link=0.15, q_bsm=0.85, p_mem=0.995, p_link=0.97
        )
        n_exec = 1500

        def run_literal(state, rng):
            start = state.round
            while True:
                advance_round(state, params, rng)
                do_switch_bsms(state, params, rng)
                do_fusions(state, params, rng)
                full = state.full_component(params.n_end_nodes)
                if full is not None:
                    full.flush_memory(full.qubits, state.round, params.p_mem)
                    fid = dmod.fidelity_to_ghz(full.dm)
                    state.components.remove(full)
                    return state.round - start, fid

        rng = shot_rng(71, 0, TAG_SWITCH)
        state = NetworkState()
        literal = np.array([run_literal(state, rng) for _ in range(n_exec)])

        rng = shot_rng(72, 0, TAG_SWITCH)
        state = NetworkState()
        jump = []
        for _ in range(n_exec):
            rec, state = run_to_ghz(state, params, rng)
            jump.append((rec.duration_rounds, rec.fidelity))
        jump = np.array(jump)

        for col in (0, 1):
            pooled = np.sqrt(
                literal[:, col].var() / n_exec + jump[:, col].var() / n_exec
            )
            assert abs(literal[:, col].mean() - jump[:, col].mean()) < 5 * pooled


class TestEstimateSwitch:
    def test_deterministic(self):
        params = make_params(q_link=0.6, shots=40, seed=5)
        assert estimate_switch(params) == estimate_switch(params)

    def test_perfect_point_rate_half(self):
        params = make_params(q_link=1.0, shots=60)
        est = estimate_switch(params)
        assert est.rate_mean == pytest.approx(0.5, abs=1e-12)
        assert est.fidelity_mean == pytest.approx(1.0, abs=1e-12)

    def test_warmup_execution_is_discarded(self):
        params = make_params(q_link=0.7, shots=25, seed=6)
        records = run_executions(params, 25, warmup=1)
        assert len(records) == 25
