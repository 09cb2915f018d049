import json

import pytest

from shopsim.backends import (AcceptFirstShopperBackend, AdherentShopperBackend,
                              RetrievalSalesbotBackend, opening_utterance)
from shopsim.errors import TransportError
from shopsim.llm_client import ScriptedChatBackend
from shopsim.orchestrator import (GREETING, SimulationConfig, detect_early_exit,
                                  read_trajectories, run_simulation,
                                  trajectory_from_dict, trajectory_to_dict,
                                  write_trajectories)
from shopsim.retrieval import HashingEmbedder


def config_for(persona, catalog, shopper=None):
    if shopper is None:
        shopper = AdherentShopperBackend(persona)
    return SimulationConfig(shopper_backend=shopper,
                            salesbot_backend=RetrievalSalesbotBackend(),
                            embedder=HashingEmbedder(), seed=0)


def persona_named(personas, name):
    return next(p for p in personas if p.name == name)


class TestRunSimulation:
    def test_greeting_opens_conversation(self, catalog, personas):
        persona = persona_named(personas, "Crystal")
        trajectory = run_simulation(persona, catalog, config_for(persona, catalog))
        assert trajectory.turns[0].role == "salesbot"
        assert trajectory.turns[0].text == GREETING
        assert trajectory.turns[0].index == 0

    def test_feasible_adherent_purchases_acceptable(self, catalog, personas):
        persona = persona_named(personas, "Crystal")
        trajectory = run_simulation(persona, catalog, config_for(persona, catalog))
        assert trajectory.termination == "purchase"
        assert trajectory.final_action in persona.acceptable_products
        assert trajectory.final_action in trajectory.recommended

    def test_infeasible_adherent_exits(self, catalog, personas):
        persona = persona_named(personas, "Helene")
        trajectory = run_simulation(persona, catalog, config_for(persona, catalog))
        assert trajectory.termination == "exit"
        assert trajectory.final_action is None

    def test_recommended_requires_retrieval_and_mention(self, catalog, personas):
        persona = persona_named(personas, "Crystal")
        trajectory = run_simulation(persona, catalog, config_for(persona, catalog))
        retrieved = {doc_id for event in trajectory.tool_events
                     for doc_id in event.result_doc_ids}
        salesbot_text = " ".join(t.text for t in trajectory.turns
                                 if t.role == "salesbot")
        for name in trajectory.recommended:
            assert name in retrieved
            assert name in salesbot_text

    def test_tool_events_recorded(self, catalog, personas):
        persona = persona_named(personas, "Crystal")
        trajectory = run_simulation(persona, catalog, config_for(persona, catalog))
        assert trajectory.tool_events
        event = trajectory.tool_events[0]
        assert event.function == "lookup_product_items"
        assert event.arguments["query"] == opening_utterance(persona)
        assert 1 <= len(event.result_doc_ids) <= 4  # top_k default

    def test_transport_error_preserves_partial(self, catalog, personas):
        persona = persona_named(personas, "Crystal")
        shopper = ScriptedChatBackend([opening_utterance(persona)])  # then exhausted
        trajectory = run_simulation(persona, catalog,
                                    config_for(persona, catalog, shopper=shopper))
        assert trajectory.termination == "error"
        assert any(t.role == "shopper" for t in trajectory.turns)

    def test_accept_first_buys_first_mention(self, catalog, personas):
        persona = persona_named(personas, "Helene")  # infeasible, still buys
        names = tuple(p.name for p in catalog.products(persona.category))
        shopper = AcceptFirstShopperBackend(persona, names)
        trajectory = run_simulation(persona, catalog,
                                    config_for(persona, catalog, shopper=shopper))
        assert trajectory.termination == "purchase"
        assert trajectory.final_action == trajectory.recommended[0]

    def test_deterministic_repeat(self, catalog, personas):
        persona = persona_named(personas, "Ken")
        first = run_simulation(persona, catalog, config_for(persona, catalog))
        second = run_simulation(persona, catalog, config_for(persona, catalog))
        assert trajectory_to_dict(first) == trajectory_to_dict(second)

    def test_missing_backend_rejected(self, catalog, personas):
        persona = persona_named(personas, "Ken")
        config = SimulationConfig(embedder=HashingEmbedder())
        with pytest.raises(ValueError):
            run_simulation(persona, catalog, config)


class TestEarlyExit:
    def test_not_early_for_adherent(self, catalog, personas):
        persona = persona_named(personas, "Crystal")
        trajectory = run_simulation(persona, catalog, config_for(persona, catalog))
        assert detect_early_exit(trajectory) is False

    def test_early_when_first_turn_terminal(self, catalog, personas):
        persona = persona_named(personas, "Crystal")
        shopper = ScriptedChatBackend([
            '<tool_call>{"function": "end_conversation", "arguments": {}}'
            "</tool_call>"])
        trajectory = run_simulation(persona, catalog,
                                    config_for(persona, catalog, shopper=shopper))
        assert detect_early_exit(trajectory) is True
        assert trajectory.termination == "exit"


class TestSerialization:
    def test_round_trip(self, catalog, personas):
        persona = persona_named(personas, "Crystal")
        trajectory = run_simulation(persona, catalog, config_for(persona, catalog))
        doc = trajectory_to_dict(trajectory)
        assert trajectory_from_dict(doc) == trajectory
        json.dumps(doc)  # JSON-serializable without custom encoders

    def test_jsonl_byte_stable(self, catalog, personas, tmp_path):
        runs = []
        for persona in personas[:4]:
            runs.append(run_simulation(persona, catalog,
                                       config_for(persona, catalog)))
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_trajectories(runs, str(a))
        write_trajectories(runs, str(b))
        assert a.read_bytes() == b.read_bytes()
        assert [trajectory_to_dict(t) for t in read_trajectories(str(a))] == \
            [trajectory_to_dict(t) for t in runs]
