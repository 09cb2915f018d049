import pytest

from shopsim.errors import ConfigurationError, JudgeParseError, TransportError
from shopsim.llm_client import (ChatBackendConfig, ChatExchange, ChatMessage,
                                DEFAULT_JUDGE_RUBRIC, EchoChatBackend,
                                ScriptedChatBackend, judge_score)
from shopsim.prompts import (CATEGORIES, assemble_salesbot_prompt,
                             assemble_shopper_prompt, category_label)


class TestPrompts:
    def test_all_categories_fill(self, personas):
        for persona in personas:
            prompt = assemble_shopper_prompt(persona, persona.category)
            assert "{" not in prompt.replace("{}", "")
            assert persona.preferences in prompt
            assert persona.dealbreakers in prompt
            assert "add_to_cart" in prompt and "end_conversation" in prompt

    def test_human_steering_variant_appends(self, personas):
        persona = personas[0]
        base = assemble_shopper_prompt(persona, persona.category, "base")
        steered = assemble_shopper_prompt(persona, persona.category,
                                          "human_steering")
        assert steered.startswith(base)
        assert len(steered) > len(base)

    def test_unknown_category_rejected(self, personas):
        with pytest.raises(ConfigurationError):
            assemble_shopper_prompt(personas[0], "furniture")

    def test_unknown_variant_rejected(self, personas):
        with pytest.raises(ConfigurationError):
            assemble_shopper_prompt(personas[0], personas[0].category, "spicy")

    def test_salesbot_prompt_names_category(self):
        for category in CATEGORIES:
            prompt = assemble_salesbot_prompt(category)
            assert category_label(category) in prompt
            assert "lookup_product_items" in prompt

    def test_category_labels(self):
        assert category_label("smart_watch") == "Smart Watch"
        assert category_label("female_clothing") == "Female Clothing"


class TestBackends:
    def test_scripted_replays_in_order(self):
        backend = ScriptedChatBackend(["one", "two"])
        exchange = ChatExchange(messages=(ChatMessage(role="user", text="x"),))
        assert backend.complete(exchange).text == "one"
        assert backend.complete(exchange).text == "two"
        with pytest.raises(TransportError):
            backend.complete(exchange)

    def test_echo(self):
        backend = EchoChatBackend()
        exchange = ChatExchange(messages=(
            ChatMessage(role="system", text="s"),
            ChatMessage(role="user", text="hello")))
        assert backend.complete(exchange).text == "hello"

    def test_empty_exchange_rejected(self):
        with pytest.raises(ValueError):
            ChatExchange(messages=())

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            ChatBackendConfig(temperature=-1)
        locked = ChatBackendConfig(temperature=0.2, temperature_locked=True)
        assert locked.effective_temperature == 1.0


class TestJudgeScore:
    def test_last_score_line_wins(self):
        backend = ScriptedChatBackend(["SCORE: 0.2\nreconsidering\nSCORE: 0.9"])
        assert judge_score(backend, DEFAULT_JUDGE_RUBRIC, "t") == 0.9

    def test_clamped(self):
        backend = ScriptedChatBackend(["SCORE: 1.7"])
        assert judge_score(backend, DEFAULT_JUDGE_RUBRIC, "t") == 1.0

    def test_bare_number_fallback(self):
        backend = ScriptedChatBackend(["0.4"])
        assert judge_score(backend, DEFAULT_JUDGE_RUBRIC, "t") == 0.4

    def test_unparseable_raises(self):
        backend = ScriptedChatBackend(["I cannot decide."])
        with pytest.raises(JudgeParseError):
            judge_score(backend, DEFAULT_JUDGE_RUBRIC, "t")

    def test_rubric_pins_format(self):
        assert "SCORE:" in DEFAULT_JUDGE_RUBRIC
        assert "{trajectory}" in DEFAULT_JUDGE_RUBRIC
