import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shopsim.catalog import Persona
from shopsim.errors import TrainingError
from shopsim.llm_client import ScriptedChatBackend
from shopsim.orchestrator import Trajectory
from shopsim.protocol import Turn
from shopsim.reward import (COMPONENTS, NgramClassifier, RewardWeights,
                            aggregate_reward, broadcast, logistic_objective,
                            render_for_judge, reward_align, reward_auxiliaries,
                            reward_ngram, reward_reason, score_trajectory,
                            train_ngram_classifier)

# Disjoint stylistic-marker corpora: "yeah"/"gonna" mark human texts,
# "certainly"/"furthermore" mark model texts. Balanced and mirrored so the
# trained bias stays at zero.
HUMAN_CORPUS = [f"yeah gonna grab item {i}" for i in range(20)]
MODEL_CORPUS = [f"certainly furthermore select item {i}" for i in range(20)]


def make_persona(acceptable=("Garden Quest",)):
    return Persona(name="Ken", age=39, category="games", budget=4000,
                   background="Family game night host.",
                   preferences="I enjoy cooperative play.",
                   dealbreakers="It must be suitable for ages 8 and up.",
                   acceptable_products=tuple(acceptable))


def make_trajectory(shopper_texts, recommended=("Garden Quest",),
                    action="Garden Quest", termination="purchase"):
    turns = [Turn(role="salesbot", text="Hello!", index=0)]
    for i, text in enumerate(shopper_texts, 1):
        turns.append(Turn(role="shopper", text=text, index=i))
    return Trajectory(persona_id="Ken", category="games", turns=tuple(turns),
                      tool_events=(), recommended=tuple(recommended),
                      final_action=action, termination=termination, config={})


class TestAlign:
    def test_correct_accept(self):
        assert reward_align(make_trajectory(["hi"]), make_persona()) == 1

    def test_wrong_accept(self):
        persona = make_persona(acceptable=("Night Raid Tactics",))
        assert reward_align(make_trajectory(["hi"]), persona) == 0


class TestReason:
    def test_scripted_judge(self):
        judge = ScriptedChatBackend(["Reasoning fine.\nSCORE: 0.75"])
        value = reward_reason(make_trajectory(["hi"]), make_persona(), judge)
        assert value == 0.75

    def test_rendering_contains_dealbreakers_verbatim(self):
        persona = make_persona()
        rendering = render_for_judge(make_trajectory(["hi"]), persona)
        assert persona.dealbreakers in rendering

    def test_judge_failure_renormalizes(self):
        judge = ScriptedChatBackend(["no numeric verdict here"])
        vector = score_trajectory(make_trajectory(["hi"]), make_persona(),
                                  RewardWeights(), judge_backend=judge)
        assert vector.components["reason"] is None
        assert "reason" not in vector.weights_used
        assert sum(vector.weights_used.values()) == pytest.approx(1.0)


class TestClassifier:
    def test_holdout_accuracy(self):
        clf = train_ngram_classifier(HUMAN_CORPUS, MODEL_CORPUS, seed=0)
        assert clf.metadata["holdout_accuracy"] >= 0.95

    def test_marker_scores(self):
        clf = train_ngram_classifier(HUMAN_CORPUS, MODEL_CORPUS, seed=0)
        assert reward_ngram(clf, "yeah gonna") > 0.9
        assert reward_ngram(clf, "certainly furthermore") < 0.1

    def test_empty_text_bias_only(self):
        clf = train_ngram_classifier(HUMAN_CORPUS, MODEL_CORPUS, seed=0)
        assert clf.score("") == pytest.approx(0.5, abs=1e-6)
        zero_bias = NgramClassifier(vocabulary={"x": 0},
                                    weights=np.array([1.0]), bias=0.0)
        assert zero_bias.score("") == 0.5

    def test_label_swap_symmetry(self):
        a = train_ngram_classifier(HUMAN_CORPUS, MODEL_CORPUS, seed=0)
        b = train_ngram_classifier(MODEL_CORPUS, HUMAN_CORPUS, seed=0)
        for text in ("yeah gonna", "certainly furthermore", "item 3"):
            assert b.score(text) == pytest.approx(1.0 - a.score(text), abs=1e-6)

    def test_deterministic_for_seed(self):
        a = train_ngram_classifier(HUMAN_CORPUS, MODEL_CORPUS, seed=7)
        b = train_ngram_classifier(HUMAN_CORPUS, MODEL_CORPUS, seed=7)
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias

    def test_insufficient_corpus(self):
        with pytest.raises(TrainingError):
            train_ngram_classifier(["one"], MODEL_CORPUS)

    def test_degenerate_corpora(self):
        with pytest.raises(TrainingError):
            train_ngram_classifier(HUMAN_CORPUS, list(HUMAN_CORPUS))

    def test_save_load_round_trip(self, tmp_path):
        clf = train_ngram_classifier(HUMAN_CORPUS, MODEL_CORPUS, seed=0)
        path = tmp_path / "clf.json"
        clf.save(path)
        loaded = NgramClassifier.load(path)
        assert loaded.score("yeah gonna item 5") == clf.score("yeah gonna item 5")
        json.loads(path.read_text())  # persisted form is plain JSON

    def test_gradient_check(self):
        # 10-feature toy problem, analytic vs central finite differences.
        rng = np.random.default_rng(42)
        features = rng.normal(size=(12, 10))
        labels = (rng.random(12) > 0.5).astype(float)
        theta = rng.normal(scale=0.5, size=11)
        value, grad = logistic_objective(theta, features, labels, l2=1e-3)
        eps = 1e-6
        for j in range(len(theta)):
            bump = np.zeros_like(theta)
            bump[j] = eps
            plus, _ = logistic_objective(theta + bump, features, labels, 1e-3)
            minus, _ = logistic_objective(theta - bump, features, labels, 1e-3)
            numeric = (plus - minus) / (2 * eps)
            denom = max(abs(numeric), abs(grad[j]), 1e-12)
            assert abs(numeric - grad[j]) / denom < 1e-5


class TestAuxiliaries:
    CANONICAL_EXIT = ('<tool_call>{"function": "end_conversation", '
                      '"arguments": {}}</tool_call>')

    def test_clean_four_turn(self):
        texts = ["short turn one", "short turn two", "short turn three",
                 "okay, goodbye. " + self.CANONICAL_EXIT]
        assert reward_auxiliaries(make_trajectory(texts)) == (1.0, 1.0, 1.0)

    def test_one_flagged_of_four(self):
        texts = ["plain", "plain", "<tool_call>end_conversation</tool_call>",
                 "plain"]
        r_format, _, _ = reward_auxiliaries(make_trajectory(texts))
        assert r_format == 0.75

    def test_single_turn_r_turns(self):
        _, _, r_turns = reward_auxiliaries(make_trajectory(["bye"]))
        assert r_turns == 0.25

    def test_long_turns_penalized(self):
        long_text = " ".join(["word"] * 180)  # mean 180 > 120
        r_format, r_resp_len, _ = reward_auxiliaries(make_trajectory([long_text]))
        assert r_resp_len == pytest.approx(1.0 - 60 / 120)

    def test_resp_len_floor_zero(self):
        long_text = " ".join(["word"] * 1000)
        _, r_resp_len, _ = reward_auxiliaries(make_trajectory([long_text]))
        assert r_resp_len == 0.0


class TestAggregate:
    def test_all_ones(self):
        vector = aggregate_reward(dict.fromkeys(COMPONENTS, 1.0),
                                  RewardWeights(w_align=3, w_turns=0.5))
        assert vector.aggregate == pytest.approx(1.0)

    def test_equal_weights_alternating(self):
        components = dict(zip(COMPONENTS, (1.0, 0.0, 1.0, 0.0, 1.0, 0.0)))
        assert aggregate_reward(components, RewardWeights()).aggregate == \
            pytest.approx(0.5)

    def test_weight_scale_invariance(self):
        components = dict(zip(COMPONENTS, (0.2, 0.9, 0.4, 1.0, 0.1, 0.6)))
        base = RewardWeights(w_align=1, w_reason=2, w_ngram=3, w_format=4,
                             w_resp_len=5, w_turns=6)
        scaled = RewardWeights(w_align=7, w_reason=14, w_ngram=21, w_format=28,
                               w_resp_len=35, w_turns=42)
        assert aggregate_reward(components, base).aggregate == pytest.approx(
            aggregate_reward(components, scaled).aggregate, abs=1e-12)

    def test_renormalization_over_available(self):
        components = {"align": 1.0, "format": 0.0, "reason": None,
                      "ngram": None, "resp_len": None, "turns": None}
        vector = aggregate_reward(components, RewardWeights())
        assert vector.aggregate == pytest.approx(0.5)
        assert set(vector.weights_used) == {"align", "format"}

    def test_all_unavailable_rejected(self):
        with pytest.raises(ValueError):
            aggregate_reward(dict.fromkeys(COMPONENTS), RewardWeights())

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            aggregate_reward({**dict.fromkeys(COMPONENTS, 0.5), "align": 1.5},
                             RewardWeights())

    @given(st.lists(st.floats(min_value=0, max_value=1), min_size=6,
                    max_size=6),
           st.lists(st.floats(min_value=0.01, max_value=10), min_size=6,
                    max_size=6))
    @settings(max_examples=200)
    def test_bounded_and_monotone(self, values, weight_values):
        weights = RewardWeights(*weight_values)
        components = dict(zip(COMPONENTS, values))
        vector = aggregate_reward(components, weights)
        assert 0.0 <= vector.aggregate <= 1.0 + 1e-12
        bumped = dict(components)
        bumped["ngram"] = min(1.0, bumped["ngram"] + 0.1)
        assert aggregate_reward(bumped, weights).aggregate >= \
            vector.aggregate - 1e-12


class TestBroadcast:
    def test_placement(self):
        result = broadcast(0.6, ["shopper", "other", "shopper"])
        assert result.rewards == (0.6, 0.0, 0.6)

    def test_all_other(self):
        assert broadcast(0.9, ["other"] * 4).rewards == (0.0,) * 4

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            broadcast(0.5, [])

    @given(st.floats(min_value=0, max_value=1),
           st.lists(st.sampled_from(["shopper", "other"]), min_size=1,
                    max_size=50))
    def test_conservation_exact(self, aggregate, mask):
        result = broadcast(aggregate, mask)
        n_shopper = sum(1 for role in mask if role == "shopper")
        # Exact: the sum adds identical copies of one float.
        assert sum(result.rewards) == pytest.approx(aggregate * n_shopper,
                                                    abs=1e-12)
        assert len(result.rewards) == len(mask)


class TestScoreTrajectory:
    def test_full_vector(self):
        clf = train_ngram_classifier(HUMAN_CORPUS, MODEL_CORPUS, seed=0)
        judge = ScriptedChatBackend(["SCORE: 0.8"])
        vector = score_trajectory(make_trajectory(["yeah gonna take it"]),
                                  make_persona(), RewardWeights(),
                                  classifier=clf, judge_backend=judge)
        assert set(vector.weights_used) == set(COMPONENTS)
        assert vector.components["align"] == 1.0
        assert vector.components["reason"] == 0.8
        assert 0.0 <= vector.aggregate <= 1.0

    def test_errored_trajectory_align_unavailable(self):
        trajectory = make_trajectory(["hi"], action=None, termination="error")
        vector = score_trajectory(trajectory, make_persona(), RewardWeights())
        assert vector.components["align"] is None
