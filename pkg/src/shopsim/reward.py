"""Trajectory-level reward engine.

Three main components (decision alignment, judge-scored reasoning quality,
n-gram human-likeness) plus three auxiliaries (action format, response
length, interaction length). Components are normalized to [0, 1], combined
as a weighted average, and broadcast uniformly onto shopper tokens. The
caller supplies the token role mask because tokenization is model-specific.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .catalog import Persona, tokenize
from .errors import JudgeParseError, TrainingError, TransportError
from .llm_client import ChatBackend, DEFAULT_JUDGE_RUBRIC, judge_score
from .metrics import decision_alignment
from .orchestrator import Trajectory

__all__ = [
    "COMPONENTS",
    "RewardWeights",
    "RewardVector",
    "TokenRewardBroadcast",
    "NgramClassifier",
    "reward_align",
    "reward_reason",
    "render_for_judge",
    "train_ngram_classifier",
    "reward_ngram",
    "reward_auxiliaries",
    "aggregate_reward",
    "broadcast",
    "score_trajectory",
    "logistic_objective",
    "MAX_RESPONSE_WORDS",
    "TARGET_SHOPPER_TURNS",
]

COMPONENTS = ("align", "reason", "ngram", "format", "resp_len", "turns")

# Auxiliary-reward thresholds; configuration, recorded in every breakdown.
MAX_RESPONSE_WORDS = 120
TARGET_SHOPPER_TURNS = 4


@dataclass(frozen=True)
class RewardWeights:
    w_align: float = 1.0
    w_reason: float = 1.0
    w_ngram: float = 1.0
    w_format: float = 1.0
    w_resp_len: float = 1.0
    w_turns: float = 1.0

    def __post_init__(self) -> None:
        values = self.as_mapping()
        if any(v < 0 for v in values.values()):
            raise ValueError("weights must be non-negative")
        if not any(v > 0 for v in values.values()):
            raise ValueError("at least one weight must be positive")

    def as_mapping(self) -> dict[str, float]:
        return {
            "align": self.w_align,
            "reason": self.w_reason,
            "ngram": self.w_ngram,
            "format": self.w_format,
            "resp_len": self.w_resp_len,
            "turns": self.w_turns,
        }

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "RewardWeights":
        defaults = cls().as_mapping()
        unknown = set(mapping) - set(defaults)
        if unknown:
            raise ValueError(f"unknown reward components: {sorted(unknown)}")
        merged = {**defaults, **mapping}
        return cls(w_align=merged["align"], w_reason=merged["reason"],
                   w_ngram=merged["ngram"], w_format=merged["format"],
                   w_resp_len=merged["resp_len"], w_turns=merged["turns"])


@dataclass(frozen=True)
class RewardVector:
    components: Mapping[str, float | None]  # None marks an unavailable component
    weights_used: Mapping[str, float]  # normalized over available components
    aggregate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "components": dict(self.components),
            "weights_used": dict(self.weights_used),
            "aggregate": self.aggregate,
        }


@dataclass(frozen=True)
class TokenRewardBroadcast:
    token_role_mask: tuple[str, ...]
    rewards: tuple[float, ...]


def reward_align(trajectory: Trajectory, persona: Persona) -> int:
    """Binary decision-consistency reward; exactly the DA bit."""
    return decision_alignment(trajectory, persona).da


def render_for_judge(trajectory: Trajectory, persona: Persona) -> str:
    lines = [
        f"Persona: {persona.name}, age {persona.age}, shopping for {persona.category}.",
        f"Background: {persona.background}",
        f"Preferences: {persona.preferences}",
        f"Dealbreakers: {persona.dealbreakers}",
        "",
        "Shopper turns:",
    ]
    for i, turn in enumerate(trajectory.shopper_turns(), 1):
        lines.append(f"[{i}] {turn.text}")
    final = trajectory.final_action if trajectory.final_action else "no purchase"
    lines.append("")
    lines.append(f"Final action: {final} (termination: {trajectory.termination})")
    return "\n".join(lines)


def reward_reason(trajectory: Trajectory, persona: Persona,
                  judge_backend: ChatBackend,
                  rubric: str = DEFAULT_JUDGE_RUBRIC) -> float:
    """LLM-judge coherence score for the shopper's reasoning, clamped to [0, 1]."""
    return judge_score(judge_backend, rubric, render_for_judge(trajectory, persona))


# --- n-gram human-likeness classifier --------------------------------------

def _ngrams(text: str, n_max: int = 3) -> list[str]:
    tokens = tokenize(text)
    grams: list[str] = []
    for n in range(1, n_max + 1):
        grams.extend(" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return grams


def _sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500))),
                    np.exp(np.clip(z, -500, 500)) / (1.0 + np.exp(np.clip(z, -500, 500))))


def logistic_objective(theta: np.ndarray, features: np.ndarray,
                       labels: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """L2-regularized mean log-likelihood and its analytic gradient.

    theta stacks the feature weights with the bias as the last entry.
    """
    w, b = theta[:-1], theta[-1]
    z = features @ w + b
    # log p(y|x) = y*z - log(1+e^z), computed stably
    log_lik = float(np.mean(labels * z - np.logaddexp(0.0, z)))
    value = log_lik - 0.5 * l2 * float(theta @ theta)
    p = np.asarray(_sigmoid(z))
    residual = labels - p
    grad_w = features.T @ residual / len(labels) - l2 * w
    grad_b = float(np.mean(residual)) - l2 * b
    return value, np.concatenate([grad_w, [grad_b]])


@dataclass(frozen=True)
class NgramClassifier:
    vocabulary: Mapping[str, int]  # n-gram -> feature index
    weights: np.ndarray  # one weight per feature
    bias: float
    n_max: int = 3
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def features(self, text: str) -> np.ndarray:
        vec = np.zeros(len(self.vocabulary), dtype=np.float64)
        for gram in _ngrams(text, self.n_max):
            idx = self.vocabulary.get(gram)
            if idx is not None:
                vec[idx] += 1.0
        return vec

    def score(self, text: str) -> float:
        """Human-probability of the text; 0.5 when no features fire and the
        bias is zero."""
        return float(_sigmoid(float(self.features(text) @ self.weights + self.bias)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "vocabulary": dict(self.vocabulary),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "n_max": self.n_max,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "NgramClassifier":
        return cls(vocabulary=dict(doc["vocabulary"]),
                   weights=np.asarray(doc["weights"], dtype=np.float64),
                   bias=float(doc["bias"]), n_max=int(doc.get("n_max", 3)),
                   metadata=dict(doc.get("metadata", {})))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NgramClassifier":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_ngram_classifier(human_corpus: Sequence[str],
                           model_corpus: Sequence[str],
                           seed: int = 0, l2: float = 1e-3,
                           tol: float = 1e-8, max_iter: int = 10_000,
                           n_max: int = 3) -> NgramClassifier:
    """Fit the human-vs-model log-linear classifier on 1-3 gram counts.

    Full-batch gradient ascent on the L2-regularized log-likelihood until the
    gradient norm drops below tol or max_iter passes. A 20% per-class
    held-out split records generalization accuracy in the metadata.
    """
    if len(human_corpus) < 2 or len(model_corpus) < 2:
        raise TrainingError("need at least two documents per class for a held-out split")
    if sorted(human_corpus) == sorted(model_corpus):
        raise TrainingError("degenerate corpora: the two classes are identical")

    rng = np.random.default_rng(seed)
    splits: dict[str, tuple[list[str], list[str]]] = {}
    for label, corpus in (("human", list(human_corpus)), ("model", list(model_corpus))):
        order = rng.permutation(len(corpus))
        n_holdout = max(1, math.ceil(0.2 * len(corpus)))
        holdout = [corpus[i] for i in order[:n_holdout]]
        train = [corpus[i] for i in order[n_holdout:]]
        splits[label] = (train, holdout)

    train_docs = splits["human"][0] + splits["model"][0]
    train_labels = np.array([1.0] * len(splits["human"][0])
                            + [0.0] * len(splits["model"][0]))
    vocabulary = {gram: i for i, gram in enumerate(sorted(
        {g for doc in train_docs for g in _ngrams(doc, n_max)}))}

    def featurize(docs: Sequence[str]) -> np.ndarray:
        matrix = np.zeros((len(docs), len(vocabulary)), dtype=np.float64)
        for row, doc in enumerate(docs):
            for gram in _ngrams(doc, n_max):
                idx = vocabulary.get(gram)
                if idx is not None:
                    matrix[row, idx] += 1.0
        return matrix

    features = featurize(train_docs)
    theta = np.zeros(len(vocabulary) + 1)
    # Safe step size for the smooth part: 0.25 * ||X||_F^2 / n bounds the
    # logistic curvature; the L2 term adds l2.
    lipschitz = 0.25 * float(np.sum(features ** 2)) / max(1, len(train_docs)) + l2 + 0.25
    step = 1.0 / lipschitz
    iterations = 0
    for iterations in range(1, max_iter + 1):
        _, grad = logistic_objective(theta, features, train_labels, l2)
        theta = theta + step * grad
        if float(np.linalg.norm(grad)) < tol:
            break

    holdout_docs = splits["human"][1] + splits["model"][1]
    holdout_labels = np.array([1.0] * len(splits["human"][1])
                              + [0.0] * len(splits["model"][1]))
    holdout_features = featurize(holdout_docs)
    predictions = np.asarray(
        _sigmoid(holdout_features @ theta[:-1] + theta[-1])) >= 0.5
    accuracy = float(np.mean(predictions == (holdout_labels == 1.0)))

    return NgramClassifier(
        vocabulary=vocabulary,
        weights=theta[:-1],
        bias=float(theta[-1]),
        n_max=n_max,
        metadata={
            "n_human": len(human_corpus),
            "n_model": len(model_corpus),
            "holdout_accuracy": accuracy,
            "seed": seed,
            "l2": l2,
            "iterations": iterations,
        },
    )


def reward_ngram(classifier: NgramClassifier, shopper_text: str) -> float:
    """Human-likeness of the concatenated shopper utterances (1 = human-like)."""
    return classifier.score(shopper_text)


def reward_auxiliaries(trajectory: Trajectory) -> tuple[float, float, float]:
    """Format, response-length, and interaction-length rewards, each in [0, 1]."""
    parses = trajectory.shopper_parses()
    n_turns = len(parses)
    if n_turns == 0:
        return 1.0, 1.0, 0.0
    flagged = sum(1 for p in parses if p.flagged)
    r_format = 1.0 - flagged / n_turns
    mean_words = sum(len(tokenize(t.text)) for t in trajectory.shopper_turns()) / n_turns
    if mean_words <= MAX_RESPONSE_WORDS:
        r_resp_len = 1.0
    else:
        r_resp_len = max(0.0, 1.0 - (mean_words - MAX_RESPONSE_WORDS) / MAX_RESPONSE_WORDS)
    r_turns = min(n_turns, TARGET_SHOPPER_TURNS) / TARGET_SHOPPER_TURNS
    return r_format, r_resp_len, r_turns


def aggregate_reward(components: Mapping[str, float | None],
                     weights: RewardWeights) -> RewardVector:
    """Weighted average over the available components.

    Weights renormalize over available components, so a judge outage does not
    silently punish the trajectory. All components unavailable is an error.
    """
    raw_weights = weights.as_mapping()
    unknown = set(components) - set(COMPONENTS)
    if unknown:
        raise ValueError(f"unknown components: {sorted(unknown)}")
    filled: dict[str, float | None] = {c: components.get(c) for c in COMPONENTS}
    available = {c: v for c, v in filled.items() if v is not None}
    if not available:
        raise ValueError("every reward component is unavailable")
    for c, v in available.items():
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"component {c} out of [0, 1]: {v}")
    total = sum(raw_weights[c] for c in available)
    if total <= 0:
        raise ValueError("all available components carry zero weight")
    weights_used = {c: raw_weights[c] / total for c in available}
    aggregate = sum(weights_used[c] * available[c] for c in available)
    return RewardVector(components=filled, weights_used=weights_used,
                        aggregate=aggregate)


def broadcast(aggregate: float, token_role_mask: Sequence[str]) -> TokenRewardBroadcast:
    """Assign the trajectory reward to every shopper token, zero elsewhere."""
    if not token_role_mask:
        raise ValueError("token role mask must be non-empty")
    mask = tuple(token_role_mask)
    rewards = tuple(aggregate if role == "shopper" else 0.0 for role in mask)
    return TokenRewardBroadcast(token_role_mask=mask, rewards=rewards)


def score_trajectory(trajectory: Trajectory, persona: Persona | None,
                     weights: RewardWeights,
                     classifier: NgramClassifier | None = None,
                     judge_backend: ChatBackend | None = None,
                     rubric: str = DEFAULT_JUDGE_RUBRIC) -> RewardVector:
    """Compute the full reward vector for one trajectory.

    Components whose inputs are missing or whose backends fail are marked
    unavailable and the remaining weights renormalize.
    """
    components: dict[str, float | None] = dict.fromkeys(COMPONENTS)
    if persona is not None and trajectory.termination != "error":
        components["align"] = float(reward_align(trajectory, persona))
    if persona is not None and judge_backend is not None:
        try:
            components["reason"] = reward_reason(trajectory, persona,
                                                 judge_backend, rubric)
        except (JudgeParseError, TransportError):
            components["reason"] = None
    if classifier is not None:
        components["ngram"] = reward_ngram(classifier, trajectory.shopper_text())
    r_format, r_resp_len, r_turns = reward_auxiliaries(trajectory)
    components["format"] = r_format
    components["resp_len"] = r_resp_len
    components["turns"] = r_turns
    return aggregate_reward(components, weights)
