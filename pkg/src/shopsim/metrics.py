"""Evaluation metrics over recorded trajectories.

Decision alignment, conversational-fidelity measures, function-calling
quality rates, human-baseline deltas, and per-category aggregation. All
computations are pure functions over immutable trajectories.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .catalog import Persona, match_in_names, tokenize
from .orchestrator import Trajectory, detect_early_exit
from .protocol import conversation_format_flag

__all__ = [
    "DecisionRecord",
    "HumanBaseline",
    "ConversationRecord",
    "CategoryMetrics",
    "RedundancyResult",
    "MetricReport",
    "decision_alignment",
    "first_turn_criteria_count",
    "sentence_completeness",
    "tfidf_redundancy",
    "aggregate_report",
    "evaluate_run",
]


@dataclass(frozen=True)
class DecisionRecord:
    trajectory_id: str
    category: str
    da: int  # 0 or 1
    case: str  # correct_accept | correct_reject | wrong_accept | missed_accept | unrecommended_accept

    def __post_init__(self) -> None:
        aligned = self.case in ("correct_accept", "correct_reject")
        if (self.da == 1) != aligned:
            raise ValueError("da=1 iff the case is a correct accept/reject")


@dataclass(frozen=True)
class HumanBaseline:
    mu_cpl: float
    mu_red: float
    source: str = ""

    def __post_init__(self) -> None:
        for value in (self.mu_cpl, self.mu_red):
            if not 0.0 <= value <= 1.0:
                raise ValueError("baseline means must lie in [0, 1]")


def decision_alignment(trajectory: Trajectory, persona: Persona,
                       trajectory_id: str | None = None) -> DecisionRecord:
    """Classify the conversation's final decision against the persona.

    Aligned when the shopper buys a recommended, acceptable product, or
    abstains while nothing acceptable was recommended. Name membership is
    evaluated with the catalog's two-tier mention matcher, so truncated
    mentions still resolve.
    """
    if trajectory.termination == "error":
        raise ValueError("errored trajectory: excluded from decision records")
    trajectory_id = trajectory_id or trajectory.persona_id
    acceptable = persona.acceptable_products
    recommended_acceptable = any(
        match_in_names(name, acceptable) is not None
        for name in trajectory.recommended)
    action = trajectory.final_action
    if action is None:
        case = "correct_reject" if not recommended_acceptable else "missed_accept"
    else:
        in_recommended = match_in_names(action, trajectory.recommended) is not None
        in_acceptable = match_in_names(action, acceptable) is not None
        if not in_recommended:
            case = "unrecommended_accept"
        elif in_acceptable:
            case = "correct_accept"
        else:
            case = "wrong_accept"
    da = 1 if case in ("correct_accept", "correct_reject") else 0
    return DecisionRecord(trajectory_id=trajectory_id,
                          category=trajectory.category, da=da, case=case)


def first_turn_criteria_count(trajectory: Trajectory, persona: Persona) -> int:
    """Count distinct persona criteria disclosed in the first shopper utterance.

    The criterion inventory is fixed on the persona at load time; a criterion
    counts when all of its content words appear in the utterance (the budget
    criterion counts on the amount or the word "budget").
    """
    shopper_turns = trajectory.shopper_turns()
    if not shopper_turns:
        return 0
    first = shopper_turns[0].text
    tokens = set(tokenize(first)) | set(tokenize(first.replace(",", "")))
    count = 0
    for criterion in persona.criteria:
        if criterion.label == "budget":
            if any(word in tokens for word in criterion.words):
                count += 1
        elif criterion.words and criterion.words <= tokens:
            count += 1
    return count


# Finite-verb lexicon for the completeness heuristic: auxiliaries, modals,
# high-frequency verbs and their inflections, and subject contractions.
_VERB_LEXICON = frozenset("""
am is are was were be been being do does did done have has had can could will
would shall should may might must let lets
i'm i've i'll i'd you're you've you'll we're we've we'll they're they've
there's here's what's
need needs needed want wants wanted look looks looked looking search searching
find finds found prefer prefers preferred like likes liked love loves loved
think thinks thought know knows knew get gets got take takes took taking make
makes made go goes going went come comes came see sees saw seems seemed sounds
sounded works worked fits fitted suit suits suited buy buys bought shop
shopping spend spends spent stay stays stayed keep keeps kept appreciate
appreciates tell tells told give gives gave help helps helped try tries tried
hope hopes hoped check checks checked consider considers considered head
stop stops stopped exceed exceeds caught
""".split())

_SENTENCE_SPLIT = re.compile(r"[.!?]+|\n+")


def sentence_completeness(utterances: Sequence[str]) -> float:
    """Fraction of grammatically complete sentences across shopper utterances.

    A sentence is complete when it has at least three word tokens and
    contains a finite verb from the lexicon; verbless comma-list fragments
    fail by construction. Returns 0.0 when there are no sentences.
    """
    total = 0
    complete = 0
    for utterance in utterances:
        for raw in _SENTENCE_SPLIT.split(utterance):
            tokens = tokenize(raw)
            if not tokens:
                continue
            total += 1
            if len(tokens) >= 3 and any(t in _VERB_LEXICON for t in tokens):
                complete += 1
    return complete / total if total else 0.0


@dataclass(frozen=True)
class RedundancyResult:
    scores: tuple[float | None, ...]  # aligned to input order; None = excluded
    category_means: Mapping[str, float]
    overall_mean: float | None
    excluded: tuple[int, ...]  # indices in singleton categories


def tfidf_redundancy(dialogues: Sequence[tuple[str, str]]) -> RedundancyResult:
    """Mean within-category TF-IDF cosine similarity between shopper dialogues.

    TF is the raw count; IDF = ln((1+N)/(1+df)) + 1 per category corpus;
    vectors are L2-normalized. Each dialogue scores the mean similarity to
    its same-category peers, excluding itself. Singleton categories are
    excluded and flagged.
    """
    import numpy as np

    scores: list[float | None] = [None] * len(dialogues)
    excluded: list[int] = []
    category_means: dict[str, float] = {}
    by_category: dict[str, list[int]] = {}
    for i, (category, _) in enumerate(dialogues):
        by_category.setdefault(category, []).append(i)

    for category, indices in by_category.items():
        if len(indices) < 2:
            excluded.extend(indices)
            continue
        docs = [Counter(tokenize(dialogues[i][1])) for i in indices]
        vocabulary = sorted({t for doc in docs for t in doc})
        slot = {t: j for j, t in enumerate(vocabulary)}
        n = len(indices)
        df = Counter(t for doc in docs for t in doc.keys())
        idf = np.array([math.log((1 + n) / (1 + df[t])) + 1 for t in vocabulary])
        matrix = np.zeros((n, len(vocabulary)))
        for row, doc in enumerate(docs):
            for token, count in doc.items():
                matrix[row, slot[token]] = count
        matrix *= idf
        norms = np.linalg.norm(matrix, axis=1)
        norms[norms == 0] = 1.0
        matrix /= norms[:, None]
        sims = matrix @ matrix.T
        for row, i in enumerate(indices):
            peers = [sims[row, other] for other in range(n) if other != row]
            scores[i] = float(np.mean(peers))
        category_means[category] = float(
            np.mean([scores[i] for i in indices]))

    scored = [s for s in scores if s is not None]
    overall = float(sum(scored) / len(scored)) if scored else None
    return RedundancyResult(scores=tuple(scores), category_means=category_means,
                            overall_mean=overall, excluded=tuple(excluded))


@dataclass(frozen=True)
class ConversationRecord:
    trajectory_id: str
    category: str
    decision: DecisionRecord | None  # None when the trajectory errored
    early_exit: bool
    format_flag: bool
    crit: int
    cpl: float


@dataclass(frozen=True)
class CategoryMetrics:
    count: int
    da_rate: float | None
    crit_mean: float | None
    cpl_mean: float | None
    red_mean: float | None
    end_rate: float
    fmt_rate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "da_rate": self.da_rate,
            "crit_mean": self.crit_mean,
            "cpl_mean": self.cpl_mean,
            "red_mean": self.red_mean,
            "end_rate": self.end_rate,
            "fmt_rate": self.fmt_rate,
        }


@dataclass(frozen=True)
class MetricReport:
    per_category: Mapping[str, CategoryMetrics]
    overall: CategoryMetrics
    delta_cpl: float | None
    delta_red: float | None
    excluded_trajectories: tuple[str, ...]  # errored runs, flagged not scored

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_category": {c: m.to_dict() for c, m in self.per_category.items()},
            "overall": self.overall.to_dict(),
            "delta_cpl": self.delta_cpl,
            "delta_red": self.delta_red,
            "excluded_trajectories": list(self.excluded_trajectories),
        }


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


def _category_metrics(records: Sequence[ConversationRecord],
                      red_mean: float | None) -> CategoryMetrics:
    decisions = [r.decision for r in records if r.decision is not None]
    return CategoryMetrics(
        count=len(records),
        da_rate=_mean([d.da for d in decisions]),
        crit_mean=_mean([r.crit for r in records]),
        cpl_mean=_mean([r.cpl for r in records]),
        red_mean=red_mean,
        end_rate=sum(r.early_exit for r in records) / len(records),
        fmt_rate=sum(r.format_flag for r in records) / len(records),
    )


def aggregate_report(records: Sequence[ConversationRecord],
                     redundancy: RedundancyResult,
                     baseline: HumanBaseline | None = None,
                     excluded_trajectories: Sequence[str] = ()) -> MetricReport:
    """Fold per-conversation records into category and overall rates.

    Overall values are conversation-weighted means across categories;
    deltas are model mean minus the human baseline mean.
    """
    if not records:
        raise ValueError("no conversation records to aggregate")
    by_category: dict[str, list[ConversationRecord]] = {}
    for record in records:
        by_category.setdefault(record.category, []).append(record)
    per_category = {
        category: _category_metrics(cat_records,
                                    redundancy.category_means.get(category))
        for category, cat_records in by_category.items()
    }
    overall = _category_metrics(list(records), redundancy.overall_mean)
    delta_cpl = delta_red = None
    if baseline is not None:
        if overall.cpl_mean is not None:
            delta_cpl = overall.cpl_mean - baseline.mu_cpl
        if overall.red_mean is not None:
            delta_red = overall.red_mean - baseline.mu_red
    return MetricReport(per_category=per_category, overall=overall,
                        delta_cpl=delta_cpl, delta_red=delta_red,
                        excluded_trajectories=tuple(excluded_trajectories))


def evaluate_run(trajectories: Sequence[Trajectory],
                 personas: Mapping[str, Persona],
                 baseline: HumanBaseline | None = None,
                 ) -> tuple[MetricReport, list[ConversationRecord], RedundancyResult]:
    """Score a full run: one ConversationRecord per trajectory plus the report.

    Errored trajectories are excluded from decision records but flagged in
    the report.
    """
    records: list[ConversationRecord] = []
    excluded: list[str] = []
    dialogues: list[tuple[str, str]] = []
    red_indices: list[int] = []
    for i, trajectory in enumerate(trajectories):
        trajectory_id = f"{i}:{trajectory.persona_id}"
        persona = personas[trajectory.persona_id]
        decision: DecisionRecord | None = None
        if trajectory.termination == "error":
            excluded.append(trajectory_id)
        else:
            decision = decision_alignment(trajectory, persona, trajectory_id)
        records.append(ConversationRecord(
            trajectory_id=trajectory_id,
            category=trajectory.category,
            decision=decision,
            early_exit=detect_early_exit(trajectory),
            format_flag=conversation_format_flag(trajectory.shopper_parses()),
            crit=first_turn_criteria_count(trajectory, persona),
            cpl=sentence_completeness([t.text for t in trajectory.shopper_turns()]),
        ))
        dialogues.append((trajectory.category, trajectory.shopper_text()))
        red_indices.append(i)
    redundancy = tfidf_redundancy(dialogues)
    report = aggregate_report(records, redundancy, baseline,
                              excluded_trajectories=excluded)
    return report, records, redundancy
