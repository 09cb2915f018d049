"""Dual-agent simulation loop.

Runs one shopper persona against the fixed salesperson backend: prompt
assembly, strict turn alternation, tool dispatch against category-restricted
indices, recommendation tracking, and termination. Emits an immutable
Trajectory record; one JSON document per conversation in batch files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

from .catalog import Catalog, Persona, normalize_name
from .errors import TransportError
from .llm_client import (BackendToolCall, ChatBackend, ChatExchange,
                         ChatMessage)
from .prompts import assemble_salesbot_prompt, assemble_shopper_prompt
from .protocol import ToolCall, Turn, TurnParse, parse_turn
from .retrieval import (DocumentIndex, Embedder, build_guide_index,
                        build_product_index, query_top_k)

__all__ = [
    "SimulationConfig",
    "ToolEvent",
    "Trajectory",
    "GREETING",
    "TOOL_SCHEMAS",
    "run_simulation",
    "detect_early_exit",
    "trajectory_to_dict",
    "trajectory_from_dict",
    "write_trajectories",
    "read_trajectories",
]

GREETING = ("Hello! I'm here to help you find the perfect product. "
            "What are you looking for today?")

TOOL_SCHEMAS: tuple[dict, ...] = (
    {
        "type": "function",
        "function": {
            "name": "lookup_product_items",
            "description": "Retrieve candidate products from the current "
                           "category's inventory for a natural language query.",
            "parameters": {
                "type": "object",
                "properties": {"query": {"type": "string"}},
                "required": ["query"],
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "lookup_buying_guide",
            "description": "Retrieve buying-guide entries for the current "
                           "category for a natural language query.",
            "parameters": {
                "type": "object",
                "properties": {"query": {"type": "string"}},
                "required": ["query"],
            },
        },
    },
)


@dataclass
class SimulationConfig:
    shopper_backend: ChatBackend | None = None
    salesbot_backend: ChatBackend | None = None
    embedder: Embedder | None = None
    max_turns: int = 20
    top_k: int = 4
    seed: int = 0
    prompt_variant: str = "base"
    tool_rounds: int = 3  # salesbot tool iterations within one exchange

    def __post_init__(self) -> None:
        if self.max_turns < 2:
            raise ValueError("max_turns must be >= 2")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    def snapshot(self) -> dict[str, Any]:
        return {
            "max_turns": self.max_turns,
            "top_k": self.top_k,
            "seed": self.seed,
            "prompt_variant": self.prompt_variant,
            "tool_rounds": self.tool_rounds,
            "shopper_backend": type(self.shopper_backend).__name__,
            "salesbot_backend": type(self.salesbot_backend).__name__,
            "embedder": type(self.embedder).__name__,
        }


@dataclass(frozen=True)
class ToolEvent:
    turn_index: int
    function: str
    arguments: dict[str, str]
    result_doc_ids: tuple[str, ...]


@dataclass(frozen=True)
class Trajectory:
    persona_id: str
    category: str
    turns: tuple[Turn, ...]
    tool_events: tuple[ToolEvent, ...]
    recommended: tuple[str, ...]  # ordered set of product names, R(C)
    final_action: str | None  # purchased product mention, or None
    termination: str  # purchase | exit | max_turns | error
    config: dict[str, Any]

    def shopper_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.role == "shopper"]

    def shopper_parses(self) -> list[TurnParse]:
        return [parse_turn(t.text, "shopper") for t in self.shopper_turns()]

    def shopper_text(self) -> str:
        return "\n".join(t.text for t in self.shopper_turns())


def _shopper_view(system: str, turns: list[Turn]) -> ChatExchange:
    messages = [ChatMessage(role="system", text=system)]
    pending_attachments: list[str] = []
    for turn in turns:
        if turn.role == "tool":
            # Images surfaced by tools join the shared context on the next
            # salesperson message.
            pending_attachments.extend(turn.attachments)
        elif turn.role == "salesbot":
            if not turn.text:
                continue
            messages.append(ChatMessage(
                role="user", text=turn.text,
                attachments=tuple(pending_attachments)))
            pending_attachments = []
        else:
            messages.append(ChatMessage(role="assistant", text=turn.text))
    return ChatExchange(messages=tuple(messages))


def _salesbot_view(system: str, turns: list[Turn]) -> ChatExchange:
    messages = [ChatMessage(role="system", text=system)]
    for turn in turns:
        if turn.role == "tool":
            messages.append(ChatMessage(role="tool", text=turn.text,
                                        attachments=turn.attachments))
        elif turn.role == "shopper":
            messages.append(ChatMessage(role="user", text=turn.text))
        else:
            if turn.text or turn.tool_calls:
                messages.append(ChatMessage(role="assistant", text=turn.text))
    return ChatExchange(messages=tuple(messages), tools_offered=TOOL_SCHEMAS)


def _mention_keys(name: str) -> list[str]:
    """Normalized containment keys for detecting a product mention."""
    keys = [normalize_name(name)]
    # Transcripts truncate long names at qualifier clauses ("... in 18K
    # Yellow Gold"); accept the pre-qualifier prefix when it is distinctive.
    head = name.split(" in ")[0]
    norm_head = normalize_name(head)
    if norm_head != keys[0] and len(norm_head.split()) >= 3:
        keys.append(norm_head)
    return keys


def _scan_mentions(text: str, retrieved: dict[str, Any],
                   recommended: list[str]) -> None:
    norm_text = " " + normalize_name(text) + " "
    found: list[tuple[int, str]] = []
    for name in retrieved:
        if name in recommended:
            continue
        for key in _mention_keys(name):
            pos = norm_text.find(" " + key + " ")
            if pos != -1:
                found.append((pos, name))
                break
    found.sort()
    recommended.extend(name for _, name in found)


class _ToolDispatcher:
    def __init__(self, catalog: Catalog, category: str, embedder: Embedder,
                 top_k: int) -> None:
        self.catalog = catalog
        self.category = category
        self.top_k = top_k
        self.embedder = embedder
        self.product_index: DocumentIndex = build_product_index(catalog, category, embedder)
        self.guide_index: DocumentIndex = build_guide_index(catalog, category, embedder)
        self.retrieved: dict[str, Any] = {}  # product name -> Product, insertion order

    def dispatch(self, call: BackendToolCall, turn_index: int) -> tuple[Turn, ToolEvent]:
        query = str(call.arguments.get("query", "")).strip()
        if call.function == "lookup_product_items" and query:
            result = query_top_k(self.product_index, query, k=self.top_k,
                                 embedder=self.embedder)
            docs = []
            attachments: list[str] = []
            for name, score in result.ranked:
                product = next(p for p in self.catalog.products(self.category)
                               if p.name == name)
                self.retrieved.setdefault(name, product)
                doc = product.to_doc()
                doc["doc_id"] = name
                docs.append(doc)
                if product.image_ref:
                    attachments.append(product.image_ref)
            payload = json.dumps({"tool": call.function, "results": docs})
            event = ToolEvent(turn_index, call.function, dict(call.arguments),
                              tuple(result.doc_ids()))
            return (Turn(role="tool", text=payload,
                         attachments=tuple(attachments), index=turn_index), event)
        if call.function == "lookup_buying_guide" and query:
            result = query_top_k(self.guide_index, query, k=self.top_k,
                                 embedder=self.embedder)
            docs = [{"doc_id": doc_id,
                     "text": self.guide_index.texts[self.guide_index.doc_ids.index(doc_id)]}
                    for doc_id, _ in result.ranked]
            payload = json.dumps({"tool": call.function, "results": docs})
            event = ToolEvent(turn_index, call.function, dict(call.arguments),
                              tuple(result.doc_ids()))
            return (Turn(role="tool", text=payload, index=turn_index), event)
        payload = json.dumps({"tool": call.function,
                              "error": "unknown tool or missing query"})
        event = ToolEvent(turn_index, call.function, dict(call.arguments), ())
        return (Turn(role="tool", text=payload, index=turn_index), event)


def run_simulation(persona: Persona, catalog: Catalog,
                   config: SimulationConfig) -> Trajectory:
    """Run one shopper/salesperson conversation to termination.

    Deterministic for fixed (persona, catalog, config) with scripted
    backends. A backend transport failure after retries yields
    termination="error" with the partial trajectory preserved.
    """
    if config.shopper_backend is None or config.salesbot_backend is None:
        raise ValueError("both backends must be configured")
    if config.embedder is None:
        raise ValueError("an embedder must be configured")
    shopper_system = assemble_shopper_prompt(persona, persona.category,
                                             config.prompt_variant)
    salesbot_system = assemble_salesbot_prompt(persona.category)
    dispatcher = _ToolDispatcher(catalog, persona.category, config.embedder,
                                 config.top_k)

    turns: list[Turn] = [Turn(role="salesbot", text=GREETING, index=0)]
    tool_events: list[ToolEvent] = []
    recommended: list[str] = []
    final_action: str | None = None
    termination = "max_turns"

    try:
        for exchange in range(1, config.max_turns + 1):
            shopper_resp = config.shopper_backend.complete(
                _shopper_view(shopper_system, turns))
            shopper_turn = Turn(role="shopper", text=shopper_resp.text,
                                index=exchange)
            turns.append(shopper_turn)
            outcome = parse_turn(shopper_resp.text, "shopper").outcome
            if outcome.terminal:
                if outcome.kind == "terminal_purchase":
                    final_action = outcome.detail.arguments.get("product")
                    termination = "purchase"
                else:
                    termination = "exit"
                break

            for _ in range(config.tool_rounds):
                sales_resp = config.salesbot_backend.complete(
                    _salesbot_view(salesbot_system, turns))
                if sales_resp.tool_calls:
                    calls = tuple(
                        ToolCall(function=tc.function,
                                 arguments={k: str(v) for k, v in tc.arguments.items()},
                                 raw_span="", well_formed=True)
                        for tc in sales_resp.tool_calls)
                    turns.append(Turn(role="salesbot", text=sales_resp.text,
                                      tool_calls=calls, index=exchange))
                    for tc in sales_resp.tool_calls:
                        tool_turn, event = dispatcher.dispatch(tc, exchange)
                        turns.append(tool_turn)
                        tool_events.append(event)
                    continue
                turns.append(Turn(role="salesbot", text=sales_resp.text,
                                  index=exchange))
                _scan_mentions(sales_resp.text, dispatcher.retrieved, recommended)
                break
    except TransportError:
        termination = "error"

    return Trajectory(
        persona_id=persona.name,
        category=persona.category,
        turns=tuple(turns),
        tool_events=tuple(tool_events),
        recommended=tuple(recommended),
        final_action=final_action,
        termination=termination,
        config=config.snapshot(),
    )


def detect_early_exit(trajectory: Trajectory) -> bool:
    """True iff the shopper's very first turn was a terminal action."""
    shopper_turns = trajectory.shopper_turns()
    if not shopper_turns:
        return False
    return parse_turn(shopper_turns[0].text, "shopper").outcome.terminal


# --- trajectory JSONL (de)serialization -----------------------------------

def _turn_to_dict(turn: Turn) -> dict[str, Any]:
    return {
        "role": turn.role,
        "text": turn.text,
        "tool_calls": [
            {"function": c.function, "arguments": dict(c.arguments),
             "raw_span": c.raw_span, "well_formed": c.well_formed}
            for c in turn.tool_calls
        ],
        "attachments": list(turn.attachments),
        "index": turn.index,
    }


def _turn_from_dict(doc: dict[str, Any]) -> Turn:
    return Turn(
        role=doc["role"],
        text=doc["text"],
        tool_calls=tuple(
            ToolCall(function=c["function"], arguments=c["arguments"],
                     raw_span=c.get("raw_span", ""),
                     well_formed=c.get("well_formed", True))
            for c in doc.get("tool_calls", ())),
        attachments=tuple(doc.get("attachments", ())),
        index=doc.get("index", 0),
    )


def trajectory_to_dict(trajectory: Trajectory) -> dict[str, Any]:
    return {
        "persona_id": trajectory.persona_id,
        "category": trajectory.category,
        "turns": [_turn_to_dict(t) for t in trajectory.turns],
        "tool_events": [
            {"turn_index": e.turn_index, "function": e.function,
             "arguments": e.arguments, "result_doc_ids": list(e.result_doc_ids)}
            for e in trajectory.tool_events
        ],
        "recommended": list(trajectory.recommended),
        "final_action": trajectory.final_action,
        "termination": trajectory.termination,
        "config": trajectory.config,
    }


def trajectory_from_dict(doc: dict[str, Any]) -> Trajectory:
    return Trajectory(
        persona_id=doc["persona_id"],
        category=doc["category"],
        turns=tuple(_turn_from_dict(t) for t in doc["turns"]),
        tool_events=tuple(
            ToolEvent(e["turn_index"], e["function"], e["arguments"],
                      tuple(e["result_doc_ids"]))
            for e in doc.get("tool_events", ())),
        recommended=tuple(doc.get("recommended", ())),
        final_action=doc.get("final_action"),
        termination=doc["termination"],
        config=doc.get("config", {}),
    )


def write_trajectories(trajectories: Iterable[Trajectory], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trajectory in trajectories:
            fh.write(json.dumps(trajectory_to_dict(trajectory), sort_keys=True))
            fh.write("\n")


def read_trajectories(path: str) -> Iterator[Trajectory]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield trajectory_from_dict(json.loads(line))
