"""Deterministic policy backends for offline runs and tests.

These implement the chat-backend interface but compute their replies from
the conversation content, so whole simulation runs are reproducible without
any network access.
"""

from __future__ import annotations

import json

from .catalog import Persona, format_money, normalize_name
from .llm_client import BackendToolCall, ChatExchange, ChatResponse
from .prompts import category_label

__all__ = [
    "opening_utterance",
    "AdherentShopperBackend",
    "AcceptFirstShopperBackend",
    "RetrievalSalesbotBackend",
]


def opening_utterance(persona: Persona) -> str:
    """First shopper message; doubles as the salesperson's retrieval query."""
    label = category_label(persona.category).lower()
    return (f"Hi! I'm shopping for {label}. {persona.preferences} "
            f"{persona.dealbreakers} My budget is {format_money(persona.budget)}.")


def _canonical_call(function: str, arguments: dict[str, str]) -> str:
    payload = json.dumps({"function": function, "arguments": arguments})
    return f"<tool_call>{payload}</tool_call>"


def _first_mention(text: str, names: tuple[str, ...] | list[str]) -> str | None:
    """Earliest whole-name mention in the text, by position."""
    norm_text = " " + normalize_name(text) + " "
    hits = [(norm_text.find(" " + normalize_name(n) + " "), n) for n in names]
    hits = [(pos, n) for pos, n in hits if pos != -1]
    return min(hits)[1] if hits else None


class AdherentShopperBackend:
    """Accepts the first recommended product in the persona's acceptable set;
    exits politely when the salesperson offers none of them."""

    def __init__(self, persona: Persona) -> None:
        self.persona = persona

    def complete(self, exchange: ChatExchange) -> ChatResponse:
        own_turns = sum(1 for m in exchange.messages if m.role == "assistant")
        if own_turns == 0:
            return ChatResponse(text=opening_utterance(self.persona))
        for message in exchange.messages[2:]:  # skip system prompt and greeting
            if message.role != "user":
                continue
            name = _first_mention(message.text, self.persona.acceptable_products)
            if name is not None:
                return ChatResponse(text=(
                    f"That sounds right for me. I'll take the {name}. "
                    + _canonical_call("add_to_cart", {"product": name})))
        return ChatResponse(text=(
            "I don't think any of these fit what I need, so I'll stop here. "
            "Thanks for your help. "
            + _canonical_call("end_conversation", {})))


class AcceptFirstShopperBackend:
    """Accepts whatever the salesperson names first, regardless of fit."""

    def __init__(self, persona: Persona, product_names: tuple[str, ...]) -> None:
        self.persona = persona
        self.product_names = product_names

    def complete(self, exchange: ChatExchange) -> ChatResponse:
        own_turns = sum(1 for m in exchange.messages if m.role == "assistant")
        if own_turns == 0:
            return ChatResponse(text=opening_utterance(self.persona))
        for message in exchange.messages[2:]:
            if message.role != "user":
                continue
            name = _first_mention(message.text, self.product_names)
            if name is not None:
                return ChatResponse(text=(
                    f"Great! I will take the {name}. "
                    + _canonical_call("add_to_cart", {"product": name})))
        return ChatResponse(text=(
            "Nothing caught my eye, so I'll head out. "
            + _canonical_call("end_conversation", {})))


class RetrievalSalesbotBackend:
    """Fixed salesperson policy: retrieve on every shopper message, then
    present every retrieved product by name and price."""

    def complete(self, exchange: ChatExchange) -> ChatResponse:
        last = exchange.messages[-1]
        if last.role == "tool":
            doc = json.loads(last.text)
            results = doc.get("results", [])
            if doc.get("tool") == "lookup_product_items" and results:
                lines = ["Here is what I found for you:"]
                for i, item in enumerate(results, 1):
                    lines.append(f"{i}. {item['name']} — {item['price']}. "
                                 f"{item['description']}")
                lines.append("Would any of these work for you?")
                return ChatResponse(text="\n".join(lines))
            return ChatResponse(text=(
                "I'm sorry, I couldn't find anything matching that in our "
                "catalog. Is there anything else I can look up?"))
        return ChatResponse(text="", tool_calls=(
            BackendToolCall("lookup_product_items", {"query": last.text}),))
