"""Turn model and agent-output parsing.

Every agent utterance classifies into exactly one of: a terminal action, a
tool request, a plain message, or a format error. The parser is total; it
never raises on any input string.

Wrapper contract (bit-exact): a tool call is a ``<tool_call>`` ... ``</tool_call>``
region whose body is a JSON object ``{"function": f, "arguments": a}`` where
``a`` is an object or a JSON-encoded object string. Two lenient forms still
drive the simulation but are flagged: a bare function name inside the
wrapper, and function-call syntax ``f(args)`` inside the wrapper. Anything
else that looks tool-call-like is a format error.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

__all__ = [
    "Turn",
    "ToolCall",
    "ActionOutcome",
    "TurnParse",
    "SHOPPER_FUNCTIONS",
    "SALESBOT_FUNCTIONS",
    "parse_agent_output",
    "parse_turn",
    "conversation_format_flag",
]

OPEN_TAG = "<tool_call>"
CLOSE_TAG = "</tool_call>"
BOX_TAG = "<|begin_of_box|>"

SHOPPER_FUNCTIONS = frozenset({"add_to_cart", "end_conversation"})
SALESBOT_FUNCTIONS = frozenset({"lookup_buying_guide", "lookup_product_items"})
KNOWN_FUNCTIONS = SHOPPER_FUNCTIONS | SALESBOT_FUNCTIONS

# Required argument per function; end_conversation takes none.
REQUIRED_ARGUMENT: dict[str, str | None] = {
    "add_to_cart": "product",
    "lookup_buying_guide": "query",
    "lookup_product_items": "query",
    "end_conversation": None,
}

TERMINAL_KIND = {"add_to_cart": "terminal_purchase", "end_conversation": "terminal_exit"}


@dataclass(frozen=True)
class ToolCall:
    function: str
    arguments: Mapping[str, str]
    raw_span: str
    well_formed: bool


@dataclass(frozen=True)
class ActionOutcome:
    kind: str  # terminal_purchase | terminal_exit | tool_request | plain_message | format_error
    detail: ToolCall | None = None
    error_class: str | None = None
    raw_span: str = ""

    def __post_init__(self) -> None:
        if (self.kind == "format_error") != (self.error_class is not None):
            raise ValueError("error_class present iff kind is format_error")

    @property
    def terminal(self) -> bool:
        return self.kind in ("terminal_purchase", "terminal_exit")


@dataclass(frozen=True)
class Turn:
    role: str  # shopper | salesbot | tool
    text: str
    tool_calls: tuple[ToolCall, ...] = ()
    attachments: tuple[str, ...] = ()
    index: int = 0


@dataclass(frozen=True)
class TurnParse:
    """All region classifications for one turn plus the binding outcome."""

    role: str
    outcome: ActionOutcome
    regions: tuple[ActionOutcome, ...] = ()

    @property
    def flagged(self) -> bool:
        """True when any region is a format error or a lenient parse."""
        return any(
            r.kind == "format_error" or (r.detail is not None and not r.detail.well_formed)
            for r in self.regions
        )


def _error(error_class: str, raw_span: str) -> ActionOutcome:
    return ActionOutcome(kind="format_error", error_class=error_class, raw_span=raw_span)


def _finish(function: str, arguments: Mapping[str, str], role: str,
            raw_span: str, well_formed: bool) -> ActionOutcome:
    if function not in KNOWN_FUNCTIONS:
        return _error("unknown_function", raw_span)
    if role == "shopper" and function in SALESBOT_FUNCTIONS:
        return _error("role_violation", raw_span)
    if role == "salesbot" and function == "add_to_cart":
        return _error("role_violation", raw_span)
    required = REQUIRED_ARGUMENT[function]
    if required is not None and not str(arguments.get(required, "")).strip():
        return _error("missing_argument", raw_span)
    call = ToolCall(
        function=function,
        arguments={str(k): str(v) for k, v in arguments.items()},
        raw_span=raw_span,
        well_formed=well_formed,
    )
    kind = TERMINAL_KIND.get(function, "tool_request")
    return ActionOutcome(kind=kind, detail=call, raw_span=raw_span)


_BARE_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_CALL_SYNTAX = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*\Z", re.S)
_FUNCTION_FIELD = re.compile(r'"function"\s*:\s*"([A-Za-z0-9_]+)"')


def _match_braces(text: str, start: int) -> str | None:
    """Return the balanced ``{...}`` substring starting at ``start``."""
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


def _parse_arguments_value(value: object, raw_span: str) -> dict | ActionOutcome:
    if value is None:
        return {}
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            return _error("malformed_payload", raw_span)
    if not isinstance(value, dict):
        return _error("malformed_payload", raw_span)
    return value


def _classify_body(body: str, role: str, raw_span: str) -> ActionOutcome:
    stripped = body.strip()
    if not stripped:
        return _error("malformed_payload", raw_span)

    # Canonical: strict JSON object with function/arguments.
    try:
        obj = json.loads(stripped)
    except json.JSONDecodeError:
        obj = None
    if obj is not None:
        if not isinstance(obj, dict) or not isinstance(obj.get("function"), str):
            return _error("malformed_payload", raw_span)
        args = _parse_arguments_value(obj.get("arguments"), raw_span)
        if isinstance(args, ActionOutcome):
            return args
        return _finish(obj["function"], args, role, raw_span, well_formed=True)

    # Lenient: bare function name.
    if _BARE_NAME.match(stripped):
        return _finish(stripped, {}, role, raw_span, well_formed=False)

    # Lenient: function-call syntax f(args).
    call = _CALL_SYNTAX.match(stripped)
    if call:
        function, inner = call.group(1), call.group(2).strip()
        arguments: dict = {}
        if inner.startswith("{"):
            try:
                parsed = json.loads(inner)
                if isinstance(parsed, dict):
                    arguments = parsed
            except json.JSONDecodeError:
                pass
        elif inner:
            positional = REQUIRED_ARGUMENT.get(function)
            if positional:
                arguments = {positional: inner.strip("\"' ")}
        return _finish(function, arguments, role, raw_span, well_formed=False)

    # Lenient: canonical-shaped JSON with an unescaped argument string,
    # recoverable by brace matching.
    fn_match = _FUNCTION_FIELD.search(stripped)
    if fn_match and not stripped.startswith("default_api"):
        arguments = {}
        args_pos = stripped.find('"arguments"')
        if args_pos != -1:
            brace_pos = stripped.find("{", args_pos)
            if brace_pos != -1:
                inner = _match_braces(stripped, brace_pos)
                if inner is not None:
                    try:
                        parsed = json.loads(inner)
                        if isinstance(parsed, dict):
                            arguments = parsed
                    except json.JSONDecodeError:
                        return _error("malformed_payload", raw_span)
        return _finish(fn_match.group(1), arguments, role, raw_span, well_formed=False)

    return _error("malformed_payload", raw_span)


_BARE_CALL = re.compile(
    r"\b(add_to_cart|end_conversation|lookup_buying_guide|lookup_product_items)\s*\(")
_BARE_JSON_CALL = re.compile(r'\{\s*"function"')


def _scan(text: str, role: str) -> list[ActionOutcome]:
    """Classify every tool-call-like region of the text, in order."""
    outcomes: list[tuple[int, ActionOutcome]] = []
    covered: list[tuple[int, int]] = []
    i = 0
    while True:
        open_pos = text.find(OPEN_TAG, i)
        box_pos = text.find(BOX_TAG, i)
        candidates = [(p, tag) for p, tag in ((open_pos, OPEN_TAG), (box_pos, BOX_TAG))
                      if p != -1]
        if not candidates:
            break
        pos, tag = min(candidates)
        if tag == BOX_TAG:
            close = text.find(CLOSE_TAG, pos)
            end = close + len(CLOSE_TAG) if close != -1 else len(text)
            outcomes.append((pos, _error("malformed_wrapper", text[pos:end])))
        else:
            close = text.find(CLOSE_TAG, pos + len(OPEN_TAG))
            if close == -1:
                end = len(text)
                outcomes.append((pos, _error("malformed_wrapper", text[pos:end])))
            else:
                end = close + len(CLOSE_TAG)
                body = text[pos + len(OPEN_TAG):close]
                outcomes.append((pos, _classify_body(body, role, text[pos:end])))
        covered.append((pos, end))
        i = end

    def outside(pos: int) -> bool:
        return not any(start <= pos < end for start, end in covered)

    for m in re.finditer(re.escape(CLOSE_TAG), text):
        if outside(m.start()):
            outcomes.append((m.start(), _error("malformed_wrapper", m.group(0))))
    for m in re.finditer(r"default_api:", text):
        if outside(m.start()):
            outcomes.append((m.start(), _error("malformed_payload", m.group(0))))
    for m in _BARE_CALL.finditer(text):
        if outside(m.start()):
            outcomes.append((m.start(), _error("malformed_wrapper", m.group(0))))
    for m in _BARE_JSON_CALL.finditer(text):
        if outside(m.start()):
            outcomes.append((m.start(), _error("malformed_wrapper", m.group(0))))

    outcomes.sort(key=lambda item: item[0])
    return [outcome for _, outcome in outcomes]


def parse_turn(text: str, role: str) -> TurnParse:
    """Classify one agent turn. Total: every input gets a TurnParse."""
    regions = tuple(_scan(text, role))
    if not regions:
        return TurnParse(role=role, outcome=ActionOutcome(kind="plain_message"))
    binding = next((r for r in regions if r.terminal), None)
    if binding is None:
        binding = next((r for r in regions if r.kind == "tool_request"), regions[0])
    return TurnParse(role=role, outcome=binding, regions=regions)


def parse_agent_output(text: str, role: str) -> ActionOutcome:
    """Binding classification of one agent turn (first terminal action wins)."""
    return parse_turn(text, role).outcome


def conversation_format_flag(parses: Sequence[TurnParse]) -> bool:
    """Conversation-level format flag.

    True iff any shopper turn produced a format error or a lenient
    (recoverable but non-canonical) tool call. Counted per conversation,
    not per turn.
    """
    return any(p.role == "shopper" and p.flagged for p in parses)
