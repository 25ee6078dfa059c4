"""Action grammar shared by the engine, the solver, and the agents.

The five verbs and their arities:

    move(<connector label>)
    click(<object name>)
    apply(<tool>, <target item or tool>)
    input(<string>, <item>)
    craft(<tool>, <tool>)

Object names are matched case-insensitively after trimming; ``craft`` is
order-insensitive over its two arguments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

VERBS = ("move", "click", "apply", "input", "craft")

ARITY = {"move": 1, "click": 1, "apply": 2, "input": 2, "craft": 2}

# A verb call anywhere in free text, e.g. "... so I do: apply(key, silver chest)".
_CALL_RE = re.compile(
    r"\b(move|click|apply|input|craft)\s*\(([^()]*)\)", re.IGNORECASE
)


class ActionParseError(ValueError):
    """Raised when free text contains no well-formed action call."""


@dataclass(frozen=True)
class Action:
    verb: str
    args: tuple[str, ...]

    def render(self) -> str:
        return f"{self.verb}({', '.join(self.args)})"

    def key(self) -> tuple:
        """Normalized identity used for matching and dedup.

        Case-insensitive on all arguments; craft is unordered.
        """
        norm = tuple(a.strip().casefold() for a in self.args)
        if self.verb == "craft":
            norm = tuple(sorted(norm))
        return (self.verb, norm)

    def matches(self, other: "Action") -> bool:
        return self.key() == other.key()


def make_action(verb: str, *args: str) -> Action:
    verb = verb.strip().lower()
    if verb not in VERBS:
        raise ActionParseError(f"unknown verb {verb!r}")
    cleaned = tuple(a.strip() for a in args)
    if len(cleaned) != ARITY[verb]:
        raise ActionParseError(
            f"{verb} takes {ARITY[verb]} argument(s), got {len(cleaned)}"
        )
    if any(not a for a in cleaned):
        raise ActionParseError(f"{verb} has an empty argument")
    return Action(verb, cleaned)


def parse_action(raw: str) -> Action:
    """Extract the last well-formed action call from free text.

    Model replies typically reason first and act last, so the final call
    wins.  Raises ActionParseError when nothing parses.
    """
    last_error: ActionParseError | None = None
    parsed: Action | None = None
    for match in _CALL_RE.finditer(raw or ""):
        verb = match.group(1).lower()
        argtext = match.group(2)
        args = [a.strip() for a in argtext.split(",")] if argtext.strip() else []
        if verb == "input" and len(args) > 2:
            # Expected strings are alphanumeric, but be forgiving about a
            # stray comma inside the first argument; the item stays last.
            args = [", ".join(args[:-1]), args[-1]]
        try:
            parsed = make_action(verb, *args)
            last_error = None
        except ActionParseError as exc:
            last_error = exc
    if parsed is not None:
        return parsed
    if last_error is not None:
        raise last_error
    raise ActionParseError("no action call found")
