"""Append-only event stream: the audit surface every scenario assertion runs on.

Events are totally ordered by (tick, seq) and serialize to deterministic JSON
lines, so equal seeds yield byte-identical transcripts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Event:
    tick: int
    seq: int
    type: str  # "call" | "note" | "message" | "deliver"
    name: str
    caller: str | None = None
    round: int | None = None
    attempt: int | None = None
    result: str | None = None  # "ok" or the rejection's error name; calls only
    meter: dict[str, int] | None = None  # non-zero counter deltas; calls only
    info: dict | None = None

    def to_json(self) -> str:
        record = {"tick": self.tick, "seq": self.seq, "type": self.type, "name": self.name}
        for key in ("caller", "round", "attempt", "result", "meter", "info"):
            value = getattr(self, key)
            if value is not None:
                record[key] = value
        return json.dumps(record, sort_keys=True, separators=(",", ":"))


# ledger calls that count toward a round's service route; the consumer's
# request opens the round and is not part of the work done to serve it
_ROUTE_EXCLUDED = {"requestRandomNumber"}


@dataclass
class Transcript:
    events: list[Event] = field(default_factory=list)
    final_outputs: dict[int, bytes] = field(default_factory=dict)
    _seq: int = 0

    def append(self, tick: int, type: str, name: str, **fields) -> Event:
        event = Event(tick=tick, seq=self._seq, type=type, name=name, **fields)
        self._seq += 1
        self.events.append(event)
        if event.info and "output" in event.info and event.round is not None:
            self.final_outputs[event.round] = bytes.fromhex(event.info["output"])
        return event

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def calls(self, successful_only: bool = False) -> list[Event]:
        out = [e for e in self.events if e.type == "call"]
        if successful_only:
            out = [e for e in out if e.result == "ok"]
        return out

    def _round_window(self, round_id: int) -> tuple[int, int]:
        """Event index span from the round's accepted request to its terminal event."""
        start = end = -1
        for i, e in enumerate(self.events):
            if e.round != round_id:
                continue
            if start < 0 and e.type == "call" and e.name == "requestRandomNumber" and e.result == "ok":
                start = i
            terminal = (e.info or {}).get("phase") in ("Finalized", "Refunded")
            if start >= 0 and terminal:
                end = i
                break
        if start < 0:
            raise KeyError(f"round {round_id} was never requested")
        return start, (end if end >= 0 else len(self.events) - 1)

    def route(self, round_id: int) -> list[str]:
        """Successful ledger-call names that served the round, in order.

        Covers everything between the round's request and its terminal event,
        so recovery calls without a round id (deposits, resume) are included.
        """
        start, end = self._round_window(round_id)
        return [
            e.name
            for e in self.events[start:end + 1]
            if e.type == "call" and e.result == "ok" and e.name not in _ROUTE_EXCLUDED
        ]

    def route_meter(self, round_id: int) -> dict[str, int]:
        """Summed counter deltas over the round's service calls."""
        start, end = self._round_window(round_id)
        totals: dict[str, int] = {}
        for e in self.events[start:end + 1]:
            if e.type != "call" or e.result != "ok" or e.name in _ROUTE_EXCLUDED:
                continue
            for counter, delta in (e.meter or {}).items():
                totals[counter] = totals.get(counter, 0) + delta
        return totals
