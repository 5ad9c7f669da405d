"""
Trace records, traces and verification reports.

A trace file is JSON-lines: one header line, one line per stage, and an
optional halt line when a run stopped before its horizon.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from dyadic import Dyadic
from utils import TraceFormatError, write_jsonl

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


@dataclass(frozen=True)
class Verdict:
    holds: bool
    stage: Optional[int] = None
    detail: str = ""

    def __bool__(self):
        return self.holds


@dataclass
class Check:
    name: str
    passed: bool
    first_stage: Optional[int] = None
    detail: str = ""


class VerificationReport:
    """Ordered list of named checks. Failing a check never raises."""

    def __init__(self, construction=""):
        self.construction = construction
        self.checks: List[Check] = []

    def record(self, name, verdict, stage=None, detail=""):
        if isinstance(verdict, Verdict):
            check = Check(name, verdict.holds, verdict.stage, verdict.detail)
        else:
            check = Check(name, bool(verdict), stage if not verdict else None, detail)
        self.checks.append(check)
        return check

    def extend(self, other, prefix=""):
        for check in other.checks:
            self.checks.append(Check(prefix + check.name, check.passed, check.first_stage, check.detail))
        return self

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def failures(self):
        return [check for check in self.checks if not check.passed]

    def get(self, name):
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def summary(self):
        failed = self.failures()
        if not failed:
            return f"{self.construction or 'trace'}: all {len(self.checks)} check(s) passed"
        first = failed[0]
        where = f" at stage {first.first_stage}" if first.first_stage is not None else ""
        return (
            f"{self.construction or 'trace'}: {len(failed)} of {len(self.checks)} check(s) failed; "
            f"first: {first.name}{where} ({first.detail})"
        )

    def log_summary(self):
        update_terminal_log(self.summary(), "SUCCESS" if self.passed else "ERROR")
        return self.passed


def _encode(value):
    if isinstance(value, Dyadic):
        return str(value)
    if isinstance(value, dict):
        return {key: _encode(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(item) for item in value]
    return value


@dataclass
class TraceRecord:
    stage: int
    construction: str
    case: str = ""
    state: Dict[str, Any] = field(default_factory=dict)
    values: Dict[str, Dyadic] = field(default_factory=dict)
    events: List[Dict[str, Any]] = field(default_factory=list)

    def to_json(self):
        return {
            "kind": "stage",
            "stage": self.stage,
            "construction": self.construction,
            "case": self.case,
            "state": _encode(self.state),
            "values": {name: str(value) for name, value in self.values.items()},
            "events": _encode(self.events),
        }

    @classmethod
    def from_json(cls, data, line_no=None):
        where = f"line {line_no}: " if line_no is not None else ""
        try:
            values = {name: Dyadic.parse(text) for name, text in data.get("values", {}).items()}
            return cls(
                stage=int(data["stage"]),
                construction=str(data.get("construction", "")),
                case=str(data.get("case", "")),
                state=dict(data.get("state", {})),
                values=values,
                events=list(data.get("events", [])),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise TraceFormatError(f"{where}malformed stage record: {e}") from e

    def value(self, name):
        return self.values[name]

    def events_of(self, kind):
        return [event for event in self.events if event.get("type") == kind]


@dataclass
class Trace:
    header: Dict[str, Any] = field(default_factory=dict)
    records: List[TraceRecord] = field(default_factory=list)
    halted: Optional[Dict[str, Any]] = None
    final_state: Any = field(default=None, repr=False, compare=False)

    @property
    def construction(self):
        return self.header.get("construction", "")

    def append(self, record):
        self.records.append(record)

    def halt(self, stage, reason):
        self.halted = {"stage": stage, "reason": reason}
        update_terminal_log(f"{self.construction} halted at stage {stage}: {reason}", "WARN")

    def series(self, name):
        """Per-record values of one named quantity (records lacking it are skipped)."""
        return [record.values[name] for record in self.records if name in record.values]

    def staged_series(self, name):
        return [(record.stage, record.values[name]) for record in self.records if name in record.values]

    def events(self, kind=None):
        """(stage, event) pairs in trace order."""
        for record in self.records:
            for event in record.events:
                if kind is None or event.get("type") == kind:
                    yield record.stage, event

    def __len__(self):
        return len(self.records)

    def to_lines(self):
        yield {"kind": "header", **_encode(self.header)}
        for record in self.records:
            yield record.to_json()
        if self.halted is not None:
            yield {"kind": "halt", **self.halted}


def write_trace(path, trace):
    count = write_jsonl(path, trace.to_lines())
    update_terminal_log(f"Trace with {len(trace)} stage record(s) written to {path}", "INFO")
    return count


def read_trace(path):
    # parser pulls in the domain loaders, which import this module.
    from parser import read_jsonl

    trace = Trace()
    seen_header = False
    for line_no, data in read_jsonl(path):
        kind = data.get("kind", "stage")
        if kind == "header":
            if seen_header:
                raise TraceFormatError(f"line {line_no}: second header line")
            trace.header = {key: item for key, item in data.items() if key != "kind"}
            seen_header = True
        elif kind == "halt":
            trace.halted = {key: item for key, item in data.items() if key != "kind"}
        elif kind == "stage":
            trace.records.append(TraceRecord.from_json(data, line_no))
        else:
            raise TraceFormatError(f"line {line_no}: unknown record kind {kind!r}")
    if not seen_header:
        raise TraceFormatError(f"{path}: trace has no header line")
    update_terminal_log(f"Read trace {path}: {len(trace)} stage record(s)", "DEBUG")
    return trace
