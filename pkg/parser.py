import json
import json5
import os
import re

from dyadic import Dyadic
from machines import DescriptionEvent, enforce_prefix_free
from semimeasures import MLTestTape, SemiMeasureTape
from streams import Direction, StreamContractError, ThetaFamily, make_stream, scripted_stream
from utils import TraceFormatError, write_jsonl

try:
    from utils import update_terminal_log
except ImportError:
    def update_terminal_log(msg, level="INFO"): pass


def clean_json_line(raw_str):
    """
    Lenient cleaning for hand-written input lines.
    Handles Markdown fences, Comments, Trailing Commas and stray text around the object.
    """
    if not raw_str:
        return ""

    raw_str = re.sub(r'```json\s*', '', raw_str)
    raw_str = re.sub(r'```\s*', '', raw_str)

    # comments outside strings only; programs and values never contain '/'
    raw_str = re.sub(r'//.*', '', raw_str)
    raw_str = re.sub(r'/\*.*?\*/', '', raw_str, flags=re.DOTALL)

    raw_str = re.sub(r',\s*([}\]])', r'\1', raw_str)

    start = raw_str.find('{')
    end = raw_str.rfind('}')

    if start == -1 or end == -1 or end < start:
        return ""

    return raw_str[start:end + 1]


def parse_json_line(line, line_no=None, source=""):
    """Standard json first, then the cleaned line through json5."""
    where = f"{source}:{line_no}" if line_no is not None else (source or "input")
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        update_terminal_log(f"{where}: standard JSON failed ({e}); retrying with JSON5", "DEBUG")
        cleaned = clean_json_line(line)
        if not cleaned:
            raise TraceFormatError(f"{where}: no JSON object on this line") from e
        try:
            data = json5.loads(cleaned)
        except Exception as e5:
            raise TraceFormatError(f"{where}: cannot parse line ({e5})") from e5

    if not isinstance(data, dict):
        raise TraceFormatError(f"{where}: expected a JSON object, got {type(data).__name__}")
    return data


def read_jsonl(path):
    """Yield (line_no, dict) for every non-blank, non-comment line of a JSON-lines file."""
    if not os.path.exists(path):
        raise TraceFormatError(f"{path}: no such file")
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#") or stripped.startswith("//"):
                continue
            yield line_no, parse_json_line(stripped, line_no, path)


def read_json(path):
    """Whole-file JSON (tables, configs) with the same json -> json5 fallback."""
    if not os.path.exists(path):
        raise TraceFormatError(f"{path}: no such file")
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        try:
            return json5.loads(text)
        except Exception as e:
            raise TraceFormatError(f"{path}: cannot parse JSON ({e})") from e


def _field(data, key, line_no, path):
    if key not in data:
        raise TraceFormatError(f"{path}:{line_no}: missing field {key!r}")
    return data[key]


def _dyadic(value, line_no, path):
    try:
        return Dyadic.parse(value)
    except (TypeError, ValueError) as e:
        raise TraceFormatError(f"{path}:{line_no}: bad dyadic {value!r}") from e


def _int(value, line_no, path, what="stage"):
    if isinstance(value, bool):
        raise TraceFormatError(f"{path}:{line_no}: {what} must be an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError) as e:
        raise TraceFormatError(f"{path}:{line_no}: {what} must be an integer, got {value!r}") from e


# streams

def load_stream(path, direction=None, horizon=None):
    """Stream script: a header {"direction", "horizon", "lo", "hi"} then {stage, value} lines."""
    header = {}
    events = []
    for line_no, data in read_jsonl(path):
        if "direction" in data and "value" not in data:
            header = data
            continue
        stage = _int(_field(data, "stage", line_no, path), line_no, path)
        events.append((stage, _dyadic(_field(data, "value", line_no, path), line_no, path)))

    direction = direction or header.get("direction", Direction.NONDECREASING.value)
    if horizon is None and header.get("horizon") is not None:
        horizon = _int(header["horizon"], 0, path, "horizon")
    lo = Dyadic.parse(header["lo"]) if header.get("lo") is not None else None
    hi = Dyadic.parse(header["hi"]) if header.get("hi") is not None else None
    stream = scripted_stream(events, direction, horizon=horizon, lo=lo, hi=hi)
    update_terminal_log(f"Loaded {stream.direction.value} stream {path} (horizon {stream.horizon})", "DEBUG")
    return stream


def parse_dyadic_list(text, direction=Direction.NONDECREASING):
    """Inline ladder such as "0, 1*2^-1, 3*2^-2" read as a stream indexed by position."""
    try:
        values = [Dyadic.parse(part) for part in str(text).split(",") if part.strip()]
    except ValueError as e:
        raise StreamContractError(f"bad dyadic list {text!r}: {e}") from e
    if not values:
        raise StreamContractError("empty dyadic list")
    return make_stream(values, direction)


def load_ladder(spec):
    """xi ladder from a stream file or an inline comma-separated list."""
    if os.path.exists(str(spec)):
        return load_stream(spec, direction=Direction.NONDECREASING)
    return parse_dyadic_list(spec)


def load_theta_family(source, horizon=None):
    """Right-c.e. streams from a directory (sorted by file name) or a list of files."""
    if isinstance(source, (str, os.PathLike)) and os.path.isdir(source):
        paths = sorted(
            os.path.join(source, name) for name in os.listdir(source)
            if name.endswith((".jsonl", ".json"))
        )
    else:
        paths = [source] if isinstance(source, (str, os.PathLike)) else list(source)
    if not paths:
        raise TraceFormatError(f"{source}: no theta stream files found")
    streams = [load_stream(path, direction=Direction.NONINCREASING, horizon=horizon) for path in paths]
    update_terminal_log(f"Loaded {len(streams)} theta stream(s)", "INFO")
    return ThetaFamily(streams)


def load_index_schedule(path, horizon=None):
    """Opponent index as a step function of the stage: {stage, index} lines, first at stage 0."""
    events = []
    for line_no, data in read_jsonl(path):
        stage = _int(_field(data, "stage", line_no, path), line_no, path)
        index = _int(_field(data, "index", line_no, path), line_no, path, "index")
        if events and stage <= events[-1][0]:
            raise TraceFormatError(f"{path}:{line_no}: stages must increase")
        events.append((stage, index))
    if not events or events[0][0] != 0:
        raise TraceFormatError(f"{path}: the index schedule must start at stage 0")

    horizon = events[-1][0] if horizon is None else horizon
    schedule = []
    cursor = 0
    for stage in range(horizon + 1):
        while cursor + 1 < len(events) and events[cursor + 1][0] <= stage:
            cursor += 1
        schedule.append(events[cursor][1])
    return schedule


# machines and semi-measures

def load_machine_tape(path, name="M"):
    """Machine tape: {stage, program, output} lines; refused events stay on tape.rejected."""
    raw = []
    for line_no, data in read_jsonl(path):
        if data.get("kind") == "header":
            continue
        stage = _int(_field(data, "stage", line_no, path), line_no, path)
        program = str(_field(data, "program", line_no, path))
        output = str(data.get("output", ""))
        raw.append(DescriptionEvent(stage, program, output))
    raw.sort(key=lambda event: event.stage)
    tape = enforce_prefix_free(raw, name=name)
    update_terminal_log(f"Loaded machine {name} from {path}: {len(tape)} description(s)", "DEBUG")
    return tape


def write_machine_tape(path, tape):
    return write_jsonl(path, tape.to_records())


def load_semimeasure_tape(path, name="m"):
    tape = SemiMeasureTape(name)
    for line_no, data in read_jsonl(path):
        tape.add(
            _int(_field(data, "stage", line_no, path), line_no, path),
            _int(_field(data, "index", line_no, path), line_no, path, "index"),
            _dyadic(_field(data, "amount", line_no, path), line_no, path),
        )
    return tape


def load_test_tape(path):
    test = MLTestTape()
    for line_no, data in read_jsonl(path):
        test.add(
            _int(_field(data, "k", line_no, path), line_no, path, "k"),
            _int(data.get("stage", 0), line_no, path),
            _dyadic(_field(data, "lo", line_no, path), line_no, path),
            _dyadic(_field(data, "hi", line_no, path), line_no, path),
        )
    return test


def load_h_table(path):
    """JSON object {output: h}."""
    table = read_json(path)
    if not isinstance(table, dict):
        raise TraceFormatError(f"{path}: h table must be a JSON object")
    for output, value in table.items():
        if any(ch not in "01" for ch in str(output)):
            raise TraceFormatError(f"{path}: h table key {output!r} is not a binary string")
        if isinstance(value, bool) or not isinstance(value, int):
            raise TraceFormatError(f"{path}: h({output!r}) must be an integer, got {value!r}")
    return table
