import pytest
from unittest.mock import patch

from dyadic import Dyadic
from parser import (
    clean_json_line,
    load_h_table,
    load_index_schedule,
    load_ladder,
    load_machine_tape,
    load_semimeasure_tape,
    load_stream,
    load_test_tape,
    load_theta_family,
    parse_dyadic_list,
    parse_json_line,
    read_jsonl,
    write_machine_tape,
)
from streams import Direction, StreamContractError
from utils import TraceFormatError


# 1. Test JSON Cleaning
def test_clean_json_line_basic():
    dirty = '```json\n  { "stage": 3, "value": "1*2^-1" } \n```'
    expected = '{ "stage": 3, "value": "1*2^-1" }'
    assert clean_json_line(dirty).strip() == expected

def test_clean_json_remove_trailing_comma():
    result = clean_json_line('{ "stage": 0, "value": "0", }')
    assert ', }' not in result
    assert result.endswith('}')

def test_clean_json_strips_comments():
    result = clean_json_line('{"stage": 1 /* first */, "value": 1} // done')
    assert "first" not in result
    assert "done" not in result

def test_clean_json_without_object():
    assert clean_json_line("no braces here") == ""
    assert clean_json_line("") == ""


# 2. Test Line Parsing
@patch('parser.update_terminal_log')
def test_parse_json_line_standard(mock_log):
    data = parse_json_line('{"stage": 2, "program": "01", "output": ""}')
    assert data == {"stage": 2, "program": "01", "output": ""}
    assert not mock_log.called

@patch('parser.update_terminal_log')
def test_parse_json_line_falls_back_to_json5(mock_log):
    data = parse_json_line("{stage: 2, program: '01', output: '',}", 7, "u.jsonl")
    assert data["program"] == "01"
    mock_log.assert_called_once()
    assert "u.jsonl:7" in mock_log.call_args[0][0]

def test_parse_json_line_rejects_garbage():
    with pytest.raises(TraceFormatError, match="x.jsonl:4"):
        parse_json_line("{stage: ", 4, "x.jsonl")

def test_parse_json_line_needs_object():
    with pytest.raises(TraceFormatError):
        parse_json_line("[1, 2, 3]")

def test_read_jsonl_skips_blank_and_comment_lines(write_lines):
    path = write_lines("s.jsonl", ["# header comment", "", '{"stage": 0}', "// note", '{"stage": 1}'])
    assert [line_no for line_no, _ in read_jsonl(path)] == [3, 5]

def test_read_jsonl_missing_file(tmp_path):
    with pytest.raises(TraceFormatError):
        list(read_jsonl(str(tmp_path / "missing.jsonl")))


# 3. Test Stream Loading
def test_load_stream_with_header(write_lines):
    path = write_lines("alpha.jsonl", [
        '{"direction": "nondecreasing", "horizon": 6}',
        '{"stage": 0, "value": "0"}',
        '{"stage": 4, "value": "3*2^-2"}',
    ])
    stream = load_stream(path)
    assert stream.horizon == 6
    assert stream.value(3) == Dyadic(0)
    assert stream.value(6) == Dyadic(3, 2)

def test_load_stream_direction_override(write_lines):
    path = write_lines("theta.jsonl", ['{"stage": 0, "value": 1}', '{"stage": 2, "value": "1*2^-1"}'])
    stream = load_stream(path, direction=Direction.NONINCREASING)
    assert stream.direction is Direction.NONINCREASING

def test_load_stream_bad_value(write_lines):
    path = write_lines("bad.jsonl", ['{"stage": 0, "value": "one half"}'])
    with pytest.raises(TraceFormatError, match=":1"):
        load_stream(path)

def test_load_stream_not_monotone(write_lines):
    path = write_lines("down.jsonl", ['{"stage": 0, "value": 1}', '{"stage": 1, "value": 0}'])
    with pytest.raises(StreamContractError):
        load_stream(path)

def test_inline_ladder():
    ladder = parse_dyadic_list("0, 1*2^-1, 3*2^-2")
    assert list(ladder.values) == [Dyadic(0), Dyadic(1, 1), Dyadic(3, 2)]
    assert load_ladder("0,1").final() == Dyadic(1)
    with pytest.raises(StreamContractError):
        parse_dyadic_list(" , ")

def test_theta_family_from_directory(tmp_path):
    (tmp_path / "b.jsonl").write_text('{"stage": 0, "value": "1*2^-1"}\n', encoding="utf-8")
    (tmp_path / "a.jsonl").write_text('{"stage": 0, "value": 1}\n{"stage": 3, "value": "3*2^-2"}\n', encoding="utf-8")
    (tmp_path / "notes.txt").write_text("ignored", encoding="utf-8")
    family = load_theta_family(str(tmp_path))
    assert len(family) == 2
    assert family.value(0, 5) == Dyadic(3, 2)
    assert family.value(1, 5) == Dyadic(1, 1)

def test_theta_family_empty_directory(tmp_path):
    with pytest.raises(TraceFormatError):
        load_theta_family(str(tmp_path))

def test_index_schedule_steps(write_lines):
    path = write_lines("idx.jsonl", ['{"stage": 0, "index": 0}', '{"stage": 3, "index": 2}'])
    assert load_index_schedule(path, horizon=5) == [0, 0, 0, 2, 2, 2]

def test_index_schedule_must_start_at_zero(write_lines):
    path = write_lines("idx.jsonl", ['{"stage": 2, "index": 0}'])
    with pytest.raises(TraceFormatError):
        load_index_schedule(path)


# 4. Test Machine and Measure Tapes
def test_machine_tape_round_trip(tmp_path, u_tape):
    path = str(tmp_path / "u.jsonl")
    write_machine_tape(path, u_tape)
    loaded = load_machine_tape(path, name="U")
    assert loaded.domain == u_tape.domain
    assert loaded.omega() == u_tape.omega()

def test_machine_tape_keeps_rejections(write_lines):
    path = write_lines("m.jsonl", [
        '{"kind": "header", "name": "M"}',
        '{"stage": 1, "program": "01", "output": "1"}',
        '{"stage": 0, "program": "0", "output": ""}',
    ])
    tape = load_machine_tape(path)
    assert tape.domain == ["0"]
    assert [event.program for event in tape.rejected] == ["01"]

def test_machine_tape_missing_program(write_lines):
    path = write_lines("m.jsonl", ['{"stage": 1, "output": "1"}'])
    with pytest.raises(TraceFormatError, match="program"):
        load_machine_tape(path)

def test_semimeasure_and_test_tapes(write_lines):
    mu = load_semimeasure_tape(write_lines("mu.jsonl", ['{"stage": 1, "index": 3, "amount": "1*2^-2"}']))
    assert mu.mass(3, 1) == Dyadic(1, 2)
    test = load_test_tape(write_lines("t.jsonl", ['{"k": 1, "stage": 0, "lo": "0", "hi": "1*2^-2"}']))
    assert test.measure(1) == Dyadic(1, 2)

def test_h_table_validation(tmp_path):
    good = tmp_path / "h.json"
    good.write_text('{"": 2, "01": 5}', encoding="utf-8")
    assert load_h_table(str(good)) == {"": 2, "01": 5}
    bad = tmp_path / "bad.json"
    bad.write_text('{"2": 2}', encoding="utf-8")
    with pytest.raises(TraceFormatError):
        load_h_table(str(bad))
    fractional = tmp_path / "frac.json"
    fractional.write_text('{"0": 2.5}', encoding="utf-8")
    with pytest.raises(TraceFormatError):
        load_h_table(str(fractional))
