import os
import io
import sys
import json
import time
from collections import deque
from datetime import datetime

import pandas as pd
from dotenv import load_dotenv

load_dotenv()


MAX_LOG_ENTRIES = 200
DEFAULT_STAGES = int(os.getenv("OMEGA_STAGES", "1000"))
DEFAULT_KMAX = int(os.getenv("OMEGA_KMAX", "8"))
MAX_REPLACEMENT_BITS = int(os.getenv("OMEGA_MAX_REPLACEMENT_BITS", "16"))
LOG_ECHO = os.getenv("OMEGA_LOG_ECHO", "0") == "1"
LOG_LEVEL = os.getenv("OMEGA_LOG_LEVEL", "INFO").upper()

LOG_LEVELS = ("INFO", "SUCCESS", "WARN", "ERROR", "SYSTEM", "DEBUG")

terminal_logs = deque(maxlen=MAX_LOG_ENTRIES)


class WorkbenchError(Exception):
    """Base class for every error the workbench raises on purpose."""


class InputContractError(WorkbenchError):
    """An input violates its contract (monotonicity, range, prefix-freeness...)."""


class TraceFormatError(WorkbenchError):
    """A trace or input file cannot be parsed."""


def update_terminal_log(msg, level="INFO"):
    if level not in LOG_LEVELS:
        level = "INFO"

    timestamp = datetime.now().strftime("%H:%M:%S.%f")[:-3]
    log_entry = f"[{timestamp}] {level}: {msg}"

    terminal_logs.append(log_entry)

    if level == "DEBUG" and LOG_LEVEL != "DEBUG":
        return
    if LOG_ECHO or level == "ERROR":
        try:
            print(log_entry, file=sys.stderr, flush=True)
        except Exception:
            pass


def clear_terminal_log():
    terminal_logs.clear()


def set_log_echo(enabled):
    global LOG_ECHO
    LOG_ECHO = bool(enabled)


def stable_json_dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_jsonl(path, records):
    """Write dict records one per line; returns the number of lines written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(stable_json_dumps(record))
            handle.write("\n")
            count += 1
    update_terminal_log(f"Wrote {count} record(s) to {path}", "DEBUG")
    return count


def report_to_frame(report):
    rows = [
        {
            "check": check.name,
            "passed": check.passed,
            "first_stage": check.first_stage,
            "detail": check.detail,
        }
        for check in report.checks
    ]
    return pd.DataFrame(rows, columns=["check", "passed", "first_stage", "detail"])


def to_csv(df):
    buffer = io.StringIO()
    buffer.write("# Generated by omega-workbench\n")
    df.to_csv(buffer, index=False)
    return buffer.getvalue().encode("utf-8")


def to_excel(df):
    buffer = io.BytesIO()
    with pd.ExcelWriter(buffer, engine="xlsxwriter") as writer:
        df.to_excel(writer, index=False, sheet_name="Verification")

        workbook = writer.book
        worksheet = writer.sheets["Verification"]

        header_format = workbook.add_format({
            "bold": True,
            "text_wrap": True,
            "valign": "top",
            "fg_color": "#4189DC",
            "font_color": "#FFFFFF",
            "border": 1,
        })

        for col_num, value in enumerate(df.columns.values):
            worksheet.write(0, col_num, value, header_format)

        generated_date = datetime.now().strftime("%Y-%m-%d")
        worksheet.set_footer(f"&LGenerated by omega-workbench on {generated_date}")

    buffer.seek(0)
    return buffer.getvalue()


def export_report(report, path):
    """Write a verification report next to a trace; format follows the extension."""
    df = report_to_frame(report)
    if str(path).lower().endswith((".xlsx", ".xls")):
        payload = to_excel(df)
    else:
        payload = to_csv(df)
    with open(path, "wb") as handle:
        handle.write(payload)
    update_terminal_log(f"Report exported to {path}", "SUCCESS")
    return path


class StageTimer:
    """Wall-clock timer for construction runs, reported through the terminal log."""

    def __init__(self, label):
        self.label = label
        self.start = None

    def __enter__(self):
        self.start = time.time()
        update_terminal_log(f"{self.label} started", "SYSTEM")
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.time() - self.start
        if exc_type is None:
            update_terminal_log(f"{self.label} finished in {elapsed:.2f}s", "SYSTEM")
        else:
            update_terminal_log(f"{self.label} aborted after {elapsed:.2f}s: {exc}", "ERROR")
        return False
