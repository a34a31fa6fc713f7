"""
Run records and their emission: CSV, key=value, and JSON reports.

Every number leaves the process through `format_value`:
- Fraction  -> "num/den" (integers as "num")
- float     -> repr, the shortest string that round-trips
- bool      -> "true" / "false"
- None      -> ""

Reports are named by the SHA-256 of the resolved configuration and listed in
an index file, so re-running a configuration replaces its report instead of
adding a new one.
"""

import hashlib
import io
import json
import math
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
from icecream import ic
from pydantic import BaseModel, Field

from .config import Command, ExperimentConfig, OutputFormat

ic.configureOutput(prefix='[HARNESS] ')

SCHEMA_VERSION = 1
REPORT_INDEX_FILE = "reports_index.json"

# Column order per command; golden tests pin these headers.
COLUMNS: Dict[Command, List[str]] = {
    Command.CALIBRATE: [
        "lambda", "alpha", "alpha_eff", "c", "c_prime", "decay_levels", "delta_alpha", "d_prime",
        "reference", "limit", "levels", "t", "calibrated_t", "gate_size", "gate_p", "gate_threshold",
        "total_queries",
    ],
    Command.ESTIMATE: ["trial", "seed", "d", "D", "i1", "path", "success", "queries", "promise_unverified", "error"],
    Command.LB_BUILD_CLASSES: ["j", "parity", "size", "window_low", "window_high"],
    Command.LB_DISAGREEMENT: ["k", "j", "even_size", "odd_size", "p1", "p2", "total"],
    Command.LB_BUCKETS: [
        "k", "m_star", "low_p1", "mid_p1", "high_p1", "low_p2", "mid_p2", "high_p2",
        "low_bound", "mid_bound", "high_bound", "total", "holds",
    ],
    Command.LB_TV: ["instance", "q", "digest", "tv_upper", "induced_tv", "holds", "max_discrepancy", "max_z"],
    Command.LB_DERANDOMIZE: ["candidate", "seed", "success", "best"],
    Command.LB_SCALING: ["U", "m", "k", "per_query", "scaled", "bound"],
    Command.TAILS: ["kind", "n", "k", "s", "param", "exact", "bound", "holds"],
    Command.SELFTEST: ["check", "instances", "failures", "passed"],
}


class RunRecord(BaseModel):
    """What a command produced: echo of its inputs, derived constants, rows and summary."""
    command: Command
    parameters: Dict[str, Any] = Field(description="Resolved parameters")
    master_seed: int
    constants: Dict[str, Any] = Field(default_factory=dict, description="Derived constants of the run")
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict, description="Statistics recomputable from rows")

    @property
    def columns(self) -> List[str]:
        return COLUMNS[self.command]

    def frame(self) -> pd.DataFrame:
        """Rows as formatted strings, in the command's column order."""
        data = [[format_value(row.get(col)) for col in self.columns] for row in self.rows]
        return pd.DataFrame(data, columns=self.columns, dtype=object)


# ============================================================================
# VALUE FORMATTING
# ============================================================================

def format_value(value: Any) -> str:
    """Locale-free text for one cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    if hasattr(value, 'item'):
        # numpy scalars
        return format_value(value.item())
    return str(value)


def _plain(value: Any) -> Any:
    """JSON-safe form of a parameter or constant."""
    if isinstance(value, (Fraction, float, Enum)) or hasattr(value, 'item'):
        return format_value(value)
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


# ============================================================================
# SUMMARY STATISTICS
# ============================================================================

def summarize(command: Command, rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Summary of a command's rows; the same rows always give the same summary."""
    summary: Dict[str, Any] = {"rows": len(rows)}
    if not rows:
        return summary
    frame = pd.DataFrame(rows)
    if command is Command.ESTIMATE:
        hits = frame["success"].astype(int)
        rate = float(hits.mean())
        summary.update(
            trials=len(rows),
            successes=int(hits.sum()),
            success_rate=rate,
            half_width=1.96 * math.sqrt(rate * (1 - rate) / len(rows)),
            mean_queries=float(frame["queries"].mean()),
            no_level=int(frame["error"].notna().sum()) if "error" in frame.columns else 0,
        )
    elif command is Command.LB_DERANDOMIZE:
        success = frame["success"].astype(float)
        summary.update(best_success=float(success.max()), mean_success=float(success.mean()))
    elif command is Command.LB_SCALING:
        summary.update(empirical_constant=float(frame["scaled"].astype(float).max()))
    elif "holds" in frame.columns:
        holds = frame["holds"].dropna().astype(bool)
        summary.update(checked=int(len(holds)), violations=int((~holds).sum()))
    elif "passed" in frame.columns:
        summary.update(failed_checks=int((~frame["passed"].astype(bool)).sum()))
    return summary


# ============================================================================
# EMISSION
# ============================================================================

def to_csv(record: RunRecord) -> str:
    """Header row plus one line per row, LF line endings."""
    buffer = io.StringIO()
    record.frame().to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def to_keyvalue(record: RunRecord) -> str:
    """
    key=value lines: command, parameters, constants and summary, then one
    line per row with space-separated col=value pairs.
    """
    lines = [f"command={record.command.value}", f"seed={record.master_seed}"]
    lines += [f"param.{k}={format_value(_plain(v))}" for k, v in sorted(record.parameters.items())]
    lines += [f"constant.{k}={format_value(v)}" for k, v in record.constants.items()]
    lines += [f"summary.{k}={format_value(v)}" for k, v in record.summary.items()]
    frame = record.frame()
    for values in frame.itertuples(index=False):
        lines.append(" ".join(f"{col}={val}" for col, val in zip(frame.columns, values)))
    return "\n".join(lines) + "\n"


def render(record: RunRecord, fmt: OutputFormat) -> str:
    return to_keyvalue(record) if OutputFormat(fmt) is OutputFormat.KEYVALUE else to_csv(record)


def write_output(record: RunRecord, fmt: OutputFormat, path: Optional[Path]) -> Optional[Path]:
    """Write to `path` when given; returns None when the caller should print instead."""
    if path is None:
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(render(record, fmt))
    return path


# ============================================================================
# JSON REPORTS
# ============================================================================

def config_digest(config: ExperimentConfig) -> str:
    """SHA-256 of the resolved configuration (command, parameters, seed)."""
    payload = {
        "command": config.command.value,
        "parameters": _plain(config.params().model_dump(by_alias=True)),
        "master_seed": config.master_seed,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def _load_report_index(report_dir: Path) -> Dict[str, Any]:
    """Load the report index, creating an empty one if missing."""
    index_path = report_dir / REPORT_INDEX_FILE
    if index_path.exists():
        try:
            with open(index_path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (json.JSONDecodeError, OSError):
            pass
    return {"reports": []}


def _save_report_index(report_dir: Path, index: Dict[str, Any]) -> None:
    with open(report_dir / REPORT_INDEX_FILE, 'w', encoding='utf-8') as f:
        json.dump(index, f, indent=2, ensure_ascii=False)


def write_report(record: RunRecord, config: ExperimentConfig, report_dir: Path) -> Path:
    """
    Save the record as `<command>_<sha256[:16]>.json` and list it in the index.

    Returns:
        Path of the report file
    """
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    digest = config_digest(config)
    report_path = report_dir / f"{record.command.value}_{digest[:16]}.json"

    payload = {
        "schema_version": SCHEMA_VERSION,
        "sha256": digest,
        "command": record.command.value,
        "master_seed": record.master_seed,
        "parameters": _plain(record.parameters),
        "constants": _plain(record.constants),
        "summary": _plain(record.summary),
        "columns": record.columns,
        "rows": record.frame().to_dict(orient="records"),
    }
    with open(report_path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)

    index = _load_report_index(report_dir)
    entries = [e for e in index.get("reports", []) if e.get("file") != report_path.name]
    entries.append({
        "file": report_path.name,
        "command": record.command.value,
        "sha256": digest,
        "master_seed": record.master_seed,
        "summary": _plain(record.summary),
    })
    index["reports"] = sorted(entries, key=lambda e: e["file"])
    _save_report_index(report_dir, index)
    ic("report saved", report_path)
    return report_path
