"""Run artifacts on disk: estimate JSON, trace or ledger CSV, and a text summary."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING
from typing import Any

from rarevent.dependencies import get_pandas

if TYPE_CHECKING:
    from rarevent.estimate import FailureEstimate

_logger = logging.getLogger(__name__)

ESTIMATE_FILE = "estimate.json"
TRACE_FILE = "trace.csv"
LEDGER_FILE = "ledger.csv"
SUMMARY_FILE = "summary.txt"

REPORT_ROWS = ("p_f", "cov", "beta", "hf_calls", "total_samples")
CURVE_COLUMNS = ("run", "subset", "sample_index", "cumulative_hf_calls")


def _jsonable(value: Any) -> Any:
    """Plain JSON values only: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def estimate_document(
    estimate: FailureEstimate, *, config: dict[str, Any], seed: int
) -> dict[str, Any]:
    document = estimate.to_dict()
    document.setdefault("strategy", None)
    document["seed"] = seed
    document["config"] = config
    return _jsonable(document)  # type: ignore[no-any-return]


def dumps_estimate(document: dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"


def format_value(value: Any) -> str:
    """
    Text for a report cell. Floats keep their full `repr` so cells match the JSON.

    Examples:
        >>> from rarevent.persistence import format_value
        >>> format_value(8.45e-09), format_value(None), format_value(4211)
        ('8.45e-09', 'N/A', '4211')
    """
    if value is None:
        return "N/A"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_summary(document: dict[str, Any]) -> str:
    lines = [
        f"driver:          {document.get('driver')}",
        f"strategy:        {format_value(document.get('strategy'))}",
        f"seed:            {document.get('seed')}",
        f"P_f:             {format_value(document.get('p_f'))}",
        f"COV:             {format_value(document.get('cov'))}",
        f"beta:            {format_value(document.get('beta'))}",
        f"HF calls:        {document.get('hf_calls')}",
        f"samples:         {document.get('total_samples')}",
        f"converged:       {document.get('converged')}",
        f"degenerate:      {document.get('degenerate')}",
    ]
    if "thresholds" in document:
        thresholds = ", ".join(format_value(t) for t in document["thresholds"])
        lines.append(f"thresholds:      {thresholds}")
    if "simulated_time_s" in document:
        lines.append(f"simulated time:  {format_value(document['simulated_time_s'])} s")
    return "\n".join(lines) + "\n"


def write_run(
    directory: str | Path,
    estimate: FailureEstimate,
    *,
    config: dict[str, Any],
    seed: int,
) -> Path:
    """
    Write the artifacts of one run into `directory` (created if missing).

    Coupled runs get `ledger.csv`, the other drivers `trace.csv`.

    Returns:
        The path of the estimate JSON.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    document = estimate_document(estimate, config=config, seed=seed)
    target = out / ESTIMATE_FILE
    target.write_text(dumps_estimate(document), encoding="utf-8")
    if estimate.trace is not None:
        name = LEDGER_FILE if document.get("driver") == "coupled" else TRACE_FILE
        estimate.trace.to_csv(out / name, index=False)
    (out / SUMMARY_FILE).write_text(render_summary(document), encoding="utf-8")
    _logger.info("Wrote run artifacts to %s", out)
    return target


def find_runs(directory: str | Path) -> list[Path]:
    root = Path(directory)
    return sorted(root.rglob(ESTIMATE_FILE))


def _run_label(path: Path, root: Path) -> str:
    parent = path.parent.relative_to(root)
    return root.name if str(parent) == "." else parent.as_posix()


def read_runs(directory: str | Path) -> dict[str, dict[str, Any]]:
    """
    Load every estimate JSON under `directory`, keyed by run label.

    Unreadable files are skipped with a warning.
    """
    root = Path(directory)
    runs: dict[str, dict[str, Any]] = {}
    for path in find_runs(root):
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            _logger.warning("Skipping unreadable estimate %s: %s", path, exc)
            continue
        if not isinstance(document, dict):
            _logger.warning("Skipping %s: expected a JSON object", path)
            continue
        runs[_run_label(path, root)] = document
    return runs


def report_table(runs: dict[str, dict[str, Any]]) -> Any:
    """Rows `p_f, cov, beta, hf_calls, total_samples`, one column per run."""
    pd = get_pandas()
    columns = {
        label: [format_value(doc.get(key)) for key in REPORT_ROWS]
        for label, doc in runs.items()
    }
    return pd.DataFrame(columns, index=list(REPORT_ROWS))


def cumulative_curves(directory: str | Path, labels: list[str]) -> Any:
    """Cumulative HF calls against sample index for every coupled run with a ledger."""
    pd = get_pandas()
    root = Path(directory)
    frames = []
    for label in labels:
        run_dir = root if label == root.name else root / label
        ledger = run_dir / LEDGER_FILE
        if not ledger.is_file():
            continue
        frame = pd.read_csv(ledger, usecols=list(CURVE_COLUMNS[1:]))
        frame.insert(0, "run", label)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=list(CURVE_COLUMNS))
    return pd.concat(frames, ignore_index=True)


__all__ = [
    "ESTIMATE_FILE",
    "LEDGER_FILE",
    "REPORT_ROWS",
    "SUMMARY_FILE",
    "TRACE_FILE",
    "cumulative_curves",
    "dumps_estimate",
    "estimate_document",
    "format_value",
    "read_runs",
    "render_summary",
    "report_table",
    "write_run",
]
