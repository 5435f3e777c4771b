"""CSV and text files of an evaluation run."""

import csv
import logging
from pathlib import Path
from typing import Any, List, Sequence

from models import ComplexityRow, EvalReport


logger = logging.getLogger(__name__)

EVAL_HEADER = ["sequence", "tool", "qp", "bitrate_kbps", "psnr", "ssim", "msssim", "external_metric"]
BD_HEADER = ["sequence", "metric", "bd_rate", "error"]
COMPLEXITY_HEADER = ["name", "parameters", "parameter_ratio", "runtime_ms", "runtime_ratio", "rss_mb"]


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return value


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[dict]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row[key]) for key in header])
    return path


def write_complexity(rows: Sequence[ComplexityRow], out_dir: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _write_csv(out / "complexity.csv", COMPLEXITY_HEADER, [r.to_dict() for r in rows])


def summary_lines(report: EvalReport) -> List[str]:
    lines = [f"Tool: {report.tool}", f"Rows: {len(report.rows)}"]
    if report.external_metric_source:
        lines.append(f"External metric computed by: {report.external_metric_source}")
    lines.append("BD-rate (negative = coding gain):")
    for entry in report.bd_rates:
        if entry.bd_rate is None:
            lines.append(f"  {entry.sequence} {entry.metric}: n/a ({entry.error})")
        else:
            lines.append(f"  {entry.sequence} {entry.metric}: {entry.bd_rate:+.2f}%")
    if report.complexity:
        lines.append("Relative complexity:")
        lines.extend(
            f"  {c.name}: {c.parameters} parameters (x{c.parameter_ratio:.2f}), "
            f"{c.runtime_ms:.2f} ms (x{c.runtime_ratio:.2f})"
            for c in report.complexity
        )
    if report.errors:
        lines.append(f"Errors ({len(report.errors)}):")
        lines.extend(f"  {name}: {message}" for name, message in sorted(report.errors.items()))
    return lines


def write_report(report: EvalReport, out_dir: str) -> Path:
    """eval_report.csv, bd_rates.csv, summary.txt and complexity.csv when measured."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = _write_csv(out / "eval_report.csv", EVAL_HEADER, [r.to_dict() for r in report.rows])
    _write_csv(out / "bd_rates.csv", BD_HEADER, [b.to_dict() for b in report.bd_rates])
    if report.complexity:
        write_complexity(report.complexity, out_dir)
    (out / "summary.txt").write_text("\n".join(summary_lines(report)) + "\n", encoding="utf-8")
    logger.info(f"Evaluation report written to {out}")
    return csv_path
