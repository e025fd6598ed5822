"""
ResultsWriter: trial reports and sweep tables as CSV.

Layout: leading "# key=value" metadata lines, the header
trial,min_tp_bps,avg_tp_bps,avg_lux,uniformity, one row per trial, then a "mean" and a
"stderr" row. Floats are written with repr so a re-read report is bit-identical.
"""

import csv
from pathlib import Path
from typing import Dict, List, Sequence

from simulation.trials import METRICS, TrialRecord, TrialReport
from utils import format_float, parse_float

HEADER = ["trial", *METRICS]


class ResultsWriter:
    """Writes one trial report incrementally."""

    def __init__(self, output_path: Path):
        self.output_path = Path(output_path)
        self.file_handle = None
        self.writer = None
        self.rows_written = 0

    def initialize(self, metadata: Dict[str, str]):
        self.output_path.parent.mkdir(parents=True, exist_ok=True)
        self.file_handle = open(self.output_path, "w", encoding="utf-8", newline="")
        for key, value in metadata.items():
            self.file_handle.write(f"# {key}={value}\n")
        self.writer = csv.writer(self.file_handle, lineterminator="\n")
        self.writer.writerow(HEADER)

    def write_record(self, record: TrialRecord):
        if self.writer is None:
            raise RuntimeError("ResultsWriter.initialize() must be called first")
        self.writer.writerow([record.trial] + [format_float(getattr(record, m)) for m in METRICS])
        self.rows_written += 1

    def finalize(self, report: TrialReport):
        for label, values in (("mean", report.mean()), ("stderr", report.stderr())):
            self.writer.writerow([label] + [format_float(values[m]) for m in METRICS])
        self.file_handle.close()
        self.file_handle = None
        self.writer = None


def emit_results(report: TrialReport, path) -> Path:
    writer = ResultsWriter(Path(path))
    try:
        writer.initialize(report.metadata)
        for record in report.records:
            writer.write_record(record)
        writer.finalize(report)
    except OSError as e:
        raise OSError(f"Cannot write results to {path}: {e}") from e
    return writer.output_path


def read_results(path) -> TrialReport:
    """Re-read a results CSV; the summary rows are recomputed, not trusted."""
    path = Path(path)
    metadata: Dict[str, str] = {}
    records: List[TrialRecord] = []
    with open(path, encoding="utf-8", newline="") as handle:
        lines = handle.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            metadata[key] = value
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or rows[0] != HEADER:
        raise ValueError(f"{path}: missing results header {','.join(HEADER)}")
    for row in rows[1:]:
        if row[0] in ("mean", "stderr"):
            continue
        records.append(TrialRecord(int(row[0]), *(parse_float(v) for v in row[1:])))
    return TrialReport(records=records, metadata=metadata)


def emit_sweep(rows: Sequence[Dict[str, object]], path) -> Path:
    """One CSV row per sweep point; columns are the union of keys in first-seen order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns: List[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [format_float(row[c]) if isinstance(row.get(c), float) else row.get(c, "") for c in columns]
            )
    return path
