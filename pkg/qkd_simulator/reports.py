"""Report persistence for the QKD simulator."""
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from tabulate import tabulate

from qkd_simulator.logging_config import get_logger

logger = get_logger("reports")


def dumps_json(payload: Dict[str, Any]) -> str:
    """Serialize with the payload's own key order, so equal reports are equal bytes."""
    return json.dumps(payload, indent=2) + "\n"


def frame_to_csv(rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
    frame = pd.DataFrame(list(rows), columns=columns)
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


class ReportManager:
    """
    Writes reports to a file, or to standard output when no path is set.
    """

    def __init__(self, output_path: Optional[str] = None):
        """Initialize report manager."""
        self.output_path = Path(output_path) if output_path else None

    def _target(self, suffix: Optional[str]) -> Optional[Path]:
        if self.output_path is None:
            return None
        return self.output_path.with_suffix(suffix) if suffix else self.output_path

    def _emit(self, text: str, suffix: Optional[str] = None) -> Optional[Path]:
        target = self._target(suffix)
        if target is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return None
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True)
        with open(target, "w", newline="") as f:
            f.write(text)
        logger.info(f"Wrote {target}")
        return target

    def save_json(self, payload: Dict[str, Any], suffix: Optional[str] = None) -> Optional[Path]:
        """Save a JSON report."""
        return self._emit(dumps_json(payload), suffix)

    def save_csv(self, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None,
                 suffix: Optional[str] = None) -> Optional[Path]:
        """Save rows as CSV."""
        return self._emit(frame_to_csv(rows, columns), suffix)

    def save_table(self, rows: Sequence[Dict[str, Any]], title: Optional[str] = None) -> Optional[Path]:
        """Save rows as a plain-text table."""
        table = tabulate(rows, headers="keys", tablefmt="grid")
        text = f"{title}\n{table}\n" if title else f"{table}\n"
        return self._emit(text)

    def load_json(self, suffix: Optional[str] = None) -> Dict[str, Any]:
        """Load a JSON report written by save_json."""
        target = self._target(suffix)
        if target is None:
            raise FileNotFoundError("no output path to load from")
        with open(target, "r") as f:
            return json.load(f)

    def load_csv(self, suffix: Optional[str] = None) -> pd.DataFrame:
        target = self._target(suffix)
        if target is None:
            raise FileNotFoundError("no output path to load from")
        return pd.read_csv(target)
