"""
Results Writer
Writes run results (JSON documents, JSON lines, CSV tables, HTML figures) under the output directory
"""

import fcntl
import json
import logging
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
import plotly.graph_objects as go

logger = logging.getLogger(__name__)


def to_jsonable(obj: Any) -> Any:
    """Plain JSON value for records, dataclasses and numpy scalars"""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def dumps(obj: Any, indent: Optional[int] = 2) -> str:
    return json.dumps(to_jsonable(obj), indent=indent, sort_keys=True)


class ResultsWriter:
    """
    Writes result files for one CLI run

    Files (names chosen by the command):
    - <name>.json: single documents (reports, transcripts, certificates)
    - <name>.jsonl: one record per line
    - <name>.csv: summary tables and domain grids
    - <name>.html: optional domain-grid figure
    """

    def __init__(self, out_dir: str = "results"):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def _locked_write(self, file_path: Path, text: str) -> Path:
        with open(file_path, "w") as f:
            fcntl.flock(f.fileno(), fcntl.LOCK_EX)
            f.write(text)
            fcntl.flock(f.fileno(), fcntl.LOCK_UN)
        logger.debug(f"wrote {file_path}")
        return file_path

    def read_json(self, name: str, default: Optional[Any] = None) -> Any:
        """Read a JSON document with a shared lock"""
        file_path = self.path(name)
        if not file_path.exists():
            return default
        with open(file_path, "r") as f:
            fcntl.flock(f.fileno(), fcntl.LOCK_SH)
            data = json.load(f)
            fcntl.flock(f.fileno(), fcntl.LOCK_UN)
        return data

    def write_json(self, name: str, data: Any) -> Path:
        return self._locked_write(self.path(name), dumps(data) + "\n")

    def write_jsonl(self, name: str, records: Iterable[Any]) -> Path:
        lines = [dumps(r, indent=None) for r in records]
        return self._locked_write(self.path(name), "".join(line + "\n" for line in lines))

    def write_csv(self, name: str, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> Path:
        df = pd.DataFrame(list(rows), columns=columns)
        return self._locked_write(self.path(name), df.to_csv(index=False))

    def write_domain_html(self, name: str, x: np.ndarray, y: np.ndarray, mask: np.ndarray, title: str) -> Path:
        """Scatter of grid points coloured by domain membership"""
        fig = go.Figure()
        inside = np.asarray(mask, dtype=bool)
        fig.add_trace(go.Scatter(
            x=np.asarray(x)[inside], y=np.asarray(y)[inside],
            mode='markers', name='in domain',
            marker=dict(color='#1f77b4', size=4)
        ))
        fig.add_trace(go.Scatter(
            x=np.asarray(x)[~inside], y=np.asarray(y)[~inside],
            mode='markers', name='outside',
            marker=dict(color='lightgray', size=4)
        ))
        fig.update_layout(
            title=title,
            height=600, width=600,
            xaxis_title="Re z", yaxis_title="Im z",
            yaxis=dict(scaleanchor="x", scaleratio=1),
        )
        file_path = self.path(name)
        fig.write_html(str(file_path), include_plotlyjs="cdn", div_id="domain-map")
        return file_path
