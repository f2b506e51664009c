import json
import re
from pathlib import Path

import numpy as np

from nominator.graph import from_upper_rows
from nominator.graph.models import AttributedGraph, ModelParams

JSON_SUFFIXES = {".json"}


class GraphFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def graph_format(path: Path, fmt: str | None = None) -> str:
    if fmt is not None:
        if fmt not in ("json", "text"):
            raise GraphFormatError(f"unknown graph format {fmt!r}, expected json or text")
        return fmt
    return "json" if path.suffix.lower() in JSON_SUFFIXES else "text"


def parse_json_graph(content: str, index_base: int | None = None) -> AttributedGraph:
    try:
        d = json.loads(content)
    except json.JSONDecodeError as e:
        raise GraphFormatError(e.msg, e.lineno) from e

    for key in ["n", "observed_red", "edges"]:
        if key not in d:
            raise GraphFormatError(f"missing key {key!r}", 1)
    for edge in d["edges"]:
        if len(edge) != 3:
            raise GraphFormatError(f"edge {edge} must be [u, v, attr]")

    return AttributedGraph.from_dict(d, index_base=index_base)


def _parse_header(key: str, value: str, number: int) -> list[int]:
    try:
        return [int(token) for token in re.split(r"[\s,]+", value.strip()) if token]
    except ValueError as e:
        raise GraphFormatError(f"{key} expects integers, got {value.strip()!r}", number) from e


def parse_text_graph(content: str, index_base: int | None = None) -> AttributedGraph:
    """
    Upper-triangular matrix layout: header lines `observed_red: <ids>` and optionally
    `index_base: <0|1>`, then one row per vertex i = 1..n-1 holding the entries (0/1/2) for
    columns i+1..n. Blank lines and `#` comments are ignored.
    """
    observed: list[int] | None = None
    file_base = 0
    rows: list[list[int]] = []
    row_lines: list[int] = []

    for number, raw in enumerate(content.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" in line:
            key, value = (part.strip() for part in line.split(":", 1))
            if key == "observed_red":
                observed = _parse_header(key, value, number)
            elif key == "index_base":
                values = _parse_header(key, value, number)
                if values not in ([0], [1]):
                    raise GraphFormatError("index_base must be 0 or 1", number)
                file_base = values[0]
            else:
                raise GraphFormatError(f"unknown header {key!r}", number)
            continue
        try:
            row = [int(token) for token in line.split()]
        except ValueError as e:
            raise GraphFormatError(f"matrix rows hold integers, got {line!r}", number) from e
        if any(entry not in (0, 1, 2) for entry in row):
            raise GraphFormatError("matrix entries must be 0, 1 or 2", number)
        rows.append(row)
        row_lines.append(number)

    if observed is None:
        raise GraphFormatError("missing `observed_red:` header line")
    if not rows:
        raise GraphFormatError("no matrix rows found")

    n = len(rows) + 1
    for i, (row, number) in enumerate(zip(rows, row_lines)):
        if len(row) != n - i - 1:
            raise GraphFormatError(
                f"row {i + 1} of a {n}-vertex matrix holds {n - i - 1} entries, got {len(row)}",
                number,
            )

    base = file_base if index_base is None else index_base
    return from_upper_rows(rows, [v - base for v in observed])


def format_text_graph(graph: AttributedGraph, index_base: int = 0) -> str:
    lines = [
        "observed_red: " + " ".join(str(v + index_base) for v in graph.observed_red),
        f"index_base: {index_base}",
    ]
    for i in range(graph.n - 1):
        lines.append(" ".join(str(int(entry)) for entry in graph.edge_attr[i, i + 1 :]))
    return "\n".join(lines) + "\n"


def format_json_graph(graph: AttributedGraph, index_base: int = 0) -> str:
    return json.dumps(graph.to_dict(index_base), separators=(",", ":")) + "\n"


def recorded_index_base(content: str, fmt: str) -> int:
    """Id base a graph file declares for itself (0 when it declares none)."""
    if fmt == "json":
        try:
            return int(json.loads(content).get("index_base", 0))
        except (json.JSONDecodeError, AttributeError, TypeError, ValueError):
            return 0
    match = re.search(r"^\s*index_base:\s*([01])\s*(?:#.*)?$", content, flags=re.MULTILINE)
    return int(match.group(1)) if match else 0


def read_graph(
    path: Path | str, *, index_base: int | None = None, fmt: str | None = None
) -> tuple[AttributedGraph, int]:
    """
    :param index_base: overrides the id base recorded in the file (Table 1 style files use 1)
    :raises GraphFormatError: with the offending line number where one exists
    :raises OSError: if the file cannot be read
    :return: the graph with 0-based ids and the id base used to read it
    """
    path = Path(path)
    content = path.read_text()
    fmt = graph_format(path, fmt)
    base = recorded_index_base(content, fmt) if index_base is None else index_base
    if fmt == "json":
        return parse_json_graph(content, base), base
    return parse_text_graph(content, base), base


def write_graph(
    graph: AttributedGraph, path: Path | str, *, index_base: int = 0, fmt: str | None = None
) -> Path:
    path = Path(path)
    if graph_format(path, fmt) == "json":
        path.write_text(format_json_graph(graph, index_base))
    else:
        path.write_text(format_text_graph(graph, index_base))
    return path


def truth_path(graph_path: Path) -> Path:
    return graph_path.with_name(f"{graph_path.stem}.truth.json")


def write_truth(path: Path | str, red_ids, params: ModelParams | None = None) -> Path:
    """Ground truth lives beside the graph file, never inside it."""
    path = Path(path)
    d: dict = {"index_base": 0, "red": sorted(int(v) for v in red_ids)}
    if params is not None:
        d["params"] = params.as_dict()
    path.write_text(json.dumps(d, sort_keys=True) + "\n")
    return path


def read_truth(path: Path | str) -> tuple[np.ndarray, ModelParams | None]:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise GraphFormatError(e.msg, e.lineno) from e
    if "red" not in d:
        raise GraphFormatError("truth file is missing key 'red'", 1)

    base = int(d.get("index_base", 0))
    params = ModelParams.from_dict(d["params"]) if "params" in d else None
    return np.array(sorted(int(v) - base for v in d["red"]), dtype=np.int64), params
