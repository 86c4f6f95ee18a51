"""File formats of the toolkit: moments, correlation and quote files.

Moments files use the MDL associative-vector syntax (universe, er/std
vectors, optional filter scalars); correlation files carry a header of
asset names then a dense matrix, one row per line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mdl import Assign, Literal, MdlError, parse_source
from .moments import FilterResult, MomentSet, PriceSeries, parse_price_series


def read_moments_text(text: str) -> tuple[list[str], np.ndarray, np.ndarray, dict]:
    """Moments file -> (names, er, std, scalar params such as extrap)."""
    program = parse_source(text)
    names: list[str] = []
    vectors: dict[str, dict[str, float]] = {}
    params: dict[str, float] = {}
    for st in program.statements:
        if not isinstance(st, Assign):
            raise MdlError("moments files contain only assignments", getattr(st, "line", None))
        if st.name == "all":
            if not isinstance(st.expr, Literal):
                raise MdlError("the universe must be a literal list", st.line)
            names = [e.name for e in st.expr.entries]
        elif isinstance(st.expr, Literal):
            vectors[st.name] = {e.name: float(e.value) for e in st.expr.entries}
        else:
            from .mdl import Num, UnOp
            node = st.expr
            sign = 1.0
            while isinstance(node, UnOp) and node.op == "-":
                sign = -sign
                node = node.operand
            if not isinstance(node, Num):
                raise MdlError(f"parameter {st.name} must be a number", st.line)
            params[st.name.lower()] = sign * node.value
    if not names:
        raise MdlError("moments file lacks the universe definition")
    for key in ("er", "std"):
        if key not in vectors:
            raise MdlError(f"moments file lacks the {key} vector")
        missing = [nm for nm in names if nm not in vectors[key]]
        if missing:
            raise MdlError(f"{key} missing entries for {', '.join(missing)}")
    er = np.array([vectors["er"][nm] for nm in names])
    std = np.array([vectors["std"][nm] for nm in names])
    return names, er, std, params


def write_moments_text(names, er, std, params: dict | None = None) -> str:
    def vector(label, values):
        entries = ", ".join(f"{v:.6e}@{nm}" for nm, v in zip(names, values))
        return f"{label}[all]={{\n{entries} }};\n"

    out = ["all={", ",".join(names) + "};", ""]
    text = "\n".join(out) + "\n"
    text += vector("er", er) + "\n" + vector("std", std) + "\n"
    for key, value in (params or {}).items():
        text += f"{key}={value:g};\n"
    return text


def read_correl_text(text: str) -> tuple[list[str], np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty correlation file")
    names = lines[0].split()
    n = len(names)
    if len(lines) - 1 < n:
        raise ValueError(f"correlation file needs {n} matrix rows, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:n + 1]:
        row = [float(tok) for tok in ln.split()]
        if len(row) != n:
            raise ValueError(f"correlation row has {len(row)} entries, expected {n}")
        rows.append(row)
    return names, np.array(rows)


def write_correl_text(names, correl: np.ndarray) -> str:
    lines = [" ".join(names)]
    for row in np.asarray(correl, dtype=float):
        lines.append(" ".join(f"{v:.10f}" for v in row))
    return "\n".join(lines) + "\n"


def moments_from_files(moments_text: str, correl_text: str) -> tuple[MomentSet, dict]:
    names, er, std, params = read_moments_text(moments_text)
    cnames, correl = read_correl_text(correl_text)
    if set(cnames) != set(names):
        raise ValueError("correlation file names disagree with the moments file")
    order = [cnames.index(nm) for nm in names]
    correl = correl[np.ix_(order, order)]
    return MomentSet(names, er, std, correl), params


def filter_output_texts(result: FilterResult, params: dict | None = None) -> tuple[str, str]:
    ms = result.moments
    return (
        write_moments_text(ms.names, ms.er, ms.std, params),
        write_correl_text(ms.names, ms.correl),
    )


def load_series_dir(data_dir: str | Path, extension: str = "ofc",
                    deflator: str = "dolof.ofc") -> list[PriceSeries]:
    """Every *.extension quote file in the directory, minus the deflator."""
    root = Path(data_dir)
    series = []
    for path in sorted(root.glob(f"*.{extension}")) + sorted(root.glob(f"*.{extension.upper()}")):
        if path.name.lower() == deflator.lower():
            continue
        series.append(parse_price_series(path.read_text(), name_hint=path.stem))
    if not series:
        raise FileNotFoundError(f"no *.{extension} quote files under {root}")
    return series
