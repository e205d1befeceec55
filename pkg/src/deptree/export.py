"""DOT graphs, JSON reports and CSV tables."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .model import FaultTree
from .petri import StochasticPetriNet


def _q(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def fault_tree_dot(ft: FaultTree) -> str:
    """Gates as boxes labelled with their type, basic events as ellipses."""
    lines = [f"digraph {_q(ft.id)} {{", "  rankdir=TB;"]
    for g, gate in ft.gates.items():
        lines.append(f"  {_q(g)} [shape=box, label={_q(g + ' ' + gate.kind)}];")
    for e in ft.basic_event_order():
        style = ", style=filled, fillcolor=lightgrey" if ft.events[e].group else ""
        lines.append(f"  {_q(e)} [shape=ellipse{style}];")
    for g, gate in ft.gates.items():
        for c in gate.inputs:
            lines.append(f"  {_q(g)} -> {_q(c)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def petri_net_dot(net: StochasticPetriNet, name: str = "net") -> str:
    """Places as circles, transitions as bars; inhibitor arcs end in a circle."""
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]
    for p, tokens in net.places.items():
        label = f"{p}\\n{tokens}" if tokens else p
        lines.append(f'  {_q(p)} [shape=circle, label="{label}"];')
    for t in net.transitions:
        lines.append(f"  {_q(t.id)} [shape=box, height=0.1, style=filled, fillcolor=black, fontcolor=white];")
    for t in net.transitions:
        for p, w in t.inputs.items():
            lines.append(f"  {_q(p)} -> {_q(t.id)}" + (f' [label="{w}"]' if w != 1 else "") + ";")
        for p, w in t.outputs.items():
            lines.append(f"  {_q(t.id)} -> {_q(p)}" + (f' [label="{w}"]' if w != 1 else "") + ";")
        for p in t.inhibitors:
            lines.append(f"  {_q(p)} -> {_q(t.id)} [arrowhead=odot];")
        for p in t.tests:
            lines.append(f"  {_q(p)} -> {_q(t.id)} [style=dotted];")
        for p in t.resets:
            lines.append(f"  {_q(t.id)} -> {_q(p)} [style=dashed, label=reset];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_plain(value):
    """Recursively convert numpy values to JSON-compatible Python values.

    Non-finite floats become ``None``.
    """
    if isinstance(value, Mapping):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def dumps_report(report: Mapping) -> str:
    return json.dumps(to_plain(report), indent=2, allow_nan=False) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """RFC 4180 CSV with CRLF line ends; floats in shortest round-trip form."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def loss_csv(result: Mapping) -> str:
    rows = [(k, v) for k, v in result["loss_frequencies"].items()]
    rows.append(("total", result["total"]))
    return csv_text(["consequence", "frequency_per_hour"], rows)


def path_csv(rows: Sequence[Mapping]) -> str:
    labels: list[str] = []
    for r in rows:
        for label in r["factors"]:
            if label not in labels:
                labels.append(label)
    header = ["path", "literals"] + [f"{lb}_literals" for lb in labels] + [f"{lb}_value" for lb in labels] + ["probability"]
    out = []
    for r in rows:
        f = r["factors"]
        out.append(
            [r["path"], r["literals"]]
            + [f[lb]["literals"] if lb in f else "" for lb in labels]
            + [f[lb]["value"] if lb in f else None for lb in labels]
            + [r["probability"]]
        )
    return csv_text(header, out)
