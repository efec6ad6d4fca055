"""Report (de)serialization, CSV export and text rendering."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

from toolshap.core import AgentResponse, Coalition, CoalitionEvaluation, ShapleyReport

REPORT_VERSION = 1
BAR_WIDTH = 40
BAR_CHAR = "█"


def report_to_dict(report: ShapleyReport, metrics: dict | None = None) -> dict:
    d = {
        "version": REPORT_VERSION,
        "config": {
            "prompt": report.prompt,
            "estimator": report.estimator,
            "permutations": report.permutations,
            "seed": report.seed,
            "rho": report.sampling_ratio,
            "backend": report.backend,
            "agent_id": report.agent_id,
            "catalog_fingerprint": report.catalog_fingerprint,
            "evaluation_count": len(report.evaluations),
        },
        "baseline_text": report.baseline_text,
        "tools": list(report.tools),
        "phi": list(report.phi),
        "shares": list(report.shares),
        "top_tool": report.top_tool(),
        "evaluations": [
            {
                "members": list(e.members),
                "mask": e.coalition.mask,
                "value": e.value,
                "phase": e.phase,
                "response": e.response.to_dict(),
            }
            for e in report.evaluations
        ],
    }
    if metrics is not None:
        d["metrics"] = metrics
    return d


def report_from_dict(d: dict) -> ShapleyReport:
    if d.get("version") != REPORT_VERSION:
        raise ValueError(f"unsupported report version {d.get('version')!r}")
    cfg = d["config"]
    fp = cfg["catalog_fingerprint"]
    evaluations = tuple(
        CoalitionEvaluation(
            Coalition(int(e["mask"]), fp),
            tuple(e["members"]),
            AgentResponse.from_dict(e["response"]),
            float(e["value"]),
            e["phase"],
        )
        for e in d["evaluations"]
    )
    return ShapleyReport(
        tools=tuple(d["tools"]),
        phi=tuple(float(x) for x in d["phi"]),
        shares=tuple(float(x) for x in d["shares"]),
        estimator=cfg["estimator"],
        seed=int(cfg["seed"]),
        sampling_ratio=float(cfg["rho"]),
        evaluations=evaluations,
        baseline_text=d["baseline_text"],
        prompt=cfg.get("prompt", ""),
        catalog_fingerprint=fp,
        backend=cfg.get("backend", "tf_cosine"),
        agent_id=cfg.get("agent_id", ""),
        permutations=cfg.get("permutations"),
    )


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_atomic(path: str | Path, text: str) -> Path:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def write_report(report: ShapleyReport, path: str | Path, metrics: dict | None = None) -> Path:
    return write_atomic(path, dumps(report_to_dict(report, metrics)))


def read_report(path: str | Path) -> ShapleyReport:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def report_csv(report: ShapleyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tool", "phi", "share"])
    for name, phi, share in zip(report.tools, report.phi, report.shares):
        writer.writerow([name, repr(phi), repr(share)])
    return buf.getvalue()


def render_bar_chart(report: ShapleyReport, width: int = BAR_WIDTH) -> str:
    """One line per tool, highest score first; the largest positive score gets a full bar."""
    order = sorted(range(len(report.tools)), key=lambda i: (-report.phi[i], i))
    top = max(report.phi, default=0.0)
    name_w = max((len(t) for t in report.tools), default=4)
    lines = []
    for i in order:
        phi = report.phi[i]
        bar = math.floor(phi / top * width) if top > 0 and phi > 0 else 0
        lines.append(
            f"{report.tools[i]:<{name_w}}  {phi:>7.3f}  {report.shares[i]:>6.1%}  {BAR_CHAR * bar}".rstrip()
        )
    return "\n".join(lines)


def render_table(report: ShapleyReport) -> str:
    header = [
        f"prompt:     {report.prompt}",
        f"estimator:  {report.estimator}  rho={report.sampling_ratio}  seed={report.seed}",
        f"backend:    {report.backend}  evaluations={len(report.evaluations)}",
        f"top tool:   {report.top_tool()} (ties go to the earlier catalog entry)",
        "",
    ]
    return "\n".join([*header, render_bar_chart(report)])
