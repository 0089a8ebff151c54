"""Report documents and their JSON / text renderings."""
from __future__ import annotations

import json
import math
from typing import Any, Mapping

from .checker import CheckReport, ProofTrace
from .protocol import VIEWS, ProtocolSpec, rational_tag, view_distribution
from .sampling import HaltingStats, Trajectory


def outcome_label(o: Any) -> str:
    if isinstance(o, tuple):
        return "(" + ",".join(outcome_label(x) for x in o) + ")"
    return str(o)


def distribution_document(spec: ProtocolSpec, view: str, r: str | None = None) -> dict[str, Any]:
    dist = view_distribution(spec, view, r)
    probs = {outcome_label(o): p for o, p in dist.items()}
    return {
        "view": view,
        "r": r,
        "probabilities": probs,
        "rational": {k: rational_tag(p) for k, p in probs.items()},
        "total": math.fsum(probs.values()),
    }


def distributions_document(spec: ProtocolSpec, views=VIEWS, r: str | None = None) -> dict[str, Any]:
    return {"distributions": [distribution_document(spec, v, r if v in ("F1", "F2") else None) for v in views]}


def trace_document(trace: ProofTrace) -> dict[str, Any]:
    return trace.as_dict()


def check_document(report: CheckReport) -> dict[str, Any]:
    return report.as_dict()


def halting_document(stats: HaltingStats) -> dict[str, Any]:
    return stats.as_dict()


def trajectory_document(t: Trajectory) -> dict[str, Any]:
    return t.as_dict()


def _finite(obj: Any) -> Any:
    # JSON has no NaN; undefined statistics are reported as null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def to_json(doc: Mapping[str, Any]) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats, UTF-8 text."""
    return json.dumps(_finite(doc), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# text


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    out = [line, "  ".join("-" * w for w in widths)]
    out += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(out)


def _fmt(p: Any) -> str:
    return "-" if p is None else (f"{p:.12g}" if isinstance(p, float) else str(p))


def render_text(doc: Mapping[str, Any]) -> str:
    if "distributions" in doc:
        parts = []
        for d in doc["distributions"]:
            title = f"view {d['view']}" + (f" (r = {d['r']})" if d.get("r") else "")
            rows = [[k, _fmt(p), d["rational"][k] or ""] for k, p in d["probabilities"].items()]
            rows.append(["total", _fmt(d["total"]), ""])
            parts.append(title + "\n" + _table(["outcome", "probability", "exact"], rows))
        return "\n\n".join(parts) + "\n"
    if "steps" in doc:
        rows = [
            [str(i + 1), s["kind"], s["justification"], s["conclusion"], s["rational"] or _fmt(s["weight"])]
            for i, s in enumerate(doc["steps"])
        ]
        head = f"outcome: {doc['outcome']}"
        if doc.get("stopped_at"):
            head += f" (stopped at {doc['stopped_at']})"
        return head + "\n" + _table(["#", "kind", "by", "conclusion", "weight"], rows) + "\n"
    if "stories_examined" in doc:
        lines = [
            f"dropped: {', '.join(doc['dropped']) or 'none'}",
            f"max rounds: {doc['max_rounds']}   backend: {doc['backend']}",
            f"stories examined: {doc['stories_examined']}",
            f"satisfying: {doc['satisfying']}",
            f"witnesses verified: {doc['witnesses_verified']}",
        ]
        for i, w in enumerate(doc["witnesses"]):
            desc = w["rounds"] if isinstance(w["rounds"], str) else "; ".join(
                f"F1 r={'/'.join(p['r_F1'])} w={p['w_F1']} | F2 r={'/'.join(p['r_F2'])} z={p['z_F2']}"
                f" | A z={p['z_A']} x={p['x_A']} | W x={p['x_W']} w={p['w_W']}"
                for p in w["rounds"]
            )
            lines.append(f"  witness {i + 1}: {desc}")
        return "\n".join(lines) + "\n"
    if "ablations" in doc:
        rows = [
            [a["dropped"][0], str(a["satisfying"]), str(a["witnesses_verified"])]
            for a in doc["ablations"]
        ]
        return _table(["dropped", "satisfying", "verified"], rows) + "\n"
    if "counts" in doc:
        rows = [
            [k, str(c), _fmt(doc["frequencies"][k]), _fmt(doc["exact"][k])] for k, c in doc["counts"].items()
        ]
        return f"view {doc['view']}, {doc['trials']} x {doc['rounds_per_trajectory']} rounds\n" + _table(
            ["outcome", "count", "frequency", "exact"], rows
        ) + "\n"
    if "histogram" in doc:
        keys = ["trials", "halted", "non_halting", "total_rounds", "empirical_p", "exact_p", "sigma", "mean_halt_round"]
        return "\n".join(f"{k}: {_fmt(doc[k])}" for k in keys) + "\n"
    if "rounds" in doc:
        return (
            f"view {doc['view']}, seed {doc['seed']}: {len(doc['rounds'])} rounds, "
            f"halted_at = {doc['halted_at']}\n"
        )
    return to_json(doc)


def render(doc: Mapping[str, Any], fmt: str = "json") -> str:
    if fmt == "json":
        return to_json(doc)
    if fmt == "text":
        return render_text(doc)
    raise ValueError(f"unknown format {fmt!r}")
