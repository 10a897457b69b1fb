"""Versioned, deterministic JSON reports and their plain-text rendering."""

from __future__ import annotations

import enum
import json
import math

import numpy as np

from .graph import CausalGraph, FairnessCriterion, separating_set, table_form
from .shift import ShiftClassification, ShiftTestResult

SCHEMA_VERSION = 1


def _clean(obj):
    """Recursively convert to JSON-safe builtins; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_clean(v) for v in obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads(text: str) -> dict:
    return json.loads(text)


def shift_result_to_dict(res: ShiftTestResult) -> dict:
    return {
        "node": res.node,
        "scheme": res.scheme.value,
        "alpha": res.alpha,
        "blocking_set": list(res.blocking_set),
        "summary_used": res.summary_used,
        "verdict": res.verdict.value,
        "dimensions": [
            {
                "name": name,
                "statistic": r.statistic,
                "df": r.df,
                "p_value": r.p_value,
                "means": list(r.means),
                "ess": list(r.ess),
                "significant": sig,
            }
            for name, r, sig in zip(res.dims, res.results, res.significant)
        ],
        "propensity": res.propensity,
        "missing_rows_dropped": list(res.n_missing_dropped),
        "warnings": list(res.warnings),
    }


def classification_to_dict(cls: ShiftClassification) -> dict:
    return {"verdict": cls.verdict.value, "contributing": {k: list(v) for k, v in cls.contributing.items()}}


def separating_sets_block(graph: CausalGraph) -> dict:
    out = {}
    for crit in FairnessCriterion:
        fam = separating_set(graph, crit)
        out[crit.value] = {
            "maximal": [sorted(s) for s in fam],
            "table": [sorted(s) for s in table_form(fam, graph, crit)],
            "trivial_predictor": not fam,
        }
    return out


def format_family(family) -> str:
    return ", ".join("{" + ", ".join(sorted(s)) + "}" for s in family)


def render_text(report: dict) -> str:
    """Human-readable summary; the JSON document remains the contract."""
    lines = [f"{report.get('tool', 'shiftaudit')} {report.get('tool_version', '')} - {report.get('command', '')}"]
    tests = report.get("shift_tests") or {}
    for node in sorted(tests):
        for scheme, res in sorted(tests[node].items()):
            ps = ", ".join(f"{d['name']}: p={d['p_value']:.3g}" for d in res["dimensions"])
            lines.append(f"  {node} [{scheme}] blocking={res['blocking_set']} -> {res['verdict']} ({ps})")
    if "classification" in report:
        c = report["classification"]
        lines.append(f"shift verdict: {c['verdict']}")
        for cat, nodes in sorted(c["contributing"].items()):
            if nodes:
                lines.append(f"  {cat}: {', '.join(nodes)}")
    for crit, block in sorted((report.get("separating_sets") or {}).items()):
        if block["trivial_predictor"]:
            lines.append(f"separating set [{crit}]: no valid set: trivial predictor")
        else:
            lines.append(f"separating set [{crit}]: {format_family(block['table'])}")
    fair = report.get("fairness")
    if fair:
        for env in ("source", "target"):
            m = fair[env]
            lines.append(f"{env}: dp_gap={m['demographic_parity_gap']} eo_gap={m['equalized_odds_gap']}")
            for name, acc in sorted(m["accuracy"].items()):
                lines.append(f"  {name} accuracy gap={acc['gap']:.4f} {acc['per_group']}")
        lines.append("deltas: " + ", ".join(f"{k}={v}" for k, v in sorted(fair["deltas"].items())))
    mit = report.get("mitigation")
    if mit:
        for env in ("source", "target"):
            b, a = mit[env]["before"], mit[env]["after"]
            lines.append(f"{env} {mit['criterion']} gap: {b['gap']:.4f}±{b['se']:.4f} -> {a['gap']:.4f}±{a['se']:.4f}")
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"
