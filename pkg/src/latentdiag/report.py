"""Report bundles: deterministic JSON, derived Markdown, and the one-pass full report."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import __version__, seeding
from .data import Dataset, FactorPartition, default_partition
from .errors import DataError
from .geometry import svd_geometry
from .infometrics import dci, factor_alignment, mi_per_factor, mig, sap
from .probes import ProbeConfig, ProbeResult, cv_probe

# sub-seed keys for full_report; part of the reproducibility contract
_LINEAR, _MLP, _MI, _DCI = 10, 11, 12, 13


@dataclass
class ReportBundle:
    invocation: Any
    seed: int
    sections: dict[str, Any] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    tool_version: str = __version__

    def add_flags(self, flags) -> None:
        for f in flags:
            if f not in self.flags:
                self.flags.append(f)

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "invocation": self.invocation,
            "seed": self.seed,
            "sections": self.sections,
            "flags": list(self.flags),
        }


# -- JSON --------------------------------------------------------------------

def format_float(x: float) -> str:
    """17 significant digits; non-finite values become JSON strings."""
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    s = f"{x:.17g}"
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _encode(obj, out: list[str]) -> None:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj, key=str)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(obj.tolist() if isinstance(obj, np.ndarray) else obj):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__} in a report")


def to_json(payload) -> str:
    """Byte-stable JSON: sorted keys, 17-significant-digit floats, trailing newline."""
    if isinstance(payload, ReportBundle):
        payload = payload.to_dict()
    out: list[str] = []
    _encode(payload, out)
    return "".join(out) + "\n"


# -- Markdown ----------------------------------------------------------------

def _num(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "yes" if x else "no"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return f"{x:.4f}"


def _table(header: list[str], rows: list[list]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(_num(c) if not isinstance(c, str) else c for c in r) + " |"
              for r in rows]
    return lines


def _probe_md(sec: dict) -> list[str]:
    kinds = sorted(sec["overall"])
    rows = [[name] + [sec["factors"][name].get(k) for k in kinds] for name in sec["factor_order"]]
    rows.append(["**Overall**"] + [sec["overall"][k] for k in kinds])
    return _table(["Factor"] + [k.upper() if k == "mlp" else k.capitalize() for k in kinds], rows)


def _mi_md(sec: dict) -> list[str]:
    rows = [["**Overall**", sec["overall_mi"]]]
    rows += [[name, sec["per_factor_mi"][name]] for name in sec["factor_order"]]
    return _table(["Factor", "MI (nats)"], rows)


def _geometry_md(sec: dict) -> list[str]:
    return _table(["Metric", "Value"], [
        ["Effective rank", sec["effective_rank"]],
        ["Participation ratio", sec["participation_ratio"]],
        ["Condition number", sec["condition_number"]],
    ])


def _importance_md(sec: dict) -> list[str]:
    rows = [[dim] + list(row) for dim, row in zip(sec["dims"], np.asarray(sec["matrix"]))]
    return _table(["Dim"] + list(sec["factors"]), rows)


_LABELS = {"mig": "MIG", "dci_disent": "DCI Disent.", "dci_complete": "DCI Complete",
           "dci_inform": "DCI Info.", "sap": "SAP"}


def _scalars_md(sec: dict) -> list[str]:
    rows = [[_LABELS.get(k, k), v] for k, v in sorted(sec.items())
            if v is None or isinstance(v, (int, float, str, bool, np.number))]
    return _table(["Metric", "Value"], rows)


_RENDERERS = {"probe": _probe_md, "mi": _mi_md, "geometry": _geometry_md,
              "dci_importance": _importance_md}


def report_markdown(bundle: ReportBundle) -> str:
    lines = ["# latentdiag report", "", f"- tool version: {bundle.tool_version}",
             f"- seed: {bundle.seed}", ""]
    for name in sorted(bundle.sections):
        sec = bundle.sections[name]
        lines.append(f"## {name}")
        lines.append("")
        if isinstance(sec, dict):
            lines += _RENDERERS.get(name, _scalars_md)(sec)
        else:
            lines.append(_num(sec))
        lines.append("")
    if bundle.flags:
        lines += ["## Flags", ""] + [f"- {f}" for f in bundle.flags] + [""]
    return "\n".join(lines)


# -- section payloads --------------------------------------------------------

def probe_section(results: list[ProbeResult], factor_order) -> dict:
    factors = {n: {r.kind: r.per_factor_r2[n] for r in results} for n in factor_order}
    return {
        "factor_order": list(factor_order),
        "factors": factors,
        "overall": {r.kind: r.overall_r2 for r in results},
        "folds": {n: {r.kind: r.per_fold_r2[n] for r in results} for n in factor_order},
    }


def mi_section(rep) -> dict:
    return {
        "factor_order": list(rep.per_factor_mi),
        "per_factor_mi": rep.per_factor_mi,
        "overall_mi": rep.overall_mi,
        "k": rep.k,
        "mode": rep.mode,
        "best_dim": rep.best_dim,
    }


def geometry_section(g) -> dict:
    return {
        "effective_rank": g.effective_rank,
        "participation_ratio": g.participation_ratio,
        "condition_number": g.condition_number,
        "n_retained": g.n_retained,
        "singular_values": g.singular_values,
    }


def alignment_section(a, partition: FactorPartition) -> dict:
    dims = [d for _, s, e in partition.entries for d in range(s, e)]
    return {
        "score": a.score,
        "chance_level": a.chance_level,
        "per_dim_ratio": {str(d): float(a.per_dim_ratio[d]) for d in dims},
        "partition": [list(e) for e in partition.entries],
    }


def full_report(dataset: Dataset, partition: FactorPartition | None = None, *,
                seed: int = 0, k: int = 5, bins: int = 20, folds: int = 5,
                alpha: float = 1.0, probe_config: ProbeConfig | None = None,
                threads: int = 1, invocation: Any = None) -> ReportBundle:
    """Probes (linear and MLP), MI, MIG, DCI, SAP, alignment and geometry in one pass.

    Each stochastic step gets ``derive_seed(seed, key)`` with a fixed key per
    analysis, so adding or removing an analysis never shifts the others.
    """
    base = probe_config or ProbeConfig(folds=folds, ridge_alpha=alpha)
    bundle = ReportBundle(invocation if invocation is not None else {"command": "full_report"},
                          seed)
    names = dataset.factors.names

    lin = cv_probe(dataset, replace(base, kind="linear",
                                     seed=seeding.derive_seed(seed, _LINEAR)), threads)
    mlp_res = cv_probe(dataset, replace(base, kind="mlp",
                                         seed=seeding.derive_seed(seed, _MLP)), threads)
    bundle.sections["probe"] = probe_section([lin, mlp_res], names)

    mi = mi_per_factor(dataset, k=k, seed=seeding.derive_seed(seed, _MI), threads=threads)
    bundle.sections["mi"] = mi_section(mi)
    bundle.add_flags(mi.flags)

    mig_flags: list[str] = []
    dci_rep, importance = dci(dataset, folds=folds, alpha=alpha,
                              seed=seeding.derive_seed(seed, _DCI))
    bundle.sections["disentanglement"] = {
        "mig": mig(dataset, bins=bins, flags=mig_flags),
        "dci_disent": dci_rep.dci_disent,
        "dci_complete": dci_rep.dci_complete,
        "dci_inform": dci_rep.dci_inform,
        "sap": sap(dataset),
        "bins": bins,
    }
    bundle.sections["dci_importance"] = {
        "dims": list(dataset.repr.names), "factors": list(names), "matrix": importance,
    }
    bundle.add_flags(mig_flags)

    if partition is None and dataset.repr.n_cols == default_partition().n_dims:
        partition = default_partition()
    if partition is None:
        bundle.add_flags([f"alignment skipped: no partition given for "
                          f"{dataset.repr.n_cols}-d representation"])
    else:
        try:
            al = factor_alignment(dataset, partition)
        except DataError as exc:
            bundle.add_flags([f"alignment skipped: {exc}"])
        else:
            bundle.sections["alignment"] = alignment_section(al, partition)
            bundle.add_flags(al.flags)

    bundle.sections["geometry"] = geometry_section(svd_geometry(dataset.repr))
    return bundle
