"""Batch command-line front end.

Exit codes: 0 success, 2 usage error, 3 data-validation error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import geometry, infometrics, protocol, stats, synth
from .data import (default_partition, load_bin, load_matrix, load_partition, save_matrix,
                   clamp_subspace, validate_dataset)
from .errors import DataError, NumericError
from .probes import ProbeConfig, cv_probe
from .report import (ReportBundle, alignment_section, full_report, geometry_section,
                     mi_section, probe_section, report_markdown, to_json)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


# -- argument types ----------------------------------------------------------

def _int_at_least(lo: int):
    def parse(s: str) -> int:
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    return parse


def _nonneg_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not v >= 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a finite nonnegative number, got {s}")
    return v


def _finite_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite, got {s}")
    return v


def _seed(s: str) -> int:
    v = _int_at_least(0)(s)
    if v >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _existing(s: str) -> str:
    if not Path(s).is_file():
        raise argparse.ArgumentTypeError(f"no such file: {s}")
    return s


def _named_path(s: str) -> tuple[str, str]:
    name, sep, path = s.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {s!r}")
    return name, _existing(path)


# -- parser ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "md"), default="json")
    if seed:
        p.add_argument("--seed", type=_seed, default=0)


def _dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--repr", required=True, type=_existing, help="representation CSV or .bin")
    p.add_argument("--factors", required=True, type=_existing, help="factor CSV or .bin")
    p.add_argument("--threads", type=_int_at_least(1), default=1)


def _probe_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--folds", type=_int_at_least(2), default=5)
    p.add_argument("--alpha", type=_nonneg_float, default=1.0, help="ridge penalty")
    p.add_argument("--hidden", type=_int_at_least(1), default=64)
    p.add_argument("--epochs", type=_int_at_least(1), default=200)
    p.add_argument("--lr", type=_nonneg_float, default=1e-3)
    p.add_argument("--patience", type=_int_at_least(1), default=20)
    p.add_argument("--batch-size", type=_int_at_least(1), default=128)
    p.add_argument("--activation", choices=("tanh", "relu"), default="tanh")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentdiag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--kind", choices=("axis", "rotated", "null", "lowrank", "pair"), required=True)
    p.add_argument("--n", type=_int_at_least(2), default=10000)
    p.add_argument("--n-factors", type=_int_at_least(1), default=5)
    p.add_argument("--n-dims", type=_int_at_least(1), default=24)
    p.add_argument("--noise", type=_nonneg_float, default=0.0)
    p.add_argument("--rank", type=_int_at_least(1), default=5)
    p.add_argument("--rho", type=_finite_float, default=0.0)
    p.add_argument("--out-repr", required=True)
    p.add_argument("--out-factors")
    _common(p)

    p = sub.add_parser("probe", help="cross-validated linear/MLP probe R^2")
    _dataset_args(p)
    p.add_argument("--kind", choices=("linear", "mlp", "both"), default="both")
    _probe_args(p)
    _common(p)

    p = sub.add_parser("mi", help="KSG mutual information per factor")
    _dataset_args(p)
    p.add_argument("--k", type=_int_at_least(1), default=5)
    p.add_argument("--mode", choices=("max_dim", "joint"), default="max_dim")
    _common(p)

    p = sub.add_parser("mig", help="mutual information gap")
    _dataset_args(p)
    p.add_argument("--bins", type=_int_at_least(2), default=20)
    _common(p)

    p = sub.add_parser("dci", help="DCI disentanglement/completeness/informativeness")
    _dataset_args(p)
    p.add_argument("--folds", type=_int_at_least(2), default=5)
    p.add_argument("--alpha", type=_nonneg_float, default=1.0)
    _common(p)

    p = sub.add_parser("sap", help="separated attribute predictability")
    _dataset_args(p)
    _common(p)

    p = sub.add_parser("alignment", help="partition alignment score")
    _dataset_args(p)
    p.add_argument("--partition", type=_existing, help="name,start,end lines (default: 24-d layout)")
    _common(p)

    p = sub.add_parser("geometry", help="SVD geometry of a representation")
    p.add_argument("--repr", required=True, type=_existing)
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--rel-tol", type=_nonneg_float, default=1e-10)
    _common(p)

    p = sub.add_parser("gradients", help="cosine similarity and norm fractions of gradient series")
    p.add_argument("--reference", required=True, type=_existing, help="reference gradients (.bin)")
    p.add_argument("--component", required=True, action="append", type=_named_path,
                   help="NAME=PATH of a component gradient series (.bin); repeatable")
    p.add_argument("--steps", required=True, type=_existing, help="CSV with a 'step' column")
    p.add_argument("--total", type=_existing, help="total gradients (.bin) for norm fractions")
    _common(p)

    p = sub.add_parser("sweep", help="sensitivity / severe mean / worst case / degradation")
    p.add_argument("--sweep", required=True, type=_existing)
    p.add_argument("--id", type=_existing, help="CSV model,id_reward")
    p.add_argument("--crossover", help="MODEL_A,MODEL_B")
    _common(p)

    p = sub.add_parser("recovery", help="recovery time and peak error of push traces")
    p.add_argument("--traces", required=True, type=_existing)
    p.add_argument("--push-steps", type=_existing, help="sidecar CSV episode_id,push_step")
    p.add_argument("--threshold", type=_nonneg_float, default=1.5)
    p.add_argument("--window", type=_int_at_least(1), default=40)
    _common(p)

    p = sub.add_parser("intervene", help="mean |reward change| per clamped factor")
    p.add_argument("--records", required=True, type=_existing)
    _common(p)

    p = sub.add_parser("clamp", help="write a representation with one factor subspace clamped")
    p.add_argument("--repr", required=True, type=_existing)
    p.add_argument("--partition", type=_existing)
    p.add_argument("--factor", required=True)
    p.add_argument("--value", type=_finite_float, default=0.0)
    p.add_argument("--out-repr", required=True)
    _common(p)

    p = sub.add_parser("ttest", help="paired t test (CSV label,a,b)")
    p.add_argument("--input", required=True, type=_existing)
    _common(p)

    p = sub.add_parser("holm", help="Holm-Bonferroni adjustment (CSV with column p)")
    p.add_argument("--input", required=True, type=_existing)
    p.add_argument("--level", type=_nonneg_float, default=0.05)
    _common(p)

    p = sub.add_parser("factorial", help="2x2 factorial effects (CSV seed,level_a,level_b,value)")
    p.add_argument("--input", required=True, type=_existing)
    _common(p)

    p = sub.add_parser("report", help="full one-pass analysis of a dataset")
    _dataset_args(p)
    p.add_argument("--partition", type=_existing)
    p.add_argument("--k", type=_int_at_least(1), default=5)
    p.add_argument("--bins", type=_int_at_least(2), default=20)
    _probe_args(p)
    _common(p)
    return parser


# -- commands ----------------------------------------------------------------

def _dataset(args):
    return validate_dataset(load_matrix(args.repr, "repr"), load_matrix(args.factors, "factors"))


def _partition(args):
    return load_partition(args.partition) if args.partition else default_partition()


def _probe_config(args, kind="linear") -> ProbeConfig:
    return ProbeConfig(kind=kind, folds=args.folds, ridge_alpha=args.alpha,
                       mlp_hidden=args.hidden, mlp_epochs=args.epochs,
                       mlp_learning_rate=args.lr, mlp_patience=args.patience,
                       mlp_batch_size=args.batch_size, mlp_activation=args.activation,
                       seed=args.seed)


def cmd_synth(args, b: ReportBundle) -> None:
    if args.kind == "lowrank":
        rs = synth.gen_lowrank(args.n, args.n_dims, args.rank, args.seed)
        save_matrix(rs, args.out_repr)
        b.sections["synth"] = {"kind": "lowrank", "n_samples": args.n, "n_dims": args.n_dims,
                               "rank": args.rank, "repr": args.out_repr}
        return
    if not args.out_factors:
        raise DataError(f"--out-factors is required for --kind {args.kind}")
    if args.kind == "pair":
        from .data import FactorSet, RepresentationSet
        x, y = synth.gen_gaussian_pair(args.n, args.rho, args.seed)
        save_matrix(RepresentationSet.from_array(x[:, None], ["x"]), args.out_repr)
        save_matrix(FactorSet.from_array(y[:, None], ["y"]), args.out_factors)
        b.sections["synth"] = {"kind": "pair", "n_samples": args.n, "rho": args.rho,
                               "true_mi": synth.gaussian_mi(args.rho)}
        return
    spec = synth.SynthSpec(args.n, args.n_factors, args.n_dims, args.noise, args.seed)
    ds = synth.GENERATORS[args.kind](spec)
    save_matrix(ds.repr, args.out_repr)
    save_matrix(ds.factors, args.out_factors)
    b.sections["synth"] = {"kind": args.kind, "n_samples": args.n, "n_factors": args.n_factors,
                           "n_dims": args.n_dims, "noise_sigma": args.noise,
                           "factor_names": list(ds.factors.names)}


def cmd_probe(args, b: ReportBundle) -> None:
    ds = _dataset(args)
    kinds = ("linear", "mlp") if args.kind == "both" else (args.kind,)
    results = [cv_probe(ds, _probe_config(args, k), args.threads) for k in kinds]
    b.sections["probe"] = probe_section(results, ds.factors.names)


def cmd_mi(args, b: ReportBundle) -> None:
    rep = infometrics.mi_per_factor(_dataset(args), args.k, args.mode, args.seed, args.threads)
    b.sections["mi"] = mi_section(rep)
    b.add_flags(rep.flags)


def cmd_mig(args, b: ReportBundle) -> None:
    flags: list[str] = []
    b.sections["mig"] = {"mig": infometrics.mig(_dataset(args), args.bins, flags), "bins": args.bins}
    b.add_flags(flags)


def cmd_dci(args, b: ReportBundle) -> None:
    ds = _dataset(args)
    rep, R = infometrics.dci(ds, args.folds, args.alpha, args.seed)
    b.sections["dci"] = {"dci_disent": rep.dci_disent, "dci_complete": rep.dci_complete,
                         "dci_inform": rep.dci_inform}
    b.sections["dci_importance"] = {"dims": list(ds.repr.names),
                                    "factors": list(ds.factors.names), "matrix": R}


def cmd_sap(args, b: ReportBundle) -> None:
    b.sections["sap"] = {"sap": infometrics.sap(_dataset(args))}


def cmd_alignment(args, b: ReportBundle) -> None:
    part = _partition(args)
    rep = infometrics.factor_alignment(_dataset(args), part)
    b.sections["alignment"] = alignment_section(rep, part)
    b.add_flags(rep.flags)


def cmd_geometry(args, b: ReportBundle) -> None:
    rs = load_matrix(args.repr, "repr")
    b.sections["geometry"] = geometry_section(
        geometry.svd_geometry(rs, center=not args.no_center, rel_tol=args.rel_tol))


def _load_steps(path) -> list[int]:
    from .data import read_csv_matrix
    header, values = read_csv_matrix(path)
    if "step" not in header:
        raise DataError(f"{path}: missing column 'step'")
    col = values[:, header.index("step")]
    if np.any(col != np.round(col)):
        raise DataError(f"{path}: non-integer step values")
    return [int(s) for s in col]


def cmd_gradients(args, b: ReportBundle) -> None:
    steps = _load_steps(args.steps)
    ref = geometry.GradientSeries(steps, load_bin(args.reference))
    total = geometry.GradientSeries(steps, load_bin(args.total)) if args.total else None
    out = {}
    for name, path in args.component:
        comp = geometry.GradientSeries(steps, load_bin(path))
        cos, mean, std = geometry.cosine_series(ref, comp)
        entry = {"cosine": cos, "cosine_mean": mean, "cosine_std": std}
        if total is not None:
            frac = geometry.norm_fraction(comp, total)
            entry.update(norm_fraction=frac, norm_fraction_mean=float(frac.mean()))
        out[name] = entry
    b.sections["gradients"] = {"steps": steps, "components": out}


def _load_id(path) -> dict[str, float]:
    rows = protocol._read_rows(path, ["model", "id_reward"])
    return {r["model"]: protocol._float(r, "id_reward", path, i) for i, r in enumerate(rows, start=2)}


def _curve_metrics(c: protocol.SweepCurve) -> dict:
    return {"levels": c.indices, "rewards": c.rewards, "sensitivity": protocol.sensitivity(c),
            "severe_mean": protocol.severe_mean(c), "worst_case": protocol.worst_case(c)}


def cmd_sweep(args, b: ReportBundle) -> None:
    curves = protocol.load_sweep_csv(args.sweep)
    ids = _load_id(args.id) if args.id else {}
    models = list(dict.fromkeys(c.model for c in curves))
    out = {}
    for m in models:
        mean_curve = protocol.average_curves(curves, m)
        entry = _curve_metrics(mean_curve)
        entry["per_seed"] = {c.seed: _curve_metrics(c) for c in curves
                             if c.model == m and c.seed is not None}
        if m in ids:
            d = protocol.degradation(ids[m], entry["severe_mean"])
            entry["degradation"] = {"id_reward": ids[m], "abs": d.abs, "pct": d.pct,
                                    "improved": d.improved}
            if d.improved:
                b.add_flags([f"sweep: {m} severe reward exceeds ID reward (improvement under OOD)"])
        out[m] = entry
    b.sections["sweep"] = {"models": out}
    if args.crossover:
        a, _, c = args.crossover.partition(",")
        if a not in models or c not in models:
            raise DataError(f"--crossover models must be among {models}")
        b.sections["sweep"]["crossover"] = {
            "a": a, "b": c,
            "level": protocol.crossover(protocol.average_curves(curves, a),
                                        protocol.average_curves(curves, c)),
        }


def cmd_recovery(args, b: ReportBundle) -> None:
    pushes = protocol.load_push_steps_csv(args.push_steps) if args.push_steps else None
    traces = protocol.load_trace_csv(args.traces, pushes, args.window)
    episodes = {}
    for ep, tr in traces.items():
        rec = protocol.recovery_time(tr, args.threshold)
        episodes[ep] = {"steps": rec.steps, "censored": rec.censored,
                        "peak_error": protocol.peak_error(tr)}
    censored = [ep for ep, e in episodes.items() if e["censored"]]
    if censored:
        b.add_flags([f"recovery: {len(censored)} censored episode(s) at window {args.window}: "
                     + ",".join(censored)])
    b.sections["recovery"] = {
        "threshold": args.threshold, "window": args.window, "episodes": episodes,
        "mean_steps": float(np.mean([e["steps"] for e in episodes.values()])),
        "mean_peak_error": float(np.mean([e["peak_error"] for e in episodes.values()])),
        "n_censored": len(censored),
    }


def cmd_intervene(args, b: ReportBundle) -> None:
    recs = protocol.load_intervention_csv(args.records)
    b.sections["intervene"] = {"mean_abs_delta": protocol.intervention_delta(recs),
                               "n_records": len(recs)}


def cmd_clamp(args, b: ReportBundle) -> None:
    rs = load_matrix(args.repr, "repr")
    save_matrix(clamp_subspace(rs, _partition(args), args.factor, args.value), args.out_repr)
    b.sections["clamp"] = {"factor": args.factor, "value": args.value, "repr": args.out_repr}


def _test_payload(r: stats.TestResult) -> dict:
    return {"mean_diff": r.mean_diff, "t_stat": r.t_stat, "df": r.df,
            "p_two_sided": r.p_two_sided, "ci95": list(r.ci95), "n": r.n}


def cmd_ttest(args, b: ReportBundle) -> None:
    sample = stats.load_paired_csv(args.input)
    r = stats.paired_t(sample)
    ma, sa = stats.mean_std(sample.a)
    mb, sb = stats.mean_std(sample.b)
    b.sections["ttest"] = {
        "paired": _test_payload(r),
        "a": {"mean": ma, "std": sa, "ci95": list(stats.ci95(sample.a))},
        "b": {"mean": mb, "std": sb, "ci95": list(stats.ci95(sample.b))},
        "difference": "a - b",
    }
    b.add_flags(r.flags)


def cmd_holm(args, b: ReportBundle) -> None:
    names, p = stats.load_pvalues_csv(args.input)
    adj = stats.holm_bonferroni(p)
    b.sections["holm"] = {
        "names": names, "p": p, "p_adjusted": adj, "level": args.level,
        "n_significant": sum(a < args.level for a in adj),
    }


def cmd_factorial(args, b: ReportBundle) -> None:
    eff = stats.factorial_effects(stats.load_factorial_csv(args.input))
    b.sections["factorial"] = {k: _test_payload(v) for k, v in eff.items()}
    b.sections["factorial"]["interaction_contrast"] = "v11 - v10 - v01 + v00"
    for v in eff.values():
        b.add_flags(v.flags)


def cmd_report(args, b: ReportBundle) -> None:
    ds = _dataset(args)
    part = load_partition(args.partition) if args.partition else None
    full = full_report(ds, part, seed=args.seed, k=args.k, bins=args.bins, folds=args.folds,
                       alpha=args.alpha, probe_config=_probe_config(args), threads=args.threads,
                       invocation=b.invocation)
    b.sections.update(full.sections)
    b.add_flags(full.flags)


COMMANDS = {name[4:]: fn for name, fn in globals().items() if name.startswith("cmd_")}


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    bundle = ReportBundle(invocation=argv, seed=getattr(args, "seed", 0))
    try:
        COMMANDS[args.command](args, bundle)
    except DataError as exc:
        print(f"latentdiag {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"latentdiag {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    text = to_json(bundle) if args.format == "json" else report_markdown(bundle)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
