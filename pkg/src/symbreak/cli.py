"""Command-line entry point: ``symbreak <subcommand> ... --out DIR``.

Every subcommand writes its artifacts plus ``manifest.json`` (artifact and
input hashes) under ``--out``.  Output is deterministic given ``--seed``.
Failures print a JSON error object to stderr and exit with status 1.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conservation import ConservedQuantity, check_conservation
from .eta import EtaParams, enumerate_critical_points
from .io import (
    dumps_stable,
    file_sha256,
    read_matrix_csv,
    write_json,
    write_matrix_csv,
    write_pgm,
    write_ppm,
)
from .isotropy import PatternMatrix, catalog_maximal_diagonal, classify, quantize
from .presets import PRESETS, get_preset, problem_with_shift
from .relu_loss import problem_from_config
from .trainer import TrainConfig, init_weights, run_ensemble, with_overrides


class CLIError(Exception):
    pass


class _Out:
    """Collects artifacts written under the output directory for the manifest."""

    def __init__(self, root, command: str, args: dict):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.command, self.args = command, args
        self.inputs: dict[str, str] = {}
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(name)
        return p

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def finish(self) -> None:
        manifest = {
            "tool": "symbreak",
            "version": __version__,
            "command": self.command,
            "args": self.args,
            "inputs": [{"path": k, "sha256": v} for k, v in sorted(self.inputs.items())],
            "artifacts": [{"path": a, "sha256": file_sha256(self.root / a)} for a in sorted(set(self.artifacts))],
        }
        write_json(self.root / "manifest.json", manifest)


def _write_heatmaps(out: _Out, stem: str, pattern: PatternMatrix) -> None:
    write_pgm(out.path(stem + ".pgm"), pattern)
    write_ppm(out.path(stem + ".ppm"), pattern)


# --------------------------------------------------------------------------- analyze


def cmd_analyze(args) -> dict:
    out = _Out(args.out, "analyze", {"matrix": str(args.matrix), "tol": args.tol})
    W = read_matrix_csv(args.matrix)
    out.add_input(args.matrix)
    rep = classify(W, args.tol)
    write_json(out.path("report.json"), rep.to_json())
    _write_heatmaps(out, "pattern", quantize(W, args.tol))
    out.finish()
    return {"isotropy_order": rep.isotropy_order, "structure": rep.structure_name, "catalog_match": rep.match_name}


# --------------------------------------------------------------------------- train


def _load_problem(args) -> tuple[dict, TrainConfig, float, dict, str | None]:
    if args.preset:
        pr = get_preset(args.preset)
        return pr.problem, pr.train, pr.tol, pr.sweep, None
    if not args.problem:
        raise CLIError("train needs --preset or --problem")
    cfg = json.loads(Path(args.problem).read_text())
    return cfg, TrainConfig(), 1e-6, {}, str(Path(args.problem).parent)


def _train_one(out: _Out, prefix: str, cfg: dict, base_dir, config: TrainConfig) -> dict:
    problem = problem_from_config(cfg, base_dir)
    ens = run_ensemble(problem, config)
    for r in ens.runs:
        stem = f"{prefix}run_{r.run_id:03d}"
        layers = [r.weights] if isinstance(r.weights, np.ndarray) else list(r.weights)
        for li, w in enumerate(layers):
            name = stem if len(layers) == 1 else f"{stem}_layer{li + 1}"
            write_matrix_csv(out.path(name + ".csv"), w)
            if w.shape[0] > 1:
                _write_heatmaps(out, name, quantize(w, config.classify_tol))
    summary = ens.summary()
    if isinstance(problem.teacher, np.ndarray):
        off = ens.off_teacher_orders(problem.teacher)
        summary["off_teacher"] = len(off)
        summary["median_off_teacher_isotropy_order"] = float(np.median(off)) if off else None
    summary["problem"] = cfg
    summary["config"] = config.to_json()
    write_json(out.path(prefix + "summary.json"), summary)
    with open(out.path(prefix + "isotropy_counts.csv"), "w") as fh:
        fh.write("catalog_match,all_runs,non_global_runs\n")
        ng = ens.non_global_histogram
        for name, count in ens.histogram.items():
            fh.write(f"{name},{count},{ng.get(name, 0)}\n")
    return {k: summary[k] for k in ("runs", "diverged", "non_global", "histogram",
                                    "median_non_global_isotropy_order")}


def cmd_train(args) -> dict:
    cfg, base, tol, sweep, base_dir = _load_problem(args)
    config = with_overrides(base, runs=args.runs, master_seed=args.seed, max_steps=args.steps,
                            batch_size=args.batch, step_size=args.lr, refine=args.refine,
                            classify_tol=args.tol if args.tol is not None else tol, workers=args.workers)
    out = _Out(args.out, "train", {"preset": args.preset, "problem": args.problem, "config": config.to_json()})
    if args.problem:
        out.add_input(args.problem)
    result = {}
    if "C" in sweep:
        for C in sweep["C"]:
            result[f"C={C:g}"] = _train_one(out, f"C{C:g}/", problem_with_shift(cfg, C), base_dir, config)
    else:
        result = _train_one(out, "", cfg, base_dir, config)
    out.finish()
    return result


# --------------------------------------------------------------------------- catalog


def cmd_catalog(args) -> dict:
    entries = [{"name": c.name, "order": c.order, "fixed_subspace_dim": c.fixed_dim, "descriptor": c.to_json()}
               for c in catalog_maximal_diagonal(args.d)]
    if args.out:
        out = _Out(args.out, "catalog", {"d": args.d})
        write_json(out.path("catalog.json"), {"d": args.d, "entries": entries})
        out.finish()
    return {"d": args.d, "entries": [{k: e[k] for k in ("name", "order", "fixed_subspace_dim")} for e in entries]}


# --------------------------------------------------------------------------- eta


def cmd_eta(args) -> dict:
    params = EtaParams(args.a, args.b, args.c, args.n)
    res = enumerate_critical_points(params)
    out = _Out(args.out, "eta", {"n": args.n, "a": args.a, "b": args.b, "c": args.c})
    n = args.n
    with open(out.path("critical_points.csv"), "w") as fh:
        head = [f"x{i + 1}" for i in range(n)] + [f"lambda{i + 1}" for i in range(n)]
        fh.write(",".join(head + ["p", "value", "grad_norm", "extremality", "isotropy", "isotropy_order"]) + "\n")
        for pt in res:
            iso = pt.isotropy
            row = [f"{v:.17g}" for v in pt.x] + [f"{v:.17g}" for v in pt.spectrum]
            row += [str(pt.p), f"{pt.value:.17g}", f"{pt.grad_norm:.17g}", pt.extremality, iso["name"],
                    str(iso["order"])]
            fh.write(",".join(row) + "\n")
    summary = {"n": n, "a": args.a, "b": args.b, "c": args.c, "total": len(res),
               "counts_by_p": {str(k): v for k, v in res.counts_by_p().items()},
               "skipped_supports": {str(k): v for k, v in res.skipped_supports.items()},
               "extremality": res.census()}
    write_json(out.path("summary.json"), summary)
    out.finish()
    return summary


# --------------------------------------------------------------------------- conserve


def _parse_quantity(spec: str) -> ConservedQuantity:
    kind, _, idx = spec.partition(":")
    nums = [int(t) for t in idx.split(",") if t]
    if kind == "scalar" and len(nums) == 2:
        return ConservedQuantity.scalar(*nums)
    if kind == "matrix" and len(nums) == 1:
        return ConservedQuantity.matrix(nums[0])
    raise CLIError(f"bad quantity {spec!r}; use scalar:i,j or matrix:i")


def cmd_conserve(args) -> dict:
    if args.preset:
        cfg, base_dir = get_preset(args.preset).problem, None
    elif args.problem:
        cfg, base_dir = json.loads(Path(args.problem).read_text()), str(Path(args.problem).parent)
    else:
        raise CLIError("conserve needs --preset or --problem")
    problem = problem_from_config(cfg, base_dir)
    if problem.student.second_layer_fixed:
        raise CLIError("conserved quantities need a student with all layers trainable (second_layer_fixed: false)")
    q = _parse_quantity(args.quantity)
    x0 = init_weights(problem, np.random.default_rng(args.seed))
    out = _Out(args.out, "conserve", {"problem": args.problem, "preset": args.preset, "quantity": args.quantity,
                                      "step": args.step, "steps": args.steps, "seed": args.seed})
    if args.problem:
        out.add_input(args.problem)
    res = check_conservation(problem, q, x0, args.step, args.steps, seed=args.seed)
    with open(out.path("drift.csv"), "w") as fh:
        fh.write("t,drift\n")
        for t, v in zip(res.times, res.drift):
            fh.write(f"{t:.17g},{v:.17g}\n")
    verdict = res.to_json()
    half = check_conservation(problem, q, x0, args.step / 2, 2 * args.steps, seed=args.seed)
    verdict["max_drift_half_step"] = half.max_drift
    verdict["ratio"] = half.max_drift / res.max_drift if res.max_drift > 0 else 0.0
    verdict["first_order"] = bool(verdict["ratio"] <= 0.6)
    write_json(out.path("verdict.json"), verdict)
    out.finish()
    return verdict


# --------------------------------------------------------------------------- report


def cmd_report(args) -> dict:
    """Human-readable digest of a previous output directory."""
    root = Path(args.dir)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise CLIError(f"{root} has no manifest.json")
    manifest = json.loads(mpath.read_text())
    lines = [f"command: {manifest['command']}"]
    bad = [a["path"] for a in manifest["artifacts"]
           if not (root / a["path"]).exists() or file_sha256(root / a["path"]) != a["sha256"]]
    lines.append(f"artifacts: {len(manifest['artifacts'])} ({'all hashes match' if not bad else 'modified: ' + ', '.join(bad)})")
    for a in manifest["artifacts"]:
        p = a["path"]
        if p.endswith("summary.json"):
            s = json.loads((root / p).read_text())
            if "histogram" in s:
                lines.append(f"{p}: {s['runs']} runs, {s['non_global']} non-global, {s['diverged']} diverged, "
                             f"median non-global isotropy order {s['median_non_global_isotropy_order']}")
                for name, cnt in s["histogram"].items():
                    lines.append(f"    {name}: {cnt}")
            elif "extremality" in s:
                lines.append(f"{p}: {s['total']} critical points, {s['extremality']}")
        elif p.endswith("report.json"):
            r = json.loads((root / p).read_text())
            structure = r["structure"]["name"] if r["structure"] else "unclassified"
            match = r["catalog_match"]["name"] if isinstance(r["catalog_match"], dict) else r["catalog_match"]
            lines.append(f"{p}: isotropy order {r['isotropy_order']}, structure {structure}, catalog {match}")
        elif p.endswith("verdict.json"):
            v = json.loads((root / p).read_text())
            lines.append(f"{p}: max drift {v['max_drift']:.3e}, half-step ratio {v['ratio']:.3f}")
        elif p.endswith("catalog.json"):
            c = json.loads((root / p).read_text())
            for e in c["entries"]:
                lines.append(f"    {e['name']}: order {e['order']}, dim {e['fixed_subspace_dim']}")
    text = "\n".join(lines) + "\n"
    (root / "report.txt").write_text(text)
    return {"report": text, "modified": bad}


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symbreak", description="Symmetry analysis of teacher-student ReLU landscapes")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="isotropy report and heatmap for a CSV matrix")
    a.add_argument("matrix")
    a.add_argument("--tol", type=float, default=0.05)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("train", help="SGD ensemble on a preset or problem JSON")
    t.add_argument("--preset", choices=sorted(PRESETS))
    t.add_argument("--problem")
    t.add_argument("--runs", type=int)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--steps", type=int)
    t.add_argument("--batch", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--tol", type=float)
    t.add_argument("--workers", type=int)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("catalog", help="maximal diagonal isotropy types of S_d x S_d")
    c.add_argument("d", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_catalog)

    e = sub.add_parser("eta", help="critical points of the hyperoctahedral quartic")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--a", type=float, default=-1.0)
    e.add_argument("--b", type=float, default=1.0)
    e.add_argument("--c", type=float, default=1.0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eta)

    s = sub.add_parser("conserve", help="Euler drift of a balance quantity along gradient flow")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--problem")
    s.add_argument("--quantity", default="scalar:1,2")
    s.add_argument("--step", type=float, default=1e-2)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_conserve)

    r = sub.add_parser("report", help="summarize an output directory")
    r.add_argument("dir")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as JSON
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        line = getattr(exc, "line", None)
        if line is not None:
            err["line"] = line
        sys.stderr.write(dumps_stable(err))
        return 1
    if args.command == "report":
        sys.stdout.write(result["report"])
    else:
        sys.stdout.write(dumps_stable(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
