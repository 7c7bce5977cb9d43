"""Batch pipeline driver: activations -> mine -> explain / characterize / mimic.

Every flag can also be set through an ``ACTMINE_``-prefixed environment
variable (dashes become underscores, e.g. ``ACTMINE_MIN_SI=5``); explicit
flags win. All randomness flows from ``--seed``. Outputs are plain JSON, CSV
and DOT; wall-clock times appear only in the mine log, so reruns with the
same inputs and seed are byte-identical elsewhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import background, explain, gcn, graphs, mining, numeric, subgraph

ENV_PREFIX = "ACTMINE_"


def _env(name: str, fallback):
    raw = os.environ.get(ENV_PREFIX + name.replace("-", "_").upper())
    return raw if raw is not None else fallback


def _add_io(p, model_required=True):
    p.add_argument("--dataset", required=_env("dataset", None) is None,
                   default=_env("dataset", None))
    if model_required:
        p.add_argument("--model", required=_env("model", None) is None,
                       default=_env("model", None))
    p.add_argument("--out", default=_env("out", "out"))
    p.add_argument("--layers", default=_env("layers", "all"),
                   help="comma-separated layer indices, or 'all'")
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--threads", type=int, default=int(_env("threads", 1)))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="actmine",
        description="Activation-rule mining and explanation toolkit for GCNs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("activations", help="write per-layer activation CSVs")
    _add_io(p)

    p = sub.add_parser("mine", help="mine activation rules per layer and class")
    _add_io(p)
    p.add_argument("--nb-patterns", type=int, default=int(_env("nb-patterns", 10)))
    p.add_argument("--min-si", type=float, default=float(_env("min-si", 10.0)))
    p.add_argument("--alpha", type=float, default=float(_env("alpha", 0.6)))
    p.add_argument("--beta", type=float, default=float(_env("beta", 1.0)))
    p.add_argument("--max-visits", type=int,
                   default=int(_env("max-visits", 100_000_000)))
    p.add_argument("--dump-background", action="store_true")

    p = sub.add_parser("explain", help="build masks and score fidelity metrics")
    _add_io(p)
    p.add_argument("--rules", required=True)
    p.add_argument("--policies", default=_env("policies", "node,ego,decay,topk"))
    p.add_argument("--k", default=_env("k", "5,10"),
                   help="comma-separated k values for the topk policy")
    p.add_argument("--external-masks", default=None,
                   help="JSON {graph_id: [[u,v],...]} to score foreign masks")

    p = sub.add_parser("characterize",
                       help="redescribe rules with subgraphs and subgroups")
    _add_io(p)
    p.add_argument("--rules", required=True)
    p.add_argument("--modes", default=_env("modes", "numeric,graph"))
    p.add_argument("--min-sup", type=int, default=int(_env("min-sup", 10)))
    p.add_argument("--max-edges", type=int, default=int(_env("max-edges", 6)))
    p.add_argument("--beam-width", type=int, default=int(_env("beam-width", 50)))
    p.add_argument("--max-depth", type=int, default=int(_env("max-depth", 4)))
    p.add_argument("--bins", type=int, default=int(_env("bins", 5)))

    p = sub.add_parser("mimic", help="decision tree over rule activation counts")
    _add_io(p)
    p.add_argument("--rules", required=True)
    p.add_argument("--test-fraction", type=float,
                   default=float(_env("test-fraction", 0.2)))
    return ap


def _load(args, model_required=True):
    ds = graphs.load_dataset(args.dataset)
    model = gcn.load_model(args.model) if model_required else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return ds, model, out


def _layer_list(args, model) -> list[int]:
    if args.layers == "all":
        return list(range(1, model.layer_count + 1))
    return [int(x) for x in args.layers.split(",") if x]


def cmd_activations(args) -> int:
    ds, model, out = _load(args)
    results = [gcn.forward(model, g) for g in ds.graphs]
    for layer in _layer_list(args, model):
        act = gcn.activation_matrix(model, ds, layer, results=results)
        act.to_csv(out / f"activations_layer{layer}.csv")
    with open(out / "decisions.json", "w", encoding="utf-8") as fh:
        json.dump({"graph_ids": ds.graph_ids(),
                   "decisions": [r.decision for r in results]}, fh)
        fh.write("\n")
    return 0


def cmd_mine(args) -> int:
    ds, model, out = _load(args)
    params = mining.MinerParams(alpha=args.alpha, beta=args.beta,
                                min_si=args.min_si,
                                nb_patterns=args.nb_patterns,
                                max_visits=args.max_visits)
    results = [gcn.forward(model, g) for g in ds.graphs]
    rules: list[mining.ActivationRule] = []
    log: list[dict] = []
    for layer in _layer_list(args, model):
        act = gcn.activation_matrix(model, ds, layer, results=results)
        for cls in (0, 1):
            bg = background.fit(act)
            if args.dump_background:
                bg.to_csv(act, out / f"background_layer{layer}_class{cls}.csv")
            t0 = time.perf_counter()
            found = mining.mine_all(act, ds, params, cls, bg=bg, log=log)
            for entry in log[len(log) - len(found):]:
                entry["wall_s"] = time.perf_counter() - t0
            rules.extend(found)
    mining.save_rules(rules, out / "rules.json")
    with open(out / "mine_log.json", "w", encoding="utf-8") as fh:
        json.dump(log, fh, indent=1)
        fh.write("\n")
    return 0


def cmd_explain(args) -> int:
    ds, model, out = _load(args)
    rules = mining.load_rules(args.rules)
    if not rules and not args.external_masks:
        raise ValueError("rule file is empty and no external masks given")
    results = [gcn.forward(model, g) for g in ds.graphs]
    reports = {}
    variants: list[tuple[str, str, int]] = []
    for pol in [p for p in args.policies.split(",") if p]:
        if pol == "topk":
            for k in [int(x) for x in str(args.k).split(",") if x]:
                variants.append((f"top{k}", "topk", k))
        else:
            variants.append((pol, pol, 0))
    for name, pol, k in variants:
        exps = explain.build_explanations(model, ds, rules, pol, k,
                                          results=results)
        if not exps:
            reports[name] = None
            continue
        reports[name] = explain.fidelity(model, ds, exps).to_json_obj()
        explain.per_graph_deltas_csv(model, ds, exps,
                                     out / f"explanations_{name}.csv")
    if args.external_masks:
        exps = explain.load_external_masks(args.external_masks, ds)
        reports["external"] = explain.fidelity(model, ds, exps).to_json_obj()
        explain.per_graph_deltas_csv(model, ds, exps,
                                     out / "explanations_external.csv")
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=1)
        fh.write("\n")
    return 0


def cmd_characterize(args) -> int:
    ds, model, out = _load(args)
    rules = mining.load_rules(args.rules)
    modes = {m for m in args.modes.split(",") if m}
    results = [gcn.forward(model, g) for g in ds.graphs]
    acts = {}
    report = []
    lines = []
    for i, rule in enumerate(rules):
        if rule.layer not in acts:
            acts[rule.layer] = gcn.activation_matrix(model, ds, rule.layer,
                                                     results=results)
        act = acts[rule.layer]
        entry: dict = {"rule": rule.to_json_obj()}
        n_act = int(background.matching_rows(act, rule.components).sum())
        if n_act == 0:
            entry["skipped"] = "rule has no activating node"
            print(f"warning: rule {i} skipped (no activating nodes)",
                  file=sys.stderr)
            report.append(entry)
            continue
        header = (f"rule {i}: layer {rule.layer} class {rule.target_class} "
                  f"components {list(rule.components)} si_sg {rule.score:.3f}")
        lines.append(header)
        if "numeric" in modes:
            table = numeric.propositionalize(ds, rule, act)
            pats = numeric.mine_numeric_subgroup(table, args.beam_width,
                                                 args.max_depth, args.bins)
            entry["numeric"] = [p.to_json_obj() for p in pats[:10]]
            for p in pats[:3]:
                lines.append(f"  numeric: {p}  WRAcc={p.wracc:.4f}")
        if "graph" in modes:
            d = subgraph.build_ego_dataset(rule, ds, act)
            best, _ = subgraph.mine_top_subgraph(d, min_sup=args.min_sup,
                                                 max_edges=args.max_edges)
            if best is not None:
                entry["graph"] = best.to_json_obj(ds.label_alphabet)
                (out / f"rule{i}_pattern.dot").write_text(
                    best.to_dot(ds.label_alphabet) + "\n", encoding="utf-8")
                lines.append(f"  graph: {entry['graph']['nodes']} "
                             f"edges={entry['graph']['edges']} "
                             f"WRAcc={best.wracc:.4f}")
        report.append(entry)
    with open(out / "characterize.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    (out / "characterize.txt").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")
    return 0


def cmd_mimic(args) -> int:
    ds, model, out = _load(args)
    rules = mining.load_rules(args.rules)
    if not rules:
        raise ValueError("rule file is empty")
    results = [gcn.forward(model, g) for g in ds.graphs]
    acts = {layer: gcn.activation_matrix(model, ds, layer, results=results)
            for layer in sorted({r.layer for r in rules})}
    tree, acc = explain.mimic_tree(rules, acts, ds,
                                   test_fraction=args.test_fraction,
                                   seed=args.seed)
    with open(out / "mimic.json", "w", encoding="utf-8") as fh:
        json.dump({"accuracy": acc, "tree": tree.to_json_obj()}, fh, indent=1)
        fh.write("\n")
    return 0


COMMANDS = {
    "activations": cmd_activations,
    "mine": cmd_mine,
    "explain": cmd_explain,
    "characterize": cmd_characterize,
    "mimic": cmd_mimic,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # emit machine-readable failure
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
