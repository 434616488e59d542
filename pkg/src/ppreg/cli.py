"""Command line front end.

Every subcommand reads a JSON config (--config), writes its outputs under
--out, and exits 0 on success, 2 on validation errors (bad config, bad model,
bad inputs) and 3 on numerical failures (estimation, simulation, divergent
iterations).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import asymptotics, estimate, harness, likelihood, lob, simulate as sim
from .model import (
    DomainError,
    ModelDefinitionError,
    ModelSpec,
    model_from_json,
    validate_model,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_VALIDATION_ERRORS = (
    ModelDefinitionError,
    DomainError,
    lob.LobError,
    KeyError,
    ValueError,
    FileNotFoundError,
    json.JSONDecodeError,
)
_NUMERICAL_ERRORS = (
    estimate.EstimationError,
    sim.SimulationError,
    asymptotics.AsymptoticsError,
    harness.HarnessError,
    np.linalg.LinAlgError,
    FloatingPointError,
    AssertionError,
)


def _load_config(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _load_model(doc: dict, base_dir: str) -> ModelSpec:
    spec = doc["model"]
    if isinstance(spec, str):
        with open(os.path.join(base_dir, spec)) as f:
            return model_from_json(f.read())
    return model_from_json(json.dumps(spec))


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def cmd_simulate(args, doc, base_dir) -> int:
    model = _load_model(doc, base_dir)
    report = validate_model(model)
    if not report.passed:
        print(report, file=sys.stderr)
        return EXIT_VALIDATION
    theta = np.asarray(doc["theta_star"], dtype=float)
    opts = sim.SimOptions(
        seed=args.seed if args.seed is not None else doc.get("seed", 0),
        method=doc.get("method", "thinning"),
    )
    path = sim.simulate(model, theta, opts)
    sim.write_path_csv(
        path, _out_path(args, "events.csv"), _out_path(args, "covariate.csv")
    )
    print(f"simulated {path.total_events} events -> {args.out}/events.csv")
    return EXIT_OK


def cmd_estimate(args, doc, base_dir) -> int:
    model = _load_model(doc, base_dir)
    path = sim.read_path_csv(model, os.path.join(base_dir, doc["events"]))
    which = doc.get("estimator", "qmle")
    res = estimate.qmle(
        model,
        path,
        estimate.QmleOptions(seed=args.seed if args.seed is not None else 0),
    )
    out = {"qmle": res.to_dict()}
    if which == "qbe":
        qres = estimate.qbe(
            model,
            path,
            prior=doc.get("prior", "uniform"),
            opts=estimate.QbeOptions(
                method=doc.get("qbe_method", "auto"), qmle_result=res
            ),
        )
        out["qbe"] = qres.to_dict()
    with open(_out_path(args, "estimate.json"), "w") as f:
        json.dump(out, f, indent=2)
    print(f"theta_hat = {np.round(res.theta_hat, 6).tolist()}")
    return EXIT_OK


def cmd_asymptotics(args, doc, base_dir) -> int:
    model = _load_model(doc, base_dir)
    theta = np.asarray(doc["theta_star"], dtype=float)
    Gamma, lim = harness.limit_information(
        model, theta, npoints=doc.get("npoints", 2049)
    )
    out = {
        "gamma": Gamma.tolist(),
        "gamma_inv": np.linalg.inv(Gamma).tolist(),
        "min_eigenvalue": float(np.min(np.linalg.eigvalsh(Gamma))),
        "provenance": lim.provenance,
    }
    if doc.get("chi0", False):
        res = asymptotics.y_limit_and_chi0(
            model, theta, points_per_axis=doc.get("points_per_axis", 21)
        )
        out["chi0"] = res.chi0
        out["chi0_argmin"] = res.argmin.tolist()
    with open(_out_path(args, "asymptotics.json"), "w") as f:
        json.dump(out, f, indent=2)
    print(f"Gamma min eigenvalue = {out['min_eigenvalue']:.6g}")
    return EXIT_OK


def cmd_mc_study(args, doc, base_dir) -> int:
    model = _load_model(doc, base_dir)
    fields = {
        k: doc[k]
        for k in (
            "theta_star",
            "n_values",
            "replicates",
            "estimators",
            "moment_orders",
            "sim_method",
            "qbe_method",
            "qbe_draws",
            "qmle_starts",
            "ci_level",
            "max_failure_rate",
        )
        if k in doc
    }
    for k in ("theta_star", "n_values", "estimators", "moment_orders"):
        if k in fields:
            fields[k] = tuple(fields[k])
    if args.seed is not None:
        fields["seed"] = args.seed
    elif "seed" in doc:
        fields["seed"] = doc["seed"]
    config = harness.McConfig(**fields)
    summary = harness.mc_study(model, config)
    paths = harness.export(summary, args.out)
    for r in summary.per_n:
        print(
            f"n={r.n}: frob_gap={r.frob_gap:.4f} "
            f"failures={r.n_failed}/{config.replicates}"
        )
    print(f"wrote {len(paths)} files to {args.out}")
    return EXIT_OK


def cmd_pldi_probe(args, doc, base_dir) -> int:
    model = _load_model(doc, base_dir)
    table = harness.pldi_probe(
        model,
        np.asarray(doc["theta_star"], dtype=float),
        n=doc["n"],
        r_values=doc.get("r_values", [1, 2, 4, 8]),
        replicates=doc.get("replicates", 500),
        seed=args.seed if args.seed is not None else doc.get("seed", 0),
        points_per_axis=doc.get("points_per_axis", 61),
        sim_method=doc.get("sim_method", "thinning"),
    )
    with open(_out_path(args, "pldi.csv"), "w") as f:
        f.write("r,count,probability,wilson_lower,wilson_upper\n")
        for r, c, p, lo, hi in zip(
            table.r_values,
            table.counts,
            table.probabilities,
            table.wilson_lower,
            table.wilson_upper,
        ):
            f.write(f"{r:.17g},{c},{p:.17g},{lo:.17g},{hi:.17g}\n")
    print(
        "tail probabilities: "
        + ", ".join(f"P(r={r:g})={p:.4f}" for r, p in zip(table.r_values, table.probabilities))
    )
    if table.coarse_grid_flags:
        print(f"warning: coarse grid flagged in {table.coarse_grid_flags} replicates")
    return EXIT_OK


def cmd_lob_replay(args, doc, base_dir) -> int:
    model = _load_model(doc, base_dir)
    path = sim.read_path_csv(model, os.path.join(base_dir, doc["events"]))
    event_map = lob.load_event_map(os.path.join(base_dir, doc["event_map"]))
    book = doc["book"]
    initial = lob.BookState(
        ask_queues=np.asarray(book["ask_queues"], dtype=np.int64),
        bid_queues=np.asarray(book["bid_queues"], dtype=np.int64),
        q=int(book.get("q", 1)),
    )
    traj = lob.book_replay(initial, path, event_map)
    lob.write_trajectory_csv(traj, _out_path(args, "trajectory.csv"))
    print(
        f"replayed {path.total_events} events, {traj.violations} floored removals"
    )
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "asymptotics": cmd_asymptotics,
    "mc-study": cmd_mc_study,
    "pldi-probe": cmd_pldi_probe,
    "lob-replay": cmd_lob_replay,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppreg",
        description="Point-process regression: simulation, estimation, asymptotics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="master seed override")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument(
            "--threads", type=int, default=1, help="worker count (currently serial)"
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = _load_config(args.config)
        base_dir = os.path.dirname(os.path.abspath(args.config))
        return _COMMANDS[args.command](args, doc, base_dir)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _VALIDATION_ERRORS as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
