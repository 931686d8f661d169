"""Command-line interface: solve, train, table1, mu, kernel-check, gradcheck.

Every command takes a scenario, either builtin (--scenario failure-1d) or
from a TOML file (--config path).  File outputs land in
<output root>/<scenario output directory>/; the root is --out, else the
RMLAB_OUT environment variable, else ./out.  CSV files start with a
"# config-sha256=..." comment followed by a header row; floats are written
with 17 significant digits.

Exit codes: 0 success, 1 failed check (gradcheck above tolerance),
2 configuration/validation error, 3 numerical abort during training.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .analysis import QuadratureRule, deviation_report
from .exact import h_minus_one_norm, kernel_membership, rm_transform, solve_modified, solve_original
from .network import init_xavier, load_checkpoint, save_checkpoint
from .piecewise import jump_set, mu_functional
from .scenarios import ScenarioConfig, builtin_scenario, config_sha256, BUILTIN_SCENARIOS
from .training import NumericalAbort, gradient_audit, run_phases

OUT_ENV_VAR = "RMLAB_OUT"


# -- small IO helpers --------------------------------------------------------


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _write_csv(path, header, rows, sha):
    with open(path, "w") as fh:
        fh.write(f"# config-sha256={sha}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _load_config(args):
    if getattr(args, "config", None):
        cfg = ScenarioConfig.from_toml_file(args.config)
    else:
        cfg = builtin_scenario(args.scenario)
    overrides = {}
    training = cfg.training
    for field in ("steps", "seed", "lr", "lr_final", "n_int", "gamma"):
        value = getattr(args, field, None)
        if value is not None:
            training = dataclasses.replace(training, **{field: value})
    if training is not cfg.training:
        overrides["training"] = training
    if getattr(args, "widths", None):
        widths = tuple(int(w) for w in args.widths.split(","))
        overrides["network"] = dataclasses.replace(cfg.network, widths=widths)
    if getattr(args, "grid_points", None):
        overrides["outputs"] = dataclasses.replace(
            cfg.outputs, grid_points=args.grid_points
        )
    if getattr(args, "phases", None):
        from .scenarios import PhaseSpec

        phases = []
        for part in args.phases.split(","):
            bits = part.strip().split(":")
            if len(bits) != 2:
                raise ValueError(
                    f"--phases entries must look like kind:steps, got {part!r}"
                )
            phases.append(PhaseSpec(kind=bits[0], steps=int(bits[1])))
        overrides["phases"] = tuple(phases)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides).validate()
    return cfg


def _out_dir(args, cfg):
    root = args.out or os.environ.get(OUT_ENV_VAR) or "out"
    path = os.path.join(root, cfg.outputs.directory or cfg.name)
    os.makedirs(path, exist_ok=True)
    return path


def _solution_rows(fn, lo, hi, n):
    xs = np.linspace(lo, hi, n)
    vals = fn.evaluate(xs, 0)
    ders = fn.evaluate(xs, 1)
    return zip(xs, vals, ders)


# -- commands ----------------------------------------------------------------


def cmd_solve(args):
    cfg = _load_config(args)
    problem = cfg.build_problem()
    sha = config_sha256(cfg)
    out = _out_dir(args, cfg)
    method_orig = {"auto": "auto", "closed-form": "closed_form", "ode": "grid"}[args.method]
    method_mod = {"auto": "auto", "closed-form": "closed_form", "ode": "ode"}[args.method]
    u = solve_original(problem, method=method_orig)
    utilde = solve_modified(problem, method=method_mod)
    lo, hi = problem.domain
    n = cfg.outputs.grid_points
    _write_csv(
        os.path.join(out, "u.csv"),
        ("x", "value", "derivative"),
        _solution_rows(u, lo, hi, n),
        sha,
    )
    _write_csv(
        os.path.join(out, "utilde.csv"),
        ("x", "value", "derivative"),
        _solution_rows(utilde, lo, hi, n),
        sha,
    )
    defect = rm_transform(problem, utilde=utilde)
    kernel = kernel_membership(problem, tol=args.tol, utilde=utilde)
    payload = {
        "scenario": cfg.name,
        "config_sha256": sha,
        "atoms": [
            {"location": loc, "weight": w}
            for loc, w in zip(defect.locations, defect.weights)
        ],
        "kernel": {
            "member": kernel.member,
            "tol": kernel.tol,
            "max_defect": kernel.max_defect(),
            "diagnostics": kernel.diagnostics,
        },
        "mu": {
            "modified_solution_slope": mu_functional(
                problem.decomp, lambda x: utilde.evaluate(x, 1)
            ),
            "unit_slope": mu_functional(problem.decomp, lambda x: 1.0),
        },
        "h_minus_one_norm_of_defect": h_minus_one_norm(defect),
        "solver_provenance": {"u": u.provenance, "utilde": utilde.provenance},
    }
    _write_json(os.path.join(out, "rm_transform.json"), payload)
    print(f"solved {cfg.name}: wrote u.csv, utilde.csv, rm_transform.json to {out}")
    return 0


def _phase_tag(k, total):
    return "final" if k == total - 1 else f"phase{k + 1}"


def cmd_train(args):
    cfg = _load_config(args)
    problem = cfg.build_problem()
    sha = config_sha256(cfg)
    out = _out_dir(args, cfg)
    plan = cfg.phase_plan()
    target = None
    if any(p.risk_kind == "supervised" for p in plan):
        target = solve_original(problem)
    params0 = cfg.build_network()
    records = run_phases(params0, problem, plan, target=target)

    curve_rows = []
    checkpoints = []
    for k, rec in enumerate(records):
        for step in range(rec.risk_total.size):
            curve_rows.append(
                (
                    k + 1,
                    step,
                    rec.risk_total[step],
                    rec.risk_interior[step],
                    rec.risk_boundary[step],
                )
            )
        tag = _phase_tag(k, len(records))
        ck_path = os.path.join(out, f"checkpoint_{tag}.json")
        save_checkpoint(
            rec.params,
            ck_path,
            extra={
                "scenario": cfg.name,
                "config_sha256": sha,
                "phase": k + 1,
                "risk_kind": rec.config.risk_kind,
                "steps": rec.config.steps,
            },
        )
        checkpoints.append(ck_path)
    _write_csv(
        os.path.join(out, "risk_curve.csv"),
        ("phase", "step", "total", "interior", "boundary"),
        curve_rows,
        sha,
    )
    final = records[-1].params
    lo, hi = problem.domain
    _write_csv(
        os.path.join(out, "solution_samples.csv"),
        ("x", "value", "derivative"),
        _solution_rows(final, lo, hi, cfg.outputs.grid_points),
        sha,
    )
    summary = {
        "scenario": cfg.name,
        "config_sha256": sha,
        "phases": [
            {
                "phase": k + 1,
                "risk_kind": rec.config.risk_kind,
                "steps": rec.config.steps,
                "sample_seed": rec.config.seed,
                "final_total": rec.final.total,
                "final_interior": rec.final.interior,
                "final_boundary": rec.final.boundary,
                "wall_time_s": rec.wall_time,
                "checkpoint": checkpoints[k],
            }
            for k, rec in enumerate(records)
        ],
        "aborted": False,
    }
    _write_json(os.path.join(out, "summary.json"), summary)
    print(
        f"trained {cfg.name}: {len(records)} phase(s), "
        f"final risk {records[-1].final.total:.6e}; outputs in {out}"
    )
    return 0


_TABLE1_PARTS = "abcd"


def cmd_table1(args):
    cfg = _load_config(args)
    parts = args.parts
    if any(p not in _TABLE1_PARTS for p in parts):
        raise ValueError(f"--parts must use only letters from {_TABLE1_PARTS!r}")
    problem = cfg.build_problem()
    sha = config_sha256(cfg)
    out = _out_dir(args, cfg)
    rule = QuadratureRule.for_problem(problem)
    gp = cfg.outputs.grid_points

    u = solve_original(problem)
    utilde = solve_modified(problem)
    fns = {"u": u, "utilde": utilde}

    needs_net = any(p in parts for p in "bcd")
    needs_eff = "d" in parts
    if needs_net:
        fns["u_theta"] = _trained_network(args, cfg, problem, out, effective=False)
    if needs_eff:
        fns["utilde_theta"] = _trained_network(args, cfg, problem, out, effective=True)

    rep = deviation_report(fns, rule, grid_points=gp)
    sections = {
        "a": ("exact solutions", [("u", "utilde", ("utilde", "u"))]),
        "b": ("trained vs modified solution", [("u_theta", "utilde", ("utilde",))]),
        "c": ("trained vs original solution", [("u_theta", "u", ("u",))]),
        "d": ("residual-trained vs effective-trained", [("u_theta", "utilde_theta", ("utilde_theta",))]),
    }
    md = []
    csv_rows = []
    for p in _TABLE1_PARTS:
        if p not in parts:
            continue
        title, pairs = sections[p]
        md.append(f"## ({p}) {title}\n")
        md.append("| quantity | Linf | L2 | H1 |")
        md.append("| --- | --- | --- | --- |")
        for a, b, refs in pairs:
            rows = [(f"|{a} - {b}|", [rep.distance(a, b, w) for w in ("linf", "l2", "h1")])]
            for ref in refs:
                rows.append(
                    (
                        f"|{a} - {b}| / |{ref}|",
                        [rep.relative(a, b, w, ref) for w in ("linf", "l2", "h1")],
                    )
                )
            for label, vals in rows:
                md.append("| " + label + " | " + " | ".join(f"{v:.6g}" for v in vals) + " |")
                csv_rows.append((p, label) + tuple(vals))
        md.append("")
    with open(os.path.join(out, "table1.md"), "w") as fh:
        fh.write(f"# Deviation tables ({cfg.name})\n\n")
        fh.write("\n".join(md))
    _write_csv(
        os.path.join(out, "table1.csv"),
        ("part", "quantity", "linf", "l2", "h1"),
        csv_rows,
        sha,
    )
    print(f"wrote table1.md and table1.csv (parts {parts}) to {out}")
    return 0


def _trained_network(args, cfg, problem, out, effective):
    """Trained parameters for table1: from a checkpoint or trained inline.

    The 'effective' network is trained on the effective-form risk from an
    independent seed (seed + 1): with identical seeds the two risk kinds
    coincide term by term and the comparison would be trivially zero.
    """
    explicit = args.checkpoint_effective if effective else args.checkpoint
    default = os.path.join(
        out, "checkpoint_effective.json" if effective else "checkpoint_final.json"
    )
    path = explicit or default
    if os.path.exists(path):
        return load_checkpoint(path)
    if not args.train_inline:
        which = "effective-trained" if effective else "residual-trained"
        flag = "--checkpoint-effective" if effective else "--checkpoint"
        raise ValueError(
            f"missing {which} checkpoint {path}; run `rmlab train` into this "
            f"output directory, point {flag} at an existing checkpoint, or "
            f"pass --train-inline to train one now"
        )
    training = cfg.training
    net0 = cfg.build_network()
    if effective:
        training = dataclasses.replace(
            training, risk_kind="effective", seed=training.seed + 1
        )
        net0 = init_xavier(
            cfg.network.widths, cfg.network.seed + 1, cfg.network.architecture
        )
    rec = run_phases(net0, problem, [training])[-1]
    save_checkpoint(
        rec.params,
        path,
        extra={
            "scenario": cfg.name,
            "config_sha256": config_sha256(cfg),
            "risk_kind": training.risk_kind,
            "steps": training.steps,
            "inline": True,
        },
    )
    return rec.params


def cmd_mu(args):
    cfg = _load_config(args)
    problem = cfg.build_problem()
    coeffs = [float(c) for c in args.phi_prime.split(",")]
    phi_prime = lambda x: float(np.polynomial.polynomial.polyval(x, coeffs))
    subset = None
    if args.subset:
        lo, hi = (float(v) for v in args.subset.split(","))
        subset = (lo, hi)
    utilde = solve_modified(problem)
    payload = {
        "scenario": cfg.name,
        "config_sha256": config_sha256(cfg),
        "phi_prime_coeffs": coeffs,
        "subset": list(subset) if subset else None,
        "jumps": [
            {
                "location": r.location,
                "chi_plus": r.chi_plus,
                "chi_minus": r.chi_minus,
                "nu": r.nu,
            }
            for r in jump_set(problem.decomp)
        ],
        "mu": mu_functional(problem.decomp, phi_prime, subset=subset),
        "mu_modified_solution_slope": mu_functional(
            problem.decomp, lambda x: utilde.evaluate(x, 1), subset=subset
        ),
    }
    print(json.dumps(payload, indent=2, default=_json_default))
    return 0


def cmd_kernel_check(args):
    cfg = _load_config(args)
    problem = cfg.build_problem()
    utilde = solve_modified(problem)
    report = kernel_membership(problem, tol=args.tol, utilde=utilde)
    defect = rm_transform(problem, utilde=utilde)
    payload = {
        "scenario": cfg.name,
        "config_sha256": config_sha256(cfg),
        "member": report.member,
        "tol": report.tol,
        "max_defect": report.max_defect(),
        "diagnostics": report.diagnostics,
        "h_minus_one_norm_of_defect": h_minus_one_norm(defect),
    }
    print(json.dumps(payload, indent=2, default=_json_default))
    return 0


def cmd_gradcheck(args):
    cfg = _load_config(args)
    problem = cfg.build_problem()
    if args.quick:
        shapes = (((1, 4, 4, 1), "plain"),)
        seeds = (0, 1)
    else:
        shapes = (
            ((1, 2, 1), "plain"),
            ((1, 4, 4, 1), "plain"),
            ((1, 8, 8, 8, 1), "plain"),
            ((1, 5, 5, 5, 1), "resnet"),
        )
        seeds = (0, 1, 2, 3, 4)
    report = gradient_audit(
        problem, shapes=shapes, seeds=seeds, n_samples=args.n_samples
    )
    ok = report["max_rel_error"] <= args.tol
    payload = {
        "scenario": cfg.name,
        "max_rel_error": report["max_rel_error"],
        "tol": args.tol,
        "passed": ok,
        "cases": report["cases"],
    }
    print(json.dumps(payload, indent=2, default=_json_default))
    return 0 if ok else 1


# -- parser ------------------------------------------------------------------


def _add_scenario_args(p, training_overrides=True):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument(
        "--scenario", choices=BUILTIN_SCENARIOS, help="builtin scenario name"
    )
    group.add_argument("--config", help="path to a scenario TOML file")
    if training_overrides:
        p.add_argument("--steps", type=int, help="override training.steps")
        p.add_argument("--seed", type=int, help="override training.seed")
        p.add_argument("--lr", type=float, help="override training.lr")
        p.add_argument(
            "--lr-final",
            dest="lr_final",
            type=float,
            help="cosine-anneal the step size down to this value",
        )
        p.add_argument("--n-int", dest="n_int", type=int, help="override training.n_int")
        p.add_argument("--gamma", type=float, help="override training.gamma")
        p.add_argument("--widths", help="override network widths, e.g. 1,16,16,1")
        p.add_argument(
            "--phases",
            help="override phase plan, e.g. 'supervised:5000,rm:15000'",
        )
    p.add_argument(
        "--grid-points", dest="grid_points", type=int, help="override outputs.grid_points"
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rmlab",
        description=(
            "Residual-minimization laboratory for 1-d elliptic interface "
            "problems: exact solvers, interface diagnostics, and network training."
        ),
    )
    parser.add_argument(
        "--out",
        default=None,
        help=f"output root directory (default: ${OUT_ENV_VAR} or ./out)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve both equations exactly, emit CSV/JSON")
    _add_scenario_args(p, training_overrides=False)
    p.add_argument(
        "--method",
        choices=("auto", "closed-form", "ode"),
        default="auto",
        help="solver path (auto picks closed form for piecewise-constant A)",
    )
    p.add_argument("--tol", type=float, default=1e-9, help="kernel membership tolerance")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="train a network on a residual or supervised risk")
    _add_scenario_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("table1", help="deviation tables for exact and trained functions")
    _add_scenario_args(p)
    p.add_argument("--parts", default="a", help="which parts to emit, e.g. 'a' or 'abcd'")
    p.add_argument("--checkpoint", help="residual-trained checkpoint for parts b/c/d")
    p.add_argument(
        "--checkpoint-effective",
        dest="checkpoint_effective",
        help="effective-trained checkpoint for part d",
    )
    p.add_argument(
        "--train-inline",
        dest="train_inline",
        action="store_true",
        help="train missing checkpoints now instead of failing",
    )
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("mu", help="evaluate the jump functional for a slope polynomial")
    _add_scenario_args(p, training_overrides=False)
    p.add_argument(
        "--phi-prime",
        dest="phi_prime",
        default="1",
        help="comma-separated ascending coefficients of phi'(x); default the constant 1",
    )
    p.add_argument("--subset", help="restrict to jumps inside 'lo,hi'")
    p.set_defaults(func=cmd_mu)

    p = sub.add_parser("kernel-check", help="is f a fixed point of the residual transform?")
    _add_scenario_args(p, training_overrides=False)
    p.add_argument("--tol", type=float, default=1e-9, help="membership tolerance")
    p.set_defaults(func=cmd_kernel_check)

    p = sub.add_parser("gradcheck", help="finite-difference audit of risk gradients")
    _add_scenario_args(p, training_overrides=False)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=16)
    p.add_argument("--quick", action="store_true", help="one small shape, two seeds")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
