"""Command-line front end: batch verification runs with reproducible reports.

    pqbm check-global  --config cfg.json [--out DIR] [--seed N] [--budget N]
    pqbm check-local   --config cfg.json ...
    pqbm conditions    --config cfg.json ...
    pqbm list-scenarios

Every run writes results.csv (one row per cell, with formula identifier,
anchor string, seed and budget columns) and summary.json (versioned schema,
resolved configuration embedded).  Outputs contain no timestamps, so a
fixed config + seed reproduces them byte for byte.

Exit codes: 0 all verdicts as expected (an expect-fail scenario that fails
is expected), 1 verdict mismatch, 2 configuration/schema error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import global_checks as gc
from .bodies import Body
from .boundary import default_basis, local_form_max, smooth_body, smoothed_box
from .catalog import body_from_config, density_from_config
from .conditions import (ConditionInput, ConditionVerdict, prop_main_check,
                         remark_conditions_check, theorem_main_check)
from .errors import InputError, NumericError

SUMMARY_SCHEMA_VERSION = 1


def _load_config(args) -> dict:
    if args.example:
        ref = resources.files("pqbm").joinpath(f"scenarios/{args.example}.json")
        if not ref.is_file():
            raise InputError(f"no shipped scenario named {args.example!r}")
        cfg = json.loads(ref.read_text())
    elif args.config:
        cfg = json.loads(Path(args.config).read_text())
    else:
        raise InputError("provide --config PATH or --example NAME")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.budget is not None:
        cfg["budget"] = args.budget
    if args.tol is not None:
        cfg["tol"] = args.tol
    return cfg


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (np.floating, np.integer)):
        return repr(float(x)) if isinstance(x, np.floating) else str(int(x))
    return str(x)


def _write_reports(out_dir: Path, command: str, config: dict,
                   fieldnames: list[str], rows: list[dict], exit_code: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items() if k in fieldnames})
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "command": command,
        "config": config,
        "rows": rows,
        "exit_code": exit_code,
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2, default=_fmt) + "\n")
    return csv_path


def _lambda_grid(spec) -> list[float]:
    if isinstance(spec, dict):
        pts = int(spec.get("points", 9))
        return [float(x) for x in np.linspace(0.0, 1.0, pts)]
    if isinstance(spec, (int, float)):
        return [float(spec)]
    return [float(x) for x in spec]


def _as_list(spec) -> list[float]:
    if isinstance(spec, (int, float)):
        return [float(spec)]
    return [float(x) for x in spec]


def _exit_code_from(verdicts: list[str], expect: str | None) -> int:
    if expect == "fails":
        return 0 if any(v == "fails" for v in verdicts) else 1
    return 0 if all(v != "fails" for v in verdicts) else 1


# ---------------------------------------------------------------------------
# check-global


def run_check_global(cfg: dict, out_dir: Path) -> int:
    mode = cfg.get("mode", "midpoint")
    mu_cfg = cfg["density"]
    budget = int(cfg.get("budget", 10 ** 6))
    seed = int(cfg.get("seed", 0))
    method = cfg.get("method", "auto")
    expect = cfg.get("expect")
    rows: list[dict] = []
    verdicts: list[str] = []

    if mode == "midpoint":
        K = body_from_config(cfg["K"])
        L = body_from_config(cfg["L"])
        mu = density_from_config(mu_cfg, K.n)
        cell = 0
        for p in _as_list(cfg.get("p", [1.0])):
            for q in _as_list(cfg.get("q", [0.0])):
                if q > p:
                    raise InputError(f"cell has q={q} > p={p}")
                for lam in _lambda_grid(cfg.get("lambda", [0.5])):
                    rep = gc.midpoint_check(K, L, lam, p, q, mu, budget,
                                            gc.derive_seed(seed, cell), method)
                    row = rep.to_row()
                    row["cell"] = cell
                    rows.append(row)
                    verdicts.append(rep.verdict)
                    cell += 1
        fields = ["cell", "lambda", "p", "q", "density", "mu_K", "mu_L", "mu_M",
                  "deficit", "stderr", "verdict", "formula", "anchor",
                  "seed", "budget"]
    elif mode in ("concavity", "dilates"):
        if mode == "dilates":
            K = body_from_config(cfg["K"])
            mu = density_from_config(mu_cfg, K.n)
            t = float(cfg["t"])
            sweeps = [(p, p, lambda p=p: gc.dilates_check(
                K, t, p, _lambda_grid(cfg.get("lambda", {"points": 9})),
                budget, seed, method)) for p in _as_list(cfg.get("p", [0.5]))]
        else:
            K = body_from_config(cfg["K"])
            L = body_from_config(cfg["L"])
            mu = density_from_config(mu_cfg, K.n)
            sweeps = []
            for p in _as_list(cfg.get("p", [1.0])):
                for q in _as_list(cfg.get("q", [0.0])):
                    if q > p:
                        raise InputError(f"cell has q={q} > p={p}")
                    sweeps.append((p, q, lambda p=p, q=q: gc.concavity_sweep(
                        K, L, p, q, mu, _lambda_grid(cfg.get("lambda", {"points": 9})),
                        budget, seed, method)))
        for p, q, thunk in sweeps:
            rep = thunk()
            verdicts.append("holds" if rep.concave else "fails")
            for row in rep.rows():
                row.update({"concave": rep.concave,
                            "max_violation": rep.max_violation,
                            "formula": "pq-concavity-sweep",
                            "anchor": gc.ANCHOR_PQ})
                rows.append(row)
        fields = ["lambda", "p", "q", "phi", "stderr", "mu", "concave",
                  "max_violation", "density", "formula", "anchor",
                  "seed", "budget"]
    else:
        raise InputError(f"unknown check-global mode {mode!r}")

    code = _exit_code_from(verdicts, expect)
    path = _write_reports(out_dir, "check-global", cfg, fields, rows, code)
    print(f"check-global: {len(rows)} rows -> {path} (exit {code})")
    return code


# ---------------------------------------------------------------------------
# check-local


def _smooth_from_config(cfg: dict):
    body_cfg = cfg["body"]
    if body_cfg.get("family") == "smoothed_box":
        return smoothed_box(np.asarray(body_cfg["a"], float),
                            float(body_cfg.get("eps", 0.05)),
                            cfg.get("resolution"))
    body = body_from_config(body_cfg)
    return smooth_body(body, cfg.get("resolution"))


def run_check_local(cfg: dict, out_dir: Path) -> int:
    smooth = _smooth_from_config(cfg)
    mu = density_from_config(cfg["density"], smooth.n)
    basis = default_basis(smooth, cfg.get("k_max"), cfg.get("degree"))
    expect = cfg.get("expect")
    rows, verdicts = [], []
    for p in _as_list(cfg.get("p", [1.0])):
        for q in _as_list(cfg.get("q", [0.0])):
            if q > p:
                raise InputError(f"cell has q={q} > p={p}")
            spec = local_form_max(smooth, mu, p, q, basis)
            argmax = basis.labels[int(np.argmax(np.abs(spec.coefficients)))]
            verdict = "holds" if spec.holds else "fails"
            rows.append({"p": p, "q": q, "density": mu.name,
                         "basis_size": basis.size,
                         "max_eigenvalue": spec.max_eigenvalue,
                         "tol": spec.tol, "argmax_mode": argmax,
                         "verdict": verdict,
                         "formula": "pq-second-variation-eigenvalue",
                         "anchor": "Q(g) <= 0 for all even g on the basis span",
                         "seed": cfg.get("seed", 0), "budget": 0})
            verdicts.append(verdict)
    fields = ["p", "q", "density", "basis_size", "max_eigenvalue", "tol",
              "argmax_mode", "verdict", "formula", "anchor", "seed", "budget"]
    code = _exit_code_from(verdicts, expect)
    path = _write_reports(out_dir, "check-local", cfg, fields, rows, code)
    print(f"check-local: {len(rows)} rows -> {path} (exit {code})")
    return code


# ---------------------------------------------------------------------------
# conditions


def _condition_row(row: dict) -> tuple[dict, ConditionVerdict]:
    check = row.get("check", "theorem")
    inp = ConditionInput(
        n=int(row["n"]), p=float(row["p"]), q=float(row["q"]),
        r=float(row["r"]), k1=float(row["k1"]), k2=float(row["k2"]),
        R=float(row["R"]) if row.get("R") not in (None, "") else None,
        c_poin_inv_sq=(float(row["c_poin_inv_sq"])
                       if row.get("c_poin_inv_sq") not in (None, "") else None))
    if check == "theorem":
        verdict = theorem_main_check(inp)
    elif check == "proposition":
        verdict = prop_main_check(inp)
    elif check.startswith("remark-"):
        system = {"remark-quadratic": "poincare-quadratic",
                  "remark-radius": "poincare-radius",
                  "remark-inclusion": "poincare-inclusion"}.get(check)
        if system is None:
            raise InputError(f"unknown condition check {check!r}")
        verdict = remark_conditions_check(inp, system)
    else:
        raise InputError(f"unknown condition check {check!r}")
    out = dict(row)
    out.update({"satisfied": verdict.satisfied, "branch": verdict.branch,
                "slack": verdict.slack, "formula": verdict.formula,
                "flags": ";".join(verdict.flags)})
    return out, verdict


def run_conditions(cfg: dict, out_dir: Path) -> int:
    if "rows" in cfg:
        in_rows = cfg["rows"]
    elif "csv" in cfg:
        with open(cfg["csv"], newline="") as fh:
            in_rows = list(csv.DictReader(fh))
    else:
        raise InputError("conditions config needs 'rows' or 'csv'")
    rows = []
    for row in in_rows:
        out, _ = _condition_row(row)
        rows.append(out)
    fields = ["n", "p", "q", "r", "R", "k1", "k2", "c_poin_inv_sq", "check",
              "satisfied", "branch", "slack", "formula", "flags"]
    code = 0
    path = _write_reports(out_dir, "conditions", cfg, fields, rows, code)
    print(f"conditions: {len(rows)} rows -> {path} (exit {code})")
    return code


# ---------------------------------------------------------------------------


def list_scenarios() -> list[str]:
    base = resources.files("pqbm").joinpath("scenarios")
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqbm",
        description="Numerical checks of (p,q)-Brunn-Minkowski inequalities "
                    "for log-concave measures on symmetric convex bodies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check-global", "check-local", "conditions"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration path")
        sp.add_argument("--example", help="name of a shipped scenario")
        sp.add_argument("--out", default="pqbm-out", help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--budget", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--jobs", type=int, default=1,
                        help="worker hint for cell-parallel sweeps")
    sub.add_parser("list-scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        for name in list_scenarios():
            print(name)
        return 0
    try:
        cfg = _load_config(args)
        out_dir = Path(args.out)
        if args.command == "check-global":
            return run_check_global(cfg, out_dir)
        if args.command == "check-local":
            return run_check_local(cfg, out_dir)
        return run_conditions(cfg, out_dir)
    except (InputError, KeyError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
