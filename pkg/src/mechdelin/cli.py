"""Command-line harness: one subcommand per capability, plus config-driven runs.

Exit codes: 0 success, 1 a named check failed, 2 bad input, 3 a size limit was hit.
Every flag can be defaulted from the environment as ``MECHDELIN_<FLAG>``
(e.g. ``MECHDELIN_SEED=7``).
"""

from __future__ import annotations

import argparse
import inspect
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import experiments
from .complexity import (
    BoundInputs,
    OutlierInputs,
    empirical_rademacher,
    gap_experiment,
    generalization_epsilon,
    outlier_bound,
    shattering_check,
)
from .erm import ObjectiveSpec, run_erm
from .errors import DomainError, GeometryError, ResourceError
from .io import (
    distribution_from_json,
    hierarchy_from_json,
    load_json,
    mechanism_from_json,
    profile_from_json,
    samples_from_json,
    samples_to_json,
)
from .mechanisms import KINDS, MechanismClass
from .partition import (
    Arrangement,
    ThinCellWarning,
    class_t,
    default_box,
    demand_signature,
    enumerate_cells_2d,
    hyperplanes_for,
    pdim_upper_bound,
    sample_cells,
    verify_affine_in_cell,
)
from .report import FORMATS, RunRecord, emit_report, render
from .spm import spm_select
from .valuations import sample_profiles

ENV_PREFIX = "MECHDELIN_"
ALIASES = {
    "two_part_tariff": "two_part_tariff_menu",
    "tariff": "two_part_tariff_menu",
    "nonlinear": "nonlinear_pricing",
    "second_price": "second_price_reserves",
    "lottery": "lottery_menu",
    "item_lottery": "item_lottery_menu",
}
PATH_KEYS = ("profile", "structure", "samples", "distribution", "hierarchy", "params")
UNRECORDED = ("out", "format", "workers", "func", "command")


def _env(name: str, fallback):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return fallback
    return type(fallback)(raw) if fallback is not None else raw


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise DomainError(f"--{what}: expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# class construction


def _mechanism(kind: str | None, structure: str | None, profiles) -> tuple[MechanismClass, list | None]:
    raw = load_json(structure) if structure else {}
    if kind:
        kind = ALIASES.get(kind, kind)
        if raw.get("kind", kind) != kind:
            raise DomainError(f"--class {kind} disagrees with structure kind {raw['kind']!r}")
        raw = {**raw, "kind": kind}
    if "kind" not in raw:
        raise DomainError("--class: no mechanism kind given")
    if raw["kind"] not in KINDS:
        raise DomainError(f"--class: unknown mechanism kind {raw['kind']!r} (known: {', '.join(KINDS)})")
    st = dict(raw.get("structure", {}))
    if profiles:
        first = profiles[0]
        st.setdefault("n", first.n)
        st.setdefault("m", first.m)
        caps = first.buyers[0].caps
        if caps is not None and raw["kind"] in ("two_part_tariff_menu", "nonlinear_pricing",
                                                 "nonlinear_pricing_decomposable"):
            st.setdefault("caps", list(caps))
    return mechanism_from_json({**raw, "structure": st}, "structure")


def _box(arg: str | None, mc: MechanismClass, profiles):
    if not arg:
        return default_box(mc, profiles)
    vals = _floats(arg, "box")
    if len(vals) == 2:
        return np.full(mc.dim, vals[0]), np.full(mc.dim, vals[1])
    if len(vals) == 2 * mc.dim:
        return np.array(vals[: mc.dim]), np.array(vals[mc.dim:])
    raise DomainError(f"--box: give LO,HI or {mc.dim} lows followed by {mc.dim} highs")


def _samples(path):
    raw = load_json(path)
    return samples_from_json(raw), raw.get("seed") if isinstance(raw, dict) else None


# ---------------------------------------------------------------------------
# subcommands


def cmd_partition(a) -> RunRecord:
    prof = profile_from_json(load_json(a.profile))
    mc, _ = _mechanism(a.class_, a.structure, [prof])
    z = np.array(_floats(a.z, "z")) if a.z else None
    lo, hi = _box(a.box, mc, [prof])
    raw = hyperplanes_for(mc, prof, z)
    arr = Arrangement(raw, lo, hi)
    if mc.dim == 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ThinCellWarning)
            cells, how = enumerate_cells_2d(arr, keep_thin=True), "exact_2d"
    else:
        cells, how = sample_cells(arr, a.probes, a.seed), "sampled"
    rows = []
    for ci, c in enumerate(cells):
        try:
            resid = verify_affine_in_cell(mc, prof, c, arr, a.trials, seed=a.seed + ci, z=z).max_residual
        except GeometryError:
            resid = float("nan")
        rows.append({
            "sign_vector": "".join("+" if s > 0 else "-" for s in c.sign_vector),
            "witness": list(c.witness),
            "affine_residual": resid,
            "demand_signature": json.dumps(demand_signature(mc, prof, c.witness)),
            "margin": c.margin,
            "thin": bool(np.isnan(resid)),
        })
    planes = [{"normal": list(h.normal), "offset": h.offset, "label": h.label} for h in raw]
    summary = {"class": mc.kind, "d": mc.dim, "t": class_t(mc, prof), "hyperplanes": len(raw),
               "distinct_hyperplanes": arr.k, "cells": len(cells), "method": how,
               "box": [list(lo), list(hi)], "hyperplane_list": planes}
    return RunRecord("partition", {}, rows, summary)


def cmd_erm(a) -> RunRecord:
    profiles, _ = _samples(a.samples)
    mc, _ = _mechanism(a.class_, a.structure, profiles)
    lo, hi = _box(a.box, mc, profiles)
    z = np.array(_floats(a.z, "z")) if a.z else None
    res = run_erm(mc, ObjectiveSpec.build(profiles), a.method, seed=a.seed, resolution=a.resolution,
                  draws=a.draws, lo=lo, hi=hi, z=z)
    row = {"method": res.method, "best_value": res.best_value, "best_params": list(res.best_params),
           "cells_examined": res.cells_examined}
    return RunRecord("erm", {}, [row], {**row, "N": len(profiles), "class": mc.kind, "d": mc.dim})


def cmd_rademacher(a) -> RunRecord:
    profiles, _ = _samples(a.samples)
    mc, _ = _mechanism(a.class_, a.structure, profiles)
    est = empirical_rademacher(mc, profiles, a.draws, a.seed, a.sup_method, draws=a.erm_draws)
    rows = [{"draw": k, "seed": a.seed, "sup": s} for k, s in enumerate(est.sups)]
    return RunRecord("rademacher", {}, rows, {"mean": est.mean, "stderr": est.stderr, "draws": est.draws,
                                              "sup_method": est.sup_method, "N": len(profiles)})


def cmd_bound(a) -> RunRecord:
    inp = BoundInputs(a.U, a.d, a.t, a.N, a.delta, a.constant)
    summary = {"epsilon": generalization_epsilon(inp), "pdim_upper_bound": pdim_upper_bound(a.d, a.t),
               "U": a.U, "d": a.d, "t": a.t, "N": a.N, "delta": a.delta, "constant": a.constant}
    if a.a is not None and a.b is not None:
        summary["outlier_epsilon"] = outlier_bound(OutlierInputs(a.a, a.b, inp))
    return RunRecord("bound", {}, [summary], summary)


def cmd_shatter(a) -> RunRecord:
    profiles, _ = _samples(a.samples)
    mc, _ = _mechanism(a.class_, a.structure, profiles)
    witnesses = _floats(a.witnesses, "witnesses")
    params = load_json(a.params) if a.params else None
    res = shattering_check(mc, profiles, witnesses, params, a.sup_method, a.seed)
    rows = [{"labeling": "".join("1" if x else "0" for x in lab), "params": list(p)}
            for lab, p in sorted(res.realizing_params.items(), reverse=True)]
    return RunRecord("shatter", {}, rows, {"shattered": res.shattered, "realized": res.realized_labelings,
                                           "total": res.total_labelings, "seed": a.seed})


def cmd_gap(a) -> RunRecord:
    dist = distribution_from_json(load_json(a.distribution))
    mc, _ = _mechanism(a.class_, a.structure, dist.profiles)
    rep = gap_experiment(mc, dist, a.N, a.trials, a.seed, a.sup_method, a.delta)
    summary = {"U": rep.U, "d": rep.d, "t": rep.t, "max_gap": rep.max_gap, "mean_gap": rep.mean_gap,
               "epsilon": {str(k): v for k, v in rep.epsilon.items()},
               "fraction_within": {str(k): v for k, v in rep.frac_within.items()}}
    return RunRecord("gap", {}, rep.rows, summary)


def cmd_spm(a) -> RunRecord:
    weights = a.weights
    if weights not in ("geometric", "uniform"):
        weights = load_json(weights)
    h = hierarchy_from_json(load_json(a.hierarchy), weights=weights)
    profiles, _ = _samples(a.samples)
    if a.distribution:
        bound_source = distribution_from_json(load_json(a.distribution))
    elif a.U is not None:
        bound_source = a.U
    else:
        raise DomainError("spm needs --distribution or --U to scale the penalties")
    res = spm_select(h, profiles, bound_source, a.delta, a.sup_method, a.seed)
    rows = [{"level": r.level, "d": r.d, "t": r.t, "weight": r.weight, "empirical_max": r.empirical_max,
             "epsilon": r.epsilon, "epsilon_direct": r.epsilon_direct, "lower_bound": r.lower_bound,
             "params": list(r.params)} for r in res.levels]
    return RunRecord("spm", {}, rows, {"selected_level": res.selected_level,
                                       "selected_params": list(res.selected_params), "U": res.U})


def cmd_sample(a) -> RunRecord:
    dist = distribution_from_json(load_json(a.distribution))
    s = sample_profiles(dist, a.N, a.seed)
    rows = [{"sample": k, "atom": int(i)} for k, i in enumerate(s.atom_indices)]
    return RunRecord("sample", {}, rows, {"N": a.N, "seed": a.seed,
                                          "samples": samples_to_json(s.profiles, a.seed)})


def cmd_check(a) -> RunRecord:
    if a.name not in experiments.CHECKS:
        raise DomainError(f"unknown check {a.name!r} (known: {', '.join(experiments.CHECKS)})")
    params = json.loads(a.params) if a.params else {}
    fn = experiments.CHECKS[a.name]
    if "seed" in inspect.signature(fn).parameters:
        params.setdefault("seed", a.seed)
    res = fn(**params)
    summary = {"criterion": res.key, "title": res.title, "passed": res.passed, **res.summary,
               "flags": res.flags, "line": res.line()}
    return RunRecord("check", {}, res.rows, summary)


# ---------------------------------------------------------------------------
# parser and dispatch


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=_env("seed", 0))
    common.add_argument("--workers", type=int, default=_env("workers", 1),
                        help="worker count; results do not depend on it")
    common.add_argument("--out", default=_env("out", None), help="write the report here")
    common.add_argument("--format", choices=FORMATS, default=_env("format", "json"))

    p = argparse.ArgumentParser(prog="mechdelin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    def klass(sp, samples=True):
        sp.add_argument("--class", dest="class_", default=_env("class", None))
        sp.add_argument("--structure", default=_env("structure", None), help="mechanism JSON")
        if samples:
            sp.add_argument("--samples", required=True)

    sp = add("partition", cmd_partition, "hyperplanes and cells for one profile")
    sp.add_argument("--profile", required=True)
    klass(sp, samples=False)
    sp.add_argument("--box", default=None, help="LO,HI (all coordinates) or per-coordinate lows then highs")
    sp.add_argument("--probes", type=int, default=_env("probes", 500))
    sp.add_argument("--trials", type=int, default=32)
    sp.add_argument("--z", default=None, help="relaxation point for lottery menus")

    sp = add("erm", cmd_erm, "empirical profit maximization")
    klass(sp)
    sp.add_argument("--method", default="exact", choices=("exact", "auto", "grid", "random"))
    sp.add_argument("--resolution", type=float, default=0.05)
    sp.add_argument("--draws", type=int, default=2000)
    sp.add_argument("--box", default=None)
    sp.add_argument("--z", default=None)

    sp = add("rademacher", cmd_rademacher, "empirical Rademacher complexity")
    klass(sp)
    sp.add_argument("--draws", type=int, default=50, help="sign draws")
    sp.add_argument("--sup-method", default="exact", choices=("exact", "auto", "grid", "random"))
    sp.add_argument("--erm-draws", type=int, default=2000)

    sp = add("bound", cmd_bound, "generalization bound values")
    sp.add_argument("--U", type=float, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--t", type=int, required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--constant", type=float, default=1.0)
    sp.add_argument("--a", type=float, default=None, help="outlier threshold")
    sp.add_argument("--b", type=float, default=None, help="outlier mass")

    sp = add("shatter", cmd_shatter, "count realized labelings of a sample set")
    klass(sp)
    sp.add_argument("--witnesses", required=True, help="comma-separated thresholds")
    sp.add_argument("--params", default=None, help="JSON list of parameter vectors to try")
    sp.add_argument("--sup-method", default="random", choices=("exact", "auto", "grid", "random"))

    sp = add("gap", cmd_gap, "empirical vs true profit of the empirical maximizer")
    klass(sp, samples=False)
    sp.add_argument("--distribution", required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--sup-method", default="exact", choices=("exact", "auto", "grid", "random"))

    sp = add("spm", cmd_spm, "structural profit maximization over nested classes")
    sp.add_argument("--hierarchy", required=True)
    sp.add_argument("--samples", required=True)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--weights", default="geometric", help="geometric, uniform or a JSON file")
    sp.add_argument("--distribution", default=None, help="used to compute U")
    sp.add_argument("--U", type=float, default=None)
    sp.add_argument("--sup-method", default="exact", choices=("exact", "auto", "grid", "random"))

    sp = add("sample", cmd_sample, "draw profiles from a distribution")
    sp.add_argument("--distribution", required=True)
    sp.add_argument("--N", type=int, required=True)

    sp = add("check", cmd_check, "run one acceptance check")
    sp.add_argument("name", choices=sorted(experiments.CHECKS))
    sp.add_argument("--params", default=None, help="JSON object of keyword overrides")

    sp = sub.add_parser("run", parents=[common], help="run a JSON config")
    sp.add_argument("config")
    sp.set_defaults(func=None)
    return p


def config_to_argv(config: dict, base: Path) -> list[str]:
    """Turn ``{"command": "erm", "samples": "s.json", ...}`` into argv; paths resolve against ``base``."""
    if "command" not in config:
        raise DomainError("config.command: missing required field")
    argv = [config["command"]]
    if config["command"] == "check":
        argv.append(config.get("name", ""))
    for key, val in config.items():
        if key in ("command", "name") or val is None:
            continue
        if key in PATH_KEYS and isinstance(val, str):
            val = str(base / val)
        if key == "params" and not isinstance(val, str):
            val = json.dumps(val)
        elif isinstance(val, (list, tuple)):
            val = ",".join(str(v) for v in val)
        flag = "--class" if key == "class" else "--" + key.replace("_", "-")
        argv += [flag, str(val)]
    return argv


def _recorded(args) -> dict:
    return {k.rstrip("_"): v for k, v in vars(args).items() if k not in UNRECORDED}


def execute(args) -> RunRecord:
    start = time.perf_counter()
    rec = args.func(args)
    rec.command = args.command
    rec.config = _recorded(args)
    rec.wall_time = time.perf_counter() - start
    return rec


def _write(rec: RunRecord, args) -> None:
    if args.command == "sample" and args.out and args.format == "json":
        Path(args.out).write_text(json.dumps(rec.summary["samples"], indent=2) + "\n")
        print(f"sample: wrote {args.out}")
        return
    if not args.out:
        sys.stdout.write(render(rec, args.format))
        return
    emit_report(rec, args.format, args.out)
    if args.format == "json":
        emit_report(rec, "csv", Path(args.out).with_suffix(".csv"))
    line = rec.summary.get("line") or f"{args.command}: wrote {args.out}"
    print(line)


def run(config: dict, base: Path | str = ".") -> RunRecord:
    """Run a config dict exactly as the CLI would, returning the record."""
    args = build_parser().parse_args(config_to_argv(config, Path(base)))
    return execute(args)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            path = Path(args.config)
            config = load_json(path)
            # --out and --format given on the command line fill in what the config leaves open
            extra = {k: getattr(args, k) for k in ("out", "format") if k not in config}
            args = parser.parse_args(config_to_argv({**config, **extra}, path.parent))
        rec = execute(args)
        _write(rec, args)
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ResourceError as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return 3
    if args.command == "check" and not rec.summary["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
