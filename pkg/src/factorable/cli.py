"""Batch experiment runner.

    factorable run      --config cfg.json [--seed S] [--out DIR] [--threads N]
    factorable verify   --suite NAME [--config cfg.json] ...
    factorable simulate --config cfg.json --out DIR
    factorable export   --out DIR

Exit status: 0 when every assertion is PASS or SKIPPED, 1 on any FAIL or
pipeline error, 2 on usage errors (bad flags, invalid config, unknown suite).
Outputs are staged in a temporary directory and moved into place only when
the run finishes, so an aborted run leaves no partial files.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import platform
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy

from . import io as fio
from .bounds import (entropy_integral_bound, kr_factor_bound, kr_modulus_bound, kr_w_matrix,
                     v_functional)
from .config import ConfigError, ExperimentConfig
from .factorize import (DegenerateFieldError, build_factorization, heavy_tail_factorization,
                        rectangle_factorization)
from .fields import THREADS_ENV, resolve_threads
from .metric import DiscreteMeasure, natural_distance, orlicz_distance
from .modulus import theta_function
from .orlicz import GLSNorm, PsiFunction, lp_norm, nabla2_constant
from .suites import FAIL, PASS, SKIPPED, SUITE_NAMES, CheckResult, run_suite, thin

log = logging.getLogger("factorable")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _pipeline_factorize(cfg, ens, stage, results, checks):
    res = build_factorization(ens, None, cfg.plan.build(), cfg.norm_spec(), cfg.delta_grid)
    fio.write_factorization(stage, res)
    results["factorize"] = fio.factorization_to_dict(res)
    ok = res.pathwise_ok()
    checks.append(CheckResult("factorize.pathwise", PASS if ok.all() else FAIL,
                              f"{ok.mean():.2%} of {ok.size} realizations at {res.deltas.size} knots"))
    checks.append(CheckResult("factorize.tau_norm", PASS if res.tau_norm <= 1.02 else FAIL,
                              f"||tau|| = {res.tau_norm:.6f}"))
    t0n = res.meta["tau0_norm"]
    checks.append(CheckResult("factorize.tau0_norm", PASS if abs(t0n - 1) <= 0.02 else FAIL,
                              f"||tau0|| = {t0n:.12f}"))


def _pipeline_entropy(cfg, ens, stage, results, checks):
    small = thin(ens, 257)
    psi = PsiFunction.from_config(cfg.options.entropy_psi)
    spec = cfg.options.entropy_deltas
    deltas = np.geomspace(spec["lo"], spec["hi"], int(spec["n"]))
    space = natural_distance(small, psi)
    bound = entropy_integral_bound(space, psi, deltas)
    emp = theta_function(small.values, space, np.concatenate([[0.0], deltas]), GLSNorm(psi)).y[1:]
    fio.write_bounds_csv(stage / "bounds.csv", deltas, emp, bound)
    results["entropy-bound"] = {"points": small.n, "psi": psi.to_config(),
                                "deltas": deltas, "bound": bound, "empirical": emp}
    ok = bound >= emp
    checks.append(CheckResult("entropy.dominance", PASS if ok.all() else FAIL,
                              f"{int(ok.sum())}/{ok.size} deltas dominated"))


def _pipeline_kr(cfg, ens, stage, results, checks):
    small = thin(ens, cfg.options.kr_points)
    p, th = cfg.options.kr_p, cfg.options.kr_theta
    measure = DiscreteMeasure.uniform(small.n)
    # the empirical L_p distance satisfies the moment condition with equality
    space = natural_distance(small, PsiFunction.degenerate(p))
    out = {"points": small.n, "p": p, "theta_reg": th}
    res = kr_factor_bound(small.values, space, measure, p, th)
    out.update({"z_mean": res.z_mean, "C_theta": res.C_theta})
    checks.append(CheckResult("kr.z_mean", PASS if res.z_mean <= 1.05 else FAIL,
                              f"mean Z = {res.z_mean:.4e}"))
    phi = cfg.orlicz()
    if phi is None:
        checks.append(CheckResult("kr.modulus", SKIPPED, "norm is not an Orlicz norm"))
    elif nabla2_constant(phi) is None:
        checks.append(CheckResult("kr.modulus", SKIPPED, f"{phi.name} has no finite nabla_2 constant"))
    else:
        d_phi = orlicz_distance(small, phi)
        V = v_functional(small.values, d_phi, measure, phi)
        W = kr_w_matrix(d_phi, measure, V, phi)
        finite = W[np.isfinite(W) & (W > 0)]
        deltas = np.quantile(finite, np.linspace(0.05, 1.0, 20))
        rows = kr_modulus_bound(d_phi, measure, phi, V, deltas, values=small.values, w_matrix=W)
        fio.write_bounds_csv(stage / "kr_bounds.csv", deltas,
                             [r.empirical for r in rows], [r.bound for r in rows])
        ok = all(r.empirical <= r.bound for r in rows)
        out.update({"V": V, "C2": rows[0].C2, "K": rows[0].K})
        checks.append(CheckResult("kr.V", PASS if V <= 1.05 else FAIL, f"V(d_Phi) = {V:.6f}"))
        checks.append(CheckResult("kr.modulus", PASS if ok else FAIL,
                                  f"empirical norm <= delta/C2 on {len(rows)} deltas"))
    results["kr-bound"] = out


def _pipeline_rectangle(cfg, ens, stage, results, checks):
    if ens.axes is None:
        checks.append(CheckResult("rectangle.pathwise", SKIPPED,
                                  f"generator {cfg.generator.family!r} is not on a tensor grid"))
        return
    res = rectangle_factorization(ens, cfg.plan.build(), cfg.norm_spec(), cfg.options.direction)
    fio.write_factorization(stage, res, prefix="rectangle_")
    results["rectangle"] = fio.factorization_to_dict(res)
    ok = res.pathwise_ok()
    checks.append(CheckResult("rectangle.pathwise", PASS if ok.all() else FAIL,
                              f"{ok.mean():.2%} of {ok.size} realizations"))


def _pipeline_heavy(cfg, ens, stage, results, checks):
    raw = [float(np.max(lp_norm(ens.values[:M], 4, axis=0)))
           for M in (ens.M // 100, ens.M // 10, ens.M) if M >= 2]
    res = heavy_tail_factorization(ens, cfg.options.m, cfg.plan.build(), cfg.norm_spec(),
                                   cfg.delta_grid)
    fio.write_factorization(stage, res, prefix="heavy_")
    results["heavy-tail"] = {**fio.factorization_to_dict(res), "raw_l4_by_M": raw}
    ok = res.pathwise_ok()
    checks.append(CheckResult("heavy.pathwise", PASS if ok.all() else FAIL,
                              f"{ok.mean():.2%} of {ok.size} realizations"))


PIPELINE_FUNCS = {
    "factorize": _pipeline_factorize,
    "entropy-bound": _pipeline_entropy,
    "kr-bound": _pipeline_kr,
    "rectangle": _pipeline_rectangle,
    "heavy-tail": _pipeline_heavy,
}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _versions():
    from . import __version__
    return {"factorable": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _report(cfg, kind, results, checks, started, elapsed):
    return {
        "header": {"timestamp": started, "wall_clock_s": elapsed},
        "kind": kind,
        "config": cfg.to_dict(),
        "seed": cfg.generator.seed,
        "versions": _versions(),
        "results": results,
        "assertions": [{"name": c.name, "status": c.status, "reason": c.reason} for c in checks],
        "passed": all(c.status in (PASS, SKIPPED) for c in checks),
    }


def _publish(stage: Path, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    for f in sorted(stage.iterdir()):
        os.replace(f, out / f.name)


def _staged(out: Path):
    out.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{out.name}.stage.", dir=out.parent))


def run(cfg: ExperimentConfig, threads=None) -> tuple:
    """Simulate, run the selected pipelines and write every output.

    Returns ``(report, exit_code)``.
    """
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    out = Path(cfg.out)
    stage = _staged(out)
    results, checks = {}, []
    try:
        ens = cfg.generator.simulate(threads)
        fio.write_ensemble(stage, ens)
        for name in cfg.pipelines:
            try:
                PIPELINE_FUNCS[name](cfg, ens, stage, results, checks)
            except DegenerateFieldError as exc:
                checks.append(CheckResult(name, FAIL, f"degenerate field: {exc}"))
            except ValueError as exc:
                checks.append(CheckResult(name, FAIL, f"pipeline error: {exc}"))
        report = _report(cfg, "run", results, checks, started, time.perf_counter() - t0)
        fio.write_json(stage / "report.json", report)
        _publish(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return report, EXIT_OK if report["passed"] else EXIT_FAIL


def verify(cfg: ExperimentConfig, suite: str, threads=None) -> tuple:
    if suite not in SUITE_NAMES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITE_NAMES)}")
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    checks = run_suite(suite, cfg, threads=threads)
    for c in checks:
        print(c.line())
    report = _report(cfg, f"verify:{suite}", {}, checks, started, time.perf_counter() - t0)
    out = Path(cfg.out)
    stage = _staged(out)
    try:
        fio.write_json(stage / "report.json", report)
        _publish(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return report, EXIT_OK if report["passed"] else EXIT_FAIL


def simulate(cfg: ExperimentConfig, threads=None) -> int:
    ens = cfg.generator.simulate(threads)
    out = Path(cfg.out)
    stage = _staged(out)
    try:
        fio.write_ensemble(stage, ens)
        _publish(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return EXIT_OK


def export(out_dir) -> int:
    out = Path(out_dir)
    if not (out / "ensemble.bin").exists():
        raise UsageError(f"no ensemble.bin in {out}; run 'simulate' first")
    ens = fio.read_ensemble(out)
    fio.write_ensemble_csv(out / "ensemble.csv", ens)
    if ens.space is not None:
        fio.write_json(out / "space.json", fio.space_to_dict(ens.space))
        fio.write_space_edges(out / "space_edges.csv", ens.space)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="factorable", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "verify", "simulate", "export"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--threads", type=int, help=f"worker threads (env {THREADS_ENV})")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            p.add_argument("--suite", required=True, help=f"one of {', '.join(SUITE_NAMES)}")
    return ap


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("--seed", "must be an unsigned 64-bit integer")
    return cfg.with_overrides(seed=args.seed, out=args.out, threads=args.threads)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "export":
            if args.out is None:
                raise UsageError("export needs --out")
            return export(args.out)
        cfg = _load(args)
        threads = resolve_threads(cfg.threads)
        if args.command == "run":
            report, code = run(cfg, threads)
            for a in report["assertions"]:
                print(f"{a['status']:7s} {a['name']}: {a['reason']}")
            return code
        if args.command == "verify":
            if not args.suite:
                raise UsageError("--suite must not be empty")
            return verify(cfg, args.suite, threads)[1]
        return simulate(cfg, threads)
    except (ConfigError, UsageError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
