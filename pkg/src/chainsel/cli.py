"""Command-line front end: one subcommand per experiment family.

Each run resolves its parameters into a config dict, validates it, writes its
artifact (if ``--out`` is given) and prints a summary JSON on stdout.
Exit status: 0 success, 2 bad configuration, 1 runtime fault.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import io, pdmp, planar, renewal, stats, strategies, value
from .errors import ConfigError, DomainError

COMMANDS = ("solve", "simulate", "fixedn", "pdmp", "moments", "coverage", "renewal",
            "clt", "compare", "fit")


@dataclass
class ExperimentConfig:
    command: str
    strategy: Optional[str] = None
    control: Optional[str] = None
    t: Optional[float] = None
    z: Optional[float] = None
    z_max: Optional[float] = None
    h: float = value.DEFAULT_H
    reps: Optional[int] = None
    seed: int = 0
    n: Optional[int] = None
    gamma: Optional[float] = None
    z_lower: Optional[float] = None
    grid_step: float = 1.0
    window: Optional[tuple] = None
    threads: int = 1
    out: Optional[str] = None

    def validate(self):
        def need(name, ok, what):
            if not ok:
                raise ConfigError(f"--{name}: {what}")

        c = self.command
        for text in (self.strategy, self.control):
            if text and text.startswith("gamma:"):
                try:
                    self.gamma = float(text.split(":", 1)[1])
                except ValueError:
                    raise ConfigError(f"bad gamma value in {text!r}") from None
        need("step", 0 < self.h <= 1e-2, "grid step must lie in (0, 0.01]")
        need("threads", self.threads >= 1, "must be at least 1")
        if self.reps is not None and c not in ("pdmp",):
            need("reps", self.reps >= 100, "must be at least 100")
        if c == "solve":
            need("zmax", self.z_max is not None and self.z_max >= 10, "must be at least 10")
        if c == "simulate":
            need("t", self.t is not None and self.t >= 0, "horizon t must be non-negative")
            need("reps", self.reps is not None, "required")
        if c == "fixedn":
            need("n", self.n is not None and self.n >= 1, "must be at least 1")
            need("reps", self.reps is not None, "required")
        if c == "pdmp":
            need("z", self.z is not None and self.z >= 0, "start z0 must be non-negative")
            if self.reps is not None:
                need("reps", self.reps >= 100, "must be at least 100")
        if c == "moments":
            need("zmax", self.z_max is not None and self.z_max > 0, "required")
        if c == "coverage":
            need("z", self.z is not None and self.z >= 50, "coverage needs z0 >= 50")
            need("reps", self.reps is not None and self.reps >= 1000, "coverage needs reps >= 1000")
            need("grid-step", self.grid_step > 0, "must be positive")
        if c == "renewal":
            need("z", self.z is not None and self.z > 0, "cycle endpoint z must be positive")
            need("reps", self.reps is not None, "required")
            if self.z_lower is not None:
                need("z-lower", 0 < self.z_lower <= self.z, "must lie in (0, z]")
        if c == "clt":
            need("z", self.z is not None and self.z >= 100, "the CLT statistic needs z >= 100")
            need("reps", self.reps is not None, "required")
        if c == "compare":
            need("t", self.t is not None and self.t >= 100, "comparison needs t >= 100")
            need("reps", self.reps is not None, "required")
        if c == "fit" and self.window is not None:
            lo, hi = self.window
            need("window", 20 <= lo < hi and hi - lo >= 50, "must lie above 20 with length >= 50")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chainsel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, reps=False, seed=False):
        sp.add_argument("--out", help="artifact path (CSV)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--step", dest="h", type=float, default=value.DEFAULT_H,
                        help="grid step of the deterministic solvers")
        sp.add_argument("--zmax", dest="z_max", type=float)
        if reps:
            sp.add_argument("--reps", type=int)
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    common(sub.add_parser("solve", help="solve the optimality equation"))
    sp = sub.add_parser("simulate", help="planar Monte Carlo of the selected length")
    common(sp, True, True)
    sp.add_argument("--strategy", default="optimal")
    sp.add_argument("--t", type=float)
    sp = sub.add_parser("fixedn", help="square-root window on n uniform marks")
    common(sp, True, True)
    sp.add_argument("--n", type=int)
    sp = sub.add_parser("pdmp", help="paths or jump counts of Z|z")
    common(sp, True, True)
    sp.add_argument("--control", default="theta0")
    sp.add_argument("--z", type=float)
    sp = sub.add_parser("moments", help="mean and variance ODEs for a control")
    common(sp)
    sp.add_argument("--control", default="theta0")
    sp = sub.add_parser("coverage", help="drift coverage probabilities of Z|z0")
    common(sp, True, True)
    sp.add_argument("--control", default="theta0")
    sp.add_argument("--z", type=float)
    sp.add_argument("--grid-step", dest="grid_step", type=float, default=1.0)
    sp = sub.add_parser("renewal", help="limiting step H, cycle sizes and the renewal sandwich")
    common(sp, True, True)
    sp.add_argument("--control", default="theta0")
    sp.add_argument("--z", type=float)
    sp.add_argument("--z-lower", dest="z_lower", type=float)
    sp = sub.add_parser("clt", help="normalized jump counts against the standard normal")
    common(sp, True, True)
    sp.add_argument("--control", default="theta0",
                    help="theta0 | optimal | gamma:<g> | renewal (pure renewal counts)")
    sp.add_argument("--z", type=float)
    sp = sub.add_parser("compare", help="planar square-root window against Z|sqrt(t)")
    common(sp, True, True)
    sp.add_argument("--t", type=float)
    sp = sub.add_parser("fit", help="expansion fit of the value function")
    common(sp)
    sp.add_argument("--window", type=float, nargs=2)
    return p


def _grid(cfg: ExperimentConfig, need_z: float = 0.0) -> value.ValueGrid:
    path = os.environ.get("CHAINSEL_GRID")
    if path:
        grid = io.read_grid(path)
        if grid.z_max < need_z:
            raise ConfigError(f"CHAINSEL_GRID reaches z={grid.z_max}, need {need_z}")
        return grid
    z_max = cfg.z_max or max(value.DEFAULT_ZMAX, float(math.ceil(need_z)))
    if z_max < need_z:
        raise ConfigError(f"--zmax {z_max} is below the required z={need_z}")
    cfg.z_max = z_max
    return value.solve_value(z_max, cfg.h)


def _uses_grid(text: Optional[str]) -> bool:
    return text == "optimal"


def _summary(s: stats.SummaryStats) -> dict:
    return {"mean": s.mean, "variance": s.variance, "std_error": s.std_error}


def _counts_csv(cfg, name, values):
    if cfg.out:
        io.write_csv(cfg.out, f"replicate,{name}", (np.arange(len(values)), values), asdict(cfg))


def cmd_solve(cfg):
    grid = value.solve_value(cfg.z_max, cfg.h)
    out = {"c_star_estimate": grid.c_star_estimate,
           "greedy_switch_t": grid.greedy_switch() ** 2,
           "u_at_zmax": float(grid.u[-1]), "theta_at_zmax": float(grid.theta_star[-1])}
    if cfg.out:
        io.write_grid(cfg.out, grid, asdict(cfg))
    return out


def cmd_simulate(cfg):
    grid = _grid(cfg, math.sqrt(cfg.t)) if _uses_grid(cfg.strategy) else None
    w = strategies.parse_strategy(cfg.strategy, cfg.t, grid)
    lengths = planar.selection_lengths(w, cfg.t, cfg.reps, cfg.seed, cfg.threads)
    s = stats.summarize(lengths)
    _counts_csv(cfg, "length", lengths)
    return {"strategy": w.label(), "t": cfg.t, "reps": cfg.reps, "seed": cfg.seed, **_summary(s),
            "offset": s.mean - (math.sqrt(2 * cfg.t) - math.log(cfg.t) / 12) if cfg.t > 0 else 0.0}


def cmd_fixedn(cfg):
    lengths = planar.fixed_n_lengths(cfg.n, cfg.reps, cfg.seed, cfg.threads)
    s = stats.summarize(lengths)
    _counts_csv(cfg, "length", lengths)
    return {"n": cfg.n, "reps": cfg.reps, "seed": cfg.seed, **_summary(s),
            "offset": s.mean - (math.sqrt(2 * cfg.n) - math.log(cfg.n) / 12)}


def _control(cfg, need_z):
    grid = _grid(cfg, need_z) if _uses_grid(cfg.control) else None
    return pdmp.parse_control(cfg.control, grid)


def cmd_pdmp(cfg):
    ctrl = _control(cfg, cfg.z)
    if cfg.reps is None:
        path = pdmp.simulate_Z(ctrl, cfg.z, cfg.seed)
        if cfg.out:
            io.write_csv(cfg.out, "jump_point,gap_size", (path.jump_points, path.gap_sizes),
                         asdict(cfg))
        return {"control": ctrl.name, "z0": cfg.z, "seed": cfg.seed, "n_jumps": path.n_jumps,
                "drift_length": path.drift_length()}
    counts = pdmp.jump_counts(ctrl, cfg.z, cfg.reps, cfg.seed, cfg.threads)
    _counts_csv(cfg, "n_jumps", counts)
    return {"control": ctrl.name, "z0": cfg.z, "reps": cfg.reps, "seed": cfg.seed,
            **_summary(stats.summarize(counts))}


def cmd_moments(cfg):
    ctrl = _control(cfg, cfg.z_max)
    u = pdmp.solve_reward(ctrl, 1.0, cfg.z_max, cfg.h)
    sm = pdmp.solve_second_moment(ctrl, cfg.z_max, cfg.h, first=u)
    if cfg.out:
        io.write_csv(cfg.out, "z,u_theta,var", (u.z, u.values, sm.var), asdict(cfg))
    out = {"control": ctrl.name, "u_at_zmax": float(u.values[-1]), "var_at_zmax": float(sm.var[-1])}
    if cfg.z_max >= 100:
        lo = max(20.0, cfg.z_max / 3)
        try:
            fitted = value.fit_remainder(u.z, u.values, (lo, cfg.z_max), drift_tol=1.0)
            out.update(constant=fitted.c, inverse_z_coefficient=fitted.d)
        except DomainError:
            pass
        m = u.z >= 50
        vfit = stats.fit(u.z[m], sm.var[m] - math.sqrt(2) * u.z[m] / 3, ("log z", "1"))
        out.update(var_log_coefficient=vfit.coef("log z"), var_constant=vfit.coef("1"),
                   var_fit_residual=vfit.residual_max)
    return out


def cmd_coverage(cfg):
    ctrl = _control(cfg, 2 * cfg.z)
    est = pdmp.estimate_coverage(ctrl, cfg.z, cfg.grid_step, cfg.reps, cfg.seed, cfg.threads)
    if cfg.out:
        io.write_csv(cfg.out, "z,p_hat,stderr", (est.grid, est.p_hat, est.stderr), asdict(cfg))
    inner = (est.grid >= 0.2 * cfg.z) & (est.grid <= 0.8 * cfg.z)
    return {"control": ctrl.name, "z0": cfg.z, "reps": cfg.reps, "seed": cfg.seed,
            "p_min_inner": float(est.p_hat[inner].min()), "p_max_inner": float(est.p_hat[inner].max()),
            "exp_fit": list(est.exp_fit)}


def cmd_renewal(cfg):
    H = renewal.sample_H(cfg.seed, cfg.reps)
    sH = stats.summarize(H)
    ctrl = _control(cfg, cfg.z)
    cd = renewal.CycleDistributions(ctrl, cfg.z)
    d, j = renewal.sample_cycles(cd, cfg.reps, cfg.seed ^ (1 << 60))
    sc = stats.summarize(d + j)
    out = {"reps": cfg.reps, "seed": cfg.seed, "z": cfg.z, "control": ctrl.name,
           "H_mean": sH.mean, "H_mean_se": sH.std_error, "H_var": sH.variance,
           "H_var_se": stats.variance_std_error(H), "sigma2_over_mu3": sH.variance / sH.mean**3,
           "cycle_mean": sc.mean, "cycle_mean_se": sc.std_error,
           "drift_mean": float(d.mean()), "gap_mean": float(j.mean())}
    if cfg.z_lower is not None:
        rep = renewal.dominance_check(ctrl, cfg.z_lower, cfg.z, cfg.reps, cfg.seed)
        out["dominance"] = rep.to_dict()
    if cfg.out:
        io.write_csv(cfg.out, "replicate,drift,gap", (np.arange(d.size), d, j), asdict(cfg))
    return out


def cmd_clt(cfg):
    if cfg.control == "renewal":
        counts = renewal.renewal_counts(cfg.z, cfg.reps, cfg.seed, threads=cfg.threads)
    else:
        counts = pdmp.jump_counts(_control(cfg, cfg.z), cfg.z, cfg.reps, cfg.seed, cfg.threads)
    _counts_csv(cfg, "count", counts)
    return {"control": cfg.control, "seed": cfg.seed, **renewal.clt_report(counts, cfg.z)}


def cmd_compare(cfg):
    a, b = pdmp.compare_planar_pdmp("phi0", cfg.t, cfg.reps, cfg.seed, cfg.threads)
    if cfg.out:
        io.write_csv(cfg.out, "replicate,planar,pdmp", (np.arange(cfg.reps), a.samples, b.samples),
                     asdict(cfg))
    return {"t": cfg.t, "reps": cfg.reps, "seed": cfg.seed, "planar": _summary(a),
            "pdmp": _summary(b), "chi2_pvalue": a.extra["chi2_pvalue"]}


def cmd_fit(cfg):
    grid = _grid(cfg)
    lo, hi = cfg.window or (max(20.0, grid.z_max / 3), grid.z_max)
    fixed = value.expansion_residuals(grid, (lo, hi))
    free = stats.fit(grid.z, grid.u, ("z", "log z", "1"), (lo, hi))
    return {"window": [lo, hi], "a": fixed.a, "b": fixed.b, "c": fixed.c, "d": fixed.d,
            "residual_max": fixed.residual_max,
            "free_fit": dict(zip(free.basis, free.coefficients.tolist())),
            "free_fit_residual_max": free.residual_max}


def run(argv=None) -> int:
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = ExperimentConfig(**{k: (tuple(v) if k == "window" and v else v)
                              for k, v in vars(ns).items()})
    try:
        cfg.validate()
        result = globals()[f"cmd_{cfg.command}"](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"chainsel {cfg.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime fault
        print(f"chainsel {cfg.command}: runtime fault: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(io.json_text({"command": cfg.command, "config": asdict(cfg), **result}))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
