"""Command line experiment runner: run, series, verify, recover."""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass

import numpy as np

from .engine import DEFAULT_TIER, TIERS, EngineConfig
from .polyfam import MAX_PERIOD, SELECTORS, PolyFamily, newton_displacements
from .recover import Method, MissingRootJob, NumericalFailure, PartialRecovery, recover_missing
from .ring import RingConfig, RunStats, run
from .rootset import inclusion_radius, read_roots, write_root_array, write_roots
from .verify import verify_roots

CSV_COLUMNS = ("period", "degree", "seconds", "iterations", "iter_per_d", "iter_per_dlnd",
               "iter_per_dln2d", "us_per_dln2d", "us_per_dln3d", "cycles", "exhausted",
               "distinct_roots", "refinements")

VERIFY_TOL = 1e-6


class ConfigError(ValueError):
    pass


def stats_row(s: RunStats) -> dict:
    return {
        "period": s.period,
        "degree": s.degree,
        "seconds": f"{s.wall_seconds:.6f}",
        "iterations": s.total_iterations,
        "iter_per_d": repr(s.iter_per_d),
        "iter_per_dlnd": repr(s.iter_per_dlnd),
        "iter_per_dln2d": repr(s.iter_per_dln2d),
        "us_per_dln2d": repr(s.us_per_dln2d),
        "us_per_dln3d": repr(s.us_per_dln3d),
        "cycles": s.cycle_trapped,
        "exhausted": s.exhausted,
        "distinct_roots": s.distinct_roots,
        "refinements": s.refinements,
    }


def append_csv(path, rows) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            w.writeheader()
        for r in rows:
            w.writerow(r)


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment.  Keys match flag names."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = (x.strip() for x in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


@dataclass
class RunConfig:
    family: str
    period: int
    n0: int = 64
    threshold: float | None = None
    radius_factor: float = 2.0
    phase: float = 0.0
    tier: str = DEFAULT_TIER
    eps_stop: float | None = None
    eps_root: float | None = None
    eps_cycle: float | None = None
    max_iter_factor: float = 10.0
    max_gen: int | None = None
    verify_m: int = 19
    threads: int = 1
    trace: str | None = None
    trace_every: int = 1
    roots_out: str | None = None
    out: str | None = None
    label: str = ""

    @classmethod
    def from_args(cls, ns: argparse.Namespace, period: int | None = None) -> RunConfig:
        fields = cls.__dataclass_fields__
        kw = {k: v for k, v in vars(ns).items() if k in fields}
        if period is not None:
            kw["period"] = period
        return cls(**kw)

    def build(self) -> tuple[PolyFamily, EngineConfig, RingConfig, float]:
        """Validate everything before any computation starts."""
        if self.family not in SELECTORS:
            raise ConfigError(f"unknown family {self.family!r}")
        if not 1 <= self.period <= MAX_PERIOD:
            raise ConfigError(f"period must be in 1..{MAX_PERIOD}")
        if self.tier not in TIERS:
            raise ConfigError(f"unknown tier {self.tier!r}")
        if self.n0 < 3:
            raise ConfigError("n0 must be >= 3")
        if self.verify_m < 1 or self.threads < 1 or self.trace_every < 1:
            raise ConfigError("verify-m, threads and trace-every must be >= 1")
        if not self.radius_factor > 1:
            raise ConfigError("radius factor must exceed 1")
        if self.threshold is not None and not self.threshold > 0:
            raise ConfigError("threshold must be positive")
        tier = TIERS[self.tier]
        eps_root = tier.eps_root if self.eps_root is None else self.eps_root
        if not eps_root > 0:
            raise ConfigError("eps_root must be positive")
        over = {"max_iter_factor": self.max_iter_factor}
        if self.eps_stop is not None:
            over["eps_stop"] = self.eps_stop
        if self.eps_cycle is not None:
            over["eps_cycle"] = self.eps_cycle
        try:
            cfg = EngineConfig.for_tier(self.tier, **over)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        fam = PolyFamily.from_selector(self.family, self.period)
        ring_cfg = RingConfig(n0=self.n0, threshold=self.threshold, radius_factor=self.radius_factor,
                              phase=self.phase, max_generation=self.max_gen, threads=self.threads)
        return fam, cfg, ring_cfg, eps_root


class _Tracer:
    def __init__(self, path):
        self.fh = open(path, "w")
        self.fh.write("# sweep orbit re im\n")

    def __call__(self, sweep: int, ids: np.ndarray, zs: np.ndarray) -> None:
        for i, z in zip(ids, zs):
            self.fh.write(f"{sweep} {i} {z.real:.17g} {z.imag:.17g}\n")

    def close(self):
        self.fh.close()


def run_experiment(rc: RunConfig, log=print) -> tuple[RunStats, object]:
    fam, cfg, ring_cfg, eps_root = rc.build()
    tracer = _Tracer(rc.trace) if rc.trace else None
    try:
        res = run(fam, cfg, ring_cfg, eps_root=eps_root, trace=tracer, trace_every=rc.trace_every)
    finally:
        if tracer:
            tracer.close()
    s = res.stats
    if rc.roots_out:
        write_roots(rc.roots_out, res.roots)
    report = verify_roots(fam, res.roots.values(), rc.verify_m)
    if rc.out:
        append_csv(rc.out, [stats_row(s)])
    log(f"{fam}: {s.distinct_roots}/{s.degree} roots, {s.total_iterations} iterations "
        f"({s.iter_per_dln2d:.3f} per d ln^2 d), {s.cycle_trapped} cycles, "
        f"{s.exhausted} exhausted, {s.wall_seconds:.2f} s; "
        f"max residual {report.max_residual():.3e}, delta {report.delta:.3e}")
    return s, report


def _cmd_run(ns) -> int:
    s, report = run_experiment(RunConfig.from_args(ns))
    return 0 if s.distinct_roots >= s.degree else 1


def _cmd_series(ns) -> int:
    if ns.from_ > ns.to:
        raise ConfigError(f"empty period range {ns.from_}..{ns.to}")
    for n in range(ns.from_, ns.to + 1):
        RunConfig.from_args(ns, n).build()
    for n in range(ns.from_, ns.to + 1):
        rc = RunConfig.from_args(ns, n)
        if ns.roots_out:
            rc.roots_out = f"{ns.roots_out}.{n}"
        s, _ = run_experiment(rc)
        if s.distinct_roots < s.degree:
            print(f"period {n} incomplete; series stopped", file=sys.stderr)
            return 1
    return 0


def _load_roots(ns, fam: PolyFamily) -> np.ndarray:
    z, _, _ = read_roots(ns.roots)
    if z.size > fam.degree:
        raise ConfigError(f"{z.size} roots exceed the degree {fam.degree}")
    return z


def _cmd_verify(ns) -> int:
    fam = PolyFamily.from_selector(ns.family, ns.period)
    z = _load_roots(ns, fam)
    rep = verify_roots(fam, z, ns.m)
    if ns.out:
        rep.write_csv(ns.out)
    for k, (a, r) in enumerate(zip(rep.theoretical, rep.residuals), 1):
        print(f"{k:3d}  a_k={a}  residual={r:.3e}")
    ok = rep.passed(VERIFY_TOL)
    print(f"deficit {rep.deficit}, delta {rep.delta:.3e}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_recover(ns) -> int:
    fam = PolyFamily.from_selector(ns.family, ns.period)
    z = _load_roots(ns, fam)
    m = fam.degree - z.size if ns.m is None else ns.m
    tier = TIERS[ns.tier]
    job = MissingRootJob(fam, z, m, Method(ns.method), eps_stop=tier.eps_stop, eps_root=tier.eps_root)
    try:
        rec = recover_missing(job)
    except (PartialRecovery, NumericalFailure) as exc:
        print(f"recovery failed: {exc}", file=sys.stderr)
        return 1
    for r, cond in zip(rec.roots, rec.condition):
        print(f"{r.real:.16e} {r.imag:.16e}  nearest-other {cond:.3e}")
    if ns.out and rec.report is not None:
        rec.report.write_csv(ns.out)
    if ns.roots_out:
        disp, _ = newton_displacements(fam, rec.roots, promote=True)
        _, radii, hits = read_roots(ns.roots)
        full = np.concatenate([z, rec.roots])
        new_radii = [inclusion_radius(fam.degree, d) for d in disp]
        write_root_array(ns.roots_out, full, np.concatenate([radii, new_radii]),
                         np.concatenate([hits, np.ones(m, np.int64)]))
    ok = rec.report.passed(VERIFY_TOL)
    print(f"post-recovery max residual {rec.report.max_residual():.3e}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _opt_float(s: str) -> float | None:
    return None if s.lower() in ("", "none", "auto") else float(s)


def _opt_int(s: str) -> int | None:
    return None if s.lower() in ("", "none", "auto") else int(s)


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=SELECTORS, required=False)
    p.add_argument("--n0", type=int, default=64)
    p.add_argument("--threshold", type=_opt_float, default=None,
                   help="deformation threshold R (default 0.05, 0.0005 for mandelbrot)")
    p.add_argument("--radius-factor", type=float, default=2.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--tier", choices=sorted(TIERS), default=DEFAULT_TIER)
    p.add_argument("--eps-stop", type=_opt_float, default=None)
    p.add_argument("--eps-root", type=_opt_float, default=None)
    p.add_argument("--eps-cycle", type=_opt_float, default=None)
    p.add_argument("--max-iter-factor", type=float, default=10.0)
    p.add_argument("--max-gen", type=_opt_int, default=None)
    p.add_argument("--verify-m", type=int, default=19)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trace", default=None, help="write sampled orbit positions here")
    p.add_argument("--trace-every", type=int, default=1)
    p.add_argument("--roots-out", default=None)
    p.add_argument("--out", default=None, help="CSV report, one row appended per run")
    p.add_argument("--label", default="")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="newtonring", description=__doc__)
    ap.add_argument("--config", default=None, help="key=value file; flags override it")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="find all roots for one period")
    _add_run_options(p)
    p.add_argument("--period", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("series", help="run a range of periods")
    _add_run_options(p)
    p.add_argument("--from", dest="from_", type=int)
    p.add_argument("--to", type=int)
    p.set_defaults(func=_cmd_series)

    p = sub.add_parser("verify", help="power-sum check of a root file")
    p.add_argument("--family", choices=SELECTORS)
    p.add_argument("--period", type=int)
    p.add_argument("--roots")
    p.add_argument("--m", type=int, default=19)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("recover", help="locate roots missing from a root file")
    p.add_argument("--family", choices=SELECTORS)
    p.add_argument("--period", type=int)
    p.add_argument("--roots")
    p.add_argument("--m", type=int, default=None, help="default: degree minus file size")
    p.add_argument("--method", choices=[m.value for m in Method], default=Method.NEWTON_IDENTITIES.value)
    p.add_argument("--tier", choices=sorted(TIERS), default=DEFAULT_TIER)
    p.add_argument("--out", default=None)
    p.add_argument("--roots-out", default=None)
    p.set_defaults(func=_cmd_recover)
    return ap


_REQUIRED = {"run": ("family", "period"), "series": ("family", "from_", "to"),
             "verify": ("family", "period", "roots"), "recover": ("family", "period", "roots")}


def parse_args(argv=None) -> argparse.Namespace:
    ap = build_parser()
    ns = ap.parse_args(argv)
    if ns.config:
        conf = read_config(ns.config)
        if "from" in conf:
            conf["from_"] = conf.pop("from")
        sub = ap._subparsers._group_actions[0].choices[ns.cmd]
        known = {a.dest for a in sub._actions}
        unknown = set(conf) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        # string defaults pass through each option's type converter
        sub.set_defaults(**conf)
        ns = ap.parse_args(argv)
    missing = [k for k in _REQUIRED[ns.cmd] if getattr(ns, k, None) is None]
    if missing:
        names = ", ".join("--" + k.rstrip("_").replace("_", "-") for k in missing)
        raise ConfigError(f"{ns.cmd}: missing {names}")
    return ns


def main(argv=None) -> int:
    try:
        ns = parse_args(argv)
        return ns.func(ns)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
