"""``frogsim`` command line.

Every subcommand writes UTF-8 CSV files with LF line endings into ``--out``
plus a ``<subcommand>.json`` manifest holding the parameters, seed, package
version, wall time and a sha256 digest of each CSV.

Exit codes: 0 success, 2 bad flags, 3 domain too small, 4 every trial censored.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from ._parallel import default_threads
from .chains import CHAIN_COLUMNS, REALIZATION_COLUMNS, chain_statistics, realization_checks
from .dynamics import DomainError, activation_front, default_horizon, passage_time
from .estimator import EstimationFailure, estimate_mu, scaling_sweep
from .lattice import BoxRegion, origin
from .randomness import SEED_ENV, Configuration, MasterSeed, WalkOracle, seed_from_env
from .renormalization import (
    GOOD_COLUMNS,
    MIN_PHYSICAL_R,
    RECURSION_COLUMNS,
    RenormParams,
    activating_event,
    estimate_good_probability,
    q_box,
    run_recursion,
    sowing_event,
)
from . import walkstats as ws

EXIT_OK, EXIT_FLAGS, EXIT_DOMAIN, EXIT_CENSORED = 0, 2, 3, 4


class FlagError(Exception):
    pass


# ---------------------------------------------------------------- parsing helpers


def _site(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a site: {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a float list: {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None


def _sites(text: str) -> list[tuple[int, ...]]:
    return [_site(t) for t in text.split(";") if t]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ";".join(_fmt(a) for a in v)
        return " ".join(str(a) for a in v)
    if isinstance(v, (list,)):
        return " ".join(_fmt(a) for a in v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Collects outputs of one invocation and writes the manifest."""

    def __init__(self, args, master: MasterSeed):
        self.args = args
        self.master = master
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.extra: dict = {}
        self.t0 = time.perf_counter()

    def csv(self, name: str, header, rows) -> Path:
        path = self.out / name
        _write_csv(path, header, rows)
        self.files.append(path)
        return path

    def finish(self) -> None:
        params = {k: v for k, v in vars(self.args).items() if k not in ("func",)}
        manifest = dict(
            subcommand=self.args.command if self.args.command != "stats" else f"stats {self.args.op}",
            parameters=params,
            seed=self.master.seed,
            version=__version__,
            wall_time=time.perf_counter() - self.t0,
            outputs={p.name: _digest(p) for p in self.files},
            **self.extra,
        )
        name = self.args.command if self.args.command != "stats" else f"stats_{self.args.op}"
        with open(self.out / f"{name}.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _master(args) -> MasterSeed:
    seed = args.seed if args.seed is not None else seed_from_env()
    return MasterSeed(seed)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise FlagError("missing required flag(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _check_r(r: float):
    if not 0 < r <= 1:
        raise FlagError(f"--r must lie in (0, 1], got {r}")


# ---------------------------------------------------------------- subcommands


def cmd_passage(args, run: Run):
    _need(args, "r", "target")
    _check_r(args.r)
    d = args.dim
    src = args.source or origin(d)
    if len(src) != d or len(args.target) != d:
        raise FlagError("--source and --target need --dim coordinates")
    A = BoxRegion(origin(d), args.box_radius)
    H = args.horizon if args.horizon is not None else default_horizon(src, args.target, args.r, d)
    c = Configuration(run.master.child("occ"), d, args.r, None, force_origin=args.force_origin)
    o = WalkOracle(run.master.child("walk"), d)
    p = passage_time(o, c, src, args.target, A, H)
    run.csv("passage.csv", ("d", "r", "source", "target", "horizon", "value", "path_length", "leg_times"),
            [(d, args.r, src, args.target, H, str(p.value), len(p.realized_path), p.per_leg_times)])


MU_COLUMNS = ("d", "r", "x", "n", "trials", "mu_hat", "ci_low", "ci_high", "delta", "ratio",
              "censor_rate", "seed", "boundary_rate")


def _mu_row(e):
    return (e.d, e.r, e.x, e.n, e.trials, e.mu_hat, e.ci_low, e.ci_high, e.delta, e.ratio,
            e.censor_rate, e.seed, e.boundary_rate)


def cmd_mu(args, run: Run):
    _need(args, "r")
    _check_r(args.r)
    x = args.x or tuple([1] + [0] * (args.dim - 1))
    e = estimate_mu(args.dim, args.r, x, args.n, args.trials, run.master, horizon_factor=args.horizon_factor,
                    horizon=args.horizon, threads=args.threads)
    run.csv("mu.csv", MU_COLUMNS, [_mu_row(e)])
    run.csv("mu_trials.csv", ("trial", "target", "value", "censored", "boundary_touched"),
            [(t.trial, t.target, t.value, t.censored, t.boundary_touched) for t in e.outcomes])


def cmd_sweep(args, run: Run):
    _need(args, "r_list")
    if len(set(args.r_list)) < 3:
        raise FlagError("--r-list needs at least 3 distinct values")
    for r in args.r_list:
        _check_r(r)
    x = args.x or tuple([1] + [0] * (args.dim - 1))
    rows, fits = [], []
    for n in args.n_list or [args.n]:
        s = scaling_sweep(args.dim, args.r_list, x, n, args.trials, run.master, threads=args.threads,
                          horizon_factor=args.horizon_factor)
        rows.extend(_mu_row(e) for e in s.estimates)
        fits.append((args.dim, x, n, s.slope, s.intercept, len(s.fit_r)))
        run.extra.setdefault("fit", []).append(
            dict(n=n, slope=s.slope, intercept=s.intercept, residuals=s.residuals, r=s.fit_r))
    run.csv("sweep.csv", MU_COLUMNS, rows)
    run.csv("fit.csv", ("d", "x", "n", "slope", "intercept", "points"), fits)


def cmd_shape(args, run: Run):
    _need(args, "r", "t_list")
    _check_r(args.r)
    d = args.dim
    ts = sorted(set(args.t_list))
    if ts[0] < 0:
        raise FlagError("--t-list values must be nonnegative")
    A = BoxRegion(origin(d), args.box_radius)
    c = Configuration(run.master.child("occ"), d, args.r, None, force_origin=True)
    o = WalkOracle(run.master.child("walk"), d)
    H = args.horizon if args.horizon is not None else ts[-1]
    front = activation_front(o, c, origin(d), A, max(H, ts[-1]))
    pts = sorted((z, v.value) for z, v in front.times.items() if v.is_finite and v.value <= ts[-1])
    header = tuple(f"x{i + 1}" for i in range(d)) + ("time",)
    run.csv("shape.csv", header, [tuple(z) + (t,) for z, t in pts])
    run.csv("shape_counts.csv", ("t", "visited"), [(t, sum(v <= t for _, v in pts)) for t in ts])


def cmd_chain_check(args, run: Run):
    _need(args, "r")
    _check_r(args.r)
    H = args.horizon if args.horizon is not None else 20000
    rows = realization_checks(args.dim, args.r, args.trials, args.box_radius, args.max_l1, H, run.master)
    run.csv("chain_check.csv", REALIZATION_COLUMNS,
            [(c.trial, c.target, str(c.value), c.sum_sigma, c.nu, c.exact) for c in rows])
    run.extra["mismatches"] = sum(c.exact is False for c in rows)
    if args.indices:
        st = chain_statistics(args.indices, args.dim, args.r, args.trials, H, run.master)
        run.csv("chain_stats.csv", CHAIN_COLUMNS,
                [(w.seed, w.d, w.r, w.nu, w.sum_I, w.sum_sigma, w.max_range, w.censored) for w in st.rows])


def _params(args, r: float) -> RenormParams:
    if args.override_exponents:
        return RenormParams.override_mode(args.dim, r, args.c_ckn)
    if r < MIN_PHYSICAL_R:
        raise FlagError(f"physical box sizes at r = {r} < {MIN_PHYSICAL_R} are intractable; "
                        "use --override-exponents")
    return RenormParams.physical(args.dim, r, args.c_ckn)


def cmd_good(args, run: Run):
    rs = args.r_list or ([args.r] if args.r is not None else None)
    if rs is None:
        raise FlagError("missing required flag(s): --r or --r-list")
    for r in rs:
        _check_r(r)
        _params(args, r)
    rows = estimate_good_probability(rs, lambda r: _params(args, r), args.trials, run.master, args.threads)
    run.csv("good_prob.csv", GOOD_COLUMNS,
            [(w.d, w.r, w.c_ckn, w.override_mode, w.trials, w.p_hat, w.ci_low, w.ci_high) for w in rows])
    if args.recursion:
        rec = []
        for r in rs:
            p = _params(args, r)
            xi = tuple([1] + [0] * (args.dim - 1))
            reach = max(abs(a) for a in q_box(args.max_index, xi, p).center) + p.q_half
            for t in range(args.trials):
                sub = run.master.child("recursion", repr(r), t)
                c = Configuration(sub.child("occ"), args.dim, r, BoxRegion(origin(args.dim), reach))
                o = WalkOracle(sub.child("walk"), args.dim)
                st = run_recursion(o, c, xi, p, args.max_index)
                rec.append((args.dim, r, xi, sub.seed, st.sigma, st.max_index_reached))
        run.csv("recursion.csv", RECURSION_COLUMNS, rec)
    if args.audit:
        aud = []
        for r in rs:
            p = RenormParams.compact(args.dim, r, args.c_ckn)
            for t in range(args.trials):
                sub = run.master.child("audit", repr(r), t)
                c = Configuration(sub.child("occ"), args.dim, r, BoxRegion(origin(args.dim), 4 * p.theta_step + 4 * p.theta_out))
                o = WalkOracle(sub.child("walk"), args.dim)
                s = sowing_event(o, c, origin(args.dim), p)
                a = activating_event(o, c, p)
                aud.append((args.dim, r, sub.seed, s.event, s.s1, s.s2, s.s3, s.counterexample,
                            a.event, a.a1, a.a2, a.counterexample, a.w_bound_violations))
        run.csv("audit.csv", ("d", "r", "seed", "sowing", "s1", "s2", "s3", "sowing_counterexample",
                              "activating", "a1", "a2", "activating_counterexample", "w_bound_violations"), aud)


def _frac(f: Fraction):
    return f.numerator, f.denominator


def cmd_stats(args, run: Run):
    op, d = args.op, args.dim
    if op == "pz":
        _need(args, "n")
        if args.gamma:
            reps = [ws.pz_exact_check(d, args.n, args.gamma)]
        else:
            reps = ws.pz_sweep(d, [args.n])
        rows = []
        for rep in reps:
            fr = rep.fractions()
            rows.append((d, rep.n, rep.gamma, *_frac(fr["mean"]), *_frac(fr["second_moment"]), *_frac(fr["sup_mean"]),
                         *_frac(fr["p_half"]), *_frac(fr["goal_bound"]), rep.holds))
        run.csv("stats.csv", ("d", "n", "gamma", "mean_num", "mean_den", "second_num", "second_den",
                              "sup_mean_num", "sup_mean_den", "p_half_num", "p_half_den",
                              "bound_num", "bound_den", "holds"), rows)
    elif op == "range":
        ns = args.n_list or ([args.n] if args.n is not None else None)
        if ns is None:
            raise FlagError("missing required flag(s): --n or --n-list")
        rows = ws.range_growth(d, ns, args.trials, run.master, args.threads)
        run.csv("stats.csv", ("d", "n", "trials", "mean", "ci_low", "ci_high", "phi", "ratio", "per_step"),
                [(w.d, w.n, w.trials, w.mean, w.ci_low, w.ci_high, w.phi, w.ratio, w.per_step) for w in rows])
    elif op == "hit":
        _need(args, "z")
        zs = args.z
        rows = []
        for z in zs:
            n = args.n if args.n is not None else math.ceil(sum(a * a for a in z))
            e = ws.hitting_probability(d, z, n, args.trials, run.master, args.threads)
            rows.append((d, e.z, e.n, e.trials, e.hits, e.p_hat, e.ci_low, e.ci_high, e.c_hat, e.in_regime))
        run.csv("stats.csv", ("d", "z", "n", "trials", "hits", "p_hat", "ci_low", "ci_high", "c_hat", "in_regime"), rows)
    elif op == "ball":
        _need(args, "n", "beta")
        f = ws.range_ball_deviation(d, args.n, args.beta, args.trials, run.master, args.threads)
        run.csv("stats.csv", ("d", "n", "beta", "trials", "hits", "freq", "ci_low", "ci_high", "bound"),
                [(d, args.n, args.beta, f.trials, f.hits, f.freq, f.ci_low, f.ci_high, f.bound)])
    elif op == "ckn":
        _need(args, "n", "A", "B", "delta")
        rep = ws.ckn_event_frequency(d, args.n, args.A, args.B, args.delta, args.r if args.r is not None else 1.0,
                                     args.trials, args.c_ckn, run.master, diagnostic=True, threads=args.threads)
        rows = [(f.name, d, args.n, len(args.A), len(args.B), args.delta, args.c_ckn, f.trials, f.hits, f.freq,
                 f.ci_low, f.ci_high, f.bound, rep.admissible_c) for f in (rep.prop, rep.lemma)]
        run.csv("stats.csv", ("variant", "d", "n", "nA", "nB", "delta", "c_ckn", "trials", "hits", "freq",
                              "ci_low", "ci_high", "bound", "admissible_c"), rows)
        run.extra["diagnostics"] = rep.diagnostics
    elif op == "chernoff":
        _need(args, "q", "n")
        f = ws.adapted_chernoff_check(args.q, args.n, args.schedule, args.trials, args.c, run.master)
        run.csv("stats.csv", ("q", "n", "c", "schedule", "trials", "hits", "freq", "ci_low", "ci_high", "bound"),
                [(args.q, args.n, args.c, args.schedule, f.trials, f.hits, f.freq, f.ci_low, f.ci_high, f.bound)])


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", "--d", dest="dim", type=int, default=2)
    common.add_argument("--r", type=float)
    common.add_argument("--seed", type=int, help=f"master seed (default: ${SEED_ENV})")
    common.add_argument("--trials", type=int, default=200)
    common.add_argument("--threads", type=int, default=default_threads())
    common.add_argument("--horizon", type=int)
    common.add_argument("--out", default=".")

    ap = argparse.ArgumentParser(prog="frogsim", description="Frog model simulator and time-constant toolkit.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("passage", parents=[common], help="restricted first passage time")
    p.add_argument("--source", type=_site)
    p.add_argument("--target", type=_site)
    p.add_argument("--box-radius", type=int, default=20)
    p.add_argument("--force-origin", action="store_true")
    p.set_defaults(func=cmd_passage)

    for name, fn, help_ in (("mu", cmd_mu, "estimate the time constant"),
                            ("sweep", cmd_sweep, "time constant across densities and log-log fit")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--x", type=_site)
        p.add_argument("--n", type=int, default=40)
        p.add_argument("--horizon-factor", type=float, default=50.0)
        if name == "sweep":
            p.add_argument("--r-list", type=_floats)
            p.add_argument("--n-list", type=_ints)
        p.set_defaults(func=fn)

    p = sub.add_parser("shape", parents=[common], help="activation front snapshots")
    p.add_argument("--t-list", type=_ints)
    p.add_argument("--box-radius", type=int, default=30)
    p.set_defaults(func=cmd_shape)

    p = sub.add_parser("chain-check", parents=[common], help="chain totals against passage times")
    p.add_argument("--box-radius", type=int, default=15)
    p.add_argument("--max-l1", type=int, default=10)
    p.add_argument("--indices", type=lambda s: [_ints(t) for t in s.split(";") if t],
                   help="chain index sequences for statistics, e.g. '3,2;5'")
    p.set_defaults(func=cmd_chain_check)

    p = sub.add_parser("good", parents=[common], help="r-good probability, recursion and implication audit")
    p.add_argument("--r-list", type=_floats)
    p.add_argument("--c-ckn", type=float, default=0.5)
    p.add_argument("--override-exponents", action="store_true")
    p.add_argument("--recursion", action="store_true")
    p.add_argument("--max-index", type=int, default=20)
    p.add_argument("--audit", action="store_true")
    p.set_defaults(func=cmd_good)

    p = sub.add_parser("stats", parents=[common], help="random walk checks")
    p.add_argument("op", choices=("pz", "range", "hit", "ball", "ckn", "chernoff"))
    p.add_argument("--n", type=int)
    p.add_argument("--n-list", type=_ints)
    p.add_argument("--gamma", type=_sites)
    p.add_argument("--z", type=_sites)
    p.add_argument("--beta", type=float)
    p.add_argument("--A", type=_sites)
    p.add_argument("--B", type=_sites)
    p.add_argument("--delta", type=float)
    p.add_argument("--c-ckn", type=float, default=0.2)
    p.add_argument("--q", type=float)
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--schedule", choices=("iid", "alternating", "adaptive"), default="iid")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.trials < 1:
            raise FlagError("--trials must be positive")
        if args.dim < 2:
            raise FlagError("--dim must be at least 2")
        run = Run(args, _master(args))
        args.func(args, run)
        run.finish()
    except FlagError as e:
        ap.print_usage(sys.stderr)
        print(f"frogsim: error: {e}", file=sys.stderr)
        return EXIT_FLAGS
    except DomainError as e:
        print(f"frogsim: domain error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except EstimationFailure as e:
        print(f"frogsim: {e}", file=sys.stderr)
        return EXIT_CENSORED
    except ValueError as e:
        print(f"frogsim: error: {e}", file=sys.stderr)
        return EXIT_FLAGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
