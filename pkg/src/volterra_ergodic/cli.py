"""Command-line interface: ``simulate``, ``transform``, ``verify``, ``kernel-eval``.

Exit codes: 0 success, 1 failing verification, 2 usage or validation
error, 3 numeric failure.  The default seed is read from the environment
variable ``VOLTERRA_ERGODIC_SEED``.
"""
import argparse
import io
import json
import os
import re
import sys
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EvaluationError, NotPositiveDefiniteError, QuadratureError
from .kernels import Fbm, PowerMarkov, check_alpha, check_hurst, kernel_eval
from .martingales import BridgeSpec, bridge, fundamental_martingale, nalpha_path, yh_path
from .simulate import (DEFAULT_SEED, PathEnsemble, Seed, TimeGrid, sample_bm_increments,
                       sample_cholesky, synth_from_kernel)
from .covariance import CovarianceOracle
from .transform import TransformParams, z_alpha_forward, z_alpha_inverse, z_alpha_iterate

SEED_ENV = "VOLTERRA_ERGODIC_SEED"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
PROCESSES = ("fbm", "nalpha", "bridge", "mh", "yh")
BOUND_COLUMN = "trunc_bound"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated options of one invocation, echoed into its outputs.

    The output path is left out so that a report does not depend on where
    it is written.
    """

    command: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args):
        opts = {k: v for k, v in vars(args).items() if k not in ("command", "func", "output")}
        return cls(args.command, opts)


# --------------------------------------------------------------------------
# files

def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _split_top_level(text):
    """Split on commas outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def format_meta(meta):
    return "# " + ", ".join(f"{k}={v}" for k, v in meta.items())


def parse_meta(line):
    if not line.startswith("#"):
        raise UsageError("CSV must start with a '# spec=..., beta=..., seed=...' line")
    out = {}
    for part in _split_top_level(line[1:]):
        key, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"malformed metadata entry {part!r}")
        out[key.strip()] = value.strip()
    return out


def write_csv(path, ensemble, meta, bound=None):
    """Rows are grid times; columns ``t, path_0, ...`` (and the bound)."""
    cols = [ensemble.grid.points[:, None], ensemble.values.T]
    header = ["t"] + [f"path_{i}" for i in range(ensemble.n_paths)]
    if bound is not None:
        cols.append(np.asarray(bound)[:, None])
        header.append(BOUND_COLUMN)
    buf = io.StringIO()
    buf.write(format_meta(meta) + "\n")
    np.savetxt(buf, np.hstack(cols), fmt="%.17g", delimiter=",", header=",".join(header), comments="")
    atomic_write(path, buf.getvalue())


def read_csv(path):
    """Returns ``(PathEnsemble, metadata dict)``."""
    try:
        with open(path) as fh:
            meta = parse_meta(fh.readline().rstrip("\n"))
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from None
    if not header or header[0] != "t":
        raise UsageError("CSV header must start with 't'")
    paths = [i for i, h in enumerate(header) if h.startswith("path_")]
    if data.shape[1] != len(header) or not paths:
        raise UsageError("CSV columns do not match its header")
    try:
        grid = TimeGrid(data[:, 0])
        ens = PathEnsemble(grid, data[:, paths].T, dict(meta))
    except ValueError as exc:
        raise UsageError(f"invalid path data in {path}: {exc}") from None
    return ens, meta


# --------------------------------------------------------------------------
# commands

def _seed(args):
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get(SEED_ENV)
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _simulate(args, seed):
    T, n = float(args.T), int(args.n)
    if not T > 0 or n < 1 or int(args.paths) < 1:
        raise UsageError("need T > 0, n >= 1 and paths >= 1")
    if args.t_ext is not None:
        if args.process not in ("fbm", "nalpha"):
            raise UsageError("--t-ext is supported for fbm and nalpha")
        grid = TimeGrid.extended(T, n, float(args.t_ext))
    else:
        grid = TimeGrid.uniform_grid(T, n)
    proc = args.process
    if proc == "fbm":
        H = check_hurst(args.hurst)
        spec = Fbm(H)
        if args.method == "cholesky":
            return sample_cholesky(CovarianceOracle(spec), grid, args.paths, seed), spec.label, H
        inc = sample_bm_increments(grid, args.paths, seed)
        return synth_from_kernel(spec, grid, inc), spec.label, H
    inc = sample_bm_increments(grid, args.paths, seed)
    if proc == "nalpha":
        a = check_alpha(args.alpha)
        ens = nalpha_path(a, grid, inc, rule="exact")
        return ens, f"nalpha(alpha={a!r})", a + 0.5
    if proc == "bridge":
        a = check_alpha(args.alpha)
        ens = bridge(nalpha_path(a, grid, inc, rule="exact"), BridgeSpec(a, T))
        return ens, f"bridge(alpha={a!r}, T={T!r})", a + 0.5
    H = check_hurst(args.hurst)
    if proc == "mh":
        return fundamental_martingale(H, grid, inc), f"mh(H={H!r})", 1.0 - H
    return yh_path(H, T, grid, inc), f"yh(H={H!r}, T={T!r})", 1.0 - H


def cmd_simulate(args):
    seed = _seed(args)
    ens, label, beta = _simulate(args, Seed(seed))
    write_csv(args.output, ens, {"spec": label, "beta": repr(float(beta)), "seed": seed})
    last = ens.values[:, -1]
    print(f"{label}: {ens.n_paths} paths, {len(ens.grid)} times; at t={ens.grid.horizon:g} "
          f"mean={last.mean():.6g} variance={last.var():.6g}")
    return EXIT_OK


def _beta(args, meta):
    meta_beta = meta.get("beta")
    if args.beta is None:
        if meta_beta is None:
            raise UsageError("beta is neither given (--beta) nor recorded in the CSV")
        return float(meta_beta)
    b = float(args.beta)
    if meta_beta is not None and abs(float(meta_beta) - b) > 1e-12 * max(1.0, abs(b)):
        raise UsageError(f"--beta {b} does not match beta={meta_beta} recorded in the input")
    return b


def cmd_transform(args):
    ens, meta = read_csv(args.input)
    beta = _beta(args, meta)
    steps = -1 if args.inverse else int(args.iterate)
    if args.inverse and int(args.iterate) not in (1, -1):
        raise UsageError("--inverse cannot be combined with --iterate")
    horizon = ens.grid.horizon
    T = float(args.T) if args.T is not None else (horizon if steps >= 0 else None)
    t_ext = float(args.t_ext) if args.t_ext is not None else horizon
    if T is None:
        raise UsageError("the inverse needs --T (the horizon of the output)")
    p = TransformParams(args.alpha, beta, T=T, T_ext=t_ext if t_ext > T else 2 * T)
    bound = None
    if steps == -1:
        if not t_ext > T:
            raise UsageError("the inverse needs an input extending beyond --T")
        res = z_alpha_inverse(ens, p)
        out = res.ensemble
        bound = np.max(res.trunc_bound, axis=0)
    elif steps < 0:
        out = z_alpha_iterate(ens, p, steps)
    else:
        if not ens.grid.starts_at_zero:
            raise UsageError("the forward transform needs a grid starting at 0")
        out = z_alpha_iterate(ens, p, steps)
    prev = meta.get("transform")
    tag = f"Z^{p.alpha!r}^{steps}"
    meta = dict(meta, beta=repr(beta), transform=tag if prev is None else f"{prev};{tag}")
    write_csv(args.output, out, meta, bound)
    return EXIT_OK


def cmd_verify(args):
    from .verify import reports_to_json, run_suite

    seed = _seed(args)
    reports = run_suite(args.suite, Seed(seed))
    config = RunConfig.from_args(args)
    config.options["seed"] = seed
    text = reports_to_json(reports, timing=not args.no_timing, config=asdict(config))
    if args.output:
        atomic_write(args.output, text + "\n")
    else:
        print(text)
    failed = [r.test for r in reports if not r.passed]
    for name in failed:
        print(f"FAIL {name}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_kernel_eval(args):
    if args.kernel == "fbm":
        spec = Fbm(args.hurst)
    else:
        if args.alpha is None or args.beta is None:
            raise UsageError("power-markov needs --alpha and --beta")
        spec = PowerMarkov(args.alpha, args.beta, args.c)
    t, s = float(args.t), float(args.s)
    if not (t > 0 and s > 0):
        raise UsageError("kernel-eval requires t > 0 and s > 0")
    print(repr(float(kernel_eval(spec, t, s))))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    from .verify import SUITES

    parser = _Parser(prog="volterra-ergodic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a path ensemble to CSV")
    p.add_argument("--process", choices=PROCESSES, required=True)
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--paths", type=int, default=100)
    p.add_argument("--t-ext", type=float, default=None, dest="t_ext",
                   help="extend the grid geometrically to this horizon (input for --inverse)")
    p.add_argument("--method", choices=("volterra", "cholesky"), default="volterra")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("transform", help="apply Z^alpha, its inverse or iterates to a CSV")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--iterate", type=int, default=1)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--t-ext", type=float, default=None, dest="t_ext")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify", help="run a verification suite and write a JSON report")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-timing", action="store_true", help="omit wall times (byte-identical reruns)")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("kernel-eval", help="print z(t, s)")
    p.add_argument("--kernel", choices=("fbm", "power-markov"), default="fbm")
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.set_defaults(func=cmd_kernel_eval)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvaluationError, QuadratureError, NotPositiveDefiniteError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # includes HorizonError and GridMismatchError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
