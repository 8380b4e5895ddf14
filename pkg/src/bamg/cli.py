"""Command-line driver: ``solve``, ``sweep``, ``spectrum``, ``fov``, ``validate``, ``gen``.

Exit codes: 0 when the tolerance is reached (or the command succeeded),
2 when an iteration stopped without converging, 1 on any error.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chains
from .coarsening import CrParams
from .diagnostics import DENSE_LIMIT, OPERATORS, complex_csv, dense_operator, field_of_values
from .diagnostics import multiplicity_csv, spectrum
from .hierarchy import operator_complexity
from .krylov import KrylovParams, parnoldi_solve, pgmres_solve, power_iterate, tau_richardson
from .lsq import LsParams
from .mle import MleParams, run_setup

log = logging.getLogger("bamg")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
PROBLEMS = ("uniform", "tandem", "planar")
MODES = ("mle", "pgmres", "parnoldi", "power", "richardson")
PLANAR_LEVELS = 3


@dataclass
class RunConfig:
    """Everything a run needs; exactly one of ``problem`` and ``input`` is set."""

    problem: str | None = None
    n: int | None = None
    seed: int = 0
    input: str | None = None
    strip_self_transitions: bool = False
    mode: str = "pgmres"
    setup_cycles: int = 1
    max_levels: int | None = None
    coarsening: str = "auto"
    caliber: int = 2
    mu: int = 1
    tol: float = 1e-8
    max_iters: int = 200
    max_cycles: int = 40
    baseline_iters: int = 20000
    tau: float = 0.7
    out: str | None = None

    def validate(self):
        if (self.problem is None) == (self.input is None):
            raise ValueError("give exactly one of --problem and --input")
        if self.problem is not None:
            if self.problem not in PROBLEMS:
                raise ValueError(f"unknown problem '{self.problem}', expected {PROBLEMS}")
            if self.n is None or self.n < 2:
                raise ValueError("--n must be given and at least 2")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}', expected {MODES}")
        if self.coarsening not in ("auto", "full", "cr"):
            raise ValueError(f"unknown coarsening '{self.coarsening}'")
        if self.setup_cycles < 1 or self.max_iters < 1 or self.max_cycles < 1:
            raise ValueError("iteration counts must be positive")
        if self.max_levels is not None and self.max_levels < 2:
            raise ValueError("--max-levels must be at least 2")
        if not 0.0 < self.tau < 2.0:
            raise ValueError("--tau must lie in (0, 2)")
        # the parameter classes check their own ranges
        self.mle_params()
        self.ls_params()
        KrylovParams(tol=self.tol, max_iters=self.max_iters)
        return self

    def levels_limit(self):
        if self.max_levels is not None:
            return self.max_levels
        return PLANAR_LEVELS if self.problem == "planar" else None

    def mle_params(self, strict=True):
        return MleParams(mu=self.mu, setup_cycles=self.setup_cycles, tol=self.tol,
                         max_cycles=self.max_cycles, max_levels=self.levels_limit(),
                         strict_monotone=strict)

    def ls_params(self):
        return LsParams(caliber=self.caliber)

    def label(self):
        return self.input if self.input is not None else f"{self.problem}-{self.n}"


_OPTIONAL_INT = {"n", "max_levels"}
_OPTIONAL_STR = {"problem", "input", "out"}


def _coerce(key, raw):
    """Convert a config-file string to the type of ``RunConfig.<key>``."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    if key not in fields:
        raise ValueError(f"unknown config key '{key}'")
    raw = raw.strip()
    if key in _OPTIONAL_STR:
        return raw or None
    if key in _OPTIONAL_INT:
        return None if raw.lower() in ("", "none") else int(raw)
    default = fields[key].default
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key '{key}': expected a boolean, got '{raw}'")
    return type(default)(raw)


def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys are allowed."""
    values = {}
    for num, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{num}: expected key=value")
        key = key.strip().replace("-", "_")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ValueError(f"{path}:{num}: {exc}") from None
    return values


def merge_config(cli_values, config_path=None):
    """Defaults, then the config file, then explicit command-line values."""
    merged = {}
    if config_path is not None:
        merged.update(read_config_file(config_path))
    merged.update(cli_values)
    return RunConfig(**merged).validate()


@dataclass
class SolveReport:
    label: str
    n: int
    mode: str
    phases: dict
    residual: float
    converged: bool
    tol: float
    operator_complexity: float | None = None
    levels: list = field(default_factory=list)
    wall_time: float = 0.0
    eigenvalues: np.ndarray | None = None
    x: np.ndarray | None = None
    mle_history: list = field(default_factory=list)
    krylov_history: list = field(default_factory=list)
    level_text: str = ""
    levels_csv: str = ""
    multiplicity: str = ""

    def format(self):
        lines = [f"problem: {self.label} (n = {self.n})", f"mode: {self.mode}"]
        lines += [f"{k} {'cycles' if k == 'mle' else 'iterations'}: {v}"
                  for k, v in self.phases.items()]
        status = "converged" if self.converged else "NOT converged"
        lines.append(f"final residual ||B x||: {self.residual:.3e} ({status}, tol {self.tol:g})")
        if self.operator_complexity is not None:
            lines.append(f"operator complexity: {self.operator_complexity:.4f}")
        if self.eigenvalues is not None:
            lams = ", ".join(f"{z.real:.6e}" for z in self.eigenvalues)
            lines.append(f"eigenvalue estimates: {lams}")
        lines.append(f"wall time: {self.wall_time:.2f} s")
        if self.level_text:
            lines += ["", self.level_text]
        return "\n".join(lines)

    def mle_csv(self):
        k = len(self.mle_history[0].lambdas) if self.mle_history else 0
        buf = io.StringIO()
        buf.write(",".join(["cycle", "residual"] + [f"lambda_{i}" for i in range(k)]) + "\n")
        for rec in self.mle_history:
            vals = [f"{rec.residual:.17g}"] + [f"{v:.17g}" for v in rec.lambdas]
            buf.write(f"{rec.cycle}," + ",".join(vals) + "\n")
        return buf.getvalue()

    def krylov_csv(self):
        buf = io.StringIO()
        buf.write("iteration,preconditioned_residual,true_residual\n")
        for it, pre, true in self.krylov_history:
            buf.write(f"{it},{pre:.17g},{true:.17g}\n")
        return buf.getvalue()

    def state_csv(self):
        buf = io.StringIO()
        buf.write("index,value\n")
        for i, v in enumerate(self.x):
            buf.write(f"{i},{v:.17g}\n")
        return buf.getvalue()

    def write(self, out):
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(self.format() + "\n")
        (out / "state.csv").write_text(self.state_csv())
        if self.mle_history:
            (out / "mle_history.csv").write_text(self.mle_csv())
        if self.krylov_history:
            (out / "krylov_history.csv").write_text(self.krylov_csv())
        if self.levels:
            (out / "levels.csv").write_text(self.levels_csv)
        if self.multiplicity:
            (out / "multiplicity.csv").write_text(self.multiplicity)


def load_problem(cfg):
    if cfg.input is not None:
        prob = chains.load_matrix_market(cfg.input)
        if cfg.strip_self_transitions:
            prob = dataclasses.replace(prob, A=chains.strip_self_transitions(prob.A))
        report = chains.validate(prob)
        if not report.ok:
            raise ValueError(f"{cfg.input} is not a valid chain:\n{report.format()}")
        return prob
    if cfg.problem == "uniform":
        return chains.gen_uniform_network(cfg.n)
    if cfg.problem == "tandem":
        return chains.gen_tandem_queue(cfg.n)
    return chains.gen_planar_graph(cfg.n, seed=cfg.seed)


def _setup(cfg, prob, until_tol=False):
    coarsening = None if cfg.coarsening == "auto" else cfg.coarsening
    return run_setup(prob, cfg.mle_params(), coarsening=coarsening, ls=cfg.ls_params(),
                     cr=CrParams(), seed=cfg.seed, until_tol=until_tol)


def run(cfg: RunConfig) -> SolveReport:
    """Load or generate the chain, run the setup and the chosen solver."""
    cfg.validate()
    t0 = time.perf_counter()
    prob = load_problem(cfg)
    B = prob.system_matrix()
    rep = SolveReport(cfg.label(), prob.n, cfg.mode, {}, float("nan"), False, cfg.tol)
    if cfg.mode in ("power", "richardson"):
        x0 = np.ones(prob.n)
        if cfg.mode == "power":
            x, hist = power_iterate(prob.A, x0, cfg.baseline_iters, cfg.tol)
        else:
            x, hist = tau_richardson(B, x0, cfg.tau, cfg.baseline_iters, cfg.tol)
        rep.phases[cfg.mode] = len(hist)
        rep.krylov_history = [(i + 1, float("nan"), r) for i, r in enumerate(hist)]
        rep.x = x / np.linalg.norm(x)
        rep.residual = float(np.linalg.norm(B.matvec(rep.x)))
    else:
        setup = _setup(cfg, prob, until_tol=(cfg.mode == "mle"))
        h = setup.hierarchy
        rep.phases["mle"] = len(setup.history)
        rep.mle_history = setup.history
        rep.eigenvalues = setup.eigenpairs.lam
        rep.operator_complexity = operator_complexity(h)
        rep.levels = h.stats()
        rep.level_text = h.stats_text()
        rep.levels_csv = h.stats_csv()
        rep.multiplicity = multiplicity_csv(h, prob.points)
        if cfg.mode == "mle":
            rep.x, rep.residual = setup.x0, setup.residual
        else:
            kp = KrylovParams(tol=cfg.tol, max_iters=cfg.max_iters,
                              mode="gmres" if cfg.mode == "pgmres" else "arnoldi")
            solve = pgmres_solve if cfg.mode == "pgmres" else parnoldi_solve
            res = solve(h, B, setup.x0, kp)
            rep.phases[cfg.mode] = res.iterations
            rep.krylov_history = res.history
            rep.x, rep.residual = res.x, res.residual
    rep.converged = bool(rep.residual <= cfg.tol)
    rep.wall_time = time.perf_counter() - t0
    return rep


def table_sweep(family, sizes, cfg=None):
    """Iteration counts per size; returns ``(aligned text, csv)``.

    Columns are the MLE cycles to tolerance and the pGMRES and pArnoldi
    iterations after ``cfg.setup_cycles`` setup cycles.  A failing run marks
    its cell ``failed`` and the sweep carries on.
    """
    base = dataclasses.asdict(cfg) if cfg is not None else {}
    base.update(problem=family, input=None)
    rows = []
    for N in sizes:
        row = [str(N)]
        for mode in ("mle", "pgmres", "parnoldi"):
            try:
                rep = run(RunConfig(**{**base, "n": N, "mode": mode}))
                cell = str(rep.phases[mode])
                if not rep.converged:
                    cell += "*"
            except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the sweep
                log.warning("%s N=%s %s failed: %s", family, N, mode, exc)
                cell = "failed"
            row.append(cell)
        rows.append(row)
    head = ["N", "MLE", "pGMRES", "pArnoldi"]
    widths = [max(len(r[k]) for r in [head] + rows) for k in range(4)]
    text = "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [head] + rows)
    csv = "\n".join(",".join(r) for r in [head] + rows) + "\n"
    return text, csv


# -- argument parsing ------------------------------------------------------------


def _problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--problem", choices=PROBLEMS)
    g.add_argument("--n", type=int, help="grid side (uniform, tandem) or number of points (planar)")
    g.add_argument("--seed", type=int)
    g.add_argument("--input", help="MatrixMarket file with a column-stochastic matrix")
    g.add_argument("--strip-self-transitions", action="store_true", default=argparse.SUPPRESS)


def _solver_args(p):
    g = p.add_argument_group("solver")
    g.add_argument("--setup-cycles", type=int)
    g.add_argument("--max-levels", type=int)
    g.add_argument("--coarsening", choices=("auto", "full", "cr"))
    g.add_argument("--caliber", type=int)
    g.add_argument("--mu", type=int, choices=(1, 2))
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--max-cycles", type=int)
    g.add_argument("--baseline-iters", type=int)
    g.add_argument("--tau", type=float)
    g.add_argument("--config", help="flat key=value file; command-line flags take precedence")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; 2 is reserved for non-convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="bamg-markov", argument_default=argparse.SUPPRESS,
                                     description="Bootstrap AMG for Markov chain state vectors.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", argument_default=argparse.SUPPRESS, help="compute a state vector")
    _problem_args(s)
    _solver_args(s)
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--out", help="directory for report.txt and the CSV files")

    w = sub.add_parser("sweep", argument_default=argparse.SUPPRESS, help="iteration-count table")
    w.add_argument("--problem", choices=PROBLEMS, required=True)
    w.add_argument("--sizes", type=int, nargs="+", required=True)
    w.add_argument("--seed", type=int)
    _solver_args(w)
    w.add_argument("--out", help="CSV file for the table")

    for name, helptext in (("spectrum", "dense eigenvalues"), ("fov", "field-of-values boundary")):
        d = sub.add_parser(name, argument_default=argparse.SUPPRESS, help=helptext)
        _problem_args(d)
        _solver_args(d)
        d.add_argument("--operator", choices=OPERATORS, action="append",
                       help="repeatable; default A")
        d.add_argument("--limit", type=int, default=DENSE_LIMIT)
        if name == "fov":
            d.add_argument("--angles", type=int, default=64)
        d.add_argument("--out", help="CSV file (default: stdout)")

    v = sub.add_parser("validate", argument_default=argparse.SUPPRESS, help="check a chain")
    _problem_args(v)

    gen = sub.add_parser("gen", argument_default=argparse.SUPPRESS,
                         help="write a generated chain as MatrixMarket")
    gen.add_argument("--problem", choices=PROBLEMS, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", required=True)
    gen.add_argument("--points", help="CSV file for planar point coordinates")
    return parser


_NOT_CONFIG = {"command", "verbose", "config", "sizes", "operator", "limit", "angles", "points"}


def _config_from(args):
    vals = {k.replace("-", "_"): v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    return merge_config(vals, getattr(args, "config", None))


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args):
    cfg = _config_from(args)
    rep = run(cfg)
    print(rep.format())
    if cfg.out:
        rep.write(cfg.out)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _cmd_sweep(args):
    vals = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    vals["n"] = max(args.sizes)  # placeholder; each row sets its own size
    cfg = merge_config(vals, getattr(args, "config", None))
    text, csv = table_sweep(args.problem, args.sizes, cfg)
    print(text)
    if cfg.out:
        Path(cfg.out).write_text(csv)
    bad = [c for line in csv.splitlines()[1:] for c in line.split(",")[1:]]
    if any(c == "failed" for c in bad):
        return EXIT_ERROR
    return EXIT_NOT_CONVERGED if any(c.endswith("*") for c in bad) else EXIT_OK


def _dense_ops(args):
    cfg = _config_from(args)
    prob = load_problem(cfg)
    B = prob.system_matrix()
    if B.nrows > args.limit:
        raise ValueError(f"dense diagnostics need n <= {args.limit}, got {B.nrows}")
    kinds = getattr(args, "operator", None) or ["A"]
    h = _setup(cfg, prob).hierarchy if any(k in ("mg", "cb") for k in kinds) else None
    return cfg, {k: dense_operator(k, B, h, cfg.tau, args.limit) for k in kinds}


def _cmd_spectrum(args):
    cfg, ops = _dense_ops(args)
    _emit(complex_csv({k: spectrum(M) for k, M in ops.items()}), cfg.out)
    return EXIT_OK


def _cmd_fov(args):
    cfg, ops = _dense_ops(args)
    _emit(complex_csv({k: field_of_values(M, args.angles) for k, M in ops.items()}), cfg.out)
    return EXIT_OK


def _cmd_validate(args):
    vals = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    cfg = RunConfig(**vals)
    if (cfg.problem is None) == (cfg.input is None):
        raise ValueError("give exactly one of --problem and --input")
    if cfg.input is not None:
        prob = chains.load_matrix_market(cfg.input)
        if cfg.strip_self_transitions:
            prob = dataclasses.replace(prob, A=chains.strip_self_transitions(prob.A))
    else:
        prob = load_problem(cfg.validate())
    report = chains.validate(prob)
    print(report.format())
    return EXIT_OK if report.ok else EXIT_ERROR


def _cmd_gen(args):
    cfg = RunConfig(problem=args.problem, n=args.n, seed=getattr(args, "seed", 0)).validate()
    prob = load_problem(cfg)
    chains.save_matrix_market(args.out, prob)
    points = getattr(args, "points", None)
    if points:
        if prob.points is None:
            raise ValueError("--points only applies to planar problems")
        chains.write_points_csv(points, prob.points)
    print(f"wrote {prob.kind} chain with {prob.n} states to {args.out}")
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "sweep": _cmd_sweep, "spectrum": _cmd_spectrum,
            "fov": _cmd_fov, "validate": _cmd_validate, "gen": _cmd_gen}


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - report and map to the error exit code
        log.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
