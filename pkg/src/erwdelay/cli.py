"""Command-line entry point: ``erwdelay {simulate,exact,oracle,verify}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

from .analytics import (
    first_only_mean,
    first_only_variance,
    full_moment_table,
    geometric_law,
    limit_constants,
    mixed_kernel_moments,
)
from .montecarlo import EnsembleSpec, run_ensemble
from .oracle import OracleBudgetError, exact_distribution
from .walk import MemoryKernel, ProbTriple, geometric_grid

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2  # argparse's own code
EXIT_BAD_KERNEL = 3
EXIT_BAD_PROBS = 4
EXIT_NO_SEED = 5
EXIT_IO = 6
EXIT_BAD_CONFIG = 7

CSV_COLUMNS = ("kernel", "r", "n", "branch", "statistic", "value", "stderr")
SUBCOMMANDS = ("simulate", "exact", "oracle", "verify")


class ConfigError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    kernel: MemoryKernel
    params: ProbTriple
    n: int
    reps: int | None
    seed: int | None
    checkpoints: tuple[int, ...] | None
    output: str | None
    format: str
    theorem: str
    workers: int | None
    conditional: bool
    r_given: bool


_DEFAULTS = {
    "kernel": "full", "r": 0.5, "p": None, "q": None, "n": None, "reps": None, "seed": None,
    "checkpoints": None, "output": None, "format": "csv", "theorem": "all", "workers": None,
    "conditional": False,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erwdelay", description="Elephant random walks with delays.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_ in (
        ("simulate", "Monte Carlo ensemble summary at checkpoints"),
        ("exact", "exact moment tables and limit constants"),
        ("oracle", "exact law of N*_n by dynamic programming"),
        ("verify", "run verification suites; exit 1 if an acceptance check fails"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat JSON file of option values (flags win)")
        p.add_argument("--kernel", help="full | first | last | first-last | window:M")
        p.add_argument("--p", type=float)
        p.add_argument("--q", type=float)
        p.add_argument("--r", type=float)
        p.add_argument("--n", type=int, help="horizon")
        p.add_argument("--reps", type=int, help="replicates")
        p.add_argument("--seed", type=int)
        p.add_argument("--checkpoints", help="comma-separated step counts (default: powers of two)")
        p.add_argument("--output", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--workers", type=int, help="worker threads (default: ERW_THREADS or CPU count)")
        if name == "verify":
            p.add_argument("--theorem", help="3.1 | 4.1 | 5.1 | 6.1 | 7 | gamma | all")
        if name == "oracle":
            p.add_argument("--conditional", action="store_true", default=None,
                           help="condition on a nonzero first step")
    return parser


def _merged(ns: argparse.Namespace) -> dict:
    values = dict(_DEFAULTS)
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}", EXIT_IO) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {ns.config} is not valid JSON: {exc}", EXIT_BAD_CONFIG) from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a flat JSON object", EXIT_BAD_CONFIG)
        unknown = set(loaded) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}", EXIT_BAD_CONFIG)
        values.update(loaded)
    for key in _DEFAULTS:
        flag = getattr(ns, key, None)
        if flag is not None:
            values[key] = flag
    values["r_given"] = getattr(ns, "r", None) is not None or (ns.config and "r" in loaded)
    return values


def _checkpoints(spec) -> tuple[int, ...] | None:
    if spec is None:
        return None
    if isinstance(spec, str):
        try:
            return tuple(int(x) for x in spec.split(",") if x.strip())
        except ValueError as exc:
            raise ConfigError(f"bad checkpoint list {spec!r}", EXIT_BAD_CONFIG) from exc
    return tuple(int(x) for x in spec)


def parse_config(argv: list[str] | None = None) -> RunConfig:
    """Parse flags (and an optional JSON config) into a validated RunConfig."""
    ns = build_parser().parse_args(argv)
    v = _merged(ns)
    try:
        kernel = MemoryKernel.parse(str(v["kernel"]))
    except ValueError as exc:
        raise ConfigError(str(exc), EXIT_BAD_KERNEL) from exc
    r = float(v["r"])
    p, q = v["p"], v["q"]
    if p is None and q is None:
        p = q = (1 - r) / 2
    elif p is None:
        p = 1 - r - q
    elif q is None:
        q = 1 - p - r
    try:
        params = ProbTriple(float(p), float(q), r)
    except ValueError as exc:
        raise ConfigError(str(exc), EXIT_BAD_PROBS) from exc
    sub = ns.subcommand
    if sub == "verify" and v["seed"] is None:
        raise ConfigError("verify requires --seed (verification runs are never seeded from the clock)",
                          EXIT_NO_SEED)
    n = v["n"]
    if sub in ("simulate", "exact", "oracle") and n is None:
        raise ConfigError(f"{sub} requires --n", EXIT_BAD_CONFIG)
    if n is not None and int(n) < 1:
        raise ConfigError("--n must be >= 1", EXIT_BAD_CONFIG)
    if v["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json", EXIT_BAD_CONFIG)
    return RunConfig(
        subcommand=sub,
        kernel=kernel,
        params=params,
        n=int(n) if n is not None else 0,
        reps=None if v["reps"] is None else int(v["reps"]),
        seed=None if v["seed"] is None else int(v["seed"]),
        checkpoints=_checkpoints(v["checkpoints"]),
        output=v["output"],
        format=v["format"],
        theorem=str(v["theorem"]),
        workers=None if v["workers"] is None else int(v["workers"]),
        conditional=bool(v["conditional"]),
        r_given=bool(v["r_given"]),
    )


# --- outputs -------------------------------------------------------------------


def render_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def render_json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def _emit(cfg: RunConfig, rows, doc) -> None:
    text = render_csv(rows) if cfg.format == "csv" else render_json(doc)
    if cfg.output is None:
        sys.stdout.write(text)
        return
    with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def exact_rows(cfg: RunConfig) -> tuple[list[tuple], dict]:
    """Exact moment table of N*_k for k = 1..n, then the limit constants."""
    kernel, r, n = cfg.kernel, cfg.params.r, cfg.n
    label = kernel.label
    table: list[dict] = []
    branch = "all"
    if kernel.kind == "full":
        ft = full_moment_table(n, r)
        for k in range(1, n + 1):
            table.append({"E(N*_n)": ft.mean[k - 1], "E(N*_n^2)": ft.second[k - 1],
                          "Var(N*_n)": ft.variance[k - 1], "alpha*_n": ft.alpha[k - 1],
                          "E<M*>_n": ft.bracket[k - 1]})
    elif kernel.kind == "first":
        for k in range(1, n + 1):
            table.append({"E(N*_n)": first_only_mean(k, r), "Var(N*_n)": first_only_variance(k, r)})
    elif kernel.kind == "last":
        for k in range(1, n + 1):
            law = geometric_law(k, r)
            table.append({"E(N*_n)": law.mean(), "E(N*_n^2)": law.moment(2), "Var(N*_n)": law.variance()})
    elif kernel.kind == "first-last":
        branch = "first_nonzero"
        for row in mixed_kernel_moments(n, r, table=True):
            table.append({"E(I*_n)": row.e_indicator, "E(N*_n)": row.e_count,
                          "E(N*_n I*_n)": row.e_count_indicator, "E(N*_n^2)": row.e_count_sq,
                          "Var(N*_n)": row.variance})
    else:
        for k in range(1, n + 1):
            law = exact_distribution(kernel, k, r, exact=False)
            table.append({"E(N*_n)": law.mean(), "E(N*_n^2)": law.moment(2), "Var(N*_n)": law.variance()})
    rows = []
    for k, rec in enumerate(table, start=1):
        for stat, value in rec.items():
            rows.append((label, r, k, branch, stat, float(value), ""))
    consts = limit_constants(r).as_dict()
    for stat, value in consts.items():
        if stat != "r":
            rows.append((label, r, "", "limit", stat, value, ""))
    doc = {
        "schema_version": "erwdelay.exact/1",
        "kernel": label, "r": r, "branch": branch,
        "moments": [{"n": k, **{s: float(v) for s, v in rec.items()}} for k, rec in enumerate(table, start=1)],
        "limit_constants": consts,
    }
    return rows, doc


def oracle_rows(cfg: RunConfig) -> tuple[list[tuple], dict]:
    law = exact_distribution(cfg.kernel, cfg.n, cfg.params.r, condition_on_first_nonzero=cfg.conditional)
    branch = "first_nonzero" if cfg.conditional else "all"
    label = cfg.kernel.label
    rows = [(label, cfg.params.r, cfg.n, branch, f"P(N*_n={k})", float(pk), "")
            for k, pk in zip(law.support, law.probs)]
    doc = {
        "schema_version": "erwdelay.pmf/1",
        "kernel": label, "r": cfg.params.r, "n": cfg.n, "branch": branch,
        "exact": law.is_exact,
        "pmf": [{"k": k, "p": float(pk), **({"p_exact": str(pk)} if isinstance(pk, Fraction) else {})}
                for k, pk in zip(law.support, law.probs)],
    }
    return rows, doc


def run(cfg: RunConfig) -> int:
    if cfg.subcommand == "simulate":
        checkpoints = cfg.checkpoints or tuple(int(c) for c in geometric_grid(cfg.n))
        spec = EnsembleSpec(cfg.kernel, cfg.params, cfg.n, cfg.reps or 1000,
                            0 if cfg.seed is None else cfg.seed, checkpoints=checkpoints)
        summary = run_ensemble(spec, cfg.workers)
        if summary.partial:
            print(f"warning: partial ensemble ({summary.replicates}/{spec.replicates} replicates)",
                  file=sys.stderr)
        _emit(cfg, summary.to_rows(), summary.to_json_dict())
        return EXIT_OK
    if cfg.subcommand == "exact":
        _emit(cfg, *exact_rows(cfg))
        return EXIT_OK
    if cfg.subcommand == "oracle":
        _emit(cfg, *oracle_rows(cfg))
        return EXIT_OK

    from .verify import SuiteOptions, format_table, run_verify

    opts = SuiteOptions(seed=cfg.seed, r=cfg.params.r if cfg.r_given else None, reps=cfg.reps,
                        workers=cfg.workers)
    t0 = time.monotonic()
    result = run_verify(cfg.theorem, opts)
    _emit(cfg, result.to_rows(), result.to_json_dict())
    # the table goes to stderr when the report itself is on stdout
    out = sys.stderr if cfg.output is None else sys.stdout
    print(format_table(result), file=out)
    print(f"elapsed {time.monotonic() - t0:.1f} s", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_CHECK_FAILED


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"erwdelay: error: {exc}", file=sys.stderr)
        return exc.code
    try:
        return run(cfg)
    except OSError as exc:
        print(f"erwdelay: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OracleBudgetError, KeyError, ValueError) as exc:
        print(f"erwdelay: error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
