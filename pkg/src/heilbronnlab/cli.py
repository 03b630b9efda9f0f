"""Configuration-driven experiment runner.

Every subcommand reads a TOML manifest, writes ``<kind>.csv`` and
``<kind>.json`` into the output directory and exits with 0 on success, 2 when
an input violates a mathematical hypothesis (or the manifest is invalid) and 1
on any other failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from ._backend import BACKEND
from .core import PseudoPolynomial, rho_max
from .errors import ConfigError, HypothesisError, HypothesisViolated
from .experiments import (FloorTable, IndexSet, SCAN_CSV_HEADER, fit_exponent, lattice_experiment,
                          lattice_from_basis, scan_min_multi, scan_schedule)
from .expsum import ExponentCase, ExpSumReport, direct_sum, predicted_exponent, vaughan_decompose
from .modarith import Frac128, mangoldt_table
from .vdcsets import DeltaGammaRow, delta_gamma_table

SCHEMA = 1
KINDS = ("scan", "scan-primes", "scan-multi", "expsum", "vaughan", "delta-gamma", "lattice", "fit")

COLUMNS = {
    "scan": SCAN_CSV_HEADER,
    "scan-primes": SCAN_CSV_HEADER,
    "scan-multi": SCAN_CSV_HEADER,
    "expsum": ExpSumReport.CSV_HEADER,
    "vaughan": ("X", "beta_hex", "U", "V", "Z", "S_abs", "S1", "S2", "S2_adversarial", "rhs", "holds",
                "violations"),
    "delta-gamma": DeltaGammaRow.CSV_HEADER,
    "lattice": ("experiment_id", "f_text", "N", "det", "n_found"),
    "fit": ("eta_hat", "C_hat", "residual", "points"),
}

_HELP = {
    "scan": "min over n <= N of ||xi floor(f(n))|| for each xi and N",
    "scan-primes": "as scan, with n restricted to primes",
    "scan-multi": "min over n of max_i ||sum_j a_ij floor(f_j(n))|| for matrices A",
    "expsum": "exponential sums sum_{n<=N} w(n) e(beta floor(f(n))) with predicted bounds",
    "vaughan": "Vaughan decomposition check |S| <= 1 + log X |S1| + (log X)^8 |S2|",
    "delta-gamma": "upper bounds on delta(H) and lower bounds on gamma(H) for shift-set families",
    "lattice": "first n with A v(n) inside a lattice plus the open unit ball",
    "fit": "least-squares fit of value ~ C N^-eta",
}


def blob_sha1(data: bytes) -> str:
    """Content hash in the format git uses for blobs."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


# ---------------------------------------------------------------- config helpers

class Config:
    """Read-only view of a manifest with field-named errors."""

    def __init__(self, data: dict, source: str = "<config>"):
        self.data = data
        self.source = source

    def get(self, key: str, default: Any = None):
        return self.data.get(key, default)

    def require(self, key: str):
        if key not in self.data:
            raise ConfigError(f"{self.source}: missing field '{key}'")
        return self.data[key]

    def fail(self, key: str, message: str):
        raise ConfigError(f"{self.source}: field '{key}': {message}")


def load_config(path) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    try:
        return tomllib.loads(raw.decode("utf-8")), raw
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _function(cfg: Config, key: str = "f") -> PseudoPolynomial:
    text = cfg.require(key)
    try:
        return PseudoPolynomial.parse(str(text))
    except ValueError as exc:
        cfg.fail(key, str(exc))


def _functions(cfg: Config, key: str = "f") -> list[PseudoPolynomial]:
    items = cfg.require(key)
    if isinstance(items, str):
        items = [items]
    out = []
    for i, text in enumerate(items):
        try:
            out.append(PseudoPolynomial.parse(str(text)))
        except ValueError as exc:
            cfg.fail(f"{key}[{i}]", str(exc))
    return out


def n_schedule(cfg: Config, key: str = "N") -> list[int]:
    """A list of integers, or a table {start, stop, factor} for a geometric range."""
    spec = cfg.require(key)
    if isinstance(spec, int):
        ns = [spec]
    elif isinstance(spec, list):
        ns = [int(v) for v in spec]
    elif isinstance(spec, dict):
        try:
            start, stop = int(spec["start"]), int(spec["stop"])
        except KeyError as exc:
            cfg.fail(key, f"geometric range needs {exc.args[0]!r}")
        factor = int(spec.get("factor", 2))
        if factor < 2 or start < 1:
            cfg.fail(key, "need start >= 1 and factor >= 2")
        ns = []
        n = start
        while n <= stop:
            ns.append(n)
            n *= factor
    else:
        cfg.fail(key, "expected an integer, a list or a {start, stop, factor} table")
    if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        cfg.fail(key, "schedule must be nonempty, positive and strictly ascending")
    return ns


def _real_or_hex(value) -> Frac128:
    if isinstance(value, str) and not any(c in value for c in "./"):
        return Frac128.from_hex(value)
    return Frac128.from_real(value)


def random_fracs(seed: int, count: int, stream: int = 0) -> list[Frac128]:
    """``count`` uniform 128-bit fractions from a Philox stream keyed by the seed."""
    rng = np.random.Generator(np.random.Philox(key=int(seed) % (1 << 64), counter=[0, 0, 0, stream]))
    words = rng.integers(0, 1 << 64, size=(count, 2), dtype=np.uint64)
    return [Frac128.from_parts(int(h), int(lo)) for h, lo in words]


def xi_values(cfg: Config, seed: int, key: str = "xi") -> list[Frac128]:
    """Explicit hex strings or reals under ``xi``; otherwise ``xi_count`` seeded draws."""
    if key in cfg.data:
        vals = cfg.data[key]
        vals = vals if isinstance(vals, list) else [vals]
        try:
            return [_real_or_hex(v) for v in vals]
        except (ValueError, TypeError) as exc:
            cfg.fail(key, str(exc))
    count = int(cfg.get(f"{key}_count", 1))
    if count < 1:
        cfg.fail(f"{key}_count", "must be >= 1")
    return random_fracs(seed, count)


def check_rho(cfg: Config, f: PseudoPolynomial) -> float | None:
    if "rho" not in cfg.data:
        return None
    rho = Fraction(str(cfg.data["rho"]))
    limit = rho_max(f)
    if not 0 < rho < limit:
        raise HypothesisViolated(
            f"rho = {cfg.data['rho']} violates the rho constraint 0 < rho < 1/(floor(deg f) + 3)"
            f" = {limit} for f = {f.text}")
    return float(rho)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- experiments

def _max_min_summary(results: dict[int, list]) -> tuple[list[dict], dict | None]:
    per_n, pts = [], []
    for N, res in results.items():  # noqa: N806
        worst = max(res, key=lambda r: r.min_num)
        per_n.append({"N": N, "max_min": worst.min_value, "ambiguous": sum(r.ambiguous_count for r in res)})
        pts.append((N, worst.min_value))
    fit = None
    if len(pts) >= 2 and all(v > 0 for _, v in pts):
        eta, c, resid = fit_exponent(pts)
        fit = {"eta_hat": eta, "C_hat": c, "residual": resid}
    return per_n, fit


def run_scan(cfg: Config, seed: int, threads: int, primes: bool = False):
    f = _function(cfg)
    check_rho(cfg, f)
    ns = n_schedule(cfg)
    xis = xi_values(cfg, seed)
    index = IndexSet.Primes if primes else IndexSet.AllIntegers
    table = FloorTable(f)
    rows, by_n = [], {N: [] for N in ns}
    for i, xi in enumerate(xis):
        for res in scan_schedule(f, xi, ns, index, threads, table):
            rows.append(res.csv_row(f"xi{i}", f.text))
            by_n[res.N].append(res)
    per_n, fit = _max_min_summary(by_n)
    summary = {"f": f.text, "index_set": index.value, "xi_count": len(xis), "per_N": per_n, "fit": fit}
    if f.theta:
        try:
            case = ExponentCase.CorollaryPrime if primes else ExponentCase.CorollaryInt
            summary["predicted_eta"] = predicted_exponent(case, f.poly_degree, c=f.theta_r)
        except HypothesisError:
            pass
    return SCAN_CSV_HEADER, rows, summary


def _matrices(cfg: Config, seed: int, k: int) -> list[list[list[Frac128]]]:
    if "A" in cfg.data:
        mats = cfg.data["A"]
        if mats and isinstance(mats[0], list) and mats[0] and not isinstance(mats[0][0], list):
            mats = [mats]
        try:
            return [[[_real_or_hex(v) for v in row] for row in m] for m in mats]
        except (ValueError, TypeError) as exc:
            cfg.fail("A", str(exc))
    rows = int(cfg.get("rows", 1))
    count = int(cfg.get("A_count", 1))
    if not 1 <= rows <= 4:
        cfg.fail("rows", "must be between 1 and 4")
    flat = random_fracs(seed, count * rows * k)
    return [[flat[(m * rows + i) * k:(m * rows + i + 1) * k] for i in range(rows)] for m in range(count)]


def run_scan_multi(cfg: Config, seed: int, threads: int):
    fs = _functions(cfg)
    for f in fs:
        check_rho(cfg, f)
    ns = n_schedule(cfg)
    index = IndexSet.coerce(cfg.get("index_set", "AllIntegers"))
    mats = _matrices(cfg, seed, len(fs))
    table = FloorTable(fs)
    text = "; ".join(f.text for f in fs)
    rows, by_n = [], {N: [] for N in ns}
    for i, a in enumerate(mats):
        for N in ns:  # noqa: N806
            res = scan_min_multi(fs, a, N, index, threads, table)
            rows.append(res.csv_row(f"A{i}", text))
            by_n[N].append(res)
    per_n, fit = _max_min_summary(by_n)
    return SCAN_CSV_HEADER, rows, {"f": [f.text for f in fs], "matrices": len(mats), "per_N": per_n,
                                   "fit": fit}


def run_expsum(cfg: Config, seed: int, threads: int):
    f = _function(cfg)
    rho = check_rho(cfg, f)
    ns = n_schedule(cfg)
    betas = xi_values(cfg, seed, "beta")
    mode = cfg.get("mode", "floor")
    primes = bool(cfg.get("primes", False))
    case = cfg.get("case")
    eta = None
    if case is not None:
        try:
            case = ExponentCase(case)
        except ValueError:
            cfg.fail("case", f"expected one of {[c.value for c in ExponentCase]}")
        eta = predicted_exponent(case, f.poly_degree, theta_r=f.theta_r, rho=rho, c=cfg.get("c", f.theta_r))
    weights = None
    if primes:
        weights = mangoldt_table(max(ns))
    rows = []
    for beta in betas:
        for N in ns:  # noqa: N806
            w = None if weights is None else weights[1:N + 1]
            rep = direct_sum(f, beta, 0, N, weights=w, mode=mode, threads=threads)
            if eta is not None:
                rep = rep.with_prediction(N ** (1 - eta), case)
            rows.append(rep.csv_row())
    return ExpSumReport.CSV_HEADER, rows, {"f": f.text, "mode": mode, "primes": primes,
                                           "predicted_eta": eta, "beta_count": len(betas)}


def run_vaughan(cfg: Config, seed: int, threads: int):
    f = _function(cfg)
    xs = n_schedule(cfg, "X")
    betas = xi_values(cfg, seed, "beta")
    strict = bool(cfg.get("strict", True))
    rows, holds = [], True
    for beta in betas:
        for X in xs:  # noqa: N806
            res = vaughan_decompose(f, beta, X, strict=strict, threads=threads)
            p = res.params
            holds &= res.holds
            rows.append([str(X), beta.hex, repr(p.U), repr(p.V), repr(p.Z), repr(res.S.modulus),
                         repr(res.S1.modulus), repr(res.S2.modulus), repr(res.S2_adversarial.modulus),
                         repr(res.rhs),
                         str(res.holds), "|".join(p.violations)])
    return COLUMNS["vaughan"], rows, {"f": f.text, "strict": strict, "all_hold": holds}


def run_delta_gamma(cfg: Config, seed: int, threads: int):
    fams = cfg.get("families")
    if fams is None:
        fams = [cfg.require("family")]
    if not isinstance(fams, list):
        fams = [fams]
    ns = n_schedule(cfg)
    table = delta_gamma_table(fams, ns, int(cfg.get("grid_density", 8)), int(cfg.get("resolution", 4096)))
    rows = [r.csv_row() for r in table]
    return DeltaGammaRow.CSV_HEADER, rows, {"rows": len(rows)}


def run_lattice(cfg: Config, seed: int, threads: int):
    fs = _functions(cfg)
    ns = n_schedule(cfg)
    a = cfg.require("A")
    lattice = lattice_from_basis(cfg.require("basis"))
    text = "; ".join(f.text for f in fs)
    rows, found = [], []
    for N in ns:  # noqa: N806
        n = lattice_experiment(fs, a, lattice, N)
        found.append({"N": N, "n": n})
        rows.append(["lattice", text, str(N), repr(lattice.det), "" if n is None else str(n)])
    return COLUMNS["lattice"], rows, {"det": lattice.det, "condition": lattice.condition, "per_N": found}


def run_fit(cfg: Config, seed: int, threads: int):
    if "points" in cfg.data:
        pts = [(float(n), float(v)) for n, v in cfg.data["points"]]
    else:
        path = Path(cfg.require("input"))
        col = cfg.get("column", "min_value")
        best: dict[int, float] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                n = int(row["N"])
                best[n] = max(best.get(n, 0.0), float(row[col]))
        pts = sorted(best.items())
    eta, c, resid = fit_exponent(pts)
    rows = [[repr(eta), repr(c), repr(resid), str(len(pts))]]
    return COLUMNS["fit"], rows, {"eta_hat": eta, "C_hat": c, "residual": resid}


RUNNERS: dict[str, Callable] = {
    "scan": lambda c, s, t: run_scan(c, s, t, primes=False),
    "scan-primes": lambda c, s, t: run_scan(c, s, t, primes=True),
    "scan-multi": run_scan_multi,
    "expsum": run_expsum,
    "vaughan": run_vaughan,
    "delta-gamma": run_delta_gamma,
    "lattice": run_lattice,
    "fit": run_fit,
}


def run(kind: str, config: dict, out_dir, seed: int = 0, threads: int = 1,
        raw: bytes | None = None, source: str = "<config>") -> dict:
    """Run one experiment, write ``<kind>.csv`` and ``<kind>.json`` and return the summary."""
    if kind not in RUNNERS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    declared = config.get("kind")
    if declared is not None and declared != kind:
        raise ConfigError(f"{source}: field 'kind': config is for {declared!r}, not {kind!r}")
    if raw is None:
        raw = json.dumps(config, sort_keys=True).encode()
    cfg = Config(config, source)
    start = time.perf_counter()
    header, rows, details = RUNNERS[kind](cfg, seed, threads)
    wall = time.perf_counter() - start
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = kind.replace("-", "_")
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(_csv(header, rows))
    summary = {
        "schema": SCHEMA,
        "kind": kind,
        "version": __version__,
        "backend": BACKEND,
        "config": config,
        "config_sha1": blob_sha1(raw),
        "seed": seed,
        "threads": threads,
        "wall_time_s": wall,
        "csv": csv_path.name,
        "rows": len(rows),
        "results": details,
    }
    (out / f"{stem}.json").write_text(json.dumps(summary, indent=2, default=str) + "\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heilbronnlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        epilog = "CSV columns: " + ", ".join(COLUMNS[kind])
        p = sub.add_parser(kind, help=_HELP[kind], description=_HELP[kind], epilog=epilog)
        p.add_argument("--config", required=True, metavar="PATH", help="TOML experiment manifest")
        p.add_argument("--seed", type=int, default=None, metavar="U64",
                       help="seed for random xi, beta and matrices (overrides the manifest)")
        p.add_argument("--threads", type=int, default=None, metavar="N", help="worker threads")
        p.add_argument("--out", default=None, metavar="DIR", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config, raw = load_config(args.config)
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        if not 0 <= seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        threads = args.threads if args.threads is not None else int(config.get("threads", 1))
        out = args.out or config.get("out", ".")
        summary = run(args.kind, config, out, seed, threads, raw, args.config)
    except HypothesisError as exc:
        print(f"heilbronnlab: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"heilbronnlab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {summary['rows']} rows to {Path(out) / summary['csv']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
