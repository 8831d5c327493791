"""Command-line entry point: ``sparse-ubi {gen,identify,eval,bench}``.

Exit codes: 0 success, 2 configuration error, 3 identification shortfall,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datagen, evaluation, pipeline
from .errors import ConfigError, UBIError

EXIT_OK, EXIT_CONFIG, EXIT_SHORTFALL, EXIT_IO = 0, 2, 3, 4
SEED_ENV = "SPARSE_UBI_SEED"

TRIAL_FIELDS = [
    "m", "n", "k", "T", "sigma_off", "seed", "bas_deg", "frob", "n_accurate",
    "runtime_ms", "bas_accurate_deg", "status",
]
SUMMARY_FIELDS = [
    "m", "n", "k", "T", "sigma_off", "trials", "mean_bas_deg", "median_bas_deg",
    "log10_mean_bas_deg", "mean_bas_accurate_deg", "mean_angle_accurate_deg",
    "mean_frob", "median_frob", "n_hat", "frac_accurate", "all_accurate_trials",
    "failures", "mean_runtime_ms",
]
PLOT_FIELDS = ["m", "n", "mean_bas_deg", "log10_mean_bas_deg", "mean_bas_accurate_deg", "n_hat"]

PRESETS = {
    "noiseless": {"pairs": [(3, 5)], "T": 2000, "sigma_off": [0.0]},
    "noise-sweep": {"pairs": [(3, 4), (3, 5), (3, 6), (4, 5), (4, 6)], "T": 2000,
             "sigma_off": [1e-4, 1e-3, 1e-2]},
}

log = logging.getLogger("sparse_ubi")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- experiment description ---------------------------------------------------

@dataclass
class ExperimentSpec:
    pairs: list[tuple[int, int]]
    T: int = 2000
    sigma_off: tuple[float, ...] = (0.0,)
    k: int | None = None  # None means m - 1
    trials: int = 100
    seed: int = 0
    algorithm: str = "ransac"
    support_mode: str = "uniform"
    th1: float | None = None
    th2: float | None = None
    th3: float = 1e-4

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for m, n in self.pairs:
            if n <= m:
                raise ConfigError(f"need n > m, got [m, n] = [{m}, {n}]")
        if self.algorithm not in pipeline.ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")

    def k_for(self, m: int) -> int:
        return m - 1 if self.k is None else self.k

    def trial_seed(self, m: int, n: int, trial: int) -> int:
        # Independent of sigma_off, so every noise level sees the same A and supports.
        return int(np.random.SeedSequence([self.seed, m, n, trial]).generate_state(1)[0])

    def jobs(self):
        for m, n in self.pairs:
            for sigma in self.sigma_off:
                for t in range(self.trials):
                    yield (m, n, sigma, t)


def run_trial(spec: ExperimentSpec, m: int, n: int, sigma: float, trial: int) -> dict:
    seed = spec.trial_seed(m, n, trial)
    k = spec.k_for(m)
    row = {"m": m, "n": n, "k": k, "T": spec.T, "sigma_off": sigma, "seed": seed}
    try:
        cfg = datagen.GenConfig(m=m, n=n, T=spec.T, k=k, sigma_off=sigma, seed=seed,
                                support_mode=spec.support_mode)
        ds = datagen.generate(cfg)
        t0 = time.perf_counter()
        res = pipeline.identify(ds.X, n, k, spec.algorithm, sigma_off=sigma, th1=spec.th1,
                                th2=spec.th2, th3=spec.th3, seed=seed)
        runtime = time.perf_counter() - t0
        metrics = evaluation.evaluate(ds.A, res.Ahat)
    except UBIError as exc:
        log.warning("trial %s failed: %s", row, exc)
        row.update(bas_deg=math.nan, frob=math.nan, n_accurate=0, runtime_ms=math.nan,
                   bas_accurate_deg=math.nan, status=f"error:{type(exc).__name__}")
        return row
    row.update(
        bas_deg=metrics["bas_deg"],
        frob=metrics["frob"],
        n_accurate=metrics["n_accurate"],
        runtime_ms=1000.0 * runtime,
        bas_accurate_deg=metrics["bas_accurate_deg"],
        status=res.status,
    )
    return row


def run_bench(spec: ExperimentSpec, jobs: int = 1) -> list[dict]:
    """All trial rows, ordered by (pair, sigma_off, trial) whatever ``jobs`` is."""
    work = list(spec.jobs())
    if jobs <= 1:
        return [run_trial(spec, *w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(run_trial, [spec] * len(work), *zip(*work)))


def summarize(rows: list[dict]) -> list[dict]:
    """Aggregate trial rows per (m, n, k, T, sigma_off), preserving first-seen order."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (int(r["m"]), int(r["n"]), int(r["k"]), int(r["T"]), float(r["sigma_off"]))
        groups.setdefault(key, []).append(r)
    out = []
    for (m, n, k, T, sigma), rs in groups.items():
        bas = np.array([float(r["bas_deg"]) for r in rs])
        frob = np.array([float(r["frob"]) for r in rs])
        bas_acc = np.array([float(r["bas_accurate_deg"]) for r in rs])
        n_acc = np.array([int(r["n_accurate"]) for r in rs])
        runtime = np.array([float(r["runtime_ms"]) for r in rs])
        ok = np.isfinite(bas)
        mean_bas = float(np.mean(bas[ok])) if ok.any() else math.nan
        out.append({
            "m": m, "n": n, "k": k, "T": T, "sigma_off": sigma,
            "trials": len(rs),
            "mean_bas_deg": mean_bas,
            "median_bas_deg": float(np.median(bas[ok])) if ok.any() else math.nan,
            "log10_mean_bas_deg": math.log10(mean_bas) if mean_bas > 0 else math.nan,
            "mean_bas_accurate_deg": float(np.mean(bas_acc[ok])) if ok.any() else math.nan,
            "mean_angle_accurate_deg": (float(np.sum(bas_acc[ok]) / n_acc.sum())
                                        if n_acc.sum() else math.nan),
            "mean_frob": float(np.mean(frob[ok])) if ok.any() else math.nan,
            "median_frob": float(np.median(frob[ok])) if ok.any() else math.nan,
            "n_hat": float(n_acc.sum() / len(rs)),
            "frac_accurate": float(n_acc.sum() / (n * len(rs))),
            "all_accurate_trials": int(np.count_nonzero(n_acc == n)),
            "failures": sum(1 for r in rs if r["status"] != "ok"),
            "mean_runtime_ms": float(np.mean(runtime[ok])) if ok.any() else math.nan,
        })
    return out


def write_csv(path: Path, rows: list[dict], fields: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_bench(outdir: Path, rows: list[dict]) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = [outdir / "trials.csv", outdir / "summary.csv"]
    write_csv(written[0], rows, TRIAL_FIELDS)
    # Aggregates come from the rows as written, so they can always be recomputed.
    summary = summarize(read_csv(written[0]))
    write_csv(written[1], summary, SUMMARY_FIELDS)
    for sigma in dict.fromkeys(s["sigma_off"] for s in summary):
        path = outdir / f"plot_sigma_{sigma:g}.csv"
        write_csv(path, [s for s in summary if s["sigma_off"] == sigma], PLOT_FIELDS)
        written.append(path)
    return written


# -- subcommands ---------------------------------------------------------------

def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def cmd_gen(args) -> int:
    cfg = datagen.GenConfig(m=args.m, n=args.n, T=args.T, k=args.k, sigma_off=args.sigma_off,
                            seed=args.seed, support_mode=args.support_mode)
    ds = datagen.generate(cfg)
    paths = datagen.save_dataset(ds, args.out)
    print(json.dumps({k: str(v) for k, v in paths.items()}))
    return EXIT_OK


def cmd_identify(args) -> int:
    X = datagen.load_matrix(args.X)
    res = pipeline.identify(X, args.n, args.k, args.algorithm, sigma_off=args.sigma_off,
                            th1=args.th1, th2=args.th2, th3=args.th3,
                            max_outer=args.max_outer, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    datagen.save_matrix(out / "Ahat.csv", res.Ahat if res.Ahat.size else np.empty((X.shape[0], 0)))
    report = res.report()
    report["partial"] = not res.ok
    (out / "report.json").write_text(json.dumps(report, indent=2))
    res.ocs.save(out / "ocs.json")
    print(json.dumps({"status": res.status, "runtime_s": res.runtime_s,
                      "n_identified": report["n_identified"]}))
    return EXIT_OK if res.ok else EXIT_SHORTFALL


def cmd_eval(args) -> int:
    A = datagen.load_matrix(args.A)
    Ahat = np.loadtxt(args.Ahat, delimiter=",", ndmin=2)
    metrics = evaluation.evaluate(A, Ahat)
    text = json.dumps(metrics, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    preset = PRESETS.get(args.preset, {})
    pairs = args.pairs or preset.get("pairs")
    if not pairs:
        raise ConfigError("give --pairs or --preset")
    spec = ExperimentSpec(
        pairs=pairs,
        T=args.T or preset.get("T", 2000),
        sigma_off=tuple(args.sigma_off or preset.get("sigma_off", [0.0])),
        k=args.k,
        trials=args.trials,
        seed=args.seed,
        algorithm=args.algorithm,
        support_mode=args.support_mode,
        th1=args.th1, th2=args.th2, th3=args.th3,
    )
    rows = run_bench(spec, args.jobs)
    paths = write_bench(Path(args.out), rows)
    for s in summarize(rows):
        print(f"[m,n]=[{s['m']},{s['n']}] sigma_off={s['sigma_off']:g}: "
              f"mean BAS {s['mean_bas_deg']:.3g} deg, median frob {s['median_frob']:.3g}, "
              f"n_hat {s['n_hat']:.2f}, failures {s['failures']}")
    print(json.dumps([str(p) for p in paths]))
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------

def _pair(text: str) -> tuple[int, int]:
    try:
        m, n = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected m,n but got {text!r}") from None
    return m, n


def _thresholds(p: argparse.ArgumentParser) -> None:
    p.add_argument("--th1", type=float, help="subspace RANSAC distance threshold")
    p.add_argument("--th2", type=float, help="mixing-vector RANSAC distance threshold")
    p.add_argument("--th3", type=float, default=1e-4, help="clustering ACD threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-ubi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--T", type=int, required=True)
    g.add_argument("--sigma-off", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=_default_seed())
    g.add_argument("--support-mode", choices=["uniform", "balanced"], default="uniform")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    i = sub.add_parser("identify", help="estimate the mixing matrix of X.csv")
    i.add_argument("--X", required=True)
    i.add_argument("--n", type=int, required=True)
    i.add_argument("--k", type=int)
    i.add_argument("--algorithm", choices=pipeline.ALGORITHMS, default="ransac")
    i.add_argument("--sigma-off", type=float, default=0.0,
                   help="expected inactive-source noise, used for default thresholds")
    _thresholds(i)
    i.add_argument("--max-outer", type=int)
    i.add_argument("--seed", type=int, default=_default_seed())
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_identify)

    e = sub.add_parser("eval", help="compare an estimate with the true mixing matrix")
    e.add_argument("--A", required=True)
    e.add_argument("--Ahat", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="Monte Carlo sweep over [m, n] and sigma_off")
    b.add_argument("--preset", choices=sorted(PRESETS))
    b.add_argument("--pairs", type=_pair, nargs="+", metavar="M,N")
    b.add_argument("--k", type=int)
    b.add_argument("--T", type=int)
    b.add_argument("--sigma-off", type=float, nargs="+")
    b.add_argument("--trials", type=int, default=100)
    b.add_argument("--seed", type=int, default=_default_seed())
    b.add_argument("--algorithm", choices=pipeline.ALGORITHMS, default="ransac")
    b.add_argument("--support-mode", choices=["uniform", "balanced"], default="uniform")
    _thresholds(b)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, OSError) else EXIT_CONFIG
    except UBIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHORTFALL


if __name__ == "__main__":
    sys.exit(main())
