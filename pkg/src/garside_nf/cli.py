"""
Command line: ``garside-nf sample | stats | growth | bench | validate``.

Every output file starts with a metadata record (tool version, the run
configuration, RNG identifier, structure fingerprint).  For JSON-lines
samples it is the header object, for JSON reports a ``meta`` key, and for
CSV files a first line ``# {json}`` ahead of the fixed column header.

Outputs are written to ``<path>.part`` and renamed only when the whole run
succeeded; on failure they are removed and a JSON error object goes to
standard error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import contextlib
import dataclasses
import json
import math
import os
import statistics
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import CapacityError, GarsideError, UsageError
from .growth import MAX_STATES, check_criterion
from .normalform import normal_form_baseline, normal_form_linear
from .sampling import (RNG_NAME, SampleSet, default_workers, item_rng, make_sample,
                       sample_word)
from .stats import (MIN_SUPPORT, W_MIN, pd_stats, position_stats, sample_stable_region,
                    stable_region_csv, with_metadata)
from .structures import build_structure, validate_structure

DEFAULT_COUNT = 9999
DEFAULT_BENCH_K = [2 ** e for e in range(10, 17)]
DEFAULT_BASELINE_MAX_K = 2 ** 12
DEFAULT_MAX_TABLE_SIMPLES = 1000
DEFAULT_MAX_SERIES_TERMS = 500


@dataclasses.dataclass
class RunConfig:
    """Validated flags of one invocation; echoed into every output file."""

    subcommand: str
    structure: str | None = None
    n: int | None = None
    k: int | None = None
    k_list: list[int] | None = None
    count: int | None = None
    seed: int = 0
    method: str | None = None
    output: str | None = None
    max_table_simples: int = DEFAULT_MAX_TABLE_SIMPLES
    max_series_terms: int = DEFAULT_MAX_SERIES_TERMS
    threads: int = 1
    extra: dict = dataclasses.field(default_factory=dict)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        return d


class Outputs:
    """Files written atomically: all of them appear, or none does."""

    def __init__(self):
        self.paths: list[Path] = []

    def write(self, path: str | Path, text: str) -> None:
        path = Path(path)
        part = path.with_name(path.name + ".part")
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        part.write_text(text, encoding="utf-8")
        self.paths.append(path)

    def commit(self) -> None:
        for p in self.paths:
            os.replace(p.with_name(p.name + ".part"), p)

    def discard(self) -> None:
        for p in self.paths:
            with contextlib.suppress(FileNotFoundError):
                p.with_name(p.name + ".part").unlink()


def metadata(cfg: RunConfig, g=None) -> dict:
    meta = {"tool": "garside-nf", "version": __version__, "config": cfg.to_json(), "rng": RNG_NAME}
    if g is not None:
        meta["structure"] = g.name
        meta["fingerprint"] = g.fingerprint()
    return meta


def _structure(cfg: RunConfig):
    g = build_structure(cfg.structure, cfg.n)
    if g.complete and g.size > cfg.max_table_simples:
        raise CapacityError(f"{g.name} has {g.size} simples, above max-table-simples={cfg.max_table_simples}")
    return g


# -- subcommands --------------------------------------------------------------

def cmd_sample(cfg: RunConfig, out: Outputs) -> dict:
    g = _structure(cfg)
    sample = make_sample(g, cfg.method, cfg.k, cfg.count, cfg.seed, workers=cfg.threads,
                         config=cfg.to_json())
    if cfg.output in (None, "-"):
        sys.stdout.write(json.dumps(sample.header(), sort_keys=True) + "\n")
        for x in sample.items:
            sys.stdout.write(json.dumps(x.to_json(), separators=(",", ":")) + "\n")
    else:
        out.write(cfg.output, _sample_text(sample))
    return {"count": len(sample), "structure": g.name}


def _sample_text(sample: SampleSet) -> str:
    lines = [json.dumps(sample.header(), sort_keys=True)]
    lines += [json.dumps(x.to_json(), separators=(",", ":")) for x in sample.items]
    return "\n".join(lines) + "\n"


def cmd_stats(cfg: RunConfig, out: Outputs) -> dict:
    outdir = Path(cfg.output or ".")
    w_min = cfg.extra.get("w_min", W_MIN)
    min_support = cfg.extra.get("min_support", MIN_SUPPORT)
    summaries = []
    rows = []
    for path in cfg.extra["samples"]:
        sample = SampleSet.read_jsonl(path)
        g = sample.structure
        meta = metadata(cfg, g)
        meta["sample"] = {k: v for k, v in sample.header().items() if k != "config"}
        meta["w_min"] = w_min
        meta["min_support"] = min_support
        stem = Path(path).name
        stem = stem[: -len(".jsonl")] if stem.endswith(".jsonl") else stem
        summary = {"sample": str(path), "structure": g.name, "k": sample.k, "method": sample.method}
        for orient in ("left", "right"):
            if not sample.items:
                break
            ps = position_stats(sample, orient, g)
            out.write(outdir / f"{stem}_len_{orient}.csv", with_metadata(meta, ps.mean_len_csv()))
            out.write(outdir / f"{stem}_start_{orient}.csv", with_metadata(meta, ps.freq_csv("start")))
            out.write(outdir / f"{stem}_finish_{orient}.csv", with_metadata(meta, ps.freq_csv("finish")))
            if orient == "left":
                try:
                    region = sample_stable_region(ps, w_min, min_support)
                except GarsideError:
                    from .stats import EMPTY
                    region = EMPTY
                rows.append((sample.k, g.n, sample.method, region))
                summary["stable_region"] = [region.start, region.end]
        pds = pd_stats(sample, g)
        out.write(outdir / f"{stem}_pd_hist.csv", with_metadata(meta, pds.hist_csv()))
        out.write(outdir / f"{stem}_pd_atoms.csv", with_metadata(meta, pds.per_atom_csv()))
        summary["pd"] = pds.to_json()
        summaries.append(summary)
    out.write(outdir / "stable_region.csv", with_metadata(metadata(cfg), stable_region_csv(rows)))
    return {"samples": summaries}


def _growth_one(args):
    kind, n, max_states, max_terms = args
    g = build_structure(kind, n)
    return check_criterion(g, max_states=max_states, max_terms=max_terms).to_json()


def cmd_growth(cfg: RunConfig, out: Outputs) -> dict:
    targets = cfg.extra.get("targets") or [(cfg.structure, cfg.n)]
    max_states = cfg.extra.get("max_states", MAX_STATES)
    for kind, n in targets:
        g = build_structure(kind, n)
        if g.complete and g.size > cfg.max_table_simples:
            raise CapacityError(f"{g.name} has {g.size} simples, above max-table-simples={cfg.max_table_simples}")
    jobs = [(kind, n, max_states, cfg.max_series_terms) for kind, n in targets]
    if cfg.threads > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            reports = list(pool.map(_growth_one, jobs))
    else:
        reports = [_growth_one(j) for j in jobs]
    meta = metadata(cfg)
    doc = reports[0] if len(reports) == 1 else {"reports": reports}
    doc = {"meta": meta, **doc}
    text = json.dumps(doc, indent=2) + "\n"
    if cfg.output in (None, "-"):
        sys.stdout.write(text)
    else:
        out.write(cfg.output, text)
    scatter = cfg.extra.get("scatter")
    if scatter:
        rows = ["structure,alpha,beta"] + [f"{r['structure']},{r['alpha']:.6g},{r['beta']:.6g}" for r in reports]
        out.write(scatter, with_metadata(meta, "\n".join(rows) + "\n"))
    return {"structures": [r["structure"] for r in reports]}


def loglog_slope(ks: Sequence[int], times: Sequence[float]) -> float | None:
    """Least-squares slope of log(time) against log(k); None for fewer than 2 points."""
    if len(ks) < 2:
        return None
    return float(np.polyfit(np.log(ks), np.log(times), 1)[0])


def run_bench(g, ks: Sequence[int], count: int, seed: int, baseline_max_k: int) -> dict:
    """Time both algorithms on the same Word_k inputs; returns rows and slopes."""
    rows = []
    means: dict[str, dict[int, float]] = {"linear": {}, "baseline": {}}
    for k in ks:
        words = [sample_word(g, k, item_rng(seed, i)) for i in range(count)]
        for algo, fn in (("linear", normal_form_linear), ("baseline", normal_form_baseline)):
            if algo == "baseline" and k > baseline_max_k:
                continue
            fn(words[0])  # warm the caches
            samples = []
            for w in words:
                t0 = time.perf_counter_ns()
                fn(w)
                samples.append(time.perf_counter_ns() - t0)
            mean = statistics.fmean(samples)
            sd = statistics.stdev(samples) if len(samples) > 1 else 0.0
            rows.append((k, algo, mean, sd))
            means[algo][k] = mean
    lin_k = sorted(means["linear"])
    common = sorted(set(means["linear"]) & set(means["baseline"]))
    slopes = {
        "linear": loglog_slope(lin_k, [means["linear"][k] for k in lin_k]),
        "linear_common": loglog_slope(common, [means["linear"][k] for k in common]),
        "baseline_common": loglog_slope(common, [means["baseline"][k] for k in common]),
        "common_grid": common,
    }
    return {"rows": rows, "slopes": slopes}


def bench_csv(rows) -> str:
    lines = ["k,algo,mean_ns,stddev_ns"]
    lines += [f"{k},{algo},{mean:.6g},{sd:.6g}" for k, algo, mean, sd in rows]
    return "\n".join(lines) + "\n"


def cmd_bench(cfg: RunConfig, out: Outputs) -> dict:
    g = _structure(cfg)
    ks = cfg.k_list or DEFAULT_BENCH_K
    res = run_bench(g, ks, cfg.count, cfg.seed, cfg.extra.get("baseline_max_k", DEFAULT_BASELINE_MAX_K))
    meta = metadata(cfg, g)
    meta["slopes"] = res["slopes"]
    text = with_metadata(meta, bench_csv(res["rows"]))
    if cfg.output in (None, "-"):
        sys.stdout.write(text)
    else:
        out.write(cfg.output, text)
    return {"slopes": res["slopes"]}


def cmd_validate(cfg: RunConfig, out: Outputs) -> dict:
    g = _structure(cfg)
    report = validate_structure(g)
    doc = {"meta": metadata(cfg, g), **report.to_json()}
    text = json.dumps(doc, indent=2) + "\n"
    if cfg.output in (None, "-"):
        sys.stdout.write(text)
    else:
        out.write(cfg.output, text)
    report.raise_for_failure()
    return {"ok": report.ok}


COMMANDS = {"sample": cmd_sample, "stats": cmd_stats, "growth": cmd_growth,
            "bench": cmd_bench, "validate": cmd_validate}


# -- argument parsing ---------------------------------------------------------

def _k_list(text: str) -> list[int]:
    try:
        ks = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None
    if not ks or any(k < 0 for k in ks):
        raise argparse.ArgumentTypeError("k list must hold non-negative integers")
    return ks


def _targets(text: str) -> list[tuple[str, int | None]]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        kind, _, n = item.partition(":")
        out.append((kind, int(n) if n else None))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="garside-nf", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, structure=True):
        if structure:
            sp.add_argument("--structure", default="classical",
                            help="classical, bkl, g1, or a path to a structure JSON file")
            sp.add_argument("--n", type=int, help="number of strands")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: available CPUs)")
        sp.add_argument("--max-table-simples", type=int, default=DEFAULT_MAX_TABLE_SIMPLES)
        sp.add_argument("--max-series-terms", type=int, default=DEFAULT_MAX_SERIES_TERMS)
        sp.add_argument("-o", "--output", help="output file (directory for stats); '-' is stdout")

    sp = sub.add_parser("sample", help="draw a sample of normal forms")
    common(sp)
    sp.add_argument("--k", type=int, required=True, help="weighted length")
    sp.add_argument("--count", type=int, default=DEFAULT_COUNT)
    sp.add_argument("--method", choices=("word", "urb"), default="urb")

    sp = sub.add_parser("stats", help="per-position, stable-region and pd statistics")
    common(sp, structure=False)
    sp.add_argument("samples", nargs="+", help="JSON-lines sample files")
    sp.add_argument("--w-min", type=int, default=W_MIN)
    sp.add_argument("--min-support", type=float, default=MIN_SUPPORT)

    sp = sub.add_parser("growth", help="generating functions and growth rates")
    common(sp)
    sp.add_argument("--targets", type=_targets,
                    help="comma list like classical:4,bkl:5,g1 (overrides --structure/--n)")
    sp.add_argument("--scatter", help="CSV of (structure, alpha, beta) pairs")
    sp.add_argument("--max-states", type=int, default=MAX_STATES)

    sp = sub.add_parser("bench", help="time the normal form algorithms")
    common(sp)
    sp.add_argument("--k-list", type=_k_list, help=f"default {','.join(map(str, DEFAULT_BENCH_K))}")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--baseline-max-k", type=int, default=DEFAULT_BASELINE_MAX_K)

    sp = sub.add_parser("validate", help="check the Garside axioms of a structure")
    common(sp)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = vars(ns).copy()
    cfg = RunConfig(subcommand=d.pop("subcommand"))
    for f in ("structure", "n", "k", "k_list", "count", "seed", "method", "output",
              "max_table_simples", "max_series_terms"):
        if f in d:
            setattr(cfg, f, d.pop(f))
    threads = d.pop("threads", None)
    cfg.threads = threads if threads else default_workers()
    cfg.extra = {k: v for k, v in d.items() if v is not None}
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.seed is not None and cfg.seed < 0:
        raise UsageError("--seed must be non-negative")
    if cfg.threads < 1:
        raise UsageError("--threads must be positive")
    if cfg.k is not None and cfg.k < 0:
        raise UsageError("--k must be non-negative")
    if cfg.count is not None and cfg.count < (1 if cfg.subcommand == "bench" else 0):
        raise UsageError("--count is too small")
    if cfg.max_table_simples < 1 or cfg.max_series_terms < 1:
        raise UsageError("capacity flags must be positive")
    if cfg.structure is not None and cfg.structure.lower() in ("classical", "bkl") and cfg.n is None \
            and "targets" not in cfg.extra:
        raise UsageError(f"--structure {cfg.structure} needs --n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    out = Outputs()
    try:
        ns = parser.parse_args(argv)
        cfg = config_from_args(ns)
        summary = COMMANDS[cfg.subcommand](cfg, out)
        out.commit()
    except SystemExit as e:  # argparse
        out.discard()
        return int(e.code or 0)
    except GarsideError as e:
        out.discard()
        _error(e.kind, str(e))
        return 1
    except (OSError, ValueError) as e:
        out.discard()
        _error("io" if isinstance(e, OSError) else "usage", str(e))
        return 1
    if cfg.output not in (None, "-") or cfg.subcommand == "stats":
        print(json.dumps(summary, sort_keys=True, default=_jsonable), file=sys.stderr)
    return 0


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return str(v)


def _error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
