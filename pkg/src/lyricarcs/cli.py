"""Command-line pipeline: ingest -> extract -> cluster -> analyze -> report.

Every stage writes deterministic artifacts into the output directory; a
fixed config and seed reproduce byte-identical CSV/JSON/SVG outputs. Exit
codes: 0 success, 1 validation error, 2 runtime/convergence error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (CorpusError, compute_rates, corpus_descriptives,
                     load_corpus, load_wordlist, oov_rate)
from .lexicon import LexiconError, load_lexicon, load_shifters
from .trajectory import (MIN_TRAJECTORY_TOKENS, TrajectoryError,
                         dct_standardize, extract_sparse, tokenize)
from .clustering import ClusteringError, aggregate_shapes, kmeans, select_k
from .stats import (ContingencyTable2x2, StatsError, build_design,
                    chi_square_2x2, coefficient_table, dispersion_check,
                    nb_regression, response_from_rates)
from .plots import shape_svg

LEXICON_CI_COLORS = {"standard": "#cc3333", "slang": "#3355cc"}


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    """Runtime/convergence failure (exit code 2)."""


@dataclass
class RunConfig:
    corpus: str = ""
    corpus_format: str = "jsonl"
    standard_lexicon: str = ""  # empty -> bundled mini lexicon
    slang_lexicon: str = ""
    shifters: str = ""  # empty -> bundled default shifter list
    wordlist: str = ""  # optional; enables the OOV report
    window: int = 3
    low_pass: int = 5
    out_len: int = 100
    k: int = 0  # 0 -> use select_k recommendation over [k_min, k_max]
    k_min: int = 1
    k_max: int = 8
    seed: int = 42
    restarts: int = 25
    response_mode: str = "rounded"  # rounded | offset
    out_dir: str = "out"
    strict: bool = False

    def validate(self):
        if not self.corpus:
            raise ConfigError("corpus path is required")
        if not Path(self.corpus).is_file():
            raise ConfigError(f"corpus file not found: {self.corpus}")
        if self.response_mode not in ("rounded", "offset"):
            raise ConfigError(f"bad response_mode {self.response_mode!r}")
        for name in ("standard_lexicon", "slang_lexicon", "shifters", "wordlist"):
            p = getattr(self, name)
            if p and not Path(p).is_file():
                raise ConfigError(f"{name} file not found: {p}")


def _bundled(name: str) -> str:
    return str(resources.files("lyricarcs.data") / name)


def load_config(path) -> dict:
    """Flat key=value config file; '#' starts a comment."""
    values = {}
    valid = {f.name for f in fields(RunConfig)}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in valid:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_run_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        for key, value in load_config(args.config).items():
            current = getattr(cfg, key)
            if isinstance(current, bool):
                value = value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(value)
            setattr(cfg, key, value)
    # CLI flags win over config-file values
    for key in ("corpus", "corpus_format", "standard_lexicon", "slang_lexicon",
                "shifters", "wordlist", "window", "low_pass", "out_len", "k",
                "k_min", "k_max", "seed", "restarts", "response_mode"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if args.strict:
        cfg.strict = True
    cfg.validate()
    return cfg


def _header_line(lexicon: str, seed: int) -> str:
    return f"# lexicon={lexicon} seed={seed} version={__version__}"


def _load_lexicons(cfg: RunConfig):
    standard = load_lexicon(cfg.standard_lexicon or _bundled("mini_standard.tsv"),
                            name="standard")
    slang = load_lexicon(cfg.slang_lexicon or _bundled("mini_slang.tsv"),
                         name="slang")
    shifters = load_shifters(cfg.shifters or None)
    return standard, slang, shifters


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


# ---------------------------------------------------------------- stages

def cmd_ingest(cfg: RunConfig) -> list:
    """Validate the corpus and write descriptive statistics."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = load_corpus(cfg.corpus, format=cfg.corpus_format, strict=cfg.strict)
    if not result.records:
        raise CorpusError("corpus contains zero valid records")
    stats = corpus_descriptives(result.records)
    payload = {
        "lexicon": "all",
        "seed": cfg.seed,
        "version": __version__,
        "n_records": stats.n,
        "n_skipped": len(result.skipped),
        "variables": {
            name: {"mean": v.mean, "sd": v.sd,
                   "ci99_low": v.ci99_low, "ci99_high": v.ci99_high}
            for name, v in stats.variables.items()
        },
    }
    if cfg.wordlist:
        words = load_wordlist(cfg.wordlist)
        rates = [oov_rate(tokenize(r.raw_text).tokens, words) for r in result.records]
        payload["oov_rate_mean"] = float(np.mean(rates))
    _write_json(out / "corpus_descriptives.json", payload)
    return [out / "corpus_descriptives.json"]


def _extract_trajectories(cfg: RunConfig):
    """Shared by extract/cluster/analyze: records -> per-lexicon trajectories."""
    result = load_corpus(cfg.corpus, format=cfg.corpus_format, strict=cfg.strict)
    if not result.records:
        raise CorpusError("corpus contains zero valid records")
    standard, slang, shifters = _load_lexicons(cfg)
    skipped = [(s.record_id, f"load: {s.reason}") for s in result.skipped]
    trajectories = {"standard": [], "slang": []}
    kept_records = []
    for rec in sorted(result.records, key=lambda r: r.id):
        try:
            stream = tokenize(rec.raw_text, source_id=rec.id)
        except TrajectoryError as exc:
            skipped.append((rec.id, f"tokenize: {exc}"))
            continue
        if len(stream) < max(MIN_TRAJECTORY_TOKENS, cfg.low_pass):
            skipped.append((rec.id, f"too short: {len(stream)} tokens"))
            continue
        for lex in (standard, slang):
            sparse = extract_sparse(stream, lex, shifters, window=cfg.window)
            traj = dct_standardize(sparse, out_len=cfg.out_len, low_pass=cfg.low_pass,
                                   lexicon_name=lex.name, source_id=rec.id)
            trajectories[lex.name].append(traj)
        kept_records.append(rec)
    return kept_records, trajectories, skipped


def cmd_extract(cfg: RunConfig) -> list:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, trajectories, skipped = _extract_trajectories(cfg)
    artifacts = []
    for lex_name, trajs in trajectories.items():
        if not trajs:
            raise CorpusError(f"zero valid records produced trajectories ({lex_name})")
        path = out / f"trajectories_{lex_name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_header_line(lex_name, cfg.seed) + "\n")
            writer = csv.writer(fh)
            writer.writerow(["id", "lexicon"] +
                            [f"bin_{i}" for i in range(1, cfg.out_len + 1)])
            for t in trajs:
                writer.writerow([t.source_id, t.lexicon_name] +
                                [repr(float(b)) for b in t.bins])
        artifacts.append(path)
    skip_path = out / "skipped.csv"
    with open(skip_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header_line("all", cfg.seed) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["id", "reason"])
        for rid, reason in skipped:
            writer.writerow([rid, reason])
    artifacts.append(skip_path)
    return artifacts


def _read_trajectories(path: Path):
    ids, rows = [], []
    with open(path, encoding="utf-8") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    n_bins = len(header) - 2
    for row in reader:
        ids.append(row[0])
        rows.append([float(v) for v in row[2:2 + n_bins]])
    return ids, np.asarray(rows)


def cmd_cluster(cfg: RunConfig) -> list:
    out = Path(cfg.out_dir)
    artifacts = []
    for lex_name in ("standard", "slang"):
        traj_path = out / f"trajectories_{lex_name}.csv"
        if not traj_path.is_file():
            raise ConfigError(f"missing trajectories (run extract first): {traj_path}")
        ids, data = _read_trajectories(traj_path)

        diag = None
        if cfg.k:
            k = cfg.k
        else:
            k_max = min(cfg.k_max, len(data) - 1)
            diag = select_k(data, k_min=cfg.k_min, k_max=k_max, seed=cfg.seed,
                            restarts=cfg.restarts)
            if diag.recommended_k is None:
                raise ClusteringError("select_k produced no recommendation")
            k = diag.recommended_k
        if k > len(data):
            raise ClusteringError(f"k={k} exceeds {len(data)} trajectories")
        model = kmeans(data, k, seed=cfg.seed, restarts=cfg.restarts)

        diag_path = out / f"diagnostics_{lex_name}.csv"
        with open(diag_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_header_line(lex_name, cfg.seed) + "\n")
            writer = csv.writer(fh)
            writer.writerow(["k", "wss", "silhouette", "recommended"])
            if diag is not None:
                for kk in sorted(diag.wss_by_k):
                    sil = diag.silhouette_by_k.get(kk)
                    writer.writerow([kk, repr(diag.wss_by_k[kk]),
                                     "" if sil is None else repr(sil),
                                     int(kk == diag.recommended_k)])
            else:
                writer.writerow([k, repr(model.inertia), "", 1])
        artifacts.append(diag_path)

        assign_path = out / f"assignments_{lex_name}.csv"
        with open(assign_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_header_line(lex_name, cfg.seed) + "\n")
            writer = csv.writer(fh)
            writer.writerow(["id", "lexicon", "cluster"])
            for rid, cid in zip(ids, model.assignments):
                writer.writerow([rid, lex_name, int(cid)])
        artifacts.append(assign_path)

        shapes_path = out / f"shapes_{lex_name}.csv"
        mean_shapes = aggregate_shapes(data, model.assignments, stat="mean")
        median_shapes = aggregate_shapes(data, model.assignments, stat="median")
        with open(shapes_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_header_line(lex_name, cfg.seed) + "\n")
            writer = csv.writer(fh)
            writer.writerow(["cluster", "stat", "bin", "center",
                             "ci_low", "ci_high", "sd_low", "sd_high"])
            for shape in mean_shapes + median_shapes:
                for i in range(len(shape.center)):
                    writer.writerow([
                        shape.cluster_id, shape.stat, i + 1,
                        repr(float(shape.center[i])),
                        "" if shape.ci99_low is None else repr(float(shape.ci99_low[i])),
                        "" if shape.ci99_high is None else repr(float(shape.ci99_high[i])),
                        repr(float(shape.sd_low[i])),
                        repr(float(shape.sd_high[i])),
                    ])
        artifacts.append(shapes_path)

        for shape in mean_shapes:
            svg_path = out / f"shape_{lex_name}_cluster{shape.cluster_id}.svg"
            svg_path.write_text(
                shape_svg(shape, lex_name, cfg.seed, __version__,
                          ci_color=LEXICON_CI_COLORS[lex_name]),
                encoding="utf-8")
            artifacts.append(svg_path)
    return artifacts


def _read_assignments(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    reader = csv.DictReader(lines)
    return {row["id"]: int(row["cluster"]) for row in reader}


def cmd_analyze(cfg: RunConfig) -> list:
    out = Path(cfg.out_dir)
    std_assign = _read_assignments(out / f"assignments_standard.csv")
    slg_assign = _read_assignments(out / f"assignments_slang.csv")
    result = load_corpus(cfg.corpus, format=cfg.corpus_format, strict=cfg.strict)
    records = {r.id: r for r in result.records}

    ids = sorted(set(std_assign) & set(slg_assign))
    usable = [i for i in ids if records.get(i) and records[i].metadata is not None]
    if not usable:
        raise CorpusError("no records with metadata and assignments for both lexicons")

    report = {"lexicon": "both", "seed": cfg.seed, "version": __version__,
              "n": len(usable), "response_mode": cfg.response_mode}

    # cross-cluster 2x2 (requires two clusters per lexicon)
    std_levels = sorted({std_assign[i] for i in ids})
    slg_levels = sorted({slg_assign[i] for i in ids})
    if len(std_levels) == 2 and len(slg_levels) == 2:
        counts = {(s, g): 0 for s in std_levels for g in slg_levels}
        for i in ids:
            counts[(std_assign[i], slg_assign[i])] += 1
        table = ContingencyTable2x2(
            a=counts[(std_levels[0], slg_levels[0])],
            b=counts[(std_levels[0], slg_levels[1])],
            c=counts[(std_levels[1], slg_levels[0])],
            d=counts[(std_levels[1], slg_levels[1])],
        )
        chi = chi_square_2x2(table, yates=True)
        report["cross_cluster"] = {
            "table": [[table.a, table.b], [table.c, table.d]],
            "rows": [f"standard_{s}" for s in std_levels],
            "cols": [f"slang_{g}" for g in slg_levels],
            "chi_square": {"statistic": chi.statistic, "df": chi.df,
                           "p": chi.p_value, "yates": chi.yates_applied},
        }
    else:
        report["cross_cluster"] = {
            "note": "chi-square skipped: need exactly 2 clusters per lexicon",
        }

    # design: indicators are 1 for the non-reference cluster; the reference
    # is the last (most negative) cluster index under the relabeling rule
    ref_std, ref_slg = std_levels[-1], slg_levels[-1]
    design = build_design([std_assign[i] for i in usable],
                          [slg_assign[i] for i in usable],
                          reference_standard=ref_std, reference_slang=ref_slg)
    report["design"] = {"columns": list(design.column_names),
                        "reference_standard": ref_std, "reference_slang": ref_slg}

    rates = {i: compute_rates(records[i].metadata) for i in usable}
    report["models"] = {}
    unconverged = []
    for which in ("views", "engagement"):
        if cfg.response_mode == "rounded":
            y = [response_from_rates(rates[i], which) for i in usable]
            offset = None
        else:
            y = [records[i].metadata.views if which == "views"
                 else (records[i].metadata.likes + records[i].metadata.dislikes
                       + records[i].metadata.comments)
                 for i in usable]
            offset = [math.log(records[i].metadata.days_active / 100.0) for i in usable]
        dispersion = dispersion_check(y)
        fit = nb_regression(np.asarray(y, dtype=float), design, offset=offset)
        if not fit.converged:
            unconverged.append(which)
        report["models"][which] = {
            "dispersion_ratio": dispersion,
            "theta": fit.theta,
            "log_likelihood": fit.log_likelihood,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "coefficients": coefficient_table(fit),
        }

    _write_json(out / "stats_report.json", report)
    (out / "stats_report.txt").write_text(_render_stats_text(report), encoding="utf-8")
    if unconverged:
        raise PipelineError(f"NB regression did not converge for: {unconverged}")
    return [out / "stats_report.json", out / "stats_report.txt"]


def _render_stats_text(report: dict) -> str:
    lines = [f"Stats report (seed={report['seed']}, version={report['version']}, "
             f"n={report['n']}, response_mode={report['response_mode']})", ""]
    cc = report["cross_cluster"]
    lines.append("Cross-cluster distribution")
    if "table" in cc:
        header = f"{'':>14}" + "".join(f"{c:>14}" for c in cc["cols"]) + f"{'TOTAL':>10}"
        lines.append(header)
        for rname, row in zip(cc["rows"], cc["table"]):
            lines.append(f"{rname:>14}" + "".join(f"{v:>14}" for v in row)
                         + f"{sum(row):>10}")
        chi = cc["chi_square"]
        lines.append(f"chi-square({chi['df']}) = {chi['statistic']:.2f}, "
                     f"p = {chi['p']:.3f} (yates={chi['yates']})")
    else:
        lines.append(cc["note"])
    for which, m in report["models"].items():
        lines.append("")
        lines.append(f"Negative binomial model: {which} "
                     f"(dispersion ratio {m['dispersion_ratio']:.2f}, "
                     f"theta {m['theta']:.3f}, converged={m['converged']})")
        lines.append(f"{'term':>18}{'estimate':>12}{'SE':>10}{'z':>9}"
                     f"{'p':>9}{'exp(b)':>10}{'1/exp(b)':>10}")
        for row in m["coefficients"]:
            lines.append(f"{row['name']:>18}{row['estimate']:>12.3f}"
                         f"{row['std_error']:>10.3f}{row['z']:>9.2f}"
                         f"{row['p']:>9.3f}{row['rate_ratio']:>10.3f}"
                         f"{row['inverse_rate_ratio']:>10.3f}")
    lines.append("")
    lines.append("Coefficients are on the log scale (not anti-logged); "
                 "exp(b) and 1/exp(b) give the rate ratios in both directions.")
    return "\n".join(lines) + "\n"


MANIFEST_ARTIFACTS = (
    "corpus_descriptives.json",
    "trajectories_standard.csv", "trajectories_slang.csv", "skipped.csv",
    "diagnostics_standard.csv", "diagnostics_slang.csv",
    "assignments_standard.csv", "assignments_slang.csv",
    "shapes_standard.csv", "shapes_slang.csv",
    "stats_report.json", "stats_report.txt",
)


def cmd_report(cfg: RunConfig) -> list:
    out = Path(cfg.out_dir)
    inputs = {"corpus": Path(cfg.corpus)}
    inputs["standard_lexicon"] = Path(cfg.standard_lexicon or _bundled("mini_standard.tsv"))
    inputs["slang_lexicon"] = Path(cfg.slang_lexicon or _bundled("mini_slang.tsv"))
    inputs["shifters"] = Path(cfg.shifters or _bundled("shifters.tsv"))

    artifact_paths = [out / name for name in MANIFEST_ARTIFACTS]
    artifact_paths += sorted(out.glob("shape_*_cluster*.svg"))
    missing = [str(p) for p in artifact_paths if not p.is_file()]
    if missing:
        raise ConfigError(f"missing upstream artifacts (run prior stages): {missing}")

    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config": {f.name: getattr(cfg, f.name) for f in fields(RunConfig)},
        "inputs": {name: _sha256(p) for name, p in inputs.items()},
        "artifacts": {p.name: _sha256(p) for p in artifact_paths},
    }
    _write_json(out / "manifest.json", manifest)

    descriptives = json.loads((out / "corpus_descriptives.json").read_text())
    stats_text = (out / "stats_report.txt").read_text(encoding="utf-8")
    lines = [f"lyricarcs run summary (seed={cfg.seed}, version={__version__})", "",
             f"Corpus: {cfg.corpus} ({descriptives['n_records']} records, "
             f"{descriptives['n_skipped']} skipped at load)", "",
             "Corpus descriptives: mean (SD) [99% CI of mean]"]
    for name, v in descriptives["variables"].items():
        lines.append(f"  {name:>18}: {v['mean']:.2f} ({v['sd']:.2f}) "
                     f"[{v['ci99_low']:.2f}; {v['ci99_high']:.2f}]")
    if "oov_rate_mean" in descriptives:
        lines.append(f"  {'oov_rate':>18}: {descriptives['oov_rate_mean']:.4f}")
    lines.append("")
    lines.append("Cluster shares")
    for lex_name in ("standard", "slang"):
        assign = _read_assignments(out / f"assignments_{lex_name}.csv")
        total = len(assign)
        counts = {}
        for cid in assign.values():
            counts[cid] = counts.get(cid, 0) + 1
        shares = ", ".join(f"cluster {cid}: {counts[cid]} ({counts[cid] / total:.0%})"
                           for cid in sorted(counts))
        lines.append(f"  {lex_name}: {shares}")
    lines.append("")
    lines.append(stats_text)
    (out / "summary.txt").write_text("\n".join(lines), encoding="utf-8")
    return [out / "manifest.json", out / "summary.txt"]


# ------------------------------------------------------------------ main

def _add_common(parser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out-dir", dest="out_dir", default=None)
    parser.add_argument("--strict", action="store_true",
                        help="treat malformed corpus rows as fatal")
    parser.add_argument("--corpus", default=None)
    parser.add_argument("--corpus-format", dest="corpus_format", default=None,
                        choices=["jsonl", "csv"])
    parser.add_argument("--standard-lexicon", dest="standard_lexicon", default=None)
    parser.add_argument("--slang-lexicon", dest="slang_lexicon", default=None)
    parser.add_argument("--shifters", default=None)
    parser.add_argument("--wordlist", default=None)
    parser.add_argument("--window", type=int, default=None)
    parser.add_argument("--low-pass", dest="low_pass", type=int, default=None)
    parser.add_argument("--out-len", dest="out_len", type=int, default=None)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--k-min", dest="k_min", type=int, default=None)
    parser.add_argument("--k-max", dest="k_max", type=int, default=None)
    parser.add_argument("--restarts", type=int, default=None)
    parser.add_argument("--response-mode", dest="response_mode", default=None,
                        choices=["rounded", "offset"])


STAGES = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "cluster": cmd_cluster,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lyricarcs",
        description="Sentiment trajectory analytics pipeline for lyric corpora",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        _add_common(sub.add_parser(name))
    run_all = sub.add_parser("run", help="run all stages in order")
    _add_common(run_all)

    args = parser.parse_args(argv)
    try:
        cfg = build_run_config(args)
    except (ConfigError, CorpusError, LexiconError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    stages = list(STAGES) if args.command == "run" else [args.command]
    timings = {}
    try:
        for name in stages:
            t0 = time.perf_counter()
            artifacts = STAGES[name](cfg)
            timings[name] = time.perf_counter() - t0
            for p in artifacts:
                print(p)
    except (ConfigError, CorpusError, LexiconError, StatsError, ClusteringError,
            TrajectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2

    # timings vary between runs, so they live outside the manifest
    _write_json(Path(cfg.out_dir) / "timings.json",
                {k: round(v, 4) for k, v in timings.items()})
    return 0


if __name__ == "__main__":
    sys.exit(main())
