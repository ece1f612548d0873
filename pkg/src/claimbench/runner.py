"""Experiment orchestration: declarative configs, job grids, and reports.

A run config names corpora, systems, and protocols; the runner expands the
grid into independent jobs, executes them on a bounded worker pool (results
are merged by deterministic keys, so the worker count never changes any
output), and writes a results CSV, markdown tables derived from that CSV,
and a manifest sufficient to reproduce the run bit-for-bit. Individual job
failures are recorded and do not abort the rest of the grid.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .corpus import Corpus, DatasetStats, corpus_stats, load_corpus, make_cv_splits, save_split_plan
from .evaluation import (
    PROTOCOLS,
    SYSTEMS,
    ExperimentSpec,
    ProtocolResult,
    ScoreReport,
    is_learner_system,
    make_spec,
    run_cross_domain,
    run_in_domain,
    run_lodo,
)
from .features import EmbeddingTable, FeatureCutoffs, FeatureGroup, load_embeddings
from .learner import TrainConfig
from .stats import (
    AnalysisError,
    SimilarityMatrix,
    build_regression_input,
    compare_systems,
    ols,
    similarity_matrix,
)
from .util import derive_seed, fingerprint

RESULTS_COLUMNS = (
    "protocol",
    "system",
    "source",
    "target",
    "fold",
    "macro_f1",
    "claim_f1",
    "tp",
    "fp",
    "fn",
    "tn",
    "seed",
    "config_hash",
)


class RunnerError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    corpora: dict[str, str]
    systems: tuple[str, ...]
    protocols: tuple[str, ...]
    embeddings: str | None = None
    seed: int = 13
    folds: int = 10
    ensemble_size: int = 20
    l2_lambda: float = 1.0
    standardize: bool = True
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-6
    keyword: str = "should"
    cutoffs: FeatureCutoffs = field(default_factory=FeatureCutoffs)

    def to_dict(self) -> dict:
        return {
            "corpora": dict(sorted(self.corpora.items())),
            "systems": list(self.systems),
            "protocols": list(self.protocols),
            "embeddings": self.embeddings,
            "seed": self.seed,
            "folds": self.folds,
            "ensemble_size": self.ensemble_size,
            "l2_lambda": self.l2_lambda,
            "standardize": self.standardize,
            "max_iterations": self.max_iterations,
            "gradient_tolerance": self.gradient_tolerance,
            "keyword": self.keyword,
            "cutoffs": self.cutoffs.to_dict(),
        }

    def hash(self) -> str:
        return fingerprint(self.to_dict())

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            l2_lambda=self.l2_lambda,
            max_iterations=self.max_iterations,
            gradient_tolerance=self.gradient_tolerance,
            seed=seed,
            standardize=self.standardize,
        )


def run_config_from_dict(obj: dict, base_dir: Path | None = None) -> RunConfig:
    def resolve(p: str | None) -> str | None:
        if p is None:
            return None
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return str(path)

    if not isinstance(obj.get("corpora"), dict) or not obj["corpora"]:
        raise RunnerError("config must map at least one corpus name to a file path")
    systems = tuple(obj.get("systems", ["MAJORITY", "RANDOM"]))
    for system in systems:
        if system not in SYSTEMS:
            raise RunnerError(f"unknown system {system!r}; expected one of {SYSTEMS}")
    protocols = tuple(obj.get("protocols", ["IN_DOMAIN"]))
    for protocol in protocols:
        if protocol not in PROTOCOLS:
            raise RunnerError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    cutoffs = FeatureCutoffs.from_dict(obj["cutoffs"]) if "cutoffs" in obj else FeatureCutoffs()
    return RunConfig(
        corpora={name: resolve(path) for name, path in obj["corpora"].items()},
        systems=systems,
        protocols=protocols,
        embeddings=resolve(obj.get("embeddings")),
        seed=int(obj.get("seed", 13)),
        folds=int(obj.get("folds", 10)),
        ensemble_size=int(obj.get("ensemble_size", 20)),
        l2_lambda=float(obj.get("l2_lambda", 1.0)),
        standardize=bool(obj.get("standardize", True)),
        max_iterations=int(obj.get("max_iterations", 1000)),
        gradient_tolerance=float(obj.get("gradient_tolerance", 1e-6)),
        keyword=str(obj.get("keyword", "should")),
        cutoffs=cutoffs,
    )


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise RunnerError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise RunnerError(f"config is not valid JSON: {err}") from None
    config = run_config_from_dict(obj, base_dir=path.parent)
    missing = [p for p in config.corpora.values() if not Path(p).exists()]
    if missing:
        raise RunnerError(f"corpus files not found: {missing}")
    if config.embeddings is not None and not Path(config.embeddings).exists():
        raise RunnerError(f"embedding file not found: {config.embeddings}")
    return config


@dataclass(frozen=True)
class Job:
    protocol: str
    system: str
    source: str  # "+"-joined names for LODO
    target: str

    def key(self) -> tuple:
        return (self.protocol, self.system, self.source, self.target)

    def __str__(self) -> str:
        return f"{self.protocol}/{self.system}/{self.source}->{self.target}"


def plan_jobs(config: RunConfig) -> list[Job]:
    names = sorted(config.corpora)
    jobs: list[Job] = []
    for protocol in config.protocols:
        if protocol in ("CROSS_DOMAIN", "LODO") and len(names) < 2:
            raise RunnerError(f"{protocol} requires at least two corpora")
        for system in config.systems:
            if protocol == "IN_DOMAIN":
                jobs.extend(Job(protocol, system, n, n) for n in names)
            elif protocol == "CROSS_DOMAIN":
                jobs.extend(Job(protocol, system, s, t) for s in names for t in names if s != t)
            else:  # LODO
                jobs.extend(
                    Job(protocol, system, "+".join(n for n in names if n != t), t) for t in names
                )
    return jobs


@dataclass
class RunResult:
    out_dir: str
    results_csv: str
    table_paths: list[str]
    manifest_path: str
    jobs_total: int
    jobs_failed: int
    failures: list[dict]


def _report_row(
    job: Job, fold: str, report: ScoreReport, seed: int, config_hash: str
) -> dict:
    cm = report.confusion
    return {
        "protocol": job.protocol,
        "system": job.system,
        "source": job.source,
        "target": job.target,
        "fold": fold,
        "macro_f1": f"{report.macro_f1_pct:.6f}",
        "claim_f1": f"{report.claim_f1_pct:.6f}",
        "tp": cm.tp,
        "fp": cm.fp,
        "fn": cm.fn,
        "tn": cm.tn,
        "seed": seed,
        "config_hash": config_hash,
    }


def _job_rows(
    job: Job,
    config: RunConfig,
    corpora: dict[str, Corpus],
    splits: dict,
    table: EmbeddingTable | None,
    config_hash: str,
) -> list[dict]:
    job_seed = derive_seed(config.seed, job.protocol, job.system, job.source, job.target)
    spec = make_spec(
        job.system,
        train=config.train_config(job_seed),
        cutoffs=config.cutoffs,
        n_members=config.ensemble_size,
        keyword=config.keyword,
        protocol=job.protocol,
        sources=tuple(job.source.split("+")),
        target=job.target,
    )
    job_table = table if (is_learner_system(job.system) and FeatureGroup.EMBEDDING in spec.groups) else None
    if job.protocol == "IN_DOMAIN":
        result: ProtocolResult = run_in_domain(corpora[job.target], spec, splits[job.target], job_table)
        rows = [_report_row(job, "ALL", result.report, job_seed, config_hash)]
        rows += [
            _report_row(job, str(i), rep, job_seed, config_hash) for i, rep in enumerate(result.per_fold)
        ]
        return rows
    if job.protocol == "CROSS_DOMAIN":
        result = run_cross_domain(corpora[job.source], corpora[job.target], spec, job_table)
    else:
        sources = [corpora[name] for name in job.source.split("+")]
        result = run_lodo(sources + [corpora[job.target]], job.target, spec, job_table)
    return [_report_row(job, "ALL", result.report, job_seed, config_hash)]


def _fold_sort_key(fold: str) -> tuple:
    return (0, 0) if fold == "ALL" else (1, int(fold))


def _job_file_stem(job: Job) -> str:
    return f"{job.protocol}__{job.system}__{job.source}__{job.target}".replace("/", "_")


def _sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def execute_run(config: RunConfig, out_dir: str | Path, jobs: int = 1) -> RunResult:
    """Run every protocol x system x corpus combination in the config.

    Jobs execute on a bounded thread pool; each failure is recorded without
    stopping the others. Output rows are sorted by deterministic keys, so
    the CSV is byte-identical across reruns and worker counts.
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    config_hash = config.hash()

    corpora = {name: load_corpus(path, name=name) for name, path in config.corpora.items()}
    table = load_embeddings(config.embeddings) if config.embeddings else None

    needs_folds = "IN_DOMAIN" in config.protocols
    splits = {}
    if needs_folds:
        splits_dir = out_path / "splits"
        splits_dir.mkdir(exist_ok=True)
        for name, corpus in sorted(corpora.items()):
            plan = make_cv_splits(corpus, config.folds, derive_seed(config.seed, "splits", name))
            splits[name] = plan
            save_split_plan(plan, splits_dir / f"{name}.json")

    planned = plan_jobs(config)
    rows: list[dict] = []
    failures: list[dict] = []
    jobs_dir = out_path / "jobs"
    jobs_dir.mkdir(exist_ok=True)

    def run_one(job: Job):
        # Each completed job lands on disk immediately, so a crash mid-grid
        # never loses finished work; the final CSV is merged from these rows.
        job_rows = _job_rows(job, config, corpora, splits, table, config_hash)
        _write_csv(jobs_dir / f"{_job_file_stem(job)}.csv", RESULTS_COLUMNS, job_rows)
        return job_rows

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for job, outcome in zip(planned, pool.map(lambda j: _capture(run_one, j), planned)):
            if isinstance(outcome, Exception):
                failures.append({"job": str(job), "error": f"{type(outcome).__name__}: {outcome}"})
            else:
                rows.extend(outcome)

    rows.sort(key=lambda r: (r["protocol"], r["system"], r["source"], r["target"], _fold_sort_key(r["fold"])))
    results_csv = out_path / "results.csv"
    _write_csv(results_csv, RESULTS_COLUMNS, rows)

    table_paths = [str(p) for p in write_markdown_tables(results_csv, out_path)]

    manifest = {
        "config": config.to_dict(),
        "config_hash": config_hash,
        "package_version": __version__,
        "python_version": sys.version.split()[0],
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "corpus_sha256": {name: _sha256_file(path) for name, path in sorted(config.corpora.items())},
        "embeddings_sha256": _sha256_file(config.embeddings) if config.embeddings else None,
        "split_seeds": {name: splits[name].seed for name in sorted(splits)} if splits else {},
        "results_sha256": _sha256_file(results_csv),
        "failures": failures,
    }
    manifest_path = out_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    if failures:
        (out_path / "failures.json").write_text(json.dumps(failures, indent=2) + "\n", encoding="utf-8")

    return RunResult(
        out_dir=str(out_path),
        results_csv=str(results_csv),
        table_paths=table_paths,
        manifest_path=str(manifest_path),
        jobs_total=len(planned),
        jobs_failed=len(failures),
        failures=failures,
    )


def _capture(fn, job):
    try:
        return fn(job)
    except Exception as err:  # job-level fault isolation
        return err


def _write_csv(path: Path, columns, rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_results_csv(path: str | Path) -> list[dict]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# Markdown tables (derived views of the results CSV)
# ---------------------------------------------------------------------------


def _fmt_cell(macro: float, claim: float, bold_macro: bool, bold_claim: bool) -> str:
    m = f"**{macro:.1f}**" if bold_macro else f"{macro:.1f}"
    c = f"**{claim:.1f}**" if bold_claim else f"{claim:.1f}"
    return f"{m} / {c}"


def _score_grid_markdown(title: str, row_label: str, rows: list[str], cols: list[str], cells: dict) -> str:
    """Grid of 'macro / claim' cells with per-column best values bolded."""
    best_macro = {c: max(cells[(r, c)][0] for r in rows if (r, c) in cells) for c in cols}
    best_claim = {c: max(cells[(r, c)][1] for r in rows if (r, c) in cells) for c in cols}
    lines = [f"## {title}", "", "| " + row_label + " | " + " | ".join(cols) + " |"]
    lines.append("|" + " --- |" * (len(cols) + 1))
    for r in rows:
        parts = [r]
        for c in cols:
            if (r, c) not in cells:
                parts.append("--")
                continue
            macro, claim = cells[(r, c)]
            parts.append(
                _fmt_cell(
                    macro,
                    claim,
                    abs(macro - best_macro[c]) < 1e-9,
                    abs(claim - best_claim[c]) < 1e-9,
                )
            )
        lines.append("| " + " | ".join(parts) + " |")
    lines.append("")
    lines.append("Cells are Macro-F1 / Claim-F1 in percent; best value per column in bold.")
    lines.append("")
    return "\n".join(lines)


def write_markdown_tables(results_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """Render the results CSV into per-protocol markdown tables."""
    rows = read_results_csv(results_csv)
    out_path = Path(out_dir)
    written = []

    def grid(selected, row_key, col_key):
        cells = {}
        for r in selected:
            cells[(row_key(r), col_key(r))] = (float(r["macro_f1"]), float(r["claim_f1"]))
        row_names = sorted({row_key(r) for r in selected})
        col_names = sorted({col_key(r) for r in selected})
        return row_names, col_names, cells

    in_domain = [r for r in rows if r["protocol"] == "IN_DOMAIN" and r["fold"] == "ALL"]
    if in_domain:
        row_names, col_names, cells = grid(in_domain, lambda r: r["system"], lambda r: r["target"])
        text = _score_grid_markdown("In-domain (pooled cross-validation)", "System", row_names, col_names, cells)
        path = out_path / "in_domain.md"
        path.write_text(text, encoding="utf-8")
        written.append(path)

    cross = [r for r in rows if r["protocol"] == "CROSS_DOMAIN" and r["fold"] == "ALL"]
    if cross:
        sections = []
        for system in sorted({r["system"] for r in cross}):
            selected = [r for r in cross if r["system"] == system]
            row_names, col_names, cells = grid(selected, lambda r: r["source"], lambda r: r["target"])
            sections.append(_score_grid_markdown(f"Cross-domain: {system}", "Source", row_names, col_names, cells))
        path = out_path / "cross_domain.md"
        path.write_text("\n".join(sections), encoding="utf-8")
        written.append(path)

    lodo = [r for r in rows if r["protocol"] == "LODO" and r["fold"] == "ALL"]
    if lodo:
        row_names, col_names, cells = grid(lodo, lambda r: r["system"], lambda r: r["target"])
        text = _score_grid_markdown("Leave-one-domain-out", "System", row_names, col_names, cells)
        path = out_path / "lodo.md"
        path.write_text(text, encoding="utf-8")
        written.append(path)

    return written


# ---------------------------------------------------------------------------
# Analysis pipeline: similarity, regression, significance
# ---------------------------------------------------------------------------


@dataclass
class AnalyzeResult:
    similarity_csv: str
    regression_csv: str
    significance_csv: str
    markdown_paths: list[str]


def _similarity_csv_rows(sim: SimilarityMatrix) -> list[dict]:
    rows = []
    for s in sim.names:
        row = {"source": s}
        for t in sim.names:
            row[t] = f"{sim.get(s, t):.10f}"
        rows.append(row)
    return rows


def similarity_markdown(sim: SimilarityMatrix) -> str:
    lines = ["## Source-to-target lemma similarity (Spearman, %)", ""]
    lines.append("| Source \\ Target | " + " | ".join(sim.names) + " |")
    lines.append("|" + " --- |" * (len(sim.names) + 1))
    for s in sim.names:
        cells = [str(int(round(100.0 * sim.get(s, t)))) for t in sim.names]
        lines.append("| " + s + " | " + " | ".join(cells) + " |")
    lines.append("")
    return "\n".join(lines)


def analyze_results(
    results_csv: str | Path,
    corpora_paths: dict[str, str],
    out_dir: str | Path,
    systems: list[str] | None = None,
    pairing: str = "per_dataset",
    alpha: float = 0.05,
    top_k: int = 500,
    emit_markdown: bool = True,
) -> AnalyzeResult:
    """Similarity matrix, per-system determinant regression, and pairwise tests.

    Each analyzed system must cover the full cross-domain grid over the given
    corpora; missing cells are an error. Significance tests pair systems on
    matched (protocol, source, target) scores (``per_dataset``) or per-fold
    in-domain scores (``per_fold``).
    """
    if pairing not in ("per_dataset", "per_fold"):
        raise AnalysisError(f"unknown pairing {pairing!r}; expected per_dataset or per_fold")
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)

    corpora = {name: load_corpus(path, name=name) for name, path in corpora_paths.items()}
    stats_by_corpus: dict[str, DatasetStats] = {name: corpus_stats(c) for name, c in corpora.items()}
    sim = similarity_matrix(list(corpora.values()), top_k=top_k)

    similarity_csv = out_path / "similarity.csv"
    _write_csv(similarity_csv, ("source", *sim.names), _similarity_csv_rows(sim))

    rows = read_results_csv(results_csv)
    cross = [r for r in rows if r["protocol"] == "CROSS_DOMAIN" and r["fold"] == "ALL"]
    available = sorted({r["system"] for r in cross})
    analyzed = systems if systems is not None else available
    if not analyzed:
        raise AnalysisError("no cross-domain results to analyze")

    regression_rows = []
    for system in analyzed:
        cells = {
            (r["source"], r["target"]): float(r["macro_f1"])
            for r in cross
            if r["system"] == system
        }
        data = build_regression_input(cells, sim, stats_by_corpus)
        fit = ols(data)
        for i, term in enumerate(fit.columns):
            regression_rows.append(
                {
                    "system": system,
                    "term": term,
                    "coefficient": f"{fit.coefficients[i]:.10f}",
                    "std_error": f"{fit.std_errors[i]:.10f}",
                    "t_stat": f"{fit.t_stats[i]:.10f}",
                    "p_value": f"{fit.p_values[i]:.10f}",
                    "r_squared": f"{fit.r_squared:.10f}",
                    "df_resid": fit.df_resid,
                }
            )
    regression_csv = out_path / "regression.csv"
    _write_csv(
        regression_csv,
        ("system", "term", "coefficient", "std_error", "t_stat", "p_value", "r_squared", "df_resid"),
        regression_rows,
    )

    def pairing_scores(system: str) -> dict:
        if pairing == "per_dataset":
            selected = [r for r in rows if r["system"] == system and r["fold"] == "ALL"]
            return {(r["protocol"], r["source"], r["target"]): float(r["macro_f1"]) for r in selected}
        selected = [r for r in rows if r["system"] == system and r["protocol"] == "IN_DOMAIN" and r["fold"] != "ALL"]
        return {(r["source"], r["target"], r["fold"]): float(r["macro_f1"]) for r in selected}

    significance_rows = []
    comparable = systems if systems is not None else sorted({r["system"] for r in rows})
    for i, sys_a in enumerate(comparable):
        for sys_b in comparable[i + 1 :]:
            scores_a = pairing_scores(sys_a)
            scores_b = pairing_scores(sys_b)
            common = set(scores_a) & set(scores_b)
            if not common:
                continue
            comparison = compare_systems(
                {k: scores_a[k] for k in common}, {k: scores_b[k] for k in common}, alpha=alpha
            )
            wx = comparison.wilcoxon
            significance_rows.append(
                {
                    "system_a": sys_a,
                    "system_b": sys_b,
                    "pairing": pairing,
                    "n_pairs": len(common),
                    "n_effective": wx.n_effective,
                    "w_plus": f"{wx.w_plus:.4f}",
                    "w_minus": f"{wx.w_minus:.4f}",
                    "p_value": f"{wx.p_value:.10f}",
                    "method": wx.method,
                    "significant": str(comparison.significant).lower(),
                }
            )
    significance_csv = out_path / "significance.csv"
    _write_csv(
        significance_csv,
        ("system_a", "system_b", "pairing", "n_pairs", "n_effective", "w_plus", "w_minus", "p_value", "method", "significant"),
        significance_rows,
    )

    markdown_paths = []
    if emit_markdown:
        sim_md = out_path / "similarity.md"
        sim_md.write_text(similarity_markdown(sim), encoding="utf-8")
        markdown_paths.append(str(sim_md))

    return AnalyzeResult(
        similarity_csv=str(similarity_csv),
        regression_csv=str(regression_csv),
        significance_csv=str(significance_csv),
        markdown_paths=markdown_paths,
    )
