"""Service endpoints: corpus validation/stats, synthetic generation,
experiment runs, and result analysis.

The service is stateless; every endpoint reads its inputs from disk paths in
the request and writes artifacts where asked, so responses carry paths plus
summaries rather than bulk payloads.
"""

from __future__ import annotations

import dataclasses

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..corpus import Corpus, CorpusError, corpus_stats, load_corpus, save_corpus
from ..runner import (
    RunnerError,
    analyze_results,
    execute_run,
    load_run_config,
    run_config_from_dict,
)
from ..stats import AnalysisError
from ..synthetic import generate_synthetic, synthetic_vocabulary, write_random_embeddings
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    CorpusRequest,
    CorpusStatsModel,
    HealthResponse,
    JobFailureModel,
    RunRequest,
    RunResponse,
    SyntheticRequest,
    SyntheticResponse,
    ValidateResponse,
)


def _stats_model(corpus: Corpus) -> CorpusStatsModel:
    return CorpusStatsModel(name=corpus.name, **dataclasses.asdict(corpus_stats(corpus)))


def create_app() -> FastAPI:
    app = FastAPI(title="claimbench", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/corpora/validate", response_model=ValidateResponse)
    def validate(request: CorpusRequest) -> ValidateResponse:
        try:
            corpus = load_corpus(request.path, name=request.name)
        except CorpusError as err:
            return ValidateResponse(ok=False, name=request.name, diagnostics=[str(err)])
        return ValidateResponse(ok=True, name=corpus.name, stats=_stats_model(corpus))

    @app.post("/corpora/stats", response_model=CorpusStatsModel)
    def stats(request: CorpusRequest) -> CorpusStatsModel:
        try:
            corpus = load_corpus(request.path, name=request.name)
        except CorpusError as err:
            raise HTTPException(status_code=400, detail=str(err))
        return _stats_model(corpus)

    @app.post("/synthetic", response_model=SyntheticResponse)
    def synthetic(request: SyntheticRequest) -> SyntheticResponse:
        try:
            corpus = generate_synthetic(
                seed=request.seed,
                n_docs=request.n_docs,
                claim_ratio=request.claim_ratio,
                vocab_size=request.vocab_size,
                name=request.name,
            )
        except CorpusError as err:
            raise HTTPException(status_code=400, detail=str(err))
        save_corpus(corpus, request.out_path)
        if request.embeddings_out:
            write_random_embeddings(
                request.embeddings_out,
                synthetic_vocabulary(request.vocab_size),
                dim=request.embedding_dim,
                seed=request.seed,
            )
        return SyntheticResponse(
            out_path=request.out_path,
            embeddings_out=request.embeddings_out,
            stats=_stats_model(corpus),
        )

    @app.post("/experiments/run", response_model=RunResponse)
    def run(request: RunRequest) -> RunResponse:
        if (request.config_path is None) == (request.config is None):
            raise HTTPException(status_code=400, detail="provide exactly one of config_path or config")
        try:
            if request.config_path is not None:
                config = load_run_config(request.config_path)
            else:
                config = run_config_from_dict(request.config)
            if request.seed is not None:
                config = dataclasses.replace(config, seed=request.seed)
            result = execute_run(config, request.out_dir, jobs=request.jobs)
        except (RunnerError, CorpusError) as err:
            raise HTTPException(status_code=400, detail=str(err))
        return RunResponse(
            out_dir=result.out_dir,
            results_csv=result.results_csv,
            tables=result.table_paths,
            manifest=result.manifest_path,
            jobs_total=result.jobs_total,
            jobs_failed=result.jobs_failed,
            failures=[JobFailureModel(**f) for f in result.failures],
        )

    @app.post("/analysis", response_model=AnalyzeResponse)
    def analyze(request: AnalyzeRequest) -> AnalyzeResponse:
        if (request.config_path is None) == (request.corpora is None):
            raise HTTPException(status_code=400, detail="provide exactly one of config_path or corpora")
        try:
            corpora = request.corpora
            if corpora is None:
                corpora = load_run_config(request.config_path).corpora
            result = analyze_results(
                request.results_csv,
                corpora,
                request.out_dir,
                systems=request.systems,
                pairing=request.pairing,
                alpha=request.alpha,
                top_k=request.top_k,
                emit_markdown=request.emit_markdown,
            )
        except (AnalysisError, RunnerError, CorpusError, FileNotFoundError) as err:
            raise HTTPException(status_code=400, detail=str(err))
        return AnalyzeResponse(
            similarity_csv=result.similarity_csv,
            regression_csv=result.regression_csv,
            significance_csv=result.significance_csv,
            markdown=result.markdown_paths,
        )

    return app


app = create_app()
