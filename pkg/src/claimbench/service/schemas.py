"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class CorpusStatsModel(BaseModel):
    name: str
    n_docs: int
    n_tokens: int
    n_sentences: int
    n_claims: int
    claim_ratio: float


class CorpusRequest(BaseModel):
    path: str
    name: Optional[str] = None


class ValidateResponse(BaseModel):
    ok: bool
    name: Optional[str] = None
    stats: Optional[CorpusStatsModel] = None
    diagnostics: list[str] = Field(default_factory=list)


class SyntheticRequest(BaseModel):
    out_path: str
    seed: int = 1
    n_docs: int = 100
    claim_ratio: float = 0.25
    vocab_size: int = 200
    name: str = "SYN"
    embeddings_out: Optional[str] = None
    embedding_dim: int = 50


class SyntheticResponse(BaseModel):
    out_path: str
    embeddings_out: Optional[str] = None
    stats: CorpusStatsModel


class RunRequest(BaseModel):
    config_path: Optional[str] = None
    config: Optional[dict] = None
    out_dir: str
    jobs: int = 1
    seed: Optional[int] = None  # overrides the config seed


class JobFailureModel(BaseModel):
    job: str
    error: str


class RunResponse(BaseModel):
    out_dir: str
    results_csv: str
    tables: list[str]
    manifest: str
    jobs_total: int
    jobs_failed: int
    failures: list[JobFailureModel] = Field(default_factory=list)


class AnalyzeRequest(BaseModel):
    results_csv: str
    out_dir: str
    corpora: Optional[dict[str, str]] = None
    config_path: Optional[str] = None  # corpora taken from this run config
    systems: Optional[list[str]] = None
    pairing: Literal["per_dataset", "per_fold"] = "per_dataset"
    alpha: float = 0.05
    top_k: int = 500
    emit_markdown: bool = True


class AnalyzeResponse(BaseModel):
    similarity_csv: str
    regression_csv: str
    significance_csv: str
    markdown: list[str] = Field(default_factory=list)
