"""Command-line client for the claimbench service.

Every command is a thin HTTP client over the service endpoints. By default
the service app is mounted in-process, so no daemon is needed; pass
``--server URL`` (or set ``CLAIMBENCH_SERVER``) to target a running
instance, e.g. one started with ``claimbench serve``.
"""

from __future__ import annotations

import sys

import click
import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # The in-process transport lives in a test-client module; its
        # import-time deprecation chatter is noise for CLI users.
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _post(ctx: click.Context, endpoint: str, payload: dict) -> dict:
    client: httpx.Client = ctx.obj["client"]
    try:
        response = client.post(endpoint, json=payload)
    except httpx.HTTPError as err:
        click.echo(f"error: cannot reach service: {err}", err=True)
        ctx.exit(2)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        click.echo(f"error: {detail}", err=True)
        ctx.exit(1)
    return response.json()


def _stats_row(stats: dict) -> str:
    return (
        f"{stats['name']}: docs={stats['n_docs']} tokens={stats['n_tokens']} "
        f"sentences={stats['n_sentences']} claims={stats['n_claims']} "
        f"({100.0 * stats['claim_ratio']:.2f}%)"
    )


@click.group()
@click.option("--server", envvar="CLAIMBENCH_SERVER", default=None, help="Service URL; in-process when omitted.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Claim identification benchmark: corpora, experiments, analysis."""
    ctx.ensure_object(dict)
    ctx.obj["client"] = _client(server)


@main.command()
@click.argument("corpus", type=click.Path())
@click.option("--name", default=None, help="Corpus name; defaults to the file stem.")
@click.pass_context
def validate(ctx: click.Context, corpus: str, name: str | None) -> None:
    """Validate a JSON-lines corpus file and print its statistics."""
    result = _post(ctx, "/corpora/validate", {"path": corpus, "name": name})
    if not result["ok"]:
        for diagnostic in result["diagnostics"]:
            click.echo(f"invalid: {diagnostic}", err=True)
        ctx.exit(1)
    click.echo(_stats_row(result["stats"]))


@main.command()
@click.argument("corpus", type=click.Path())
@click.option("--name", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "md"]), default="csv")
@click.pass_context
def stats(ctx: click.Context, corpus: str, name: str | None, fmt: str) -> None:
    """Print dataset statistics for a corpus file."""
    result = _post(ctx, "/corpora/stats", {"path": corpus, "name": name})
    if fmt == "md":
        click.echo("| Corpus | Docs | Tokens | Sentences | Claims |")
        click.echo("| --- | --- | --- | --- | --- |")
        click.echo(
            f"| {result['name']} | {result['n_docs']} | {result['n_tokens']} "
            f"| {result['n_sentences']} | {result['n_claims']} ({100.0 * result['claim_ratio']:.2f}%) |"
        )
    else:
        click.echo("name,n_docs,n_tokens,n_sentences,n_claims,claim_ratio")
        click.echo(
            f"{result['name']},{result['n_docs']},{result['n_tokens']},"
            f"{result['n_sentences']},{result['n_claims']},{result['claim_ratio']}"
        )


@main.command()
@click.argument("config", type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Output directory for results and tables.")
@click.option("--jobs", default=1, show_default=True, help="Worker pool size; never affects outputs.")
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--format", "fmt", type=click.Choice(["csv", "md"]), default="md",
              help="'csv' for the results CSV only, 'md' to also keep markdown tables.")
@click.pass_context
def run(ctx: click.Context, config: str, out: str, jobs: int, seed: int | None, fmt: str) -> None:
    """Run all protocol x system combinations from a JSON run config."""
    result = _post(ctx, "/experiments/run", {"config_path": config, "out_dir": out, "jobs": jobs, "seed": seed})
    click.echo(f"results: {result['results_csv']}")
    if fmt == "md":
        for table in result["tables"]:
            click.echo(f"table:   {table}")
    click.echo(f"manifest: {result['manifest']}")
    if result["jobs_failed"]:
        click.echo(f"{result['jobs_failed']}/{result['jobs_total']} jobs failed:", err=True)
        for failure in result["failures"]:
            click.echo(f"  {failure['job']}: {failure['error']}", err=True)
        ctx.exit(1)
    click.echo(f"{result['jobs_total']} jobs completed")


@main.command()
@click.argument("results", type=click.Path())
@click.argument("config", type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--systems", default=None, help="Comma-separated systems to analyze (default: all in the CSV).")
@click.option("--pairing", type=click.Choice(["per_dataset", "per_fold"]), default="per_dataset", show_default=True)
@click.option("--alpha", default=0.05, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "md"]), default="md")
@click.pass_context
def analyze(ctx: click.Context, results: str, config: str, out: str, systems: str | None,
            pairing: str, alpha: float, fmt: str) -> None:
    """Similarity matrix, determinant regression, and significance tests."""
    payload = {
        "results_csv": results,
        "config_path": config,
        "out_dir": out,
        "systems": systems.split(",") if systems else None,
        "pairing": pairing,
        "alpha": alpha,
        "emit_markdown": fmt == "md",
    }
    result = _post(ctx, "/analysis", payload)
    click.echo(f"similarity:   {result['similarity_csv']}")
    click.echo(f"regression:   {result['regression_csv']}")
    click.echo(f"significance: {result['significance_csv']}")
    for path in result["markdown"]:
        click.echo(f"markdown:     {path}")


@main.command("gen-synthetic")
@click.option("--out", required=True, type=click.Path(), help="Corpus output path (JSON lines).")
@click.option("--seed", default=1, show_default=True)
@click.option("--n-docs", default=100, show_default=True)
@click.option("--claim-ratio", default=0.25, show_default=True)
@click.option("--vocab-size", default=200, show_default=True)
@click.option("--name", default="SYN", show_default=True)
@click.option("--embeddings-out", default=None, type=click.Path(), help="Also write a matching embedding table.")
@click.option("--embedding-dim", default=50, show_default=True)
@click.pass_context
def gen_synthetic(ctx: click.Context, out: str, seed: int, n_docs: int, claim_ratio: float,
                  vocab_size: int, name: str, embeddings_out: str | None, embedding_dim: int) -> None:
    """Generate a deterministic synthetic corpus with planted claim cues."""
    payload = {
        "out_path": out,
        "seed": seed,
        "n_docs": n_docs,
        "claim_ratio": claim_ratio,
        "vocab_size": vocab_size,
        "name": name,
        "embeddings_out": embeddings_out,
        "embedding_dim": embedding_dim,
    }
    result = _post(ctx, "/synthetic", payload)
    click.echo(f"wrote {result['out_path']}")
    if result.get("embeddings_out"):
        click.echo(f"wrote {result['embeddings_out']}")
    click.echo(_stats_row(result["stats"]))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Start the service with uvicorn."""
    import uvicorn

    uvicorn.run("claimbench.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main(sys.argv[1:])
