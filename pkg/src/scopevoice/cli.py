"""Command-line entry points: serve, replay, lexicon, prompt."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import ServiceConfig, load_config
from .dispatch import standard_registry
from .grammar import build_lexicon
from .prompt import build_initial_prompt, open_example_store, render_json
from .proximity import distance_matrix
from .replay import run_script
from .router import DeterministicBackend, RemoteBackend
from .scene import load_case
from .service import VoiceService, create_app


def _resolve_case(case: str, cases_dir: str) -> Path:
    """Accept a case id under cases_dir or a direct path to a case file."""
    direct = Path(case)
    if direct.is_file():
        return direct
    candidate = Path(cases_dir) / case / "case.json"
    if candidate.is_file():
        return candidate
    raise click.ClickException(f"case '{case}' not found (looked at {direct} and {candidate})")


@click.group()
def main() -> None:
    """Voice-control broker for the surgical AR scene."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML or JSON config file.")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, host, port):
    """Run the HTTP/WebSocket service with the real-time ticker."""
    import uvicorn

    config = load_config(config_path) if config_path else ServiceConfig()
    service = VoiceService(config)
    loaded = service.load_cases_dir()
    click.echo(f"loaded cases: {', '.join(loaded) or '(none)'}")
    console_dir = Path("frontend/dist")
    app = create_app(service, ticker=True,
                     console_dir=console_dir if console_dir.is_dir() else None)
    uvicorn.run(app, host=host or config.host, port=port or config.port)


@main.command()
@click.argument("script", type=click.Path(exists=True))
@click.option("--case", required=True, help="Case id under the cases dir, or a path to case.json.")
@click.option("--mode", type=click.Choice(["grammar", "llm"]), required=True)
@click.option("--backend", type=click.Choice(["deterministic", "remote"]), default="deterministic")
@click.option("--profile", type=click.Choice(["study", "refined"]), default="study")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--cases-dir", default="fixtures")
def replay(script, case, mode, backend, profile, config_path, cases_dir):
    """Replay a scripted session and report expected vs actual visibility."""
    config = load_config(config_path) if config_path else ServiceConfig()
    backend_obj = None
    if mode == "llm":
        if backend == "remote":
            cfg = config.backend
            if not cfg.url:
                raise click.ClickException("remote backend requires a config file with backend.url")
            backend_obj = RemoteBackend(url=cfg.url, model=cfg.model,
                                        temperature=cfg.temperature, timeout_s=cfg.timeout_s)
        else:
            backend_obj = DeterministicBackend()
    report = run_script(script, _resolve_case(case, cases_dir), mode,
                        backend=backend_obj, profile=profile, data_dir=config.data_dir)
    click.echo(report.render())
    sys.exit(0 if report.passed else 1)


@main.command()
@click.option("--case", required=True)
@click.option("--cases-dir", default="fixtures")
def lexicon(case, cases_dir):
    """Dump the keyword lexicon generated for a case."""
    loaded = load_case(_resolve_case(case, cases_dir))
    lex = build_lexicon(loaded)
    width = max(len(e.phrase) for e in lex.entries)
    for entry in lex.entries:
        onoff = "on/off" if entry.binding.allows_onoff else "-"
        click.echo(f"{entry.phrase:<{width}}  {entry.binding.kind.value:<8}"
                   f" {entry.binding.target:<22} {onoff}")
    click.echo(f"{len(lex.entries)} phrases")


@main.command()
@click.option("--case", required=True)
@click.option("--cases-dir", default="fixtures")
@click.option("--corrections-dir", default=None,
              help="Directory with <case_id>.jsonl correction logs to fold in.")
def prompt(case, cases_dir, corrections_dir):
    """Print the rendered initial prompt for a case."""
    loaded = load_case(_resolve_case(case, cases_dir))
    registry = standard_registry(loaded)
    matrix = distance_matrix(loaded)
    store = open_example_store(loaded.case_id, corrections_dir)
    doc = build_initial_prompt(loaded, matrix, registry, store)
    click.echo(render_json(doc), nl=False)


if __name__ == "__main__":
    main()
