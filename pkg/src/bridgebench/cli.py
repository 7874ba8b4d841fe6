"""Command-line interface.

Subcommands: preprocess, run, compare, score-only. Exit codes: 0 on
success, 1 for configuration errors, 2 when a run completed but some
images failed, 3 for fatal errors.
"""

from __future__ import annotations

import sys
import traceback
from pathlib import Path

import click

from .config import ConfigError, RunConfig
from .harness import RunError, run, run_preprocess_only
from .imageprep import PreprocessConfig
from .report import compare, score_texts_to_csv
from .rubric import Lexicon

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_FATAL = 3


class PartialFailure(Exception):
    """Run completed but some images failed."""


@click.group()
def cli():
    """Benchmark harness for quantized vision-language damage assessment."""


@cli.command("preprocess")
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("output_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--nlm-strength", default=5.0, show_default=True)
@click.option("--max-dimension", default=1024, show_default=True)
@click.option("--clahe-clip-limit", default=2.0, show_default=True)
def preprocess_cmd(input_dir: Path, output_dir: Path, nlm_strength: float,
                   max_dimension: int, clahe_clip_limit: float):
    """Denoise, resize, and equalize a corpus; write PNGs to OUTPUT_DIR."""
    cfg = PreprocessConfig(
        nlm_strength=nlm_strength,
        max_dimension=max_dimension,
        clahe_clip_limit=clahe_clip_limit,
    )
    ok, failed = run_preprocess_only(input_dir, output_dir, cfg)
    click.echo(f"preprocessed {ok} image(s), {failed} failed")
    if failed:
        raise PartialFailure


@cli.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--run-dir", type=click.Path(file_okay=False, path_type=Path),
              help="Run directory (defaults to <output_dir>/run); reuse to resume.")
def run_cmd(config_path: Path, run_dir: Path | None):
    """Execute (or resume) the full pipeline described by a config file."""
    config = RunConfig.load(config_path)
    result = run(config, run_dir=run_dir)
    click.echo(
        f"run complete: {result.success_count} ok, "
        f"{result.failure_count} failed -> {result.run_dir}"
    )
    if result.had_failures:
        raise PartialFailure


@cli.command("compare")
@click.argument("run_dirs", nargs=-1, required=True,
                type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--output-dir", "-o", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@click.option("--alpha", default=0.05, show_default=True)
def compare_cmd(run_dirs: tuple[Path, ...], output_dir: Path, alpha: float):
    """Compare completed runs; emit CSV, JSON, Markdown, and SVG charts."""
    report = compare(list(run_dirs), output_dir, alpha=alpha)
    click.echo(
        f"compared {len(report.summaries)} endpoint(s); "
        f"artifacts in {output_dir}"
    )


@cli.command("score-only")
@click.argument("texts_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--output", "-o", required=True,
              type=click.Path(dir_okay=False, path_type=Path))
@click.option("--lexicon", "lexicon_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
def score_only_cmd(texts_file: Path, output: Path, lexicon_path: Path | None):
    """Rubric-score a file of description texts (plain lines or .jsonl)."""
    lexicon = Lexicon.from_file(lexicon_path) if lexicon_path else Lexicon.default()
    rows = score_texts_to_csv(texts_file, output, lexicon)
    click.echo(f"scored {rows} text(s) -> {output}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except PartialFailure:
        return EXIT_PARTIAL
    except (ConfigError, click.UsageError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (RunError, Exception) as exc:  # noqa: BLE001
        if isinstance(exc, KeyboardInterrupt):
            raise
        click.echo(f"fatal: {exc}", err=True)
        traceback.print_exc()
        return EXIT_FATAL
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
