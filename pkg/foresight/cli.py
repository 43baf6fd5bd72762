import sys
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from pathlib import Path
from typing import Annotated, Optional

import click
import typer
from anystore.cli import ErrorHandler as BaseErrorHandler
from anystore.io import smart_open, smart_stream_json
from anystore.logging import configure_logging, get_logger
from anystore.util import Took
from pydantic import ValidationError
from rich import print
from rich.console import Console
from rich.table import Table

from foresight.calibration import SplitSpec, fit, predict, split
from foresight.core import Runtime
from foresight.estimate.consistency import OutcomeSet, renormalize
from foresight.exceptions import ForesightError, PreconditionError
from foresight.model import CalibratedValue, EstimateResult, Topic, make_slug
from foresight.news.store import TrendStore
from foresight.scoring import (
    ScoredSet,
    ScoreRow,
    brier,
    calibration_bins,
    emit_report,
    method_scores,
    topic_breakdown,
)
from foresight.scoring.report import guesses_chart, read_scores
from foresight.settings import Settings, __version__, load_settings
from foresight.util import canonical_json, ensure_date

settings = Settings()

cli = typer.Typer(no_args_is_help=True, pretty_exceptions_enable=settings.testing)
log = get_logger(__name__)
console = Console(stderr=True)

OPT_INPUT_URI = typer.Option("-", "-i", help="Input uri, default stdin")
OPT_AS_OF = Annotated[
    Optional[str], typer.Option("--as-of", help="Date (YYYY-MM-DD), default today")
]


class ErrorHandler(BaseErrorHandler):
    """Map engine errors onto exit codes: 1 usage, 2 gateway, 3 parse,
    4 storage, 5 insufficient data. Anything else is left to anystore."""

    def __init__(self, logger=None) -> None:
        super().__init__(logger)
        self.log = logger or log

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, click.exceptions.Exit):
            return False
        if isinstance(exc, ForesightError):
            where = f" in stage `{exc.stage}`" if exc.stage else ""
            console.print(f"[red]{type(exc).__name__}{where}:[/red] {exc.message}")
            self.log.error(
                "Command failed",
                error=type(exc).__name__,
                stage=exc.stage,
                exit_code=exc.exit_code,
            )
            raise typer.Exit(exc.exit_code)
        if isinstance(exc, ValidationError):
            console.print(f"[red]Invalid input:[/red] {exc}")
            raise typer.Exit(1)
        return super().__exit__(exc_type, exc, tb)


def _runtime(ctx: typer.Context) -> Runtime:
    return ctx.obj


def _as_of(value: str | None) -> date:
    return ensure_date(value) or date.today()


@cli.callback(invoke_without_command=True)
def cli_foresight(
    ctx: typer.Context,
    config: Annotated[
        Optional[Path],
        typer.Option(envvar="FORESIGHT_CONFIG", help="Key-value config file"),
    ] = None,
    ledger: Annotated[Optional[Path], typer.Option(help="Ledger path")] = None,
    mock: Annotated[
        Optional[Path], typer.Option(help="Use fixtures from this directory")
    ] = None,
    record: Annotated[
        Optional[Path], typer.Option(help="Record completions as fixtures here")
    ] = None,
    version: Annotated[Optional[bool], typer.Option(..., help="Show version")] = False,
    settings: Annotated[
        Optional[bool], typer.Option(..., help="Show current settings")
    ] = False,
):
    if version:
        print(__version__)
        raise typer.Exit()
    with ErrorHandler(log):
        settings_ = load_settings(config, ledger_path=ledger, mock_fixtures_dir=mock)
    if settings:
        print(settings_)
        raise typer.Exit()
    configure_logging()
    ctx.obj = Runtime(settings_, record=record)


@cli.command("generate")
def cli_generate(
    ctx: typer.Context,
    topic: Annotated[str, typer.Option(help="Topic slug, e.g. `automotive`")],
    n: Annotated[int, typer.Option("-n", help="Number of forecasts")] = 1,
    as_of: OPT_AS_OF = None,
):
    """Generate candidate forecasts for a topic"""
    runtime = _runtime(ctx)
    with ErrorHandler(log):
        topic_ = Topic.from_slug(topic, runtime.settings.topics)
        specs = runtime.generator.generate_forecasts(topic_, n, _as_of(as_of))
        for spec in specs:
            if runtime.ledger.has_forecast(spec.id):
                log.warning("Forecast exists, skipping", forecast_id=spec.id)
                continue
            runtime.ledger.append(spec)
            print(spec.id)


@cli.command("estimate")
def cli_estimate(
    ctx: typer.Context,
    forecast_id: Annotated[
        Optional[str], typer.Option("--id", help="Forecast id")
    ] = None,
    all_pending: Annotated[
        bool, typer.Option(help="Estimate all forecasts without an estimate")
    ] = False,
    trace: Annotated[bool, typer.Option(help="Write stage traces")] = False,
    force: Annotated[bool, typer.Option(help="Re-estimate estimated ids")] = False,
    jobs: Annotated[int, typer.Option(help="Parallel estimations")] = 1,
):
    """Estimate probabilities of forecasts"""
    runtime = _runtime(ctx)
    with ErrorHandler(log), Took() as t:
        if forecast_id is None and not all_pending:
            raise PreconditionError("Use `--id <forecast_id>` or `--all-pending`")
        ledger = runtime.ledger
        if forecast_id is not None:
            specs = [ledger.get_forecast(forecast_id)]
            if ledger.latest_estimate(forecast_id) is not None and not force:
                log.warning("Already estimated, use --force", forecast_id=forecast_id)
                specs = []
        else:
            specs = ledger.pending()
        appended = 0
        failure: ForesightError | None = None
        if specs:
            pipeline = runtime.pipeline
            with ThreadPoolExecutor(max_workers=max(jobs, 1)) as executor:
                futures = [executor.submit(pipeline.estimate_traced, s) for s in specs]
                # ledger order, whatever finishes first
                for spec, future in zip(specs, futures):
                    try:
                        result, traces = future.result()
                    except ForesightError as e:
                        log.error(
                            "Estimation failed",
                            forecast_id=spec.id,
                            error=type(e).__name__,
                            stage=e.stage,
                        )
                        failure = failure or e
                        continue
                    ledger.append(result)
                    appended += 1
                    if trace:
                        with smart_open(str(runtime.trace_path), "ab") as fh:
                            for item in traces:
                                fh.write(canonical_json(item) + b"\n")
        log.info(
            "Estimation complete",
            estimated=appended,
            failed=len(specs) - appended,
            took=t.took,
        )
        print(f"{appended} estimated")
        if failure is not None:
            raise failure


@cli.command("reconcile")
def cli_reconcile(ctx: typer.Context):
    """Renormalize estimates of mutually exclusive outcome sets"""
    runtime = _runtime(ctx)
    with ErrorHandler(log):
        ledger = runtime.ledger
        groups: dict[str, list[tuple[str, EstimateResult]]] = defaultdict(list)
        for spec in ledger.forecasts():
            estimate = ledger.latest_estimate(spec.id)
            if estimate is not None and estimate.is_exclusive and estimate.set_label:
                groups[make_slug(estimate.set_label)].append((spec.id, estimate))
        appended = 0
        for key in sorted(groups):
            members = groups[key]
            if len(members) < 2:
                continue
            label = members[0][1].set_label or key
            outcomes = OutcomeSet(
                label=label, members=[(fid, e.p_hat) for fid, e in members]
            )
            for (forecast_id, adjusted), (_, estimate) in zip(
                renormalize(outcomes), members
            ):
                current = ledger.reconciled_p(forecast_id)
                if current is None and adjusted == estimate.p_hat:
                    continue
                if current is not None and abs(current - adjusted) < 1e-12:
                    continue
                ledger.append(
                    CalibratedValue(
                        forecast_id=forecast_id,
                        p=adjusted,
                        method="reconcile",
                        set_label=label,
                    )
                )
                appended += 1
        print(f"{appended} reconciled")


@cli.command("factcheck")
def cli_factcheck(
    ctx: typer.Context,
    as_of: OPT_AS_OF = None,
    screen: Annotated[
        bool, typer.Option(help="Screen for events that had already happened")
    ] = False,
):
    """Fact check forecasts whose window has opened"""
    runtime = _runtime(ctx)
    with ErrorHandler(log):
        as_of_ = _as_of(as_of)
        ledger = runtime.ledger
        screened = checked = invalid = 0
        for spec in ledger.forecasts():
            if screen and not ledger.outcomes(spec.id, "screening"):
                outcome = runtime.checker.screen(spec)
                ledger.append(outcome)
                screened += 1
            if ledger.is_screened_invalid(spec.id):
                invalid += 1
                continue
            if as_of_ < spec.timeframe_start:
                log.debug("Window not open yet", forecast_id=spec.id)
                continue
            if ledger.final_outcome(spec.id) is not None:
                continue
            if any(o.checked_at == as_of_ for o in ledger.outcomes(spec.id)):
                continue
            ledger.append(runtime.checker.check(spec, as_of_))
            checked += 1
        print(f"{screened} screened, {invalid} invalid, {checked} checked")


@cli.command("calibrate")
def cli_calibrate(
    ctx: typer.Context,
    seed: Annotated[int, typer.Option(help="Split seed")] = 0,
    c: Annotated[Optional[float], typer.Option("--C", help="Box constraint")] = None,
    eps: Annotated[Optional[float], typer.Option(help="Tube width")] = None,
    gamma: Annotated[Optional[float], typer.Option(help="RBF bandwidth")] = None,
    as_of: OPT_AS_OF = None,
):
    """Fit the calibration model on screened, fact checked estimates"""
    runtime = _runtime(ctx)
    conf = runtime.settings
    with ErrorHandler(log):
        ledger = runtime.ledger
        rows = ledger.dataset_for_calibration(ensure_date(as_of))
        train, test = split(rows, SplitSpec(seed=seed))
        model = fit(
            train,
            C=c if c is not None else conf.svr_c,
            epsilon=eps if eps is not None else conf.svr_epsilon,
            gamma=gamma if gamma is not None else conf.svr_gamma,
            tol=conf.svr_tol,
            max_passes=conf.svr_max_passes,
            target_neighbours=conf.svr_target_neighbours,
        )
        model.save(conf.model_path)

        table = Table("set", "n", "brier raw", "brier calibrated")
        for label, part in (("train", train), ("test", test)):
            raw = brier(ScoredSet(pairs=[(r.p_hat, r.outcome) for r in part]))
            calibrated = brier(
                ScoredSet(
                    pairs=[(predict(model, r.p_hat, r.u_hat), r.outcome) for r in part]
                )
            )
            table.add_row(label, str(len(part)), f"{raw:.6f}", f"{calibrated:.6f}")
        print(table)

        model_hash = model.model_hash
        parts = {r.forecast_id: "train" for r in train}
        parts.update({r.forecast_id: "test" for r in test})
        appended = 0
        for spec in ledger.forecasts():
            estimate = ledger.latest_estimate(spec.id)
            if estimate is None:
                continue
            if any(
                v.model_hash == model_hash for v in ledger.calibrated(spec.id, "svr")
            ):
                continue
            p_hat = ledger.reconciled_p(spec.id)
            p_hat = estimate.p_hat if p_hat is None else p_hat
            ledger.append(
                CalibratedValue(
                    forecast_id=spec.id,
                    p=predict(model, p_hat, estimate.u_hat),
                    method="svr",
                    model_hash=model_hash,
                    split=parts.get(spec.id),
                )
            )
            appended += 1
        log.info("Calibrated", model_hash=model_hash, appended=appended)
        print(f"model {model_hash} written to {conf.model_path}")


@cli.command("report")
def cli_report(
    ctx: typer.Context,
    out: Annotated[Path, typer.Option(help="Output directory")],
    reference: Annotated[
        Optional[Path], typer.Option(help="Static score rows (method,n,brier) csv")
    ] = None,
    bins: Annotated[Optional[int], typer.Option(help="Calibration bins")] = None,
    as_of: OPT_AS_OF = None,
):
    """Write Brier scores, calibration bins and topic breakdown"""
    runtime = _runtime(ctx)
    with ErrorHandler(log):
        ledger = runtime.ledger
        rows, excluded = ledger.calibration_join(ensure_date(as_of))
        scores: list[ScoreRow] = []
        if reference is not None:
            scores.extend(read_scores(reference))
        if rows:
            svr = [ledger.calibrated(r.forecast_id, "svr") for r in rows]
            # calibrated scores only on forecasts the model was not fitted on
            held_out = [
                (r, values[-1].p)
                for r, values in zip(rows, svr)
                if values and values[-1].split == "test"
            ]
            if all(svr) and held_out:
                scores.extend(
                    method_scores([r for r, _ in held_out], [p for _, p in held_out])
                )
                log.info("Scored on the test split", n=len(held_out))
            else:
                scores.extend(method_scores(rows))
        manifest = emit_report(
            calibration_bins(
                [(r.p_hat, r.u_hat, r.outcome) for r in rows],
                bins or runtime.settings.report_bins,
            ),
            topic_breakdown([(r.topic, r.p_hat, r.outcome) for r in rows]),
            scores,
            out,
        )
        log.info("Excluded from scoring", **excluded)
        print(f"{len(rows)} scored, excluded: " + ", ".join(
            f"{k} {v}" for k, v in excluded.items()
        ))
        for path in manifest:
            print(str(path))


@cli.command("ingest")
def cli_ingest(ctx: typer.Context, input_uri: str = OPT_INPUT_URI):
    """Ingest trend records (json lines) into the trend store"""
    runtime = _runtime(ctx)
    with ErrorHandler(log):
        store = TrendStore(runtime.settings.trends_path)
        added = store.ingest_trends(smart_stream_json(input_uri))
        print(f"{added} ingested, {len(store)} total")


@cli.command("status")
def cli_status(
    ctx: typer.Context,
    forecast_id: Annotated[Optional[str], typer.Option("--id")] = None,
):
    """Show forecasts and their lifecycle status"""
    runtime = _runtime(ctx)
    with ErrorHandler(log):
        ledger = runtime.ledger
        specs = (
            [ledger.get_forecast(forecast_id)] if forecast_id else ledger.forecasts()
        )
        table = Table("id", "topic", "window", "status", "title")
        for spec in specs:
            table.add_row(
                spec.id,
                spec.topic,
                f"{spec.timeframe_start} - {spec.timeframe_end}",
                ledger.lifecycle(spec.id).value,
                spec.title,
            )
        print(table)


@cli.command("plot-estimate")
def cli_plot_estimate(
    ctx: typer.Context,
    forecast_id: Annotated[str, typer.Option("--id")],
    out: Annotated[Path, typer.Option(help="Output svg file")],
):
    """Chart the guesses of the latest estimate of a forecast"""
    runtime = _runtime(ctx)
    with ErrorHandler(log):
        estimate = runtime.ledger.latest_estimate(forecast_id)
        if estimate is None:
            raise PreconditionError(f"Forecast `{forecast_id}` is not estimated")
        out.write_bytes(guesses_chart(estimate))
        print(str(out))


def main() -> None:
    try:
        code = cli(standalone_mode=False)
    except click.exceptions.Abort:
        code = 1
    except click.UsageError as e:
        e.show()
        code = 1
    sys.exit(code or 0)
