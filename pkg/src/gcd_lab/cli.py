"""Command-line interface for gcd-lab."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .chart import SacEngine, count_parse_trees, earley_next_terminals, sac_measure
from .conditioning import Conditioner
from .config import create_default_config, get_config_path, load_config, save_config, write_atomic
from .decoding import DecodeConfig, beam_decode, oracle_invariance_check, sample_many
from .errors import GcdError, GrammarError
from .grammar import Cfg, grammar_size, kappa, print_grammar
from .models import CostComponent, LabConfig, RunManifest, Worklist
from .pda import compile_rtn, npda_to_json
from .perf import (
    ProxyWeights,
    TnnModel,
    envelope,
    fit_trace,
    load_fit,
    proxy,
    read_trace,
    record_run,
    write_trace,
)
from .reachability import build_engine
from .registry import InputRegistry
from .rewrite import enumerate_family, render_grammar, save_selection, select_min
from .selftest import all_passed, run_selftest
from .tokens import EOS_NAME, Vocab, admissible_tokens

app = typer.Typer(help="gcd-lab - grammar-constrained decoding laboratory", no_args_is_help=True)
console = Console()
err_console = Console(stderr=True)

logger = logging.getLogger("gcd_lab")

STDOUT = "-"


@dataclass
class AppState:
    config: LabConfig
    config_path: Path | None
    manifest_path: Path | None


# --------------------------------------------------------------------------- plumbing


def _setup_logging(verbose: bool) -> None:
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    logger.addHandler(RichHandler(console=err_console, show_path=False, markup=False))
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _version_callback(value: bool) -> None:
    if value:
        typer.echo(__version__)
        raise typer.Exit()


def _state(ctx: typer.Context) -> AppState:
    if ctx.obj is None:
        ctx.obj = AppState(create_default_config(), None, None)
    return ctx.obj


def _fail(message: str) -> None:
    err_console.print(message, style="red", markup=False, highlight=False)


@contextmanager
def _session(
    ctx: typer.Context, subcommand: str, seed: int | None = None, fixtures: Path | None = None
) -> Iterator[InputRegistry]:
    """Registry for one run; maps domain errors to exit 1 and always emits the manifest."""
    state = _state(ctx)
    registry = InputRegistry(state.config, fixtures)
    manifest = RunManifest(
        subcommand=subcommand,
        seed=seed,
        version=__version__,
        started_at=datetime.now(timezone.utc),
    )
    try:
        yield registry
    except GcdError as e:
        _fail(str(e))
        raise typer.Exit(1) from e
    finally:
        manifest.inputs = dict(sorted(registry.digests.items()))
        manifest.finished_at = datetime.now(timezone.utc)
        text = manifest.model_dump_json()
        if state.manifest_path is not None:
            write_atomic(state.manifest_path, text + "\n")
        else:
            err_console.print(text, markup=False, highlight=False, soft_wrap=True)


def _emit(path: str, text: str) -> None:
    """Write ``text`` to ``path``; ``-`` means stdout."""
    if path == STDOUT:
        typer.echo(text, nl=False)
    else:
        write_atomic(Path(path), text)


def _out_console(path: str | None) -> Console:
    """Console for human-readable summaries: stderr when stdout carries data."""
    return err_console if path == STDOUT else console


def _parse_word(names: tuple[str, ...], text: str) -> tuple[str, ...]:
    """Split ``text`` into symbol names.

    Whitespace separates names; a single run of characters that are all one-character
    names (``aab``) is split per character. ``eps`` and the empty string denote the
    empty word.
    """
    text = text.strip()
    if text in ("", "eps"):
        return ()
    parts = text.split()
    if len(parts) == 1 and text not in names and all(c in names for c in text):
        return tuple(text)
    return tuple(parts)


def _read_word(g: Cfg, word: str | None, word_file: Path | None) -> tuple[int, ...]:
    if word_file is not None:
        try:
            word = word_file.read_text(encoding="utf-8")
        except OSError as e:
            raise GrammarError(f"cannot read {word_file}: {e}") from e
    return g.encode(_parse_word(g.terminals, word or ""))


def _weights(text: str | None, config: LabConfig) -> ProxyWeights:
    if text:
        return ProxyWeights.parse(text)
    return ProxyWeights(config.perf.default_weights)


def _vocab_for_lm(registry: InputRegistry, lm: str, vocab: str | None, g: Cfg) -> Vocab:
    return registry.vocab(vocab or registry.lm_vocab_ref(lm), g)


# --------------------------------------------------------------------------- root


@app.callback()
def main_callback(
    ctx: typer.Context,
    version: bool = typer.Option(
        False,
        "--version",
        callback=_version_callback,
        is_eager=True,
        help="Print the version and exit",
    ),
    config: Path | None = typer.Option(None, "--config", help="Configuration file"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on stderr"),
    manifest: Path | None = typer.Option(
        None, "--manifest", help="Write the run manifest here instead of stderr"
    ),
) -> None:
    """Grammar-constrained decoding laboratory."""
    _setup_logging(verbose)
    try:
        lab_config = load_config(config)
    except (OSError, ValueError, ValidationError) as e:
        _fail(f"[config] cannot load configuration: {e}")
        raise typer.Exit(1) from e
    ctx.obj = AppState(lab_config, config, manifest)


@app.command("compile")
def compile_cmd(
    ctx: typer.Context,
    grammar: str = typer.Option(..., "--grammar", "-g", help="Grammar file or builtin:NAME"),
    dump_pda: str | None = typer.Option(
        None, "--dump-pda", help="Write the compiled automaton as JSON ('-' for stdout)"
    ),
    print_reduced: bool = typer.Option(
        False, "--print-grammar", help="Print the reduced grammar"
    ),
) -> None:
    """Compile a grammar to its pushdown automaton and report its size."""
    with _session(ctx, "compile") as registry:
        g = registry.grammar(grammar)
        npda = compile_rtn(g)
        if dump_pda is not None:
            _emit(dump_pda, json.dumps(npda_to_json(npda), indent=2) + "\n")
        out = _out_console(dump_pda)
        table = Table(title=f"Grammar {grammar}")
        table.add_column("Property", style="cyan")
        table.add_column("Value", style="green")
        table.add_row("Nonterminals", str(len(g.nonterminals)))
        table.add_row("Terminals", " ".join(g.terminals))
        table.add_row("Productions", str(len(g.productions)))
        table.add_row("Grammar size", str(grammar_size(g)))
        table.add_row("Control states (kappa)", str(kappa(g)))
        table.add_row("Stack symbols", str(len(npda.stack_alphabet)))
        table.add_row("Transitions", str(len(npda.transitions)))
        out.print(table)
        if print_reduced:
            out.print(print_grammar(g), markup=False, highlight=False)


@app.command()
def mask(
    ctx: typer.Context,
    grammar: str = typer.Option(..., "--grammar", "-g"),
    prefix: str = typer.Option("", "--prefix", "-p", help="Terminal prefix, e.g. 'aab'"),
    vocab: str | None = typer.Option(
        None, "--vocab", help="Print admissible tokens of this vocabulary instead"
    ),
    earley: bool = typer.Option(False, "--earley", help="Use the Earley oracle"),
) -> None:
    """Print the terminals (or tokens) that keep a prefix completable, one per line."""
    with _session(ctx, "mask") as registry:
        g = registry.grammar(grammar)
        u = g.encode(_parse_word(g.terminals, prefix))
        if vocab is not None:
            v = registry.vocab(vocab, g)
            engine = build_engine(g, _state(ctx).config.engine.worklist)
            token_mask = admissible_tokens(engine, engine.step_many(engine.init(), u), v)
            for i in token_mask.admissible:
                typer.echo(v.tokens[i].name)
            return
        if earley:
            nxt = earley_next_terminals(g, u)
        else:
            engine = build_engine(g, _state(ctx).config.engine.worklist)
            nxt = engine.next_terminals(engine.step_many(engine.init(), u))
        for a in sorted(nxt.terminals):
            typer.echo(g.terminals[a])
        if nxt.eos:
            typer.echo(EOS_NAME)


@app.command()
def generate(
    ctx: typer.Context,
    grammar: str = typer.Option(..., "--grammar", "-g"),
    lm: str = typer.Option("random:0", "--lm", help="Model file, builtin:NAME or random:SEED"),
    vocab: str | None = typer.Option(None, "--vocab", help="Vocabulary file (default singleton)"),
    seed: int | None = typer.Option(None, "--seed"),
    beam: int | None = typer.Option(None, "--beam", "-b", min=1),
    max_len: int | None = typer.Option(None, "--max-len", min=1),
    count: int = typer.Option(1, "--count", "-n", min=1, help="Samples to draw (beam 1 only)"),
    trace: str | None = typer.Option(None, "--trace", help="JSON Lines step trace"),
) -> None:
    """Sample (beam 1) or beam-search constrained outputs."""
    settings = _state(ctx).config.decode
    cfg = DecodeConfig(
        beam=beam or settings.beam,
        max_len=max_len or settings.max_len,
        seed=settings.seed if seed is None else seed,
    )
    with _session(ctx, "generate", cfg.seed) as registry:
        g = registry.grammar(grammar)
        v = _vocab_for_lm(registry, lm, vocab, g)
        model = registry.lm(lm, v)
        out = _out_console(trace)
        if cfg.beam == 1:
            results = sample_many(model, g, v, cfg, count)
            for r in results:
                line = " ".join(r.realized(v)) or "eps"
                out.print(line if r.terminated else f"{line}\t(unterminated)", markup=False)
            if trace is not None:
                records = (t.to_record(v) for r in results for t in r.traces)
                _emit(trace, "".join(rec.model_dump_json() + "\n" for rec in records))
            return
        result = beam_decode(model, g, v, cfg)
        if trace is not None:
            records = (e.to_record(v) for e in result.expansions)
            _emit(trace, "".join(rec.model_dump_json() + "\n" for rec in records))
        table = Table(title=f"Beam search (B={cfg.beam})")
        table.add_column("Output", style="green")
        table.add_column("Log-prob", style="cyan", justify="right")
        table.add_column("Finished", style="yellow")
        for h in result.hypotheses:
            output = " ".join(v.names[y] for y in h.tokens)
            table.add_row(output, f"{h.logprob:.6f}", str(h.finished))
        out.print(table)
        out.print(f"Engine edges touched: {result.total.engine_edges_touched:,}")


@app.command()
def sac(
    ctx: typer.Context,
    grammar: str = typer.Option(..., "--grammar", "-g"),
    word: str | None = typer.Option(None, "--input", "-i", help="Input string, e.g. 'aaaa'"),
    word_file: Path | None = typer.Option(None, "--input-file", help="File holding the input"),
    engine: SacEngine = typer.Option(SacEngine.CHART, "--engine"),
    out: str = typer.Option(STDOUT, "--csv", help="CSV output ('-' for stdout)"),
) -> None:
    """Per-step structural growth of the packed chart (or the constant-state fast path)."""
    with _session(ctx, "sac") as registry:
        g = registry.grammar(grammar)
        w = _read_word(g, word, word_file)
        series = sac_measure(g, w, engine)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "new_symbol", "new_packed", "cum_packed"])
        for step, cum in zip(series.steps, series.cumulative_packed):
            writer.writerow([step.t, step.new_symbol, step.new_packed, cum])
        _emit(out, buf.getvalue())


@app.command()
def parses(
    ctx: typer.Context,
    grammar: str = typer.Option(..., "--grammar", "-g"),
    word: str | None = typer.Option(None, "--input", "-i"),
    word_file: Path | None = typer.Option(None, "--input-file"),
) -> None:
    """Print the exact number of parse trees of the input."""
    with _session(ctx, "parses") as registry:
        g = registry.grammar(grammar)
        typer.echo(str(count_parse_trees(g, _read_word(g, word, word_file))))


@app.command()
def condition(
    ctx: typer.Context,
    grammar: str = typer.Option(..., "--grammar", "-g"),
    lm: str = typer.Option(..., "--lm", help="Model file, builtin:NAME or random:SEED"),
    vocab: str | None = typer.Option(None, "--vocab"),
    prefix: str = typer.Option("", "--prefix", "-p", help="Token prefix (token names)"),
    horizon: int = typer.Option(6, "--horizon", "-T", min=1, help="Maximum tokens, eos included"),
    report: str = typer.Option(STDOUT, "--report", help="JSON report ('-' for stdout)"),
) -> None:
    """Compare the hard-masked and the exactly conditioned next-token laws at a prefix."""
    settings = _state(ctx).config.conditioning
    with _session(ctx, "condition") as registry:
        g = registry.grammar(grammar)
        v = _vocab_for_lm(registry, lm, vocab, g)
        model = registry.lm(lm, v)
        ys = tuple(v.token_id(n) for n in _parse_word(v.names, prefix))
        conditioner = Conditioner(
            model,
            g,
            v,
            horizon,
            budget=settings.enumeration_budget,
            tolerance=settings.exact_tolerance if model.exact else settings.float_tolerance,
        )
        result = conditioner.distortion(ys)
        _emit(report, json.dumps(result.to_json(), indent=2) + "\n")

        out = _out_console(report)
        table = Table(title=f"Next token after '{' '.join(result.prefix)}'")
        table.add_column("Token", style="cyan")
        table.add_column("Masked", justify="right")
        table.add_column("Conditioned", justify="right")
        for name, q, p in zip(v.names, result.q, result.p_conditioned):
            table.add_row(name, f"{q:.6g}", f"{p:.6g}")
        out.print(table)
        bounds = "vacuous" if result.vacuous else f"{result.kl_bound:.6g}"
        out.print(f"KL {result.kl:.6g} (bound {bounds}), TV {result.tv:.6g}")


@app.command()
def optimize(
    ctx: typer.Context,
    grammar: str = typer.Option(..., "--grammar", "-g"),
    budget: int = typer.Option(2, "--budget", "-k", min=0, help="Maximum rewrites"),
    workload: Path = typer.Option(..., "--workload", help="One terminal string per line"),
    priority: str | None = typer.Option(None, "--priority", help="e.g. sac,kappa,tokenizer"),
    weights: str | None = typer.Option(None, "--weights", help="Proxy weights name=w,..."),
    out: str = typer.Option(STDOUT, "--out", help="Selected grammar ('-' for stdout)"),
    table_path: Path | None = typer.Option(None, "--table", help="CSV cost table"),
) -> None:
    """Select the cheapest grammar reachable by bounded language-preserving rewrites."""
    config = _state(ctx).config
    try:
        order = (
            [CostComponent(p.strip()) for p in priority.split(",")]
            if priority
            else list(config.rewrite.priority)
        )
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--priority") from e
    with _session(ctx, "optimize") as registry:
        g = registry.grammar(grammar)
        strings = registry.workload(workload)
        family = enumerate_family(
            g, budget, member_cap=config.rewrite.member_cap, max_budget=config.rewrite.max_budget
        )
        if family.partial:
            err_console.print(
                f"[yellow]Family truncated at {len(family)} members (member cap)[/yellow]"
            )
        selection = select_min(family, strings, order, weights=_weights(weights, config))
        if out == STDOUT:
            typer.echo(render_grammar(selection), nl=False)
        save_selection(
            selection,
            grammar_path=None if out == STDOUT else Path(out),
            table_path=table_path,
        )
        winner = selection.winner
        _out_console(out).print(
            Panel(
                f"{len(family)} candidates, winner kappa {winner.cost.kappa}, "
                f"mean proxy {winner.cost.sac:.4g}\nRewrites: {winner.member.describe()}",
                title="Selection (measured proxies)",
            )
        )


@app.command()
def bench(
    ctx: typer.Context,
    grammar: str = typer.Option(..., "--grammar", "-g"),
    word: str | None = typer.Option(None, "--input", "-i"),
    word_file: Path | None = typer.Option(None, "--input-file"),
    vocab: str | None = typer.Option(None, "--vocab"),
    engine: SacEngine = typer.Option(SacEngine.CHART, "--engine"),
    bitset: bool = typer.Option(False, "--bitset", help="Use the bitset-scan engine variant"),
    trie: bool = typer.Option(False, "--trie", help="Share mask steps over a token trie"),
    worklist: Worklist | None = typer.Option(None, "--worklist"),
    trace: str = typer.Option(STDOUT, "--trace", help="JSON Lines counter trace"),
) -> None:
    """Instrumented run recording counters and phase times per step."""
    config = _state(ctx).config
    with _session(ctx, "bench") as registry:
        g = registry.grammar(grammar)
        w = _read_word(g, word, word_file)
        run = record_run(
            g,
            w,
            vocab=registry.vocab(vocab, g),
            chart=engine,
            bitset=bitset,
            trie=trie,
            worklist=worklist or config.engine.worklist,
        )
        buf = io.StringIO()
        write_trace((s.to_record() for s in run.steps), buf)
        _emit(trace, buf.getvalue())

        total = run.total
        table = Table(title=f"Counters over {len(run.steps)} steps")
        table.add_column("Counter", style="cyan")
        table.add_column("Total", style="green", justify="right")
        for name, value in total.as_dict().items():
            table.add_row(name, f"{value:,}")
        out = _out_console(trace)
        out.print(table)
        if not run.completed:
            out.print("[yellow]Input left the prefix language; run stopped early[/yellow]")


@app.command()
def fit(
    ctx: typer.Context,
    trace: Path = typer.Option(..., "--trace", help="Counter trace from 'gcd bench'"),
    weights: str | None = typer.Option(None, "--weights", help="Proxy weights name=w,..."),
    out: str = typer.Option(STDOUT, "--out", help="Fit JSON ('-' for stdout)"),
) -> None:
    """Fit mask-phase time against the SAC proxy."""
    config = _state(ctx).config
    with _session(ctx, "fit") as registry:
        records = read_trace(trace)
        registry.record(str(trace), trace.read_bytes())
        result = fit_trace(
            records,
            _weights(weights, config),
            min_samples=config.perf.fit_min_samples,
            min_distinct=config.perf.fit_min_distinct,
        )
        _emit(out, result.model_dump_json(indent=2) + "\n")
        _out_console(out).print(
            f"a={result.a:.6g} b={result.b:.6g} R^2={result.r_squared:.4f} "
            f"max rel err={result.max_relative_error:.4g} ({result.samples} samples)"
        )


@app.command("envelope")
def envelope_cmd(
    ctx: typer.Context,
    fit_path: Path = typer.Option(..., "--fit", help="Fit JSON from 'gcd fit'"),
    grammar: str = typer.Option(..., "--grammar", "-g"),
    word: str | None = typer.Option(None, "--input", "-i"),
    word_file: Path | None = typer.Option(None, "--input-file"),
    vocab: str | None = typer.Option(None, "--vocab"),
    vnn: str = typer.Option("const:1e6", "--vnn", help="Synthetic T_NN: const:C or linear:C,D"),
    beam: int = typer.Option(1, "--beam", "-b", min=1),
    weights: str | None = typer.Option(None, "--weights"),
    out: str = typer.Option(STDOUT, "--csv", help="Per-step CSV ('-' for stdout)"),
) -> None:
    """Predicted critical-path step times for dense and sparse selection."""
    try:
        t_nn = TnnModel.parse(vnn)
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--vnn") from e
    config = _state(ctx).config
    with _session(ctx, "envelope") as registry:
        fit_result = load_fit(fit_path)
        registry.record(str(fit_path), fit_path.read_bytes())
        g = registry.grammar(grammar)
        v = registry.vocab(vocab, g)
        run = record_run(g, _read_word(g, word, word_file), vocab=v)
        env = envelope(
            v.size,
            proxy(run.series, _weights(weights, config)),
            run.admissible,
            beam,
            t_nn,
            fit_result,
            t_sync=config.perf.t_sync_ns,
            select_ns_per_slot=config.perf.select_ns_per_slot,
            mean_terminals_per_token=v.mean_terminals_per_token(),
        )
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["t", "t_nn", "t_mask", "t_sync", "t_sel_dense", "t_sel_sparse", "dense", "sparse"]
            + ["config_nodes", "config_edges"]
        )
        for step, rs in zip(env.steps, run.steps):
            writer.writerow(
                [step.t]
                + [
                    f"{x:.6g}"
                    for x in (
                        step.t_nn,
                        step.t_mask,
                        step.t_sync,
                        step.t_sel_dense,
                        step.t_sel_sparse,
                        step.dense,
                        step.sparse,
                    )
                ]
                + [rs.config_nodes, rs.config_edges]
            )
        _emit(out, buf.getvalue())
        crossover = env.crossover if env.crossover is not None else "none"
        _out_console(out).print(
            Panel(
                f"T_NN {env.t_nn_model} (synthetic), B={beam}, V={v.size}\n"
                f"dense total {env.dense_total:.6g}, sparse total {env.sparse_total:.6g}\n"
                f"symbolic work {env.symbolic_work:.6g}, crossover step {crossover}",
                title="Latency envelope",
            )
        )


@app.command()
def invariance(
    ctx: typer.Context,
    g1: str = typer.Option(..., "--g1"),
    g2: str = typer.Option(..., "--g2"),
    depth: int = typer.Option(10, "--depth", "-d", min=0, help="Maximum token prefix length"),
    vocab: str | None = typer.Option(None, "--vocab"),
) -> None:
    """Check that two grammars induce identical token masks on all live prefixes."""
    with _session(ctx, "invariance") as registry:
        first, second = registry.grammar(g1), registry.grammar(g2)
        v = registry.vocab(vocab, first)
        report = oracle_invariance_check(first, second, v, depth)
        if report.mismatch is None:
            typer.echo(f"no mismatch ({report.prefixes_checked} prefixes checked)")
            return
        m = report.mismatch
        typer.echo(f"mismatch after '{' '.join(m.prefix)}'")
        typer.echo(f"  only {g1}: {' '.join(m.only_first) or '-'}")
        typer.echo(f"  only {g2}: {' '.join(m.only_second) or '-'}")
        typer.echo(f"  witness: {' '.join(m.witness)}")


@app.command()
def selftest(
    ctx: typer.Context,
    quick: bool = typer.Option(False, "--quick", help="Reduced sizes"),
    fixtures: Path | None = typer.Option(
        None, "--fixtures", help="Directory of NAME.cfg grammars overriding built-ins"
    ),
    seed: int = typer.Option(0, "--seed"),
    only: str | None = typer.Option(None, "--only", help="Criterion numbers, e.g. 1,5"),
    timings: bool = typer.Option(False, "--timings", help="Show per-criterion run time"),
) -> None:
    """Run the acceptance suite and print a pass/fail table."""
    try:
        selected = {int(x) for x in only.split(",")} if only else None
    except ValueError as e:
        raise typer.BadParameter("expected comma-separated numbers", param_hint="--only") from e
    with _session(ctx, "selftest", seed, fixtures) as registry:
        results = run_selftest(registry, quick=quick, seed=seed, only=selected)
        table = Table(title="Acceptance criteria")
        table.add_column("#", justify="right")
        table.add_column("Criterion", style="cyan")
        table.add_column("Result")
        table.add_column("Detail", overflow="fold")
        if timings:
            table.add_column("Seconds", justify="right")
        for r in results:
            row = [
                str(r.number),
                r.name,
                "[green]pass[/green]" if r.passed else "[red]FAIL[/red]",
                r.detail,
            ]
            if timings:
                row.append(f"{r.seconds:.2f}")
            table.add_row(*row)
        console.print(table)
    if not all_passed(results):
        raise typer.Exit(1)


# --------------------------------------------------------------------------- config

config_app = typer.Typer(help="Manage the configuration file")
app.add_typer(config_app, name="config")


@config_app.command("init")
def config_init(
    ctx: typer.Context,
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite existing config"),
) -> None:
    """Write a default configuration file."""
    path = _state(ctx).config_path or get_config_path()
    if path.exists() and not force:
        console.print(f"[yellow]Config already exists at {path}[/yellow]")
        console.print("Use --force to overwrite")
        raise typer.Exit(1)
    save_config(create_default_config(), path)
    console.print(f"[green]Created config at {path}[/green]")


@config_app.command("show")
def config_show(ctx: typer.Context) -> None:
    """Print the effective configuration."""
    state = _state(ctx)
    path = state.config_path or get_config_path()
    source = str(path) if path.exists() else "defaults"
    err_console.print(f"[dim]Source: {source}[/dim]")
    typer.echo(json.dumps(state.config.model_dump(mode="json"), indent=2))


def main() -> None:
    """Console script entry point."""
    app()
