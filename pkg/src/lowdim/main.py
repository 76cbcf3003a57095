"""Main entry point for the lowdim command-line interface."""

import functools
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, List, Optional

import click
import numpy as np
from pydantic import ValidationError

from . import __version__
from .config.settings import RunConfig, TemplateSpec
from .errors import (
    AssimilationError,
    ConfigurationError,
    IntegrityError,
    NumericalError,
)
from .graphs.decomposition import PlanStep, schedule_decomposition
from .graphs.elimination import (
    direct_sparsity,
    fill_in,
    inverse_sparsity,
    min_fill_ordering,
)
from .graphs.graph import Ordering, UndirectedGraph
from .graphs.imap import pairwise_imap
from .graphs.io import load_graph_file
from .models.registry import build_model, build_target, model_truth
from .models.simulation import simulate
from .sequential.smoother import (
    SmootherState,
    assimilate,
    fixed_point_smoother,
    sample_filtering,
    sample_fixed_point,
    sample_smoothing,
)
from .sequential.storage import MANIFEST_NAME, load_state, save_state
from .transport.checkpoint import save_map
from .transport.density import LogDensity
from .transport.maps import MonotoneTriangularMap
from .utils.console import make_console, setup_logging
from .utils.formatters import (
    fit_report_table,
    format_ordering,
    format_pairs,
    percentile_rich_table,
    steps_table,
)
from .utils.io import (
    coordinate_names,
    percentile_table,
    read_observations,
    write_json,
    write_matrix_csv,
    write_percentiles_csv,
)
from .utils.parallel import resolve_threads
from .variational.fitting import compute_map
from .variational.reference import ReferenceRule

logger = logging.getLogger(__name__)

EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3


@dataclass
class CliContext:
    """Settings shared by every subcommand."""

    config: RunConfig
    threads_flag: Optional[int] = None
    seed_flag: Optional[int] = None

    @property
    def seed(self) -> int:
        return self.seed_flag if self.seed_flag is not None else self.config.effective_seed

    @property
    def threads(self) -> int:
        requested = self.threads_flag if self.threads_flag is not None else self.config.threads
        try:
            return resolve_threads(requested)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc


def exit_codes(fn: Callable[..., Any]) -> Callable[..., Any]:
    """Turn library errors into exit code 2 (configuration) or 3 (numerical)."""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except (ConfigurationError, IntegrityError, ValidationError) as exc:
            logger.error("%s", exc)
            sys.exit(EXIT_CONFIGURATION)
        except NumericalError as exc:
            logger.error("%s", exc)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _load_graph(path: Path) -> UndirectedGraph:
    graph = load_graph_file(path)
    logger.debug("read graph with %d vertices and %d edges", graph.n_vertices, len(graph.edges))
    return graph


def _emit(payload: Any, output: Optional[Path]) -> None:
    if output is not None:
        write_json(output, payload)
    click.echo(json.dumps(payload, indent=2))


@click.group()
@click.option(
    "--config",
    "-c",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Path to a TOML or JSON configuration file",
)
@click.option("--threads", type=int, help="Worker threads (LOWDIM_THREADS overrides)")
@click.option("--seed", type=int, help="Base random seed")
@click.option("--verbose", "-v", is_flag=True, help="Log debug messages")
@click.option("--quiet", "-q", is_flag=True, help="Log only warnings and errors")
@click.version_option(version=__version__, prog_name="lowdim")
@click.pass_context
@exit_codes
def main(
    ctx: click.Context,
    config: Optional[Path],
    threads: Optional[int],
    seed: Optional[int],
    verbose: bool,
    quiet: bool,
) -> None:
    """lowdim - variational inference with low-dimensional transport maps.

    Analyze Markov structure, fit monotone triangular maps and assimilate
    observations of state-space models with recursive step maps.
    """
    setup_logging(verbose, quiet)
    ctx.obj = CliContext(RunConfig.load_from_file(config), threads, seed)


@main.command()
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--ordering",
    type=click.Choice(["given", "minfill"]),
    default="given",
    show_default=True,
    help="Ordering of the variables",
)
@click.option("--output", "-o", type=click.Path(path_type=Path), help="Also write the JSON here")
@exit_codes
def sparsity(graph_file: Path, ordering: str, output: Optional[Path]) -> None:
    """Predict the sparsity of the inverse and direct triangular maps.

    Pairs are reported in the labels of the chosen ordering; ``ordering``
    lists the original vertex carrying each new label.
    """
    graph = _load_graph(graph_file)
    order = min_fill_ordering(graph) if ordering == "minfill" else Ordering.identity(graph.n_vertices)
    relabeled = graph.relabel(order)
    inverse = inverse_sparsity(relabeled)
    direct = direct_sparsity(relabeled)
    fill = fill_in(graph, order)
    logger.info("ordering %s", format_ordering(order.perm))
    logger.info("fill-in %s", format_pairs(fill))
    _emit(
        {
            "n": graph.n_vertices,
            "ordering": list(order.perm),
            "inverse_sparsity": [list(p) for p in inverse.sorted_pairs()],
            "direct_sparsity": [list(p) for p in direct.sorted_pairs()],
            "fill_in": sorted(list(e) for e in fill),
        },
        output,
    )


@main.command()
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--output", "-o", type=click.Path(path_type=Path), help="Also write the JSON here")
@exit_codes
def ordering(graph_file: Path, output: Optional[Path]) -> None:
    """Min-fill elimination ordering and the fill it saves."""
    graph = _load_graph(graph_file)
    order = min_fill_ordering(graph)
    logger.info("min-fill ordering %s", format_ordering(order.perm))
    _emit(
        {
            "ordering": list(order.perm),
            "fill_in": len(fill_in(graph, order)),
            "given_fill_in": len(fill_in(graph, Ordering.identity(graph.n_vertices))),
        },
        output,
    )


@main.command()
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--plan",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help=(
        "JSON list of {increment, separator_order} steps, "
        "e.g. plans/six_vertex_plan.json for plans/six_vertex_graph.txt"
    ),
)
@click.option("--output", "-o", type=click.Path(path_type=Path), help="Also write the JSON here")
@exit_codes
def decompose(graph_file: Path, plan: Optional[Path], output: Optional[Path]) -> None:
    """Recursive decomposition schedule and the effective map dimensions."""
    graph = _load_graph(graph_file)
    steps: Optional[List[PlanStep]] = None
    if plan is not None:
        try:
            with open(plan, "r") as f:
                steps = [PlanStep.from_dict(entry) for entry in json.load(f)]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigurationError(f"cannot read plan {plan}: {exc}") from exc
    try:
        schedule = schedule_decomposition(graph, steps)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    _emit(schedule.to_dict(), output)


def _fit_template(
    target: LogDensity, spec: TemplateSpec, seed: int
) -> MonotoneTriangularMap:
    options = dict(rectifier=spec.rectifier, a_family=spec.a_basis, b_family=spec.b_basis)
    if spec.sparsity == "none":
        return MonotoneTriangularMap.identity(target.dim, spec.degree, **options)
    if spec.sparsity == "graph-file":
        assert spec.graph_file is not None
        graph = _load_graph(spec.graph_file)
        if graph.n_vertices != target.dim:
            raise ConfigurationError(
                f"graph has {graph.n_vertices} vertices, target dimension is {target.dim}"
            )
    else:
        graph = pairwise_imap(target, seed=seed)
        logger.info("detected %d edges in the Markov structure", len(graph.edges))
    return MonotoneTriangularMap.from_sparsity(direct_sparsity(graph), spec.degree, **options)


@main.command()
@click.option("--target", "target_name", help="Registry target (overrides the config)")
@click.option("--dim", type=int, help="Target dimension")
@click.option("--degree", type=int, help="Total degree of the map")
@click.option("--output-dir", "-o", type=click.Path(file_okay=False, path_type=Path))
@click.option("--trace", is_flag=True, help="Write the optimizer trace as CSV")
@click.pass_obj
@exit_codes
def fit(
    obj: CliContext,
    target_name: Optional[str],
    dim: Optional[int],
    degree: Optional[int],
    output_dir: Optional[Path],
    trace: bool,
) -> None:
    """Fit a monotone triangular map to a registry target."""
    config = obj.config
    update = {k: v for k, v in (("name", target_name), ("dim", dim)) if v is not None}
    target_spec = config.target.model_copy(update=update)
    template_spec = config.template
    if degree is not None:
        template_spec = TemplateSpec(**{**template_spec.model_dump(), "degree": degree})
    output_dir = output_dir or config.output_dir

    target = build_target(target_spec)
    template = _fit_template(target, template_spec, obj.seed)
    rule = ReferenceRule.from_spec(config.reference, target.dim, obj.seed)
    fitted, report = compute_map(target, template, rule, config.optimizer, obj.threads)

    save_map(fitted, output_dir / "map.json")
    write_json(output_dir / "report.json", report.model_dump(mode="json", exclude={"trace"}))
    if trace:
        report.write_trace_csv(output_dir / "trace.csv")
    make_console().print(fit_report_table(report))
    if not report.converged:
        sys.exit(EXIT_NUMERICAL)


def _print_steps(state: SmootherState) -> None:
    rows = [(s.index, s.log_c, s.diagnostic, s.converged) for s in state.steps]
    make_console().print(steps_table(rows, state.log_evidence))


@main.command(name="assimilate")
@click.argument("observations", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--state-dir", "-o", type=click.Path(file_okay=False, path_type=Path))
@click.option("--closed-form", is_flag=True, help="Exact steps for linear-Gaussian models")
@click.option("--fixed-point", is_flag=True, help="Track the initial state only")
@click.option("--resume", is_flag=True, help="Extend the state already in the directory")
@click.option("--halt-on-nonconvergence", is_flag=True, help="Treat non-convergence as failure")
@click.pass_obj
@exit_codes
def assimilate_command(
    obj: CliContext,
    observations: Path,
    state_dir: Optional[Path],
    closed_form: bool,
    fixed_point: bool,
    resume: bool,
    halt_on_nonconvergence: bool,
) -> None:
    """Assimilate an observation CSV into a state directory of step maps."""
    config = obj.config
    if config.model is None:
        raise ConfigurationError("assimilate needs a model section in the configuration")
    options = config.assimilation.model_copy(
        update={
            "closed_form": closed_form or config.assimilation.closed_form,
            "fixed_point": fixed_point or config.assimilation.fixed_point,
            "halt_on_nonconvergence": halt_on_nonconvergence
            or config.assimilation.halt_on_nonconvergence,
        }
    )
    state_dir = state_dir or config.output_dir
    model = build_model(config.model)
    Y = read_observations(observations)

    state: Optional[SmootherState] = None
    if resume:
        state = load_state(state_dir)
    elif (state_dir / MANIFEST_NAME).exists():
        raise ConfigurationError(f"{state_dir} already holds a state; pass --resume to extend it")

    run = fixed_point_smoother if options.fixed_point else assimilate
    try:
        state = run(
            model,
            Y,
            config.template,
            config.reference,
            config.optimizer,
            options,
            seed=obj.seed,
            threads=obj.threads,
            state=state,
        )
    except AssimilationError as exc:
        if exc.state is not None:
            save_state(exc.state, state_dir)
        raise
    save_state(state, state_dir)
    _print_steps(state)


@main.command()
@click.argument("state_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option(
    "--kind",
    type=click.Choice(["smoothing", "filtering", "fixed-point"]),
    default="smoothing",
    show_default=True,
)
@click.option("-m", "m", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--output-dir", "-o", type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
@exit_codes
def sample(
    obj: CliContext, state_dir: Path, kind: str, m: int, output_dir: Optional[Path]
) -> None:
    """Draw posterior samples from a state directory.

    Writes the raw samples and a table of their 5, 25, 40, 60, 75 and 95
    percentiles, one row per coordinate.
    """
    state = load_state(state_dir)
    p, n = state.param_dim, state.state_dim
    if kind == "smoothing":
        samples = sample_smoothing(state, m, obj.seed)
        names = coordinate_names(p, n, range(state.n_times))
    elif kind == "filtering":
        samples = sample_filtering(state, m, obj.seed)
        names = coordinate_names(p, n, [state.n_times - 1])
    else:
        samples = sample_fixed_point(state, m, obj.seed)
        names = coordinate_names(0, p, [0])
    output_dir = output_dir or state_dir
    write_matrix_csv(output_dir / f"{kind}_samples.csv", names, samples)
    write_percentiles_csv(output_dir / f"{kind}_percentiles.csv", names, samples)
    make_console().print(percentile_rich_table(names, percentile_table(samples)))


@main.command(name="simulate")
@click.option("--steps", "-n", type=click.IntRange(min=1), required=True, help="Time indices")
@click.option("--output-dir", "-o", type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
@exit_codes
def simulate_command(obj: CliContext, steps: int, output_dir: Optional[Path]) -> None:
    """Simulate observations (and the hidden path) from the configured model."""
    config = obj.config
    if config.model is None:
        raise ConfigurationError("simulate needs a model section in the configuration")
    model, theta = model_truth(config.model)
    states, observations, params = simulate(model, steps, theta, obj.seed)
    output_dir = output_dir or config.output_dir
    d = model.obs_dim
    y_names = ["y"] if d == 1 else [f"y_{j + 1}" for j in range(d)]
    write_matrix_csv(output_dir / "observations.csv", y_names, observations)
    n = model.state_dim
    z_names = ["z"] if n == 1 else [f"z_{j + 1}" for j in range(n)]
    write_matrix_csv(output_dir / "states.csv", z_names, states)
    if params.size:
        write_json(output_dir / "params.json", np.asarray(params, dtype=float).tolist())
    logger.info("simulated %d steps into %s", steps, output_dir)


if __name__ == "__main__":
    main()
