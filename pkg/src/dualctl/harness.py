"""Closed-loop experiment runner, trace files, metrics and Monte Carlo batches.

One run iterates the plant under either the posterior-blended dual controller
("proposed") or the disturbance-aware baseline ("optimal").  Per iteration k,
in order: the plant produces y(k+1); the candidate posteriors are updated from
the regressor built at the previous state; the per-candidate control laws are
evaluated at the new state against the next reference value and blended; the
change detector inspects the leading candidate's residual and may reset the
learner; finally the candidate covariances are renormalized.  Traces hold one
row per iteration including row 1 (the initial condition).
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import CHANNELS, ExperimentConfig
from .controller import blended_control, candidate_control_terms, optimal_control
from .errors import BatchError, DualctlError, RunError
from .learner import bayes_step, detect_change, make_state, update_covariance
from .learner import reset as reset_learner
from .plants import DisturbanceSchedule, reference_at, sample_noise
from .rbf import eval_network

CONTROLLER_KINDS = ("proposed", "optimal")
HOOK_EVENTS = ("posterior_update", "control", "reset_check", "covariance_update")

TRACE_FORMAT_TAG = "dualctl-trace"
TRACE_FORMAT_VERSION = "v1"
TRACE_COLUMNS = (
    "k", "y_r", "y", "u", "u_opt", "y_hat", "err",
    "argmax_t", "max_pi", "reset", "alpha_true", "beta_true", "gamma_true",
)
_INT_COLUMNS = ("k", "argmax_t", "reset")

# Abort rather than let a diverging loop overflow into inf/nan arithmetic.
_DIVERGENCE_LIMIT = 1e9


@dataclass
class RunTrace:
    """Column-wise record of one closed-loop run.

    argmax_t is 1-indexed to match candidate numbering in reports.  At a reset
    row, argmax_t/max_pi reflect the posterior state that triggered the reset;
    the optional pi_* columns hold the state carried into the next iteration.
    """

    name: str
    controller: str
    seed: int
    grid_size: int
    k: list[int]
    y_r: list[float]
    y: list[float]
    u: list[float]
    u_opt: list[float]
    y_hat: list[float]
    err: list[float]
    argmax_t: list[int]
    max_pi: list[float]
    reset: list[int]
    alpha_true: list[float]
    beta_true: list[float]
    gamma_true: list[float]
    posteriors: list[list[float]] | None = None
    wall_time: float = 0.0

    def __len__(self) -> int:
        return len(self.k)


def _fire(hooks, event, k, **info):
    if hooks is None:
        return
    fn = hooks.get(event)
    if fn is not None:
        fn(k, info)


def run_experiment(
    cfg: ExperimentConfig,
    controller: str = "proposed",
    seed: int | None = None,
    collect_posteriors: bool = False,
    randomize: tuple[str, ...] = (),
    hooks: dict | None = None,
) -> RunTrace:
    """Simulate one closed-loop run of ``cfg.iterations`` rows.

    ``seed`` overrides ``cfg.seed``.  Channels named in ``randomize`` replace
    their configured schedule with a single constant drawn uniformly from the
    channel interval; the draws consume the run generator first (alpha, beta,
    gamma order), then one noise draw follows per iteration, so equal seeds
    give identical streams at every noise level.
    """
    if controller not in CONTROLLER_KINDS:
        raise ValueError(f"controller must be one of {CONTROLLER_KINDS}, got {controller!r}")
    for ch in randomize:
        if ch not in CHANNELS:
            raise ValueError(f"randomize names unknown channel {ch!r}")

    started = time.perf_counter()
    plant = cfg.plant
    net = cfg.network
    spec = cfg.reference
    grid = cfg.build_grid()
    thetas = grid.vectors
    size = grid.size
    lam = cfg.controller.dual_lambda
    clamp = cfg.controller.input_clamp
    run_seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(run_seed)

    schedules = {}
    for name, ch in zip(CHANNELS, (cfg.alpha, cfg.beta, cfg.gamma)):
        if name in randomize:
            value = float(rng.uniform(ch.interval.lower, ch.interval.upper))
            schedules[name] = ((1, value),)
        else:
            schedules[name] = ch.schedule
    sched = DisturbanceSchedule(**schedules)

    state = make_state(size, plant.noise_variance, cfg.initial_covariance)
    n = cfg.iterations

    # Row 1: the given initial condition.  No prediction exists yet, so
    # y_hat mirrors y and the posterior columns show the uniform start.
    theta_1 = sched.at(1)
    y0 = cfg.initial_output
    u_opt_0 = optimal_control(theta_1, plant.f_value(y0), plant.g_value(y0), reference_at(spec, 2))
    u0 = u_opt_0 if controller == "optimal" else cfg.initial_control

    col_k = [1]
    col_yr = [reference_at(spec, 1)]
    col_y = [y0]
    col_u = [u0]
    col_uopt = [u_opt_0]
    col_yhat = [y0]
    col_err = [y0 - col_yr[0]]
    col_argmax = [1]
    col_maxpi = [state.eta]
    col_reset = [0]
    col_a = [theta_1[0]]
    col_b = [theta_1[1]]
    col_c = [theta_1[2]]
    pi_rows = [list(state.posteriors)] if collect_posteriors else None

    for k in range(1, n):
        try:
            theta_k = sched.at(k)
            noise = sample_noise(rng, plant.noise_variance)
            y_prev = col_y[k - 1]
            u_prev = col_u[k - 1]
            y_new = plant.step(y_prev, u_prev, theta_k, noise)
            if not math.isfinite(y_new) or abs(y_new) > _DIVERGENCE_LIMIT:
                raise RunError(f"output diverged to {y_new!r}", iteration=k + 1)

            f_prev, g_prev = eval_network(net, (y_prev,))
            phi = (f_prev, g_prev * u_prev, 1.0)
            state, residuals, _ = bayes_step(state, phi, y_new, thetas)
            t_star = max(range(size), key=state.posteriors.__getitem__)
            pi_star = state.posteriors[t_star]
            # The logged prediction belongs to the argmax candidate on this
            # row; its residual is y_new - y_hat by construction.
            y_hat_new = y_new - residuals[t_star]
            _fire(hooks, "posterior_update", k + 1, argmax_t=t_star + 1, max_pi=pi_star)

            y_target = reference_at(spec, k + 2)
            theta_next = sched.at(k + 1)
            u_opt_new = optimal_control(
                theta_next, plant.f_value(y_new), plant.g_value(y_new), y_target
            )
            if controller == "proposed":
                f_new, g_new = eval_network(net, (y_new,))
                candidates = [
                    candidate_control_terms(
                        thetas[t], f_new, g_new, y_target,
                        state.covariances[t], lam, candidate_index=t,
                    )
                    for t in range(size)
                ]
                decision = blended_control(state.posteriors, candidates, clamp)
                u_new = decision.u_applied
            else:
                u_new = u_opt_new
            _fire(hooks, "control", k + 1, u=u_new)

            triggered = detect_change(residuals[t_star], pi_star, cfg.reset)
            if triggered:
                state = reset_learner(state, size)
            _fire(hooks, "reset_check", k + 1, triggered=triggered)

            # Renormalize covariances under the posteriors now in effect.  A
            # fresh reset leaves them untouched (factor is exactly 1 at the
            # uniform posterior).
            state.covariances = [
                update_covariance(state.covariances[t], state.posteriors[t], state.eta)
                for t in range(size)
            ]
            _fire(hooks, "covariance_update", k + 1)
        except RunError:
            raise
        except DualctlError as exc:
            raise RunError(f"iteration failed: {exc}", iteration=k + 1, cause=exc) from exc

        yr_new = reference_at(spec, k + 1)
        col_k.append(k + 1)
        col_yr.append(yr_new)
        col_y.append(y_new)
        col_u.append(u_new)
        col_uopt.append(u_opt_new)
        col_yhat.append(y_hat_new)
        col_err.append(y_new - yr_new)
        col_argmax.append(t_star + 1)
        col_maxpi.append(pi_star)
        col_reset.append(int(triggered))
        col_a.append(theta_next[0])
        col_b.append(theta_next[1])
        col_c.append(theta_next[2])
        if pi_rows is not None:
            pi_rows.append(list(state.posteriors))

    return RunTrace(
        name=cfg.name,
        controller=controller,
        seed=run_seed,
        grid_size=size,
        k=col_k,
        y_r=col_yr,
        y=col_y,
        u=col_u,
        u_opt=col_uopt,
        y_hat=col_yhat,
        err=col_err,
        argmax_t=col_argmax,
        max_pi=col_maxpi,
        reset=col_reset,
        alpha_true=col_a,
        beta_true=col_b,
        gamma_true=col_c,
        posteriors=pi_rows,
        wall_time=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# Trace files


def write_trace(trace: RunTrace, path) -> None:
    """Write a trace as CSV with '#'-prefixed metadata lines before the header.

    Floats are serialized with repr() so reading the file back reproduces the
    exact values.
    """
    cols = list(TRACE_COLUMNS)
    if trace.posteriors is not None:
        cols += [f"pi_{t + 1}" for t in range(trace.grid_size)]
    with open(path, "w") as fh:
        fh.write(f"# {TRACE_FORMAT_TAG} {TRACE_FORMAT_VERSION}\n")
        fh.write(f"# name: {trace.name}\n")
        fh.write(f"# controller: {trace.controller}\n")
        fh.write(f"# seed: {trace.seed}\n")
        fh.write(f"# grid_size: {trace.grid_size}\n")
        fh.write(",".join(cols) + "\n")
        for i in range(len(trace)):
            row = [
                str(trace.k[i]), repr(trace.y_r[i]), repr(trace.y[i]),
                repr(trace.u[i]), repr(trace.u_opt[i]), repr(trace.y_hat[i]),
                repr(trace.err[i]), str(trace.argmax_t[i]), repr(trace.max_pi[i]),
                str(trace.reset[i]), repr(trace.alpha_true[i]),
                repr(trace.beta_true[i]), repr(trace.gamma_true[i]),
            ]
            if trace.posteriors is not None:
                row += [repr(v) for v in trace.posteriors[i]]
            fh.write(",".join(row) + "\n")


def read_trace(path) -> RunTrace:
    """Read a trace CSV written by write_trace (wall_time is not persisted)."""
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    idx = 0
    if not lines or not lines[0].startswith(f"# {TRACE_FORMAT_TAG} "):
        raise ValueError(f"{path}: not a {TRACE_FORMAT_TAG} file")
    version = lines[0].split()[-1]
    if version != TRACE_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported trace version {version!r}")
    idx = 1
    while idx < len(lines) and lines[idx].startswith("#"):
        key, _, value = lines[idx][1:].partition(":")
        meta[key.strip()] = value.strip()
        idx += 1
    if idx >= len(lines):
        raise ValueError(f"{path}: missing column header")
    header = lines[idx].split(",")
    if list(header[: len(TRACE_COLUMNS)]) != list(TRACE_COLUMNS):
        raise ValueError(f"{path}: unexpected columns {header[:len(TRACE_COLUMNS)]}")
    n_pi = len(header) - len(TRACE_COLUMNS)

    columns: dict[str, list] = {name: [] for name in TRACE_COLUMNS}
    pi_rows: list[list[float]] | None = [] if n_pi else None
    for line_no, line in enumerate(lines[idx + 1:], start=idx + 2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}, line {line_no}: expected {len(header)} fields")
        for name, raw in zip(TRACE_COLUMNS, parts):
            columns[name].append(int(raw) if name in _INT_COLUMNS else float(raw))
        if pi_rows is not None:
            pi_rows.append([float(v) for v in parts[len(TRACE_COLUMNS):]])

    return RunTrace(
        name=meta.get("name", ""),
        controller=meta.get("controller", ""),
        seed=int(meta.get("seed", 0)),
        grid_size=int(meta.get("grid_size", n_pi)),
        posteriors=pi_rows,
        wall_time=0.0,
        **columns,
    )


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class RunMetrics:
    j_index: float  # sqrt(sum err^2) / n
    rms: float
    mean_abs: float


@dataclass(frozen=True)
class BatchMetrics:
    runs: int
    j_m: float  # mean over runs of j_index
    j_std: float
    mean_abs: float
    median_wall_time: float
    j_values: tuple[float, ...]


def run_metrics(trace: RunTrace) -> RunMetrics:
    n = len(trace)
    sq = math.fsum(e * e for e in trace.err)
    return RunMetrics(
        j_index=math.sqrt(sq) / n,
        rms=math.sqrt(sq / n),
        mean_abs=math.fsum(abs(e) for e in trace.err) / n,
    )


def batch_metrics(traces) -> BatchMetrics:
    if not traces:
        raise ValueError("batch_metrics needs at least one trace")
    per_run = [run_metrics(t) for t in traces]
    j = [m.j_index for m in per_run]
    return BatchMetrics(
        runs=len(traces),
        j_m=float(np.mean(j)),
        j_std=float(np.std(j)),
        mean_abs=float(np.mean([m.mean_abs for m in per_run])),
        median_wall_time=float(np.median([t.wall_time for t in traces])),
        j_values=tuple(j),
    )


def trace_change_points(trace: RunTrace) -> list[int]:
    """Rows at which any true disturbance channel differs from the row before."""
    points = []
    for i in range(1, len(trace)):
        if (
            trace.alpha_true[i] != trace.alpha_true[i - 1]
            or trace.beta_true[i] != trace.beta_true[i - 1]
            or trace.gamma_true[i] != trace.gamma_true[i - 1]
        ):
            points.append(trace.k[i])
    return points


def recovery_streak(trace: RunTrace, change_k: int, threshold: float) -> int:
    """Consecutive iterations with |err| > threshold after a change at change_k.

    The disturbance value at iteration change_k first shows up in the output
    one row later, so the scan starts at change_k + 1.  Returns 0 when the
    first affected output is already inside the band.
    """
    try:
        start = trace.k.index(change_k) + 1
    except ValueError:
        raise ValueError(f"iteration {change_k} not present in trace")
    streak = 0
    for i in range(start, len(trace)):
        if abs(trace.err[i]) > threshold:
            streak += 1
        else:
            break
    return streak


def excursion_count(
    trace: RunTrace,
    threshold: float,
    change_points=(),
    window: int = 10,
    startup: int = 10,
) -> int:
    """Iterations with |err| above threshold outside startup and change windows.

    A change window covers rows c..c+window for each change point c, so the
    count isolates tracking excursions that the disturbance timeline does not
    explain.
    """
    count = 0
    for i in range(len(trace)):
        k = trace.k[i]
        if k <= startup:
            continue
        if any(c <= k <= c + window for c in change_points):
            continue
        if abs(trace.err[i]) > threshold:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class BatchResult:
    name: str
    controller: str
    seed_base: int
    requested: int
    seeds: list[int]
    traces: list[RunTrace]
    failures: list[tuple[int, str]]
    metrics: BatchMetrics


def _mc_worker(args):
    cfg, controller, index, seed, randomize, collect_posteriors = args
    try:
        trace = run_experiment(
            cfg,
            controller=controller,
            seed=seed,
            collect_posteriors=collect_posteriors,
            randomize=randomize,
        )
        return index, trace, None
    except RunError as exc:
        return index, None, str(exc)


def monte_carlo(
    cfg: ExperimentConfig,
    runs: int,
    seed_base: int | None = None,
    controller: str = "proposed",
    jobs: int = 1,
    collect_posteriors: bool = False,
) -> BatchResult:
    """Run ``runs`` independent experiments seeded seed_base..seed_base+runs-1.

    Channels listed in cfg.mc_randomize get a fresh uniform constant per run.
    Results are identical for any ``jobs`` because every run owns its seeded
    generator.  Failed runs are dropped with a warning; more than 10% failures
    raise BatchError.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    base = cfg.seed if seed_base is None else seed_base
    tasks = [
        (cfg, controller, i, base + i, cfg.mc_randomize, collect_posteriors)
        for i in range(runs)
    ]
    outcomes = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_mc_worker, tasks))
    else:
        outcomes = [_mc_worker(t) for t in tasks]

    outcomes.sort(key=lambda o: o[0])
    traces, seeds, failures = [], [], []
    for index, trace, message in outcomes:
        if trace is None:
            failures.append((index, message))
        else:
            traces.append(trace)
            seeds.append(base + index)
    if failures:
        warnings.warn(
            f"{cfg.name}: {len(failures)}/{runs} runs failed and were excluded "
            f"(first: run {failures[0][0]}: {failures[0][1]})"
        )
        if len(failures) > 0.1 * runs:
            raise BatchError(
                f"{cfg.name}: {len(failures)}/{runs} runs failed, exceeding the 10% budget"
            )
    return BatchResult(
        name=cfg.name,
        controller=controller,
        seed_base=base,
        requested=runs,
        seeds=seeds,
        traces=traces,
        failures=failures,
        metrics=batch_metrics(traces),
    )
