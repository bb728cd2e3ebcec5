"""Success probabilities, fidelities and parameter sweeps.

Two routes to every number: closed forms where they exist, and the full
circuit simulation.  The test suite holds them against each other; the
sweep helpers pick whichever route the contract demands (probability
sweeps run the actual circuits, broadening averages use the vectorized
kernel so quadrature stays cheap).

Inhomogeneous broadening: each emitter's detuning offset is drawn from
a zero-mean normal with width sigma.  The average fidelity integral is
evaluated either on a tensor Gauss-Hermite grid (exact for smooth
integrands, cost order**n) or by seeded Monte-Carlo sampling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .params import ProtocolParams
from .scatter import EmitterParams, InvalidParameterError, scatter_coeffs
from .protocols import default_protocol, run_protocol

DEFAULT_GH_ORDER = 20
GH_NODE_BUDGET = 200_000


class QuadratureBudgetError(ValueError):
    """Tensor quadrature grid too large; use the monte-carlo method."""


def success_probability(n: int, nominal: EmitterParams) -> float:
    """Closed-form herald probability |r|^(2n) of the n-emitter chain."""
    if n < 1:
        raise InvalidParameterError(f"need n >= 1, got {n}")
    return scatter_coeffs(nominal).reflect_prob ** n


def simulated_success_probability(
    n: int, nominal: EmitterParams, protocol: str | None = None
) -> float:
    """Same quantity from a full circuit run; slower, no formula involved."""
    run = run_protocol(ProtocolParams(n, nominal), protocol=protocol)
    return run.herald_probability


def conditioned_fidelity(
    params: ProtocolParams,
    protocol: str | None = None,
    weighting: str = "herald",
) -> float:
    """Fidelity of the corrected register state with the target.

    Runs the full circuit.  'herald' weights each detector by its click
    probability; 'uniform' averages the per-detector fidelities with
    equal weight.
    """
    run = run_protocol(params, protocol=protocol)
    if weighting == "herald":
        return run.weighted_fidelity
    if weighting == "uniform":
        if not run.outcomes:
            raise InvalidParameterError("no herald fired, fidelity undefined")
        return sum(oc.fidelity for oc in run.outcomes) / len(run.outcomes)
    raise InvalidParameterError(f"unknown weighting {weighting!r}")


def fidelity_kernel(
    n: int, nominal: EmitterParams, offsets: np.ndarray
) -> np.ndarray:
    """Vectorized corrected-state fidelity for batches of offset vectors.

    ``offsets`` has shape (batch, n).  Branch j of the chain reflects
    off emitters j..n-1 and carries the nominal amplitude to power j, so
    its weight is w_j = rnom**j * prod(r_i, i >= j).  After feedforward
    all branch signs align and

        F = |sum_j w_j|^2 / ((n+1) * sum_j |w_j|^2).

    Agrees with the circuit route to machine precision; the tests pin
    that down.
    """
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    if offsets.shape[1] != n:
        raise InvalidParameterError(
            f"offset batch has {offsets.shape[1]} columns, expected {n}"
        )
    inv_p = 1.0 / nominal.purcell
    d = nominal.detuning + offsets
    r = -1.0 / (1.0 + inv_p - 2.0j * d)  # (batch, n)
    rnom = scatter_coeffs(nominal).r
    batch = offsets.shape[0]
    w = np.empty((batch, n + 1), dtype=complex)
    # suffix products: w[:, j] = rnom^j * prod(r[:, j:])
    suffix = np.ones(batch, dtype=complex)
    w[:, n] = rnom ** n
    for j in range(n - 1, -1, -1):
        suffix = suffix * r[:, j]
        w[:, j] = rnom ** j * suffix
    num = np.abs(w.sum(axis=1)) ** 2
    den = (n + 1) * (np.abs(w) ** 2).sum(axis=1)
    return num / den


@dataclass(frozen=True)
class AveragedFidelity:
    value: float
    std_error: float | None
    evaluations: int
    method: str


def averaged_fidelity(
    n: int,
    nominal: EmitterParams,
    sigma: float,
    method: str = "gh",
    order: int = DEFAULT_GH_ORDER,
    samples: int = 100_000,
    seed: int = 0,
    integrand: str = "kernel",
) -> AveragedFidelity:
    """Mean corrected-state fidelity under normal detuning offsets.

    method 'gh' uses a tensor Gauss-Hermite grid of ``order`` nodes per
    emitter; the node count order**n must stay within the budget, beyond
    it a QuadratureBudgetError points at 'mc'.  method 'mc' draws
    ``samples`` offset vectors from the given seed and reports the
    standard error of the mean.

    integrand 'kernel' evaluates the closed form; 'simulation' runs the
    full circuit per node, which is slow and meant for cross-checks.
    """
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    if integrand not in ("kernel", "simulation"):
        raise InvalidParameterError(f"unknown integrand {integrand!r}")

    def evaluate(block: np.ndarray) -> np.ndarray:
        if integrand == "kernel":
            return fidelity_kernel(n, nominal, block)
        vals = []
        for row in block:
            vals.append(
                conditioned_fidelity(ProtocolParams(n, nominal, tuple(row)))
            )
        return np.array(vals)

    if sigma == 0.0:
        val = float(evaluate(np.zeros((1, n)))[0])
        return AveragedFidelity(val, None if method == "gh" else 0.0, 1, method)

    if method == "gh":
        if order < 1:
            raise InvalidParameterError(f"order must be >= 1, got {order}")
        if order ** n > GH_NODE_BUDGET:
            raise QuadratureBudgetError(
                f"gauss-hermite grid {order}^{n} exceeds {GH_NODE_BUDGET} nodes; "
                "use method='mc'"
            )
        x, wts = hermgauss(order)
        grids = np.meshgrid(*([x] * n), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=1) * (math.sqrt(2.0) * sigma)
        wgrids = np.meshgrid(*([wts] * n), indexing="ij")
        weight = np.ones(nodes.shape[0])
        for g in wgrids:
            weight = weight * g.ravel()
        vals = evaluate(nodes)
        mean = float((weight * vals).sum() / math.pi ** (n / 2.0))
        return AveragedFidelity(mean, None, nodes.shape[0], "gh")

    if method == "mc":
        if samples < 2:
            raise InvalidParameterError(f"need at least 2 samples, got {samples}")
        rng = np.random.default_rng(seed)
        draws = rng.normal(0.0, sigma, size=(samples, n))
        vals = evaluate(draws)
        mean = float(vals.mean())
        stderr = float(vals.std(ddof=1) / math.sqrt(samples))
        return AveragedFidelity(mean, stderr, samples, "mc")

    raise InvalidParameterError(f"unknown method {method!r}")


# -- sweeps -------------------------------------------------------------


@dataclass
class SweepResult:
    kind: str
    axis: str
    grid: list[float]
    series: dict[str, list[float]] = field(default_factory=dict)

    def to_csv(self) -> str:
        """Header then one row per grid point, 6 significant digits."""
        labels = list(self.series)
        lines = [",".join([self.axis] + labels)]
        for i, x in enumerate(self.grid):
            row = [format(x, ".6g")] + [
                format(self.series[lb][i], ".6g") for lb in labels
            ]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_svg(self, path: str) -> None:
        """Best-effort line chart; the CSV is the contract."""
        try:
            import matplotlib

            matplotlib.use("svg")
            import matplotlib.pyplot as plt
        except ImportError as exc:  # pragma: no cover
            raise RuntimeError(
                "SVG export needs matplotlib (pip install wgqsim[plot])"
            ) from exc
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for label, ys in self.series.items():
            ax.plot(self.grid, ys, label=label)
        ax.set_xlabel(self.axis)
        ax.set_ylabel(self.kind)
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.savefig(path, format="svg")
        plt.close(fig)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("WGQSIM_THREADS", "1")))
    except ValueError:
        return 1


def _map_indexed(fn, items: list) -> list:
    """Evaluate fn over items, optionally threaded, order preserved."""
    workers = _thread_count()
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, it) for it in items]
        return [f.result() for f in futures]


def _log_grid(lo: float, hi: float, num: int) -> list[float]:
    return [float(v) for v in np.geomspace(lo, hi, num)]


def _lin_grid(lo: float, hi: float, num: int) -> list[float]:
    return [float(v) for v in np.linspace(lo, hi, num)]


SWEEP_KINDS = ("fig5a", "fig5b", "fig6", "fig7", "fig8")


def sweep(kind: str, grid: list[float] | None = None) -> SweepResult:
    """Tabulate one of the named reference curve presets.

    fig5a: single-bounce herald probability vs Purcell factor
    fig5b: single-bounce herald probability vs detuning
    fig6:  two- and three-emitter success vs Purcell factor (circuit runs)
    fig7:  two- and three-emitter success vs detuning (circuit runs)
    fig8:  broadening-averaged fidelity vs detuning, sigma curves

    ``grid`` overrides the default axis grid.
    """
    if kind == "fig5a":
        xs = grid or _log_grid(1.0, 1000.0, 100)
        res = SweepResult(kind, "purcell", list(xs))
        for d in (0.0, 0.1, 0.15):
            res.series[f"d={d:g}"] = [
                scatter_coeffs(EmitterParams(purcell=p, detuning=d)).reflect_prob
                for p in xs
            ]
        return res
    if kind == "fig5b":
        xs = grid or _lin_grid(-0.5, 0.5, 101)
        res = SweepResult(kind, "detuning", list(xs))
        for p in (100.0, 50.0, 10.0):
            res.series[f"P={p:g}"] = [
                scatter_coeffs(EmitterParams(purcell=p, detuning=d)).reflect_prob
                for d in xs
            ]
        return res
    if kind == "fig6":
        xs = grid or _log_grid(1.0, 1000.0, 100)
        res = SweepResult(kind, "purcell", list(xs))
        for n in (2, 3):
            for d in (0.0, 0.1, 0.15):
                vals = _map_indexed(
                    lambda p, n=n, d=d: simulated_success_probability(
                        n, EmitterParams(purcell=p, detuning=d)
                    ),
                    list(xs),
                )
                res.series[f"n={n} d={d:g}"] = vals
        return res
    if kind == "fig7":
        xs = grid or _lin_grid(-0.5, 0.5, 101)
        res = SweepResult(kind, "detuning", list(xs))
        for n in (2, 3):
            for p in (100.0, 50.0, 10.0):
                vals = _map_indexed(
                    lambda d, n=n, p=p: simulated_success_probability(
                        n, EmitterParams(purcell=p, detuning=d)
                    ),
                    list(xs),
                )
                res.series[f"n={n} P={p:g}"] = vals
        return res
    if kind == "fig8":
        xs = grid or _lin_grid(-0.3, 0.3, 61)
        res = SweepResult(kind, "detuning", list(xs))
        for n in (2, 3):
            for sigma in (0.0, 0.1, 0.2):
                vals = _map_indexed(
                    lambda d, n=n, s=sigma: averaged_fidelity(
                        n, EmitterParams(purcell=100.0, detuning=d), s
                    ).value,
                    list(xs),
                )
                res.series[f"n={n} sigma={sigma:g}"] = vals
        return res
    raise InvalidParameterError(f"unknown sweep kind {kind!r}, know {SWEEP_KINDS}")
