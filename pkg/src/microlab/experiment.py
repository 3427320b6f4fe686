"""Config-driven experiments.

A config is a YAML mapping::

    operation: simulate.lmf
    params: {K: 10, alpha: 1.5, n_events: 100000}
    seeds: [1, 2, 3]          # or seed: 1
    sweep: {alpha: [1.5, 2.0]}  # optional, cartesian product over lists

Every (parameter cell, seed) pair becomes one run directory. The manifest
records the config hash, each run's parameters, scalar outputs and file
digests, plus mean/SD summary rows over runs. Nothing time- or
host-dependent is written, so the same config always yields the same
manifest.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import io as mio
from .series import LaggedCurve


class UsageError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


@dataclass
class OpResult:
    scalars: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)  # name -> LaggedCurve
    tables: dict = field(default_factory=dict)  # name -> list of dict rows
    points: dict = field(default_factory=dict)  # name -> object with as_record()
    events: list | None = None


@dataclass(frozen=True)
class Operation:
    fn: object
    defaults: dict
    anchor: str
    doc: str = ""


OPERATIONS: dict[str, Operation] = {}


def operation(name: str, anchor: str, **defaults):
    def deco(fn):
        OPERATIONS[name] = Operation(fn, defaults, anchor, (fn.__doc__ or "").strip())
        return fn
    return deco


def _merge(name: str, params: dict) -> dict:
    op = OPERATIONS[name]
    unknown = sorted(set(params) - set(op.defaults))
    if unknown:
        raise UsageError(f"{name}: unknown parameters {unknown}; accepted: {sorted(op.defaults)}")
    out = dict(op.defaults)
    out.update(params)
    return out


def _curve(lags, values, se=None) -> LaggedCurve:
    values = np.asarray(values, dtype=float)
    return LaggedCurve(lags, values, np.zeros(len(values)) if se is None else se)


# ------------------------------------------------------------ operations

@operation("simulate.lmf", "order-splitting sign generator",
           K=10, alpha=1.5, creation_prob=None, n_brokers=None, n_events=100_000, L=1000,
           window=None)
def _sim_lmf(p, seed):
    """Order-splitting sign stream; sign autocorrelation and its exponent."""
    from .estimators import sign_autocorr
    from .flow import LmfParams, gen_lmf
    s = gen_lmf(LmfParams(p["K"], p["alpha"], p["creation_prob"], 1, p["n_brokers"]),
                p["n_events"], seed)
    w = p["window"] or (min(10, p["L"] // 4), max(p["L"] // 10, p["L"] // 4 + 3))
    c = sign_autocorr(s.eps, p["L"], tuple(w))
    return OpResult({"gamma_hat": c.fit.exponent, "mean_sign": float(np.mean(s.eps))},
                    {"sign_autocorr": c})


@operation("simulate.zi", "zero-intelligence order flow",
           mu=1.0, rho=0.05, nu=0.01, band=200, n_events=100_000, burn_in=0.2)
def _sim_zi(p, seed):
    """Zero-intelligence event stream and its time-averaged spread."""
    from .bookshape import zi_spread_eos
    from .flow import ZiParams, gen_zero_intelligence
    run = gen_zero_intelligence(ZiParams(p["mu"], p["rho"], p["nu"], p["band"]), p["n_events"], seed)
    return OpResult({"mean_spread": run.time_average_spread(p["burn_in"]),
                     "eos_spread": zi_spread_eos(p["mu"], p["rho"], p["nu"])},
                    events=run.events)


@operation("simulate.mrr", "MRR midpoint model", rho=0.3, theta=1.0, sigma=0.0, n=100_000, L=20)
def _sim_mrr(p, seed):
    """MRR trade series; measured against theoretical response."""
    from .estimators import response_function
    from .flow import simulate_mrr
    from .theory import mrr_theory
    ts = simulate_mrr(p["rho"], p["theta"], p["sigma"], p["n"], seed)
    R = response_function(ts, p["L"])
    th = mrr_theory(p["rho"], p["theta"], p["sigma"], p["L"])
    return OpResult({"R1": R.at(1), "R_theory": float(np.asarray(th["R"])[0])},
                    {"response": R})


@operation("simulate.propagator", "transient impact price model",
           Gamma0=1.0, beta=0.25, l0=1.0, hurst=0.75, n=100_000, L=1000, sigma=0.0)
def _sim_prop(p, seed):
    """Propagator price series on long-memory signs; response curve."""
    from .estimators import response_function
    from .flow import gen_signs, simulate_propagator
    from .theory import PropagatorModel
    m = PropagatorModel(p["Gamma0"], p["beta"], p["l0"])
    eps = gen_signs("farima", p["n"], seed, hurst=p["hurst"])
    ts = simulate_propagator(m.g_array(p["n"]), eps, seed, sigma=p["sigma"])
    R = response_function(ts, p["L"])
    return OpResult({"R1": R.at(1), "R_L": R.at(p["L"])}, {"response": R})


@operation("estimate.series", "sign and response estimators", input=None, L=100, on_book_only=True)
def _est_series(p, seed):
    """Sign autocorrelation, response function and Hurst exponent of a TAQ file."""
    from .estimators import hurst, response_function, sign_autocorr
    if not p["input"]:
        raise UsageError("estimate.series needs params.input (a TAQ file)")
    ts = mio.ingest_taq(p["input"]).to_trade_series(p["on_book_only"])
    if len(ts) <= p["L"]:
        raise ValueError(f"series of length {len(ts)} is too short for L={p['L']}")
    c = sign_autocorr(ts.eps, p["L"])
    R = response_function(ts, p["L"] - 1)
    # R/S needs a long series; short files still get the other estimates
    H = hurst(ts.eps.astype(float)).get("H", math.nan) if len(ts) >= 1000 else math.nan
    return OpResult({"n_trades": len(ts), "gamma_hat": c.fit.exponent, "hurst": H},
                    {"sign_autocorr": c, "response": R})


@operation("theory.response", "propagator response theory",
           Gamma0=1.0, beta=0.25, l0=0.0, c0=0.2, gamma=0.5, lags=[1, 10, 100, 1000, 10000])
def _th_response(p, seed):
    """Response function of the propagator model from its kernel and correlation."""
    from .theory import PropagatorModel, response_theory
    m = PropagatorModel(p["Gamma0"], p["beta"], p["l0"], p["c0"], p["gamma"])
    lags = np.asarray(p["lags"], dtype=int)
    return OpResult({"beta_c": 0.5 * (1 - p["gamma"])}, {"response": _curve(lags, response_theory(m, lags))})


@operation("theory.hidden_order", "hidden-order impact", N=[10, 100, 1000, 10000], pi=1.0,
           K=None, hurst=0.75, theta=1.0)
def _th_hidden(p, seed):
    """Impact of a hidden order against the number of its trades."""
    from .theory import HiddenOrderSpec, hidden_order_impact
    rows = []
    for N in p["N"]:
        spec = HiddenOrderSpec(int(N), p["pi"], 1, p["K"], p["theta"], p["hurst"])
        rows.append({"N": int(N), "impact": hidden_order_impact(spec)})
    x = np.log([r["N"] for r in rows])
    y = np.log([r["impact"] for r in rows])
    slope = float(np.polyfit(x, y, 1)[0]) if len(rows) > 1 else math.nan
    return OpResult({"log_slope": slope}, tables={"impact": rows})


@operation("spread.gm", "Glosten-Milgrom spread", q=0.05, p_hi=1.02, p_lo=1.0, n_days=10_000,
           n_trades=200)
def _spread_gm(p, seed):
    """Glosten-Milgrom belief and spread paths averaged over days."""
    from .spread import martingale_drift, simulate_gm
    run = simulate_gm(p["q"], p["p_hi"], p["p_lo"], p["n_days"], p["n_trades"], seed)
    ms = run.mean_spread()
    se = run.spread.std(0, ddof=1) / math.sqrt(p["n_days"])
    drift, dse = martingale_drift(run)
    return OpResult({"S0": float(ms[0]), "drift": drift, "drift_se": dse},
                    {"mean_spread": LaggedCurve(np.arange(len(ms)), ms, se)})


@operation("spread.mm", "market-making backtest", rho=0.3, theta=1.0, phi=0.0, n=100_000,
           phi0=0.1, alpha=0.1)
def _spread_mm(p, seed):
    """Inventory-skewed market making on the MRR-with-spread stream."""
    from .spread import mm_backtest, mrr_spread_model
    ts = mrr_spread_model(p["rho"], p["theta"], p["phi"]).simulate(p["n"], seed)
    bt = mm_backtest(ts, p["phi0"], p["alpha"])
    return OpResult({"gain": bt.gain, "gain_se": bt.gain_se, "boundary": bt.boundary,
                     "max_inventory": bt.max_inventory})


@operation("phase.mrr", "spread-impact phase diagram", rho=0.3, theta=1.0, phi=0.0, n=100_000,
           L=100, beta=0.5)
def _phase(p, seed):
    """Phase-diagram coordinates and region of an MRR-with-spread stream."""
    from .spread import mrr_spread_model, phase_point
    ts = mrr_spread_model(p["rho"], p["theta"], p["phi"]).simulate(p["n"], seed)
    pt = phase_point(ts, p["L"], beta=p["beta"])
    return OpResult({"x": pt.x, "y": pt.y, "lambda": pt.lam}, points={"phase_point": pt})


@operation("bookshape.theory", "mean book profile", mu=0.6, D=1.0, nu=0.5, flow="powerlaw",
           beta_e=1.0, u_min=0.0, delta=[0.5, 1, 2, 4, 8, 16, 32])
def _bs_theory(p, seed):
    """Mean book depth against distance from the mid."""
    from .bookshape import BookShapeParams, mean_book_theory
    bp = BookShapeParams(p["mu"], p["D"], p["nu"], p["flow"], p["beta_e"], p["u_min"])
    d = np.asarray(p["delta"], dtype=float)
    rho = mean_book_theory(bp, d)
    return OpResult({"alpha": bp.alpha}, tables={"profile": [{"delta": a, "depth": b} for a, b in zip(d, rho)]})


@operation("bookshape.poisson", "Poisson book simulation", mu=0.6, nu=1e-3, p_move=0.25,
           width=400, n_steps=200_000)
def _bs_poisson(p, seed):
    """Simulated mean book of the Poisson deposition model against theory."""
    from .bookshape import rescaled_deviation, simulate_poisson_book
    run = simulate_poisson_book(p["mu"], p["nu"], p["p_move"], width=p["width"],
                                n_steps=p["n_steps"], seed=seed)
    dev = rescaled_deviation(run, p["mu"])
    rows = [{"delta": a, "depth": b, "stderr": c} for a, b, c in zip(run.delta, run.profile, run.stderr)]
    return OpResult({"sup_dev": dev["sup_dev"], "alpha": run.alpha}, tables={"profile": rows})


@operation("execute.solve", "optimal execution profile", kernel="powerlaw", V=1.0, T=1.0, n_g=512,
           G0=1.0, alpha=1.0, G_inf=0.0, g0=1.0, S=1.0, f=1e4, beta=0.25, project=False)
def _execute(p, seed):
    """Cost-minimizing execution profile and baseline costs."""
    from . import execution as ex
    if p["kernel"] == "exponential":
        k = ex.ExponentialKernel(p["G0"], p["alpha"], p["G_inf"])
    elif p["kernel"] == "powerlaw":
        k = ex.PowerLawKernel(p["g0"], p["S"], p["f"], p["beta"])
    else:
        raise UsageError(f"unknown kernel {p['kernel']!r}; choose exponential or powerlaw")
    prob = ex.ExecutionProblem(p["V"], p["T"], k, p["n_g"])
    sol = ex.solve_profile(prob, project=p["project"])
    cf = ex.closed_form_profile(prob)
    rows = [{"t": t, "phi": f, "phi_closed_form": c} for t, f, c in zip(sol.t, sol.phi, cf.phi)]
    return OpResult({"cost": sol.cost, "closed_form_cost": cf.cost, "z": sol.z,
                     "atom_start": sol.atoms[0], "atom_end": sol.atoms[1],
                     "flat_cost": ex.execution_cost(ex.flat_profile(prob), prob)},
                    tables={"profile": rows})


@operation("mech_impact.zi", "mechanical impact replay", mu=1.0, rho=0.05, nu=0.2, band=50,
           n_events=40_000, n_samples=1000, tau_max=1000, kinds=["L", "M", "C"], start=5000)
def _mech(p, seed):
    """Mechanical and total impact by counterfactual replay on ZI flow."""
    from .counterfactual import mechanical_impact_average, sample_indices
    from .flow import ZiParams, gen_zero_intelligence
    run = gen_zero_intelligence(ZiParams(p["mu"], p["rho"], p["nu"], p["band"]), p["n_events"], seed)
    idx = sample_indices(run.events, p["n_samples"], kinds=tuple(p["kinds"]), start=p["start"],
                         tau_max=p["tau_max"])
    avg = mechanical_impact_average(run.events, None, idx, p["tau_max"], min_samples=1)
    return OpResult({"mech_1": float(avg.mech[0]), "turnover_lag": avg.turnover_lag(1.0),
                     "decay_exponent": avg.fit.exponent},
                    tables={"mech_impact": list(avg.rows())})


@operation("ingest.taq", "trade and quote ingestion", input=None)
def _ingest(p, seed):
    """Validate and normalize a TAQ file; counts of on/off-book trades."""
    if not p["input"]:
        raise UsageError("ingest.taq needs params.input")
    d = mio.ingest_taq(p["input"])
    return OpResult({"n_trades": len(d.ts), "n_on_book": int(d.on_book.sum()),
                     "n_off_book": int((~d.on_book).sum()), "n_quotes": len(d.quote_ts),
                     "n_quarantined": d.n_quarantined},
                    tables={"quarantine": [{"line": l, "ts": t, "bid": b, "ask": a}
                                           for l, t, b, a in d.quarantined]})


# ----------------------------------------------------------- orchestration

def load_config(src) -> dict:
    if isinstance(src, dict):
        return dict(src)
    with Path(src).open() as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise UsageError(f"{src}: config must be a mapping")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = {k: v for k, v in cfg.items() if k != "out"}
    return hashlib.sha256(json.dumps(canon, sort_keys=True, default=str).encode()).hexdigest()


def _validate(cfg: dict) -> tuple[str, dict, list, list]:
    op = cfg.get("operation")
    if op not in OPERATIONS:
        raise UsageError(f"unknown operation {op!r}; valid operations: {', '.join(sorted(OPERATIONS))}")
    extra = sorted(set(cfg) - {"operation", "params", "seed", "seeds", "sweep", "out"})
    if extra:
        raise UsageError(f"unknown config keys {extra}")
    params = dict(cfg.get("params") or {})
    if "seeds" in cfg and "seed" in cfg:
        raise UsageError("give either seed or seeds, not both")
    seeds = cfg.get("seeds", [cfg.get("seed", 0)])
    if isinstance(seeds, int):
        seeds = [seeds]
    seeds = [int(s) for s in seeds]
    sweep = cfg.get("sweep") or {}
    keys = sorted(sweep)
    cells = [dict(zip(keys, vals)) for vals in itertools.product(*(sweep[k] for k in keys))] or [{}]
    for c in cells:
        _merge(op, {**params, **c})
    return op, params, seeds, cells


def run_operation(name: str, params: dict, seed: int) -> OpResult:
    if name not in OPERATIONS:
        raise UsageError(f"unknown operation {name!r}; valid operations: {', '.join(sorted(OPERATIONS))}")
    p = _merge(name, params)
    try:
        return OPERATIONS[name].fn(p, seed)
    except UsageError:
        raise
    except Exception as e:
        raise ExperimentError(f"{name} failed with params={p} seed={seed}: {type(e).__name__}: {e}") from e


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_result(res: OpResult, op: str, run_dir: Path) -> dict:
    """Write one run's outputs; returns {relative file name: sha256}."""
    files = {}
    for name, c in res.curves.items():
        files[f"{op}.{name}.csv"] = mio.export_curve(c, run_dir / f"{op}.{name}.csv")
    for name, rows in res.tables.items():
        files[f"{op}.{name}.csv"] = mio.export_records(rows, run_dir / f"{op}.{name}.csv")
    for name, pt in res.points.items():
        files[f"{op}.{name}.jsonl"] = mio.export_phase_point(pt, run_dir / f"{op}.{name}.jsonl")
    if res.events is not None:
        files[f"{op}.events.csv"] = mio.export_events(res.events, run_dir / f"{op}.events.csv")
    sc = run_dir / f"{op}.scalars.json"
    sc.parent.mkdir(parents=True, exist_ok=True)
    sc.write_text(mio.dumps17({"operation": op, **res.scalars}) + "\n")
    files[sc.name] = sc
    return {k: _digest(v) for k, v in sorted(files.items())}


def summarize(runs: list[dict]) -> list[dict]:
    """Mean and SD (ddof=1) of every numeric scalar over runs."""
    keys = sorted({k for r in runs for k, v in r["scalars"].items()
                   if isinstance(v, (int, float)) and not isinstance(v, bool)})
    mean = {"row": "mean"}
    sd = {"row": "sd"}
    for k in keys:
        x = np.array([r["scalars"].get(k, math.nan) for r in runs], dtype=float)
        mean[k] = float(np.mean(x))
        sd[k] = float(np.std(x, ddof=1)) if len(x) > 1 else math.nan
    return [mean, sd]


def run_experiment(config, out=None) -> Path:
    """Run every cell and seed of ``config``; returns the artifact directory."""
    cfg = load_config(config)
    op, params, seeds, cells = _validate(cfg)
    h = config_hash(cfg)
    root = Path(out or cfg.get("out") or mio.output_root() / f"{op}-{h[:12]}")
    runs = []
    k = 0
    for cell in cells:
        for seed in seeds:
            p = {**params, **cell}
            res = run_operation(op, p, seed)
            name = f"run-{k:04d}"
            files = write_result(res, op, root / name)
            runs.append({"run": name, "seed": seed, "params": _merge(op, p),
                         "scalars": res.scalars, "files": files})
            k += 1
    summary = summarize(runs)
    rows = [{"row": r["run"], "seed": r["seed"], **r["scalars"]} for r in runs]
    mio.export_records(rows + summary, root / f"{op}.runs.csv")
    manifest = {"operation": op, "anchor": OPERATIONS[op].anchor, "version": __version__,
                "config": {k: v for k, v in cfg.items() if k != "out"},
                "config_hash": h, "runs": runs, "summary": summary}
    (root / "manifest.json").write_text(mio.dumps17(manifest) + "\n")
    return root
