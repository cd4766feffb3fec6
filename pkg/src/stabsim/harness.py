"""Seeded Monte Carlo engine: experiment configs, trial dispatch, sweeps,
scaling fits, tail estimates, and bound audits."""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .bounds import BoundParams, eval_bound
from .lattice import Region
from .linalg import EigHermitian
from .metrics import ErrorSample, delta_worst, embed_observable, expectation
from .noise import (
    ConstantPerturbation,
    DigitalNoiseSpec,
    GaussianProcessSpec,
    LindbladSpec,
    NoiseRealization,
    ProcessPerturbation,
    adversarial_probes,
    dephasing_directions,
    evolve_analog,
    evolve_white_noise,
    lindblad_propagate,
    noise_directions,
    perturbed_product_apply,
    perturbed_product_unitary,
    sample_gaussian_paths,
)
from .operators import (
    PerturbationEnsemble,
    as_rng,
    assemble_dense,
    embed_operator,
    model_from_dict,
    observable_from_dict,
    observable_radius,
    truncate,
)
from .trotter import suzuki_plan

NOISE_MODELS = (
    "M1",
    "M2",
    "DiscreteIto",
    "AnalogTimeIndependent",
    "AnalogGaussianProcess",
    "AnalogWhiteNoise",
    "Lindblad",
)

CSV_COLUMNS = (
    "model",
    "d",
    "p",
    "n",
    "l",
    "t",
    "delta",
    "lambda",
    "seed",
    "trial",
    "delta_rho",
    "delta_wc",
    "hs_distance",
    "bound_rhs",
    "flags",
    "runtime_ms",
)


class ConfigError(ValueError):
    """Malformed experiment configuration."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_NOISE_KEYS = {
    "model": str,
    "delta": (int, float),
    "lambda": (int, float, str, type(None)),
    "m": int,
    "ensemble": str,
    "dt": (int, float, type(None)),
    "n_grid": (int, type(None)),
    "trials": int,
    "probe_mode": bool,
    "n_random_probes": int,
    "analog_tol": (int, float),
    "record_wc": bool,
    "directions": str,
}

_GRID_KEYS = {"t": list, "delta": list, "n": list, "l": list, "p": list, "lambda": list}

_TOP_KEYS = {
    "model": dict,
    "observable": dict,
    "initial_state": str,
    "noise": dict,
    "grid": dict,
    "trials": int,
    "master_seed": int,
    "theorems": list,
}


def _check_keys(doc: dict, schema: dict, where: str) -> None:
    unknown = set(doc) - set(schema)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    for key, val in doc.items():
        expected = schema[key]
        if isinstance(expected, tuple) or isinstance(expected, type):
            if not isinstance(val, expected):
                raise ConfigError(f"{where}.{key} has type {type(val).__name__}")


def _parse_lambda(value):
    if value is None:
        return math.inf
    if isinstance(value, str):
        if value not in ("inf", "Infinity"):
            raise ConfigError(f"lambda must be a number or 'inf', got {value!r}")
        return math.inf
    return float(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description; canonically serializable."""

    model: dict
    observable: dict
    noise: dict
    grid: dict
    trials: int
    master_seed: int
    theorems: tuple[str, ...] = ()
    initial_state: str = "zero"

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        _check_keys(doc, _TOP_KEYS, "config")
        for req in ("model", "observable", "noise", "grid", "trials", "master_seed"):
            if req not in doc:
                raise ConfigError(f"config is missing {req!r}")
        _check_keys(doc["noise"], _NOISE_KEYS, "noise")
        _check_keys(doc["grid"], _GRID_KEYS, "grid")
        if doc["noise"].get("model") not in NOISE_MODELS:
            raise ConfigError(f"noise.model must be one of {NOISE_MODELS}")
        if doc["trials"] < 1:
            raise ConfigError("trials must be >= 1")
        if not any(doc["grid"].values()):
            raise ConfigError("grid must be nonempty")
        return cls(
            model=doc["model"],
            observable=doc["observable"],
            noise=dict(doc["noise"]),
            grid={k: list(v) for k, v in doc["grid"].items()},
            trials=int(doc["trials"]),
            master_seed=int(doc["master_seed"]),
            theorems=tuple(doc.get("theorems", ())),
            initial_state=doc.get("initial_state", "zero"),
        )

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "observable": self.observable,
            "initial_state": self.initial_state,
            "noise": self.noise,
            "grid": self.grid,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "theorems": list(self.theorems),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def points(self) -> list[dict]:
        """Cross product of the grid axes, with noise-section defaults."""
        axes = {
            "t": self.grid.get("t") or [1.0],
            "delta": self.grid.get("delta") or [self.noise.get("delta", 0.0)],
            "n": self.grid.get("n") or [None],
            "l": self.grid.get("l") or ["full"],
            "p": self.grid.get("p") or [2],
            "lambda": self.grid.get("lambda") or [self.noise.get("lambda")],
        }
        out = []
        for t in axes["t"]:
            for delta in axes["delta"]:
                for n in axes["n"]:
                    for l in axes["l"]:
                        for p in axes["p"]:
                            for lam in axes["lambda"]:
                                out.append(
                                    {
                                        "t": float(t),
                                        "delta": float(delta),
                                        "n": None if n is None else int(n),
                                        "l": l,
                                        "p": int(p),
                                        "lambda": _parse_lambda(lam),
                                    }
                                )
        return out


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply key=value overrides (dotted paths, JSON-literal values)."""
    out = json.loads(json.dumps(doc))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        path, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = path.split(".")
        for part in parts[:-1]:
            if part not in node:
                raise ConfigError(f"override path {path!r} not in config")
            node = node[part]
        leaf = parts[-1]
        if leaf not in node:
            raise ConfigError(f"override path {path!r} not in config")
        old = node[leaf]
        if old is not None and value is not None and not isinstance(value, type(old)):
            if not (isinstance(old, float) and isinstance(value, int)):
                raise ConfigError(
                    f"override {path!r}: type {type(value).__name__} != {type(old).__name__}"
                )
        node[leaf] = value
    return out


# ---------------------------------------------------------------------------
# Point context: cached heavy state per sweep
# ---------------------------------------------------------------------------


def _product_state(sites, kind: str, master_seed: int) -> np.ndarray:
    """Product state whose per-site factor depends only on the site coordinate,
    so restrictions to subregions agree with the full-lattice state."""
    plus = np.array([1.0, 1.0]) / math.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / math.sqrt(2.0)
    zero = np.array([1.0, 0.0])
    one = np.array([0.0, 1.0])
    psi = np.array([1.0 + 0j])
    for site in sites:
        if kind == "zero":
            local = zero
        elif kind == "one":
            local = one
        elif kind == "plus":
            local = plus
        elif kind == "minus":
            local = minus
        elif kind == "neel":
            local = zero if sum(site) % 2 == 0 else one
        elif kind == "random_product":
            rng = as_rng((master_seed, 0x1217) + tuple(site))
            theta, phi = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
            local = np.array([math.cos(theta / 2), math.sin(theta / 2) * np.exp(1j * phi)])
        else:
            raise ConfigError(f"unknown initial state {kind!r}")
        psi = np.kron(psi, local)
    return psi.astype(complex)


class SweepContext:
    """Caches the Hamiltonian, reference evolutions, and per-l truncations."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.ham = model_from_dict(config.model)
        self.obs = observable_from_dict(config.observable, self.ham.lattice)
        self.l_full = sum(self.ham.lattice.extent) + 2
        self._truncs: dict[int, object] = {}
        self._eigs: dict[int, EigHermitian] = {}
        self._dirs: dict[tuple, object] = {}
        self._probes: dict[tuple, list] = {}
        self.full = self.trunc(self.l_full)
        self.psi0_by_region: dict[Region, np.ndarray] = {}
        self.r_o = observable_radius(self.obs.support)

    def trunc(self, l) -> object:
        l_int = self.l_full if l in (None, "full") else int(l)
        if l_int not in self._truncs:
            self._truncs[l_int] = truncate(self.ham, self.obs, l_int)
        return self._truncs[l_int]

    def eig(self, l) -> EigHermitian:
        l_int = self.l_full if l in (None, "full") else int(l)
        if l_int not in self._eigs:
            self._eigs[l_int] = EigHermitian.of(assemble_dense(self.trunc(l_int)))
        return self._eigs[l_int]

    def psi0(self, region: Region) -> np.ndarray:
        if region not in self.psi0_by_region:
            self.psi0_by_region[region] = _product_state(
                region.sites, self.config.initial_state, self.config.master_seed
            )
        return self.psi0_by_region[region]

    def exact_expectation(self, t: float) -> float:
        o_full = embed_observable(self.obs, self.full.region)
        psi = self.eig(self.l_full).apply_propagator(t, self.psi0(self.full.region))
        return expectation(o_full, psi)

    def directions(self, l, m: int):
        trunc = self.trunc(l)
        key = (trunc.l, m)
        if key not in self._dirs:
            kind = self.config.noise.get("directions", "ensemble")
            if kind == "dephasing":
                self._dirs[key] = dephasing_directions(trunc)
            elif kind == "ensemble":
                ens = PerturbationEnsemble(self.config.noise.get("ensemble", "gue_normalized"))
                self._dirs[key] = noise_directions(
                    trunc, m, (self.config.master_seed, 0xD1D5, trunc.l, m), ens
                )
            else:
                raise ConfigError(f"unknown noise directions kind {kind!r}")
        return self._dirs[key]

    def probes(self, l, t: float):
        trunc = self.trunc(l)
        key = (trunc.l, round(t, 12))
        if key not in self._probes:
            ens = PerturbationEnsemble(self.config.noise.get("ensemble", "gue_normalized"))
            self._probes[key] = adversarial_probes(
                trunc,
                self.obs,
                t,
                n_random=int(self.config.noise.get("n_random_probes", 32)),
                seed=(self.config.master_seed, 0xBE5, trunc.l),
                ensemble=ens,
            )
        return self._probes[key]

    def bound_params(self, point: dict, trunc) -> BoundParams:
        c = self.ham.constants
        return BoundParams(
            d=c.d,
            R=c.R,
            R_O=max(c.R_O, self.r_o),
            norm_O=self.obs.norm,
            supp_O_size=len(self.obs.support),
            t=point["t"],
            delta=point["delta"],
            p=point["p"],
            n=point["n"],
            l=float(trunc.l),
            lam=point.get("lambda"),
            m=int(self.config.noise.get("m", 1)),
            theta_count=len(trunc.theta),
            n_jumps=int(self.config.noise.get("m", 1)) * len(trunc.theta),
        )


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------


def run_trial(ctx: SweepContext, point: dict, point_index: int, trial_index: int) -> ErrorSample:
    """One seeded trial at a grid point; deterministic in (master_seed, indices)."""
    start = time.perf_counter()
    cfg = ctx.config
    noise_cfg = cfg.noise
    model = noise_cfg["model"]
    trunc = ctx.trunc(point["l"])
    region = trunc.region
    full_region = ctx.full.region
    same_region = region == full_region
    psi0 = ctx.psi0(region)
    exact_value = ctx.exact_expectation(point["t"])
    o_region = embed_observable(ctx.obs, region)
    realization = NoiseRealization(
        master_seed=cfg.master_seed, trial_index=trial_index, stream=(point_index,)
    )
    t, delta = point["t"], point["delta"]
    probe_mode = bool(noise_cfg.get("probe_mode", False))
    delta_wc = None
    hs = None

    if model in ("M1", "M2", "DiscreteIto"):
        plan = suzuki_plan(point["p"], point["n"])
        spec = DigitalNoiseSpec(
            model=model, delta=delta, ensemble=PerturbationEnsemble(noise_cfg.get("ensemble", "gue_normalized"))
        )
        if probe_mode:
            probes = ctx.probes(point["l"], t)
            source = probes[trial_index % len(probes)]
        else:
            source = realization
        want_wc = probe_mode or bool(noise_cfg.get("record_wc", False))
        if want_wc and trunc.dim <= 256:
            noisy_u = perturbed_product_unitary(plan, trunc, t, spec, source)
            psi_noisy = noisy_u @ psi0
            u_lift = embed_operator(noisy_u, region, full_region)
            delta_wc = delta_worst(
                ctx.obs, full_region, ctx.eig(ctx.l_full).propagator(t), u_lift
            )
        else:
            psi_noisy = perturbed_product_apply(plan, trunc, t, spec, source, psi0)
    elif model == "AnalogTimeIndependent":
        if probe_mode:
            probes = ctx.probes(point["l"], t)
            frozen = probes[trial_index % len(probes)]
            from .noise import NoiseDirections

            dirs = NoiseDirections(
                local_ops=frozen.ops, supports=tuple(term.support for term in trunc.terms)
            )
        else:
            ens = PerturbationEnsemble(noise_cfg.get("ensemble", "gue_normalized"))
            dirs = noise_directions(trunc, 1, realization.rng(0xA11))
        pert = ConstantPerturbation(directions=dirs)
        if trunc.dim <= 256:
            noisy_u = evolve_analog(trunc, pert, delta, t)
            psi_noisy = noisy_u @ psi0
            u_lift = embed_operator(noisy_u, region, full_region)
            delta_wc = delta_worst(ctx.obs, full_region, ctx.eig(ctx.l_full).propagator(t), u_lift)
        else:
            psi_noisy = evolve_analog(trunc, pert, delta, t, psi0=psi0)
    elif model == "AnalogGaussianProcess":
        gspec = GaussianProcessSpec(
            m=int(noise_cfg.get("m", 1)),
            lam=point["lambda"] if point.get("lambda") is not None else math.inf,
            grid_dt=noise_cfg.get("dt"),
        )
        dirs = ctx.directions(point["l"], gspec.m)
        n_grid = noise_cfg.get("n_grid") or gspec.n_grid(t)
        times, paths = sample_gaussian_paths(gspec, t, n_grid, len(dirs), realization)
        pert = ProcessPerturbation(times=times, paths=paths, directions=dirs)
        psi_noisy = evolve_analog(
            trunc, pert, delta, t, tol=float(noise_cfg.get("analog_tol", 1e-6)), psi0=psi0
        )
    elif model == "AnalogWhiteNoise":
        dirs = ctx.directions(point["l"], int(noise_cfg.get("m", 1)))
        psi_noisy, _ = evolve_white_noise(
            trunc, dirs, delta, t, noise_cfg.get("dt"), realization, psi0
        )
    elif model == "Lindblad":
        dirs = ctx.directions(point["l"], int(noise_cfg.get("m", 1)))
        spec = LindbladSpec(
            jumps=tuple(zip(dirs.local_ops, dirs.supports)), delta=delta
        )
        rho0 = np.outer(psi0, psi0.conj())
        rho_t = lindblad_propagate(trunc, spec, rho0, t)
        psi_noisy = rho_t  # density matrix output
    else:
        raise ConfigError(f"unhandled noise model {model!r}")

    noisy_value = expectation(o_region, psi_noisy)
    delta_rho = abs(exact_value - noisy_value)
    if same_region and psi_noisy.ndim == 1:
        psi_exact = ctx.eig(point["l"]).apply_propagator(t, psi0)
        hs = float(np.linalg.norm(psi_noisy - psi_exact))
    runtime_ms = (time.perf_counter() - start) * 1e3
    return ErrorSample(
        delta_rho=delta_rho,
        delta_wc=delta_wc,
        hs_distance=hs,
        norm_O=ctx.obs.norm,
        metadata={
            "point_index": point_index,
            "trial": trial_index,
            "runtime_ms": runtime_ms,
            "norm_warning": realization.diagnostics.get("norm_warning", False),
            **{k: point[k] for k in ("t", "delta", "n", "l", "p", "lambda")},
        },
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    config: ExperimentConfig
    points: list[dict]
    samples: list[list[ErrorSample]]
    bound_reports: list[dict]
    runtime_s: float = 0.0

    def summary(self) -> list[dict]:
        out = []
        for idx, (point, samples) in enumerate(zip(self.points, self.samples)):
            vals = np.array([s.delta_rho for s in samples])
            wc = [s.delta_wc for s in samples if s.delta_wc is not None]
            hs = [s.hs_distance for s in samples if s.hs_distance is not None]
            entry = {
                "point_index": idx,
                **{k: point[k] for k in ("t", "delta", "n", "l", "p")},
                "lambda": point.get("lambda"),
                "trials": len(samples),
                "mean": float(vals.mean()),
                "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                "stderr": float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0,
                "max": float(vals.max()),
                "q50": float(np.quantile(vals, 0.5)),
                "q90": float(np.quantile(vals, 0.9)),
                "q99": float(np.quantile(vals, 0.99)),
                "max_delta_wc": float(max(wc)) if wc else None,
                "mean_hs_sq": float(np.mean([h**2 for h in hs])) if hs else None,
                "stderr_hs_sq": (
                    float(np.std([h**2 for h in hs], ddof=1) / math.sqrt(len(hs)))
                    if len(hs) > 1
                    else 0.0
                ),
                "bounds": {k: v["rhs"] for k, v in self.bound_reports[idx].items()},
            }
            out.append(entry)
        return out


def _format_float(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _csv_row(cfg: ExperimentConfig, point: dict, sample: ErrorSample, bound_rhs, flags: str) -> str:
    meta = sample.metadata
    fields = [
        cfg.model.get("model", "custom"),
        str(cfg.model["d"]),
        str(point["p"]),
        "" if point["n"] is None else str(point["n"]),
        str(point["l"]),
        _format_float(point["t"]),
        _format_float(point["delta"]),
        "inf" if point.get("lambda") in (math.inf, None) else _format_float(point["lambda"]),
        str(cfg.master_seed),
        str(meta["trial"]),
        _format_float(sample.delta_rho),
        _format_float(sample.delta_wc),
        _format_float(sample.hs_distance),
        _format_float(bound_rhs),
        flags,
        _format_float(meta["runtime_ms"]),
    ]
    return ",".join(fields)


def run_sweep(config: ExperimentConfig, out_dir: str | None = None, resume: bool = True) -> SweepResult:
    """Execute the whole grid; order-independent reduction, incremental JSONL."""
    t0 = time.perf_counter()
    ctx = SweepContext(config)
    points = [{**p, "l": ctx.trunc(p["l"]).l} for p in config.points()]
    digest = config.digest()
    jsonl_path = csv_path = summary_path = None
    done: set[tuple[int, int]] = set()
    records: dict[tuple[int, int], dict] = {}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        jsonl_path = os.path.join(out_dir, "results.jsonl")
        csv_path = os.path.join(out_dir, "results.csv")
        summary_path = os.path.join(out_dir, "summary.json")
        if resume and os.path.exists(jsonl_path):
            with open(jsonl_path, encoding="utf-8") as fh:
                for line in fh:
                    rec = json.loads(line)
                    if rec.get("config") == digest:
                        done.add((rec["point_index"], rec["trial"]))
                        records[(rec["point_index"], rec["trial"])] = rec
        if done:
            pass
        elif os.path.exists(jsonl_path):
            os.remove(jsonl_path)

    bound_reports = []
    for point in points:
        trunc = ctx.trunc(point["l"])
        par = ctx.bound_params(point, trunc)
        reports = {}
        for theorem in config.theorems:
            try:
                reports[theorem] = eval_bound(theorem, par).as_dict()
            except Exception as err:  # noqa: BLE001 - keep the sweep running
                reports[theorem] = {"error": str(err), "rhs": None}
        bound_reports.append(reports)

    pending = [
        (pi, ti)
        for pi in range(len(points))
        for ti in range(config.trials)
        if (pi, ti) not in done
    ]
    threads = int(os.environ.get("STABSIM_THREADS", "1"))

    def work(item):
        pi, ti = item
        sample = run_trial(ctx, points[pi], pi, ti)
        return pi, ti, sample

    results: list[tuple[int, int, ErrorSample]] = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, pending))
    else:
        results = [work(item) for item in pending]

    fh = open(jsonl_path, "a", encoding="utf-8") if jsonl_path else None
    try:
        for pi, ti, sample in results:
            rec = {
                "config": digest,
                "point_index": pi,
                "trial": ti,
                "delta_rho": sample.delta_rho,
                "delta_wc": sample.delta_wc,
                "hs_distance": sample.hs_distance,
                "runtime_ms": sample.metadata["runtime_ms"],
                "norm_warning": sample.metadata.get("norm_warning", False),
            }
            records[(pi, ti)] = rec
            if fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    finally:
        if fh:
            fh.close()

    samples: list[list[ErrorSample]] = [[] for _ in points]
    by_key = {(pi, ti): s for pi, ti, s in results}
    for pi, point in enumerate(points):
        for ti in range(config.trials):
            if (pi, ti) in by_key:
                samples[pi].append(by_key[(pi, ti)])
            else:
                rec = records[(pi, ti)]
                samples[pi].append(
                    ErrorSample(
                        delta_rho=rec["delta_rho"],
                        delta_wc=rec["delta_wc"],
                        hs_distance=rec["hs_distance"],
                        norm_O=ctx.obs.norm,
                        metadata={
                            "point_index": pi,
                            "trial": ti,
                            "runtime_ms": rec["runtime_ms"],
                            "norm_warning": rec.get("norm_warning", False),
                            **{k: point[k] for k in ("t", "delta", "n", "l", "p", "lambda")},
                        },
                    )
                )

    result = SweepResult(
        config=config,
        points=points,
        samples=samples,
        bound_reports=bound_reports,
        runtime_s=time.perf_counter() - t0,
    )
    if out_dir is not None:
        _write_csv(csv_path, config, result)
        with open(summary_path, "w", encoding="utf-8") as sfh:
            json.dump(
                {"config": digest, "runtime_s": result.runtime_s, "points": result.summary()},
                sfh,
                indent=2,
                sort_keys=True,
                default=_json_default,
            )
    return result


def _json_default(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    raise TypeError(f"not JSON serializable: {x!r}")


def _write_csv(path: str, config: ExperimentConfig, result: SweepResult) -> None:
    first_theorem = config.theorems[0] if config.theorems else None
    lines = [",".join(CSV_COLUMNS)]
    for pi, (point, samples) in enumerate(zip(result.points, result.samples)):
        rhs = None
        flags = ""
        if first_theorem and result.bound_reports[pi].get(first_theorem):
            report = result.bound_reports[pi][first_theorem]
            rhs = report.get("rhs")
            assumptions = report.get("assumptions") or {}
            bad = [k for k, ok in assumptions.items() if not ok]
            flags = "ok" if not bad else "fail:" + "|".join(sorted(bad))
        for sample in sorted(samples, key=lambda s: s.metadata["trial"]):
            lines.append(_csv_row(config, point, sample, rhs, flags))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Fits, tails, audits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    stderr: float
    r2: float
    window: tuple[float, float]
    n_points: int
    log_correction_q: float = 0.0


def _ols_loglog(xs: np.ndarray, ys: np.ndarray):
    lx, ly = np.log(xs), np.log(ys)
    n = len(lx)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    denom = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(ss_res / max(n - 2, 1) / denom) if denom > 0 else 0.0
    return slope, stderr, r2


def fit_scaling(points: list[tuple[float, float]], window: str = "auto", log_correction_q: float = 0.0) -> ScalingFit:
    """Least-squares slope of log y vs log x.

    window="auto" drops smallest-x points until r^2 >= 0.98 or 4 points remain.
    A positive log_correction_q divides y by log^q(1/y_pred) before refitting,
    for auditing targets stated only up to logarithmic factors.
    """
    pts = sorted((float(x), float(y)) for x, y in points)
    if len(pts) < 4:
        raise ConfigError("fit needs at least 4 points")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ConfigError("fit needs positive data")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if log_correction_q > 0:
        slope, _, _ = _ols_loglog(xs, ys)
        intercept = float(np.mean(np.log(ys) - slope * np.log(xs)))
        pred = np.exp(intercept) * xs**slope
        corr = np.log(1.0 / np.minimum(pred, 0.9)) ** log_correction_q
        ys = ys / corr
    lo = 0
    while True:
        slope, stderr, r2 = _ols_loglog(xs[lo:], ys[lo:])
        if window != "auto" or r2 >= 0.98 or len(xs) - lo <= 4:
            return ScalingFit(
                exponent=float(slope),
                stderr=float(stderr),
                r2=float(r2),
                window=(float(xs[lo]), float(xs[-1])),
                n_points=len(xs) - lo,
                log_correction_q=log_correction_q,
            )
        lo += 1


def tail_estimate(samples: list[float], thresholds: list[float]) -> list[dict]:
    """Empirical exceedance with exact Clopper-Pearson 99% upper bounds."""
    if len(samples) < 100:
        raise ConfigError("tail estimation needs at least 100 samples")
    arr = np.asarray(samples)
    n = len(arr)
    out = []
    for thr in thresholds:
        k = int(np.sum(arr >= thr))
        upper = 1.0 if k == n else float(stats.beta.ppf(0.99, k + 1, n - k))
        out.append({"threshold": float(thr), "exceedances": k, "frequency": k / n, "upper99": upper})
    return out


def binomial_tail_ok(k: int, n: int, p_bound: float, alpha: float = 0.01) -> bool:
    """One-sided test: reject domination only if k is implausibly high under p_bound."""
    if p_bound >= 1.0:
        return True
    return float(stats.binom.sf(k - 1, n, p_bound)) >= alpha


WORST_CASE_THEOREMS = {"T1", "T2", "T3", "trotter", "truncation"}
EXPECTATION_THEOREMS = {"T4", "T5", "T5b", "T6", "T7", "T8", "T9"}


def audit_bounds(sweep: SweepResult, rhs_scale: float = 1.0, tol: float = 1e-9) -> list[dict]:
    """Compare measured errors against the evaluated bounds.

    Worst-case theorems must dominate every realization (raw samples);
    expectation theorems must dominate the Monte Carlo mean minus twice its
    standard error.  Returns the violation list (empty = pass).
    """
    violations = []
    for pi, (point, samples) in enumerate(zip(sweep.points, sweep.samples)):
        for theorem, report in sweep.bound_reports[pi].items():
            rhs = report.get("rhs")
            if rhs is None:
                violations.append({"point_index": pi, "theorem": theorem, "error": report.get("error")})
                continue
            rhs = rhs * rhs_scale
            if theorem in WORST_CASE_THEOREMS:
                for sample in samples:
                    measured = sample.delta_wc if sample.delta_wc is not None else sample.delta_rho
                    if measured > rhs + tol:
                        violations.append(
                            {
                                "point_index": pi,
                                "theorem": theorem,
                                "trial": sample.metadata["trial"],
                                "measured": measured,
                                "rhs": rhs,
                                "point": point,
                            }
                        )
            else:
                if theorem == "T5b":
                    vals = [s.delta_wc for s in samples if s.delta_wc is not None]
                else:
                    vals = [s.delta_rho for s in samples]
                if not vals:
                    continue
                arr = np.asarray(vals)
                stderr = arr.std(ddof=1) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
                if arr.mean() - 2 * stderr > rhs + tol:
                    violations.append(
                        {
                            "point_index": pi,
                            "theorem": theorem,
                            "mean": float(arr.mean()),
                            "stderr": float(stderr),
                            "rhs": rhs,
                            "point": point,
                        }
                    )
    return violations
