"""Command-line interface: ``plan``, ``simulate``, ``verify``, ``constants``.

Exit codes: 0 ok, 2 bad config or inadmissible model, 3 plan/config hash
mismatch, 4 a verification check failed.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import coeffs, planner, sampler, spectra, verify, wavelets
from .errors import AdmissibilityError, BudgetTooTight, DomainError, WavesimError

log = logging.getLogger("wavesim")

EXIT_OK, EXIT_CONFIG, EXIT_PROVENANCE, EXIT_VERIFY = 0, 2, 3, 4
DEFICIT_POINTS = 64
DECAY_POINTS = 16
COVARIANCE_LAG = 0.25


class ConfigError(WavesimError, ValueError):
    pass


class ProvenanceError(WavesimError, ValueError):
    pass


@dataclass
class RunConfig:
    process: str
    s: int
    densities: list
    wavelets: list
    accuracy: planner.AccuracySpec
    seed: int = 0
    grid_points: int = 512
    replications: int = 200
    covariance_paths: int = 2000
    max_terms: int = planner.DEFAULT_MAX_TERMS
    margin: float = 1.0
    level_factor: int = 2
    term_factor: int = 4
    grid_step: float = coeffs.DEFAULT_GRID_STEP
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            process = d["process"]
            if process not in ("power", "product"):
                raise ConfigError(f"process must be 'power' or 'product', got {process!r}")
            keys = ["density", "density2"] if process == "product" else ["density"]
            wkeys = ["wavelet", "wavelet2"] if process == "product" else ["wavelet"]
            missing = [k for k in keys + wkeys if k not in d]
            if missing:
                raise ConfigError(f"{process} config needs {', '.join(missing)}")
            exponent = int(d.get("s", 1)) if process == "power" else 1
            if process == "power" and (exponent != d.get("s", 1) or exponent < 1):
                raise ConfigError("s must be a positive integer")
            acc = planner.AccuracySpec(float(d["epsilon"]), float(d["delta"]), float(d["p"]),
                                       float(d["T"]))
            if process == "power" and acc.p < 2:
                raise ConfigError("powers need p >= 2")
            cfg = cls(
                process=process, s=exponent,
                densities=[_density_spec(d[k]) for k in keys],
                wavelets=[_wavelet_spec(d[k]) for k in wkeys],
                accuracy=acc,
                seed=int(d.get("seed", 0)),
                grid_points=int(d.get("grid_points", 512)),
                replications=int(d.get("replications", 200)),
                covariance_paths=int(d.get("covariance_paths", 2000)),
                max_terms=int(d.get("max_terms", planner.DEFAULT_MAX_TERMS)),
                margin=float(d.get("margin", 1.0)),
                level_factor=int(d.get("reference", {}).get("level_factor", 2)),
                term_factor=int(d.get("reference", {}).get("term_factor", 4)),
                grid_step=float(d.get("grid_step", coeffs.DEFAULT_GRID_STEP)),
                raw=d,
            )
        except KeyError as e:
            raise ConfigError(f"missing config key {e}") from None
        except (TypeError, ValueError) as e:
            if isinstance(e, WavesimError):
                raise
            raise ConfigError(str(e)) from None
        if cfg.grid_points < verify.MIN_GRID:
            raise ConfigError(f"grid_points must be >= {verify.MIN_GRID}")
        if cfg.replications < 0 or cfg.covariance_paths < 0:
            raise ConfigError("replications must be >= 0")
        if cfg.level_factor < 2 or cfg.term_factor < 4:
            raise ConfigError("reference needs level_factor >= 2 and term_factor >= 4")
        if cfg.margin < 1.0:
            raise ConfigError("margin must be >= 1")
        return cfg

    def planning_subset(self) -> dict:
        return {"process": self.process, "s": self.s, "densities": self.densities,
                "wavelets": self.wavelets, "accuracy": self.accuracy.as_dict(),
                "max_terms": self.max_terms, "margin": self.margin}

    def config_hash(self) -> str:
        return _hash(self.planning_subset())

    def models(self):
        out = []
        for dens, wav in zip(self.densities, self.wavelets):
            params = {k: v for k, v in dens.items() if k != "family"}
            model = spectra.make_density(dens["family"], **params)
            out.append((model, _build_wavelet(wav)))
        return out


def _density_spec(d) -> dict:
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigError("density must be an object with a 'family' key")
    # validate eagerly so bad parameters surface as config errors
    spectra.make_density(d["family"], **{k: v for k, v in d.items() if k != "family"})
    return dict(d)


def _wavelet_spec(d) -> dict:
    if isinstance(d, str):
        d = {"family": d}
    spec = wavelets.WaveletSpec(d.get("family", "meyer"), d.get("order"),
                                int(d.get("product_depth", 24)))
    return spec.as_dict()


def _build_wavelet(d: dict) -> wavelets.WaveletTransforms:
    if d["family"] == "meyer":
        return wavelets.build_meyer()
    return wavelets.build_daubechies(d["order"], d.get("product_depth", 24))


def _hash(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return RunConfig.from_dict(doc)


# planning -------------------------------------------------------------------

def make_plan(cfg: RunConfig) -> dict:
    pairs = cfg.models()
    if cfg.process == "power":
        model, tr = pairs[0]
        plan = planner.plan_power(cfg.accuracy, cfg.s, model, tr, cfg.max_terms, cfg.margin)
        body = {"kind": "power", "plan": plan.as_dict()}
    else:
        (m1, t1), (m2, t2) = pairs
        plan = planner.plan_product(cfg.accuracy, m1, t1, m2, t2, cfg.max_terms, cfg.margin)
        body = {"kind": "product", "plan": plan.as_dict()}
    return {"config_hash": cfg.config_hash(), "accuracy": cfg.accuracy.as_dict(),
            "process": cfg.process, "s": cfg.s, **body}


def read_plan(path, cfg: RunConfig):
    doc = json.loads(Path(path).read_text())
    if doc.get("config_hash") != cfg.config_hash():
        raise ProvenanceError(
            f"plan was made for config {doc.get('config_hash')}, this config is {cfg.config_hash()}"
        )
    if doc["kind"] == "power":
        plan = planner.TruncationPlan.from_dict(doc["plan"])
        plans = [plan]
    else:
        plan = planner.ProductPlan.from_dict(doc["plan"])
        plans = [plan.plan1, plan.plan2]
    return doc, plan, plans


def plan_hash(doc: dict) -> str:
    return _hash(doc["plan"])


def build_caches(cfg: RunConfig, plans, n_levels=None, cache_dir=None):
    out = []
    for (model, tr), p in zip(cfg.models(), plans):
        n = n_levels(p) if n_levels else p.N
        key = coeffs.cache_key(model, tr, n, cfg.grid_step)
        path = Path(cache_dir) / f"{key}.npz" if cache_dir else None
        if path is not None and path.exists():
            out.append(coeffs.CoefficientCache.load(path, key))
            continue
        cache = coeffs.build_cache(p, model, tr, cfg.grid_step, T=cfg.accuracy.T, n_levels=n)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            cache.save(path)
        out.append(cache)
    return out


# commands -------------------------------------------------------------------

def cmd_plan(args) -> int:
    cfg = load_config(args.config)
    doc = make_plan(cfg)
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    log.info("plan written to %s", args.out)
    return EXIT_OK


def simulate_csv(cfg: RunConfig, doc, plans, seed: int, emit_base: bool, cache_dir=None) -> str:
    caches = build_caches(cfg, plans, cache_dir=cache_dir)
    times = sampler.time_grid(cfg.accuracy.T, cfg.grid_points)
    bases = []
    for i, (p, c) in enumerate(zip(plans, caches)):
        real = sampler.draw_coefficients(p, seed, replication=0, stream=i)
        bases.append(sampler.evaluate_base(real, c, times))
    if cfg.process == "power":
        path = sampler.power_path(bases[0], cfg.s)
    else:
        path = sampler.product_path(bases[0], bases[1])
    cols = [times, path.values]
    names = ["t", "value"]
    if emit_base:
        for i, b in enumerate(bases):
            cols.append(b.values)
            names.append("base" if len(bases) == 1 else f"base{i + 1}")
    buf = io.StringIO()
    buf.write(f"# seed={seed} plan_hash={plan_hash(doc)} config_hash={doc['config_hash']}"
              f" process={cfg.process}\n")
    np.savetxt(buf, np.column_stack(cols), fmt="%.17g", delimiter=",", header=",".join(names),
               comments="")
    return buf.getvalue()


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    doc, _, plans = read_plan(args.plan, cfg)
    seed = cfg.seed if args.seed is None else args.seed
    text = simulate_csv(cfg, doc, plans, seed, args.emit_base, args.cache_dir)
    Path(args.out).write_text(text)
    return EXIT_OK


def run_verification(cfg: RunConfig, doc, plan, plans, cache_dir=None) -> verify.VerificationReport:
    acc = cfg.accuracy
    pairs = cfg.models()
    refs = [p.scaled(cfg.level_factor, cfg.term_factor) for p in plans]
    caches = build_caches(cfg, plans, n_levels=lambda p: p.N * cfg.level_factor, cache_dir=cache_dir)
    consts = [p.constants or spectra.plan_constants(m, t) for p, (m, t) in zip(plans, pairs)]
    checks, details = {}, {}
    t64 = np.linspace(0.0, acc.T, DEFICIT_POINTS)
    worst_def, budget = -math.inf, math.nan
    for i, (p, ref, c, k) in enumerate(zip(plans, refs, caches, consts)):
        tag = "" if len(plans) == 1 else str(i + 1)
        d = verify.variance_deficit(p, c, k.R0, t64)
        dref = verify.variance_deficit(ref, c, k.R0, t64)
        checks[f"variance_deficit{tag}"] = d <= p.variance_budget
        checks[f"reference_deficit{tag}"] = dref <= p.variance_budget / 100.0
        decay = coeffs.verify_decay(p, k, c, np.linspace(0.0, acc.T, DECAY_POINTS),
                                    raise_on_violation=False)
        checks[f"decay_bounds{tag}"] = decay.ok
        details[f"deficit{tag}"] = {"max": d, "reference_max": dref, "budget": p.variance_budget}
        details[f"decay{tag}"] = decay.as_dict()
        details[f"cache_probe_error{tag}"] = c.probe_error
        if d - p.variance_budget > worst_def - budget or math.isnan(budget):
            worst_def, budget = d, p.variance_budget

    if cfg.replications > 0:
        proc = ("power", cfg.s) if cfg.process == "power" else ("product",)
        ref_plan = refs[0] if cfg.process == "power" else planner.ProductPlan(
            refs[0], refs[1], plan.delta_hat, plan.delta1_star, plan.delta2_star)
        rel = verify.empirical_reliability(plan, ref_plan, acc, proc, cfg.replications, cfg.seed,
                                           caches, cfg.grid_points)
        checks["reliability"] = rel.wilson_upper_95 <= acc.delta
        details["reliability"] = rel.details
    else:
        rel = verify.VerificationReport()
        details["reliability"] = "skipped (replications = 0)"

    cov_rows = []
    if cfg.covariance_paths >= 100:
        times = sampler.time_grid(acc.T, cfg.grid_points)
        ev = sampler.PathEvaluator(plans[0], caches[0], times)
        paths = np.array([ev.evaluate(sampler.draw_coefficients(plans[0], cfg.seed + 1, r)).values
                          for r in range(cfg.covariance_paths)])
        lag_max = float(times[-1] - times[0])
        lags = [0.0, _grid_lag(times, COVARIANCE_LAG), lag_max]
        est = verify.empirical_covariance(paths, times, lags)
        ok = True
        for (lag, e, se) in est:
            if lag == lag_max:
                target = None
                ok &= abs(e) <= consts[0].R0 + 3.0 * se
            else:
                target = verify.model_covariance(ev, lag)
                ok &= abs(e - target) <= 3.0 * se
            cov_rows.append([lag, e - target if target is not None else e, se])
        checks["covariance"] = bool(ok)
        mid = paths[:, times.size // 2]
        var = float(ev.energy()[times.size // 2])
        mc = verify.moment_inequality_check(mid, math.sqrt(var), 4.0)
        checks["moment_model_path"] = mc.passed
        details["moment_model_path"] = vars(mc)
    else:
        details["covariance"] = "skipped (fewer than 100 paths)"

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=(99,))))
    gauss = rng.standard_normal(100_000)
    for p in (2.0, 4.0, 6.0):
        mc = verify.moment_inequality_check(gauss, 1.0, p)
        checks[f"moment_gaussian_p{int(p)}"] = mc.passed

    return verify.VerificationReport(
        variance_deficit_max=worst_def, budget=budget,
        exceedance_count=rel.exceedance_count, replications=rel.replications,
        wilson_upper_95=rel.wilson_upper_95, covariance_errors=cov_rows,
        checks={k: bool(v) for k, v in checks.items()}, details=details,
        inputs={"config": cfg.raw, "config_hash": doc["config_hash"], "plan_hash": plan_hash(doc)},
    )


def _grid_lag(times, lag):
    dt = times[1] - times[0]
    return float(round(lag / dt) * dt)


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    doc, plan, plans = read_plan(args.plan, cfg)
    rep = run_verification(cfg, doc, plan, plans, args.cache_dir)
    Path(args.out).write_text(rep.to_json() + "\n")
    if not rep.passed:
        print(f"verification failed: {', '.join(rep.failing)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_constants(args) -> int:
    cfg = load_config(args.config)
    out = []
    for (model, tr) in cfg.models():
        adm = spectra.check_admissibility(model, tr)
        entry = {"density": model.describe(), "wavelet": tr.spec.as_dict(),
                 "C1": tr.C1, "C2": tr.C2, "admissibility": adm.as_dict()}
        if adm.ok:
            entry["constants"] = spectra.plan_constants(model, tr).as_dict()
        out.append(entry)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavesim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plan", help="compute truncation parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)
    p = sub.add_parser("simulate", help="write one model path as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--emit-base", action="store_true", help="also write the base path(s)")
    p.add_argument("--cache-dir")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("verify", help="run the deterministic and Monte Carlo checks")
    p.add_argument("--config", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache-dir")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("constants", help="print A, B, A1, B1, R(0) and admissibility")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_constants)
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except AdmissibilityError as e:
        print(f"inadmissible model: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, DomainError, BudgetTooTight) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ProvenanceError as e:
        print(f"provenance mismatch: {e}", file=sys.stderr)
        return EXIT_PROVENANCE


if __name__ == "__main__":
    sys.exit(main())
