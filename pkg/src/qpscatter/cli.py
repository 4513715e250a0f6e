"""Command line scenario runner: forward, inverse, roundtrip, surface-report and validate."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import glm
from .background import BackgroundOperator, DirichletData
from .errors import InvalidInput, ScatteringError
from .jost import Perturbation, PerturbedOperator, kernel, verify_decay
from .scattering import (
    ScatteringData,
    _background,
    _surface,
    dense_bound_states,
    scattering_data,
    validate_scattering_data,
)
from .surface import HyperellipticCurve

EXIT_PASS, EXIT_ERROR, EXIT_WARN = 0, 1, 2

DEFAULT_TOLERANCES = {"unitarity": 1e-8, "consistency": 1e-6, "roundtrip": 1e-6, "tail": 1e-10}
BUNDLED = ("free", "g0_single_site", "g1_two_site")


@dataclass
class ScenarioConfig:
    name: str
    edges: Tuple[float, ...]
    mus: Tuple[float, ...]
    sigmas: Tuple[int, ...]
    window: int = 40
    perturbation: Tuple[Tuple[int, float, float], ...] = ()
    grid: Optional[int] = None
    reconstruction_window: Tuple[int, int] = (-10, 10)
    kernel_window: int = 20
    depth: Optional[int] = None
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            edges = tuple(float(e) for e in d["edges"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput("config needs 'edges': a list of 2g+2 increasing numbers") from exc
        curve = HyperellipticCurve(edges)  # validates ordering and parity
        dd = d.get("dirichlet", {"mus": [], "sigmas": []})
        mus = tuple(float(m) for m in dd.get("mus", []))
        sigmas = tuple(int(s) for s in dd.get("sigmas", []))
        if len(mus) != curve.genus or len(sigmas) != curve.genus:
            raise InvalidInput("dirichlet needs %d mus and sigmas for genus %d" % (curve.genus, curve.genus))
        sites = []
        for item in d.get("perturbation", []):
            if len(item) != 3:
                raise InvalidInput("perturbation entries are [n, da, db], got %r" % (item,))
            sites.append((int(item[0]), float(item[1]), float(item[2])))
        window = int(d.get("window", 40))
        rw = tuple(int(v) for v in d.get("reconstruction_window", (-10, 10)))
        if len(rw) != 2 or rw[0] >= rw[1]:
            raise InvalidInput("reconstruction_window must be [lo, hi] with lo < hi")
        if window < 1:
            raise InvalidInput("window must be positive")
        tol = dict(DEFAULT_TOLERANCES)
        tol.update({k: float(v) for k, v in d.get("tolerances", {}).items()})
        grid = d.get("grid")
        cfg = cls(str(d.get("name", "scenario")), edges, mus, sigmas, window, tuple(sites),
                  None if grid is None else int(grid), rw, int(d.get("kernel_window", 20)),
                  None if d.get("depth") is None else int(d["depth"]), int(d.get("seed", 0)), tol)
        DirichletData(mus, sigmas).check(_surface(edges))
        PerturbedOperator(cfg.background(), cfg.pert)  # a(n) must stay positive
        return cfg

    @classmethod
    def load(cls, spec: str) -> "ScenarioConfig":
        """A path to a JSON file or the name of a bundled scenario."""
        p = Path(spec)
        if p.exists():
            text = p.read_text()
        elif spec in BUNDLED:
            text = resources.files("qpscatter").joinpath("configs/%s.json" % spec).read_text()
        else:
            raise InvalidInput("config %r is neither a file nor one of %s" % (spec, ", ".join(BUNDLED)))
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidInput("config is not valid JSON: %s" % exc) from exc

    @property
    def pert(self) -> Perturbation:
        return Perturbation.from_sites(self.perturbation)

    def background(self) -> BackgroundOperator:
        return _background(self.edges, self.mus, self.sigmas, self.window)

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def _write(out: Optional[Path], name: str, text: str) -> None:
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


# -- commands ------------------------------------------------------------

def run_forward(cfg: ScenarioConfig) -> Tuple[ScatteringData, dict]:
    op = cfg.background()
    pert = cfg.pert
    data = scattering_data(op, pert, grid=cfg.grid)
    val = validate_scattering_data(data, op_q=op)
    diag = data.diagnostics
    tol = cfg.tol("unitarity")
    checks = {
        "unitarity": max(diag["unitarity_plus"], diag["unitarity_minus"]) < tol,
        "consistency": diag["consistency"] < tol,
        "conjugation": diag["conjugation"] < tol,
        "validation": val.passed,
    }
    dense = dense_bound_states(op, pert) if not pert.is_zero else np.zeros(0)
    checks["bound_state_count"] = dense.size == len(data.bound_states)
    report = {
        "command": "forward",
        "scenario": cfg.name,
        "grid": int(data.lam.size),
        "T0": data.T0,
        "invariants": diag,
        "bound_states": [b.to_dict() for b in data.bound_states],
        "dense_oracle_size_400": dense.tolist(),
        "validation": val.clauses,
        "checks": checks,
        "status": "PASS" if all(checks.values()) else "WARN",
    }
    return data, report


def run_inverse(data: ScatteringData, cfg: Optional[ScenarioConfig], depth: Optional[int] = None,
                tol: Optional[float] = None) -> Tuple[Optional[glm.ReconstructionResult], dict]:
    op = data.background()
    val = validate_scattering_data(data, op_q=op)
    report = {"command": "inverse", "validation": val.clauses}
    if not val.passed:
        report.update(status="FAIL", reason="validation failed for clause(s) %s" % ",".join(val.failed()))
        return None, report
    nr = cfg.reconstruction_window if cfg is not None else (-10, 10)
    ctol = tol if tol is not None else (cfg.tol("consistency") if cfg is not None else DEFAULT_TOLERANCES["consistency"])
    tail = cfg.tol("tail") if cfg is not None else DEFAULT_TOLERANCES["tail"]
    d = depth if depth is not None else (cfg.depth if cfg is not None else None)
    res, sols, kers = glm.invert(data, nr, depth=d, tol_tail=tail, op_q=op, tol=ctol)
    cons = res.consistency()
    report.update({
        "reconstruction_window": list(nr),
        "consistency": cons,
        "consistency_tolerance": ctol,
        "diagnostics": res.diagnostics,
        "status": "PASS" if cons < ctol else "WARN",
    })
    return res, report


def run_roundtrip(cfg: ScenarioConfig, depth: Optional[int] = None, tol: Optional[float] = None,
                  seed: Optional[int] = None) -> dict:
    data, fwd = run_forward(cfg)
    res, inv = run_inverse(data, cfg, depth, tol)
    report = {"command": "roundtrip", "scenario": cfg.name, "forward": fwd, "inverse": inv}
    if res is None:
        report["status"] = "FAIL"
        return report
    op, pert = cfg.background(), cfg.pert
    a_true = op.a(res.n) + pert.da(res.n)
    b_true = op.b(res.n) + pert.db(res.n)
    err = float(max(np.max(np.abs(res.a - a_true)), np.max(np.abs(res.b - b_true))))
    one_sided = {}
    for s, (a, b) in {"plus": (res.a_plus, res.b_plus), "minus": (res.a_minus, res.b_minus)}.items():
        ok = np.isfinite(a) & np.isfinite(b)
        one_sided[s] = float(max(np.max(np.abs(a - a_true)[ok]), np.max(np.abs(b - b_true)[ok])))
    kw = cfg.kernel_window
    decay_K, decay_F, kernel_match = {}, {}, {}
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    qform = {}
    for side, key in ((1, "plus"), (-1, "minus")):
        Kq = kernel(op, pert, side, window=kw)
        rep = verify_decay(Kq, pert)
        decay_K[key] = {"C": rep.C, "max_beyond_support": rep.max_beyond_support, "passed": rep.passed}
        sol = res.K_plus if side > 0 else res.K_minus
        n0, n1 = sol.n_range
        diff = 0.0
        for n in range(max(n0, -kw), min(n1, kw) + 1):
            for m in range(-kw, kw + 1):
                diff = max(diff, abs(sol.K(n, m) - Kq(n, m)))
        kernel_match[key] = diff
        M = sol.depth
        l0, l1 = (n0, n1 + M) if side > 0 else (n0 - M, n1)  # covers every solved block
        ker = glm.assemble_F(data, op, side, l0, l1)
        fr = glm.verify_F_decay(ker, pert)
        decay_F[key] = {"C": fr.C, "max_beyond_support": fr.max_beyond_support, "passed": fr.passed}
        qform[key] = min(glm.quadratic_form_gap(ker, n, M, seed=int(rng.integers(2 ** 31))) for n in range(n0, n1 + 1))
    rtol = tol if tol is not None else cfg.tol("roundtrip")
    checks = {
        "forward": fwd["status"] == "PASS",
        "inverse": inv["status"] == "PASS",
        "roundtrip_error": err < rtol,
        "positivity": all(min(v) > 0 for v in inv["diagnostics"]["min_eigenvalue"].values()),
        "glm_residual": all(v < 1e-8 for v in inv["diagnostics"]["glm_residual"].values()),
        "kernel_match": all(v < 1e-7 for v in kernel_match.values()),
        "quadratic_form": all(v > -1e-8 for v in qform.values()),
    }
    report.update({
        "max_coefficient_error": err,
        "one_sided_error": one_sided,
        "roundtrip_tolerance": rtol,
        "decay_constant_K": decay_K,
        "decay_constant_F": decay_F,
        "kernel_vs_quadrature": kernel_match,
        "quadratic_form_gap": qform,
        "checks": checks,
        "status": "PASS" if all(checks.values()) else "WARN",
    })
    return report


def surface_report(cfg: ScenarioConfig, samples: int = 9) -> Tuple[dict, str]:
    sd = _surface(cfg.edges)
    rep = sd.report()
    E = sd.curve.E
    rows = ["kind,index,z,w_re,w_im"]
    for l in range(sd.genus + 1):
        t = np.linspace(0, 1, samples + 2)[1:-1]
        for z in E[2 * l] + t * (E[2 * l + 1] - E[2 * l]):
            w = complex(np.exp(sd.g(z + 0j)))
            rows.append("band,%d,%r,%r,%r" % (l, float(z), w.real, w.imag))
    for j in range(1, sd.genus + 1):
        lo, hi = sd.curve.gap(j)
        for z in lo + np.linspace(0, 1, samples + 2)[1:-1] * (hi - lo):
            w = complex(np.exp(sd.g(z + 0j)))
            rows.append("gap,%d,%r,%r,%r" % (j, float(z), w.real, w.imag))
    rep["slits"] = [{"gap": j, "w_lambda": [sd.slit(j)[0].real, sd.slit(j)[0].imag],
                     "w_edge": [sd.slit(j)[1].real, sd.slit(j)[1].imag]} for j in range(1, sd.genus + 1)]
    rep["edge_images"] = [[w.real, w.imag] for w in sd.edge_images]
    rep["command"] = "surface-report"
    rep["status"] = "PASS"
    return rep, "\n".join(rows) + "\n"


# -- entry point ---------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qpscatter", description=__doc__)
    p.add_argument("command", choices=("forward", "inverse", "roundtrip", "surface-report", "validate"))
    p.add_argument("--config", help="scenario JSON file or bundled name (%s)" % ", ".join(BUNDLED))
    p.add_argument("--data", help="scattering data interchange file (inverse, validate)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--grid", type=int, help="total number of circle nodes")
    p.add_argument("--depth", type=int, help="GLM truncation depth (default: from the F tail)")
    p.add_argument("--tol", type=float, help="consistency / round-trip tolerance")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    out = Path(args.out) if args.out else None
    try:
        cfg = ScenarioConfig.load(args.config) if args.config else None
        if cfg is not None and args.grid is not None:
            cfg.grid = args.grid
        if args.command in ("forward", "roundtrip", "surface-report") and cfg is None:
            raise InvalidInput("%s needs --config" % args.command)
        if args.command == "forward":
            data, report = run_forward(cfg)
            _write(out, "scattering_data.txt", data.dumps())
        elif args.command == "inverse":
            if not args.data:
                raise InvalidInput("inverse needs --data")
            data = ScatteringData.read(args.data)
            res, report = run_inverse(data, cfg, args.depth, args.tol)
            if res is not None:
                _write(out, "reconstruction.csv", res.to_csv())
        elif args.command == "roundtrip":
            report = run_roundtrip(cfg, args.depth, args.tol, args.seed)
        elif args.command == "surface-report":
            report, csv = surface_report(cfg)
            _write(out, "band_map.csv", csv)
        else:
            if not args.data:
                raise InvalidInput("validate needs --data")
            data = ScatteringData.read(args.data)
            val = validate_scattering_data(data)
            report = {"command": "validate", "validation": val.clauses, "details": val.to_dict(),
                      "status": "PASS" if val.passed else "FAIL"}
    except (ScatteringError, OSError) as exc:
        print(_dump({"command": args.command, "status": "ERROR", "error": type(exc).__name__, "message": str(exc)}))
        return EXIT_ERROR
    text = _dump(report)
    _write(out, "%s_report.json" % args.command.replace("-", "_"), text + "\n")
    print(text)
    return EXIT_PASS if report["status"] == "PASS" else EXIT_WARN


if __name__ == "__main__":
    sys.exit(main())
