"""Named verification experiments driven by JSON configurations."""

from dataclasses import dataclass, field
import copy
import json
import os
import time

import jsonschema
import numpy as np

from .assembly import SEGMENTS, BoundaryCondition, default_zero_tol
from .asymptotics import compute_boundary_form, eigenvalue_expansion_fit, verify_small_tau_morse
from .dtn import dump_dtn_trace
from .exceptions import ConfigError, InputError, MorseMaslovError
from .grid import PotentialField, build_square_grid
from .maslov import (
    MaslovProblem,
    maslov_index_crossing_form,
    maslov_index_spectral_flow,
    write_crossing_table,
    write_eigenvalue_trace,
    write_phase_trace,
)
from .symplectic import principal_angles

EXPERIMENTS = (
    "verify-dirichlet",
    "verify-neumann",
    "verify-robin-scalar",
    "loop-zero",
    "dtn-diagnostics",
    "asymptotics",
)
OUT_ENV = "MORSE_MASLOV_OUT"

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["domain", "potential", "bc", "path"],
    "additionalProperties": False,
    "properties": {
        "domain": {
            "type": "object",
            "required": ["d", "n"],
            "additionalProperties": False,
            "properties": {"d": {"enum": [1, 2]}, "n": {"type": "integer", "minimum": 5}},
        },
        "N": {"type": "integer", "minimum": 1},
        "potential": {
            "oneOf": [
                {"type": "object", "required": ["type", "matrix"], "additionalProperties": False,
                 "properties": {"type": {"const": "constant"}, "matrix": _matrix}},
                {"type": "object", "required": ["type", "terms"], "additionalProperties": False,
                 "properties": {
                     "type": {"const": "polynomial"},
                     "terms": {"type": "array", "minItems": 1, "items": {
                         "type": "object", "required": ["powers", "matrix"],
                         "additionalProperties": False,
                         "properties": {
                             "powers": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                             "matrix": _matrix}}}}},
                {"type": "object", "required": ["type", "name"], "additionalProperties": False,
                 "properties": {"type": {"const": "builtin"}, "name": {"type": "string"},
                                "params": {"type": "object"}}},
            ]
        },
        "bc": {
            "oneOf": [
                {"type": "object", "required": ["type"], "additionalProperties": False,
                 "properties": {"type": {"enum": ["dirichlet", "neumann"]}}},
                {"type": "object", "required": ["type", "theta"], "additionalProperties": False,
                 "properties": {"type": {"const": "robin"},
                                "theta": {"oneOf": [{"type": "number"}, _matrix]}}},
                {"type": "object", "required": ["type", "table"], "additionalProperties": False,
                 "properties": {"type": {"const": "matrix_theta"}, "table": _matrix}},
            ]
        },
        "path": {
            "type": "object",
            "required": ["tau"],
            "additionalProperties": False,
            "properties": {
                "tau": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "Lambda": {"oneOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 4},
                "refine_tol": {"type": "number", "exclusiveMinimum": 0},
                "dtn_samples": {"type": "integer", "minimum": 1},
                "tau_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "output_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULT_SOLVER = {"n_samples": 200, "refine_tol": 1e-10, "dtn_samples": 12,
                  "tau_grid": [2.0**-p for p in range(4, 10)]}


def _builtin(name, params, d):
    """Named potentials: ``well`` (``-depth + curvature |x|^2``) and ``coupled_well`` (N=2)."""
    if name == "well":
        depth = float(params.get("depth", 30.0))
        curv = float(params.get("curvature", 0.0))
        terms = [((0,) * d, [[-depth]])]
        for a in range(d):
            p = [0] * d
            p[a] = 2
            terms.append((tuple(p), [[curv]]))
        return PotentialField.polynomial(terms)
    if name == "coupled_well":
        v0 = np.asarray(params.get("V0", [[0.5, 0.2], [0.2, -1.0]]), dtype=float)
        terms = [((0,) * d, v0), ((2,) + (0,) * (d - 1), np.diag([-4.0, -3.0]))]
        if d == 2:
            terms.append(((0, 2), [[0.0, 1.0], [1.0, 0.0]]))
        return PotentialField.polynomial(terms)
    raise ConfigError(f"unknown builtin potential {name!r}")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated experiment configuration."""

    raw: dict = field(repr=False)

    @classmethod
    def from_dict(cls, data):
        data = copy.deepcopy(data)
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {exc.message}") from None
        solver = dict(DEFAULT_SOLVER)
        solver.update(data.get("solver", {}))
        data["solver"] = solver
        data.setdefault("seed", 0)
        data["path"].setdefault("Lambda", "auto")
        cfg = cls(data)
        cfg.potential()  # surface potential errors early
        return cfg

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)

    def with_overrides(self, **kw):
        data = copy.deepcopy(self.raw)
        for k, v in kw.items():
            if v is not None:
                data[k] = v
        return ExperimentConfig(data)

    @property
    def d(self):
        return self.raw["domain"]["d"]

    @property
    def n(self):
        return self.raw["domain"]["n"]

    @property
    def solver(self):
        return self.raw["solver"]

    def grid(self):
        try:
            return build_square_grid(self.d, self.n)
        except InputError as exc:
            raise ConfigError(str(exc)) from None

    def potential(self):
        spec, d = self.raw["potential"], self.d
        try:
            if spec["type"] == "constant":
                field_ = PotentialField.constant(spec["matrix"])
            elif spec["type"] == "polynomial":
                terms = []
                for t in spec["terms"]:
                    if len(t["powers"]) != d:
                        raise ConfigError(f"polynomial powers must have length d={d}")
                    terms.append((tuple(t["powers"]), t["matrix"]))
                field_ = PotentialField.polynomial(terms)
            else:
                field_ = _builtin(spec["name"], spec.get("params", {}), d)
        except InputError as exc:
            raise ConfigError(f"potential: {exc}") from None
        N = self.raw.get("N")
        if N is not None and N != field_.N:
            raise ConfigError(f"N={N} does not match the potential dimension {field_.N}")
        return field_

    def boundary_condition(self):
        spec = self.raw["bc"]
        if spec["type"] == "dirichlet":
            return BoundaryCondition.dirichlet()
        if spec["type"] == "neumann":
            return BoundaryCondition.neumann()
        if spec["type"] == "robin":
            th = spec["theta"]
            return BoundaryCondition.robin(th if isinstance(th, (int, float)) else np.asarray(th))
        return BoundaryCondition.robin(np.asarray(spec["table"], dtype=float))

    def problem(self):
        return MaslovProblem(self.grid(), self.potential(), self.boundary_condition(),
                             self.raw["path"]["tau"], self.raw["path"]["Lambda"])


@dataclass(eq=False)
class VerificationReport:
    """Outcome of one experiment."""

    experiment: str
    inputs: dict
    identities: list = field(default_factory=list)
    crossings: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict, repr=False)
    timing: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.errors and all(rec["equal"] for rec in self.identities)

    def add(self, name, lhs, rhs, equal=None, **details):
        if equal is None:
            equal = lhs == rhs
        self.identities.append({"name": name, "lhs": _jsonable(lhs), "rhs": _jsonable(rhs),
                                "equal": bool(equal), "details": _jsonable(details)})

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "inputs": _jsonable(self.inputs),
            "identities": self.identities,
            "crossings": self.crossings,
            "errors": self.errors,
            "pass": self.passed,
            "timing": self.timing,
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _crossing_rows(records):
    return [{
        "s_star": r.s_star, "segment": r.segment, "lambda": float(r.lam), "t": float(r.t),
        "kernel_dim": r.kernel_dim, "intersection_dim": r.intersection_dim,
        "signature": r.signature, "contribution": r.contribution, "position": r.position,
        "form_eigenvalues": _jsonable(r.form_eigenvalues),
    } for r in records]


def _morse_at_one(problem):
    mu = problem.family.eigenvalues(0.0, 1.0)
    return int(np.sum(mu < -default_zero_tol(mu)))


def _segments_both(problem, cfg, report, segments=SEGMENTS):
    n_samples, rtol = cfg.solver["n_samples"], cfg.solver["refine_tol"]
    cf, sf = {}, {}
    records = []
    traces = {}
    for seg in segments:
        r = maslov_index_crossing_form(problem, seg, n_samples, rtol)
        cf[seg] = r.index(seg)
        records.extend(r.segments[seg].crossings)
        f = maslov_index_spectral_flow(problem, seg, n_samples)
        sf[seg] = f.index(seg)
        traces[seg] = f.segments[seg]
        report.add(f"dual-methods[{seg}]", cf[seg], sf[seg])
    for rec in records:
        if rec.intersection_dim is not None:
            report.add(f"kernel-vs-intersection[{rec.segment}@{rec.s_star:.10g}]",
                       rec.kernel_dim, rec.intersection_dim)
    report.crossings = _crossing_rows(records)
    report.artifacts["records"] = records
    report.artifacts["phase_segments"] = traces
    return cf, sf, records


def _exp_verify_dirichlet(cfg, report):
    bc = cfg.boundary_condition()
    if not bc.is_pure_dirichlet:
        raise ConfigError("verify-dirichlet needs bc type 'dirichlet'")
    problem = cfg.problem()
    report.inputs["Lambda_used"] = problem.Lambda
    mor = _morse_at_one(problem)
    cf, sf, records = _segments_both(problem, cfg, report, ("Sigma2",))
    conj = sum(r.kernel_dim for r in records if r.segment == "Sigma2" and r.position != "final")
    report.add("Mor(L_G) == -Mas(Sigma2) [crossing-form]", mor, -cf["Sigma2"])
    report.add("Mor(L_G) == -Mas(Sigma2) [spectral-flow]", mor, -sf["Sigma2"])
    report.add("Mor(L_G) == conjugate-point count on [tau, 1)", mor, conj)
    report.artifacts["problem"] = problem


def _exp_verify_neumann(cfg, report):
    bc = cfg.boundary_condition()
    if not bc.is_neumann_based:
        raise ConfigError("verify-neumann needs a Neumann-based bc")
    problem = cfg.problem()
    report.inputs["Lambda_used"] = problem.Lambda
    data = compute_boundary_form(bc, problem.grid, problem.field)
    mor = _morse_at_one(problem)
    cf, sf, _ = _segments_both(problem, cfg, report, ("Sigma1", "Sigma2"))
    corr = data.predicted_morse
    report.add("Mor(L_G) == -Mas(Sigma2) + Mor(-B) + Mor(Q0 V(0) Q0)", mor, -cf["Sigma2"] + corr,
               mor_minus_B=data.mor_minus_B, mor_QVQ=data.mor_QVQ)
    report.add("Mor(L_{0,G}(tau)) == -Mas(Sigma1) == Mor(-B) + Mor(Q0 V(0) Q0)",
               -cf["Sigma1"], corr)
    report.artifacts["problem"] = problem


def _exp_verify_robin_scalar(cfg, report):
    bc = cfg.boundary_condition()
    field_ = cfg.potential()
    if not bc.is_neumann_based or field_.N != 1:
        raise ConfigError("verify-robin-scalar needs N=1 and a Neumann-based bc")
    problem = cfg.problem()
    report.inputs["Lambda_used"] = problem.Lambda
    data = compute_boundary_form(bc, problem.grid, field_)
    B, v0 = float(data.B[0, 0]), float(data.V0[0, 0])
    if abs(B) <= 1e-10 * max(1.0, abs(B)) and v0 == 0.0:
        raise ConfigError("B = 0 and V(0) = 0: outside the scalar statement")
    no_correction = B < 0 or (B == 0 and v0 > 0)
    mor = _morse_at_one(problem)
    cf, _, _ = _segments_both(problem, cfg, report, ("Sigma2",))
    rhs = -cf["Sigma2"] + (0 if no_correction else 1)
    report.add("scalar index formula", mor, rhs, B=B, V0=v0, correction=0 if no_correction else 1)
    report.artifacts["problem"] = problem


def _exp_loop_zero(cfg, report):
    problem = cfg.problem()
    report.inputs["Lambda_used"] = problem.Lambda
    cf, sf, records = _segments_both(problem, cfg, report)
    report.add("Mas(Gamma) == 0 [crossing-form]", int(sum(cf.values())), 0, per_segment=cf)
    report.add("Mas(Gamma) == 0 [spectral-flow]", int(sum(sf.values())), 0, per_segment=sf)
    report.add("no crossings on Sigma4", sum(1 for r in records if r.segment == "Sigma4"), 0)
    for r in records:
        if r.segment == "Sigma1":
            report.add(f"Sigma1 form negative @{r.s_star:.10g}", r.n_minus, r.kernel_dim)
        if r.segment == "Sigma3":
            report.add(f"Sigma3 form positive @{r.s_star:.10g}", r.n_plus, r.kernel_dim)
    report.artifacts["problem"] = problem


def _exp_dtn(cfg, report):
    problem = cfg.problem()
    rng = np.random.default_rng(cfg.raw["seed"])
    path = problem.path
    maps, stats = [], {"sym": 0.0, "inverse": 0.0, "angle": 0.0, "iso": 0.0}
    n_done = 0
    attempts = 0
    while n_done < cfg.solver["dtn_samples"] and attempts < 20 * cfg.solver["dtn_samples"]:
        attempts += 1
        s = float(rng.uniform(path.s_min, path.s_max))
        lam, t, _ = path.evaluate(s)
        try:
            d = problem.maps.dtn(lam, t, s)
            m = problem.maps.ntd(lam, t, s)
        except MorseMaslovError:
            continue
        if min(d.conditioning, m.conditioning) < 1e-8:
            continue
        n_done += 1
        maps.append(d)
        I = np.eye(d.matrix.shape[0])
        stats["sym"] = max(stats["sym"], d.sym_defect, m.sym_defect)
        stats["inverse"] = max(stats["inverse"], float(np.abs(d.matrix @ (-m.matrix) - I).max()))
        F1, F2 = problem.maps._frame_from(d), problem.maps._frame_from(m)
        stats["angle"] = max(stats["angle"], float(principal_angles(F1, F2).max()))
        stats["iso"] = max(stats["iso"], F1.isotropy_defect(F1.basis), F2.isotropy_defect(F2.basis))
    report.add("samples evaluated", n_done, cfg.solver["dtn_samples"])
    report.add("M_b-symmetry defect <= 1e-8", stats["sym"], 1e-8, stats["sym"] <= 1e-8)
    report.add("N(-M) = I to 1e-7", stats["inverse"], 1e-7, stats["inverse"] <= 1e-7)
    report.add("graph/inverse-graph principal angle <= 1e-7", stats["angle"], 1e-7,
               stats["angle"] <= 1e-7)
    report.add("isotropy <= 1e-11", stats["iso"], 1e-11, stats["iso"] <= 1e-11)
    report.artifacts["dtn_maps"] = maps


def _exp_asymptotics(cfg, report):
    bc = cfg.boundary_condition()
    if not bc.is_neumann_based:
        raise ConfigError("asymptotics needs a Neumann-based bc")
    grid, field_ = cfg.grid(), cfg.potential()
    fit = eigenvalue_expansion_fit(grid, field_, bc, cfg.solver["tau_grid"])
    for j, err in enumerate(fit["slope_rel_error"]):
        report.add(f"slope[{j}] vs eig(-B)/|Omega|", fit["slopes"][j], fit["expected_slopes"][j],
                   err <= 1e-2, error=err)
    for j, err in enumerate(fit["curvature_rel_error"]):
        report.add(f"curvature[{j}] vs eig(Q0 V(0) Q0)", fit["fitted_zero_slope_curvatures"][j],
                   fit["expected_curvatures"][j], err <= 1e-2, error=err)
    mor = verify_small_tau_morse(grid, field_, bc, fit["tau"])
    for row in mor["checked"]:
        report.add(f"Mor(L_0G(tau={row['tau']:.6g})) == Mor(-B) + Mor(QVQ)", row["morse"],
                   mor["expected"], gap=row["gap"])
    report.artifacts["fit"] = fit
    report.artifacts["morse"] = mor


_RUNNERS = {
    "verify-dirichlet": _exp_verify_dirichlet,
    "verify-neumann": _exp_verify_neumann,
    "verify-robin-scalar": _exp_verify_robin_scalar,
    "loop-zero": _exp_loop_zero,
    "dtn-diagnostics": _exp_dtn,
    "asymptotics": _exp_asymptotics,
}


def run_experiment(config, name):
    """Run the named experiment and return a :class:`VerificationReport`.

    Module errors are recorded in the report (which then fails) with the
    experiment name attached; configuration errors propagate.
    """
    if name not in _RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    report = VerificationReport(name, copy.deepcopy(config.raw))
    t0 = time.perf_counter()
    try:
        _RUNNERS[name](config, report)
    except ConfigError:
        raise
    except MorseMaslovError as exc:
        report.errors.append(f"{name}: {type(exc).__name__}: {exc}")
    report.timing["seconds"] = round(time.perf_counter() - t0, 3)
    return report


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def report_json(report):
    """Deterministic JSON (sorted keys); timing is the only run-dependent field."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2, allow_nan=True) + "\n"


def emit_report(report, out_dir, formats=("json", "csv")):
    """Write the report and its CSV artifacts into ``out_dir``; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = report.experiment
    written = []
    if "json" in formats:
        p = os.path.join(out_dir, f"{stem}.report.json")
        _atomic_write(p, report_json(report))
        written.append(p)
    if "csv" in formats:
        p = os.path.join(out_dir, f"{stem}.crossings.csv")
        write_crossing_table(report.artifacts.get("records", []), p)
        written.append(p)
        problem = report.artifacts.get("problem")
        if problem is not None:
            p = os.path.join(out_dir, f"{stem}.mu_trace.csv")
            write_eigenvalue_trace(problem, p)
            written.append(p)
        segs = report.artifacts.get("phase_segments")
        if segs:
            from .maslov import MaslovResult

            p = os.path.join(out_dir, f"{stem}.phase_trace.csv")
            write_phase_trace(MaslovResult("spectral-flow", dict(segs)), p)
            written.append(p)
        if report.artifacts.get("dtn_maps"):
            p = os.path.join(out_dir, f"{stem}.dtn_trace.csv")
            dump_dtn_trace(report.artifacts["dtn_maps"], p)
            written.append(p)
        fit = report.artifacts.get("fit")
        if fit is not None:
            p = os.path.join(out_dir, f"{stem}.branches.csv")
            rows = [",".join([repr(t)] + [repr(v) for v in br])
                    for t, br in zip(fit["tau"], fit["branches"])]
            N = len(fit["branches"][0])
            header = ",".join(["tau"] + [f"lambda_branch_{j}" for j in range(N)])
            _atomic_write(p, "\n".join([header] + rows) + "\n")
            written.append(p)
            p = os.path.join(out_dir, f"{stem}.fit.json")
            _atomic_write(p, json.dumps(_jsonable(fit), sort_keys=True, indent=2) + "\n")
            written.append(p)
    return written


def resolve_out_dir(cli_value, config):
    """``--out`` beats the environment variable, which beats ``output_dir`` in the config."""
    if cli_value:
        return cli_value
    if os.environ.get(OUT_ENV):
        return os.environ[OUT_ENV]
    return config.raw.get("output_dir", "out")


__all__ = [
    "CONFIG_SCHEMA", "EXPERIMENTS", "ExperimentConfig", "VerificationReport", "emit_report",
    "report_json", "resolve_out_dir", "run_experiment",
]
