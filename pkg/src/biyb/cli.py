"""Command-line driver: ``biyb <subcommand> [--config PATH] [--out DIR] ...``.

Every subcommand writes a schema-versioned JSON report carrying the hash
of the effective configuration and exits with status 0 exactly when all of
its tolerance checks pass.  Reports contain no timestamps, so identical
configurations produce byte-identical files.

The number of worker threads used for independent ladder levels and
spectral values is read from the ``BIYB_WORKERS`` environment variable
(default 1).
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .algebra import build_cartan_weyl, canonical_R, jacobi_residual, mybe_residual, r_bracket
from .errors import BiYBError, ParameterError
from .group import iwasawa, r_minus_i, random_sl, random_special_unitary, dressed_R
from .lattice import Jet
from .lax import (curvature_residual, lax_jets, limit_chain_defects,
                  offshell_identity_defect, write_sweep_csv, zeta_samples)
from .model import BiYBModel, InitialData, ModelParams, Worldsheet, state_to_bytes
from .spectral import (SolutionLattice, cascade_report, conserved_trace_drift,
                       output_residuals, param_map, pcm_to_yb, verify_pcm_to_yb,
                       verify_yb_to_biyb, write_trace_csv, yb_to_biyb)

logger = logging.getLogger(__name__)

CONFIG_SCHEMA = "biyb.config"
REPORT_SCHEMA = "biyb.report"
SCHEMA_VERSION = 1
WORKERS_ENV = "BIYB_WORKERS"

DEFAULT_TOLERANCES = {
    "algebra": 1e-12,
    "offshell": 1e-10,
    "limits": 1e-12,
    "gauge": 1e-10,
    "min_slope": 2.0,
    "constraint": 1e-6,
    "lax_curvature": 1e-3,
    "trace_drift": 1e-6,
    "cascade_identity": 1e-3,
    "dd": 1e-8,
    "membership": 1e-8,
    "eom_ratio": 5.0,
}


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """Settings shared by all subcommands.

    Loaded from a JSON object with ``"schema": "biyb.config"`` and
    ``"version": 1``; unknown keys are rejected.  ``tolerances`` entries
    override :data:`DEFAULT_TOLERANCES` one by one.
    """

    n: int = 2
    alpha: float = 0.3
    beta: float = 0.2
    n_sigma: int = 128
    length: float = 2 * np.pi
    cfl: float = 0.5
    t_final: float = 1.0
    modes: int = 2
    amplitude: float = 0.5
    velocity: float = None
    seed: int = 0
    zeta_radii: tuple = (0.5, 2.0)
    zeta_count: int = 20
    zeta_exclusion: float = 0.05
    monodromy_zetas: int = 10
    imag_shift: float = 2.0
    epsilon: float = 0.3
    eta: float = 0.2
    lax_form: str = "J"
    ladder: tuple = (64, 128, 256)
    samples: int = 100
    wrong_R: bool = False
    tolerances: dict = dataclasses.field(default_factory=dict)
    out: str = "reports"

    def __post_init__(self):
        object.__setattr__(self, "zeta_radii", tuple(float(r) for r in self.zeta_radii))
        object.__setattr__(self, "ladder", tuple(int(k) for k in self.ladder))
        tol = dict(DEFAULT_TOLERANCES)
        unknown = set(self.tolerances) - set(tol)
        if unknown:
            raise ParameterError(f"unknown tolerance keys: {sorted(unknown)}")
        tol.update({k: float(v) for k, v in self.tolerances.items()})
        object.__setattr__(self, "tolerances", tol)
        self.validate()

    def validate(self):
        if self.n < 2:
            raise ParameterError(f"group degree n must be >= 2, got {self.n}")
        bad = [k for k, v in self.tolerances.items() if not v > 0]
        if bad:
            raise ParameterError(f"tolerances must be positive: {bad}")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ParameterError(f"ladder levels must strictly increase: {self.ladder}")
        if self.lax_form not in ("J", "D"):
            raise ParameterError(f"lax_form must be 'J' or 'D', got {self.lax_form!r}")
        if self.t_final <= 0:
            raise ParameterError("t_final must be positive")
        ModelParams(self.alpha, self.beta)
        param_map(self.epsilon, self.eta)
        for n_sigma in (self.n_sigma,) + self.ladder:
            Worldsheet(n_sigma=n_sigma, length=self.length, cfl=self.cfl)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        schema, version = doc.pop("schema", None), doc.pop("version", None)
        if schema != CONFIG_SCHEMA or version != SCHEMA_VERSION:
            raise ParameterError(
                f"config needs schema {CONFIG_SCHEMA!r} version {SCHEMA_VERSION}, "
                f"got {schema!r} version {version!r}")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        doc = {"schema": CONFIG_SCHEMA, "version": SCHEMA_VERSION}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            doc[f.name] = list(v) if isinstance(v, tuple) else v
        return doc

    def config_hash(self):
        """SHA-256 of the canonical JSON form (output path excluded)."""
        doc = self.to_dict()
        doc.pop("out")
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **kw):
        return dataclasses.replace(self, **{k: v for k, v in kw.items() if v is not None})

    # -- builders --------------------------------------------------------------

    def model(self, alpha=None, beta=None):
        model = BiYBModel.su(self.n, self.alpha if alpha is None else alpha,
                             self.beta if beta is None else beta)
        return model

    def worldsheet(self, n_sigma=None):
        return Worldsheet(n_sigma=n_sigma or self.n_sigma, length=self.length, cfl=self.cfl)

    def initial_data(self):
        return InitialData(modes=self.modes, amplitude=self.amplitude,
                           velocity=self.velocity, seed=self.seed)

    def zetas(self):
        return zeta_samples(self.zeta_radii, self.zeta_count, self.zeta_exclusion)

    def monodromy_zeta_set(self):
        zs = self.zetas()
        idx = np.linspace(0, len(zs), self.monodromy_zetas, endpoint=False).astype(int)
        return zs[idx]


# -- helpers -------------------------------------------------------------------


def _workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        logger.warning("ignoring non-integer %s", WORKERS_ENV)
        return 1


def _map(fn, items):
    items = list(items)
    workers = min(_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _check(value, tolerance, mode="max"):
    value = None if value is None else float(value)
    if value is None:
        passed = True
    elif mode == "max":
        passed = bool(np.isfinite(value) and value <= tolerance)
    else:
        passed = bool(np.isfinite(value) and value >= tolerance)
    return {"value": value, "tolerance": float(tolerance), "mode": mode, "passed": passed}


def _write_report(out_dir, name, command, config, checks, extra=None):
    doc = {
        "schema": REPORT_SCHEMA,
        "version": SCHEMA_VERSION,
        "command": command,
        "config_hash": config.config_hash(),
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
    }
    if extra:
        doc.update(extra)
    path = Path(out_dir) / name
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return doc


def _simulate(config, n_sigma=None, alpha=None, beta=None):
    model = config.model(alpha, beta)
    ws = config.worldsheet(n_sigma)
    state = model.initial_state(ws, config.initial_data())
    return model, model.evolve(state, ws, config.t_final)


def _trajectory_residuals(model, traj):
    """Per-slice max residuals and the overall maxima for one run."""
    jp, jm = traj.current_jets()
    eom = np.max(np.abs(model.eom_residual(jp, jm)), axis=(1, 2))
    bi = np.max(np.abs(model.bianchi_residual(jp, jm)), axis=(1, 2))
    constraint = np.array([np.max(np.abs(model.constraint_residual(traj.state(k),
                                                                    traj.worldsheet)))
                           for k in range(len(traj))])
    return eom, bi, constraint


def lax_curvature_max(model, traj, zetas, imag_shift=2.0):
    jp, jm = traj.current_jets()
    out = []
    for z in zetas:
        res = curvature_residual(model.basis, *lax_jets(model, jp, jm, z, imag_shift))
        out.append((float(np.max(np.abs(res))), float(np.sqrt(np.mean(np.abs(res) ** 2)))))
    return out


def convergence_slope(resolutions, errors):
    """Least-squares slope of ``-log(error)`` against ``log(resolution)``."""
    x = np.log(np.asarray(resolutions, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(-np.polyfit(x, y, 1)[0])


def random_jets(dim, shape, rng, scale=1.0):
    """Random (non-solution) current jets for off-shell identity checks."""
    def jet():
        return Jet(*(scale * rng.normal(size=shape + (dim,)) for _ in range(3)))
    return jet(), jet()


# -- subcommands -----------------------------------------------------------------


def cmd_verify_algebra(config, out_dir):
    rng = np.random.default_rng(config.seed)
    basis = build_cartan_weyl(config.n)
    R = canonical_R(basis)
    if config.wrong_R:
        # negative control: symmetric on each root plane, so neither skew nor mYBE
        R = np.abs(R)
    d, k = basis.dim, config.samples
    x, y, z = (rng.normal(size=(k, d)) for _ in range(3))
    tol = config.tolerances["algebra"]
    rx = x @ R.T
    skew = np.max(np.abs(basis.inner(rx, y) + basis.inner(x, y @ R.T)))
    mybe = np.max(np.abs(mybe_residual(basis, R, x, y)))
    g = random_special_unitary(config.n, rng, 10)
    R_g = dressed_R(basis, R, g)
    mybe_g = max(float(np.max(np.abs(mybe_residual(basis, Rg, x, y)))) for Rg in R_g)
    jac = np.max(np.abs(jacobi_residual(lambda a, b: r_bracket(basis, R, a, b), x, y, z)))
    hom = np.max(np.abs(basis.bracket(r_minus_i(R, x), r_minus_i(R, y))
                        - r_minus_i(R, r_bracket(basis, R, x, y))))
    ls = random_sl(config.n, rng, k, scale=0.5)
    b, u = iwasawa(ls)
    iw = np.max(np.abs(b @ u - ls))
    checks = {
        "skew": _check(skew, tol),
        "mybe": _check(mybe, tol),
        "mybe_dressed": _check(mybe_g, tol),
        "r_bracket_jacobi": _check(jac, tol),
        "r_minus_i_homomorphism": _check(hom, tol),
        "iwasawa_roundtrip": _check(iw, tol),
    }
    return _write_report(out_dir, "algebra_report.json", "verify-algebra", config, checks,
                         {"n": config.n, "dim": d, "wrong_R": config.wrong_R})


def cmd_simulate(config, out_dir, ladder=False):
    levels = config.ladder if ladder else (config.n_sigma,)
    runs = _map(lambda n_sigma: _simulate(config, n_sigma), levels)
    checks, extra = {}, {"levels": list(levels), "runs": []}
    summary = []
    for n_sigma, (model, traj) in zip(levels, runs):
        eom, bi, constraint = _trajectory_residuals(model, traj)
        drift = float(np.max(np.abs(constraint)))
        summary.append((float(np.max(eom)), float(np.max(bi))))
        extra["runs"].append({"n_sigma": n_sigma, "steps": len(traj) - 1,
                              "eom_residual": summary[-1][0],
                              "bianchi_residual": summary[-1][1],
                              "constraint_drift": drift,
                              "reprojections": traj.reprojections})
        checks[f"constraint_{n_sigma}"] = _check(drift, config.tolerances["constraint"])
        with open(Path(out_dir) / f"residuals_{n_sigma}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "eom_residual", "bianchi_residual", "constraint"])
            off = (len(traj) - len(eom)) // 2
            for i, tau in enumerate(traj.taus):
                j = i - off
                inside = 0 <= j < len(eom)
                w.writerow([repr(float(tau)),
                            repr(float(eom[j])) if inside else "",
                            repr(float(bi[j])) if inside else "",
                            repr(float(constraint[i]))])
        (Path(out_dir) / f"snapshot_{n_sigma}.bybs").write_bytes(
            state_to_bytes(traj.state(len(traj) - 1), traj.worldsheet, model.params))
    if ladder and len(levels) > 1:
        for name, col in (("eom", 0), ("bianchi", 1)):
            slope = convergence_slope(levels, [s[col] for s in summary])
            extra[f"{name}_slope"] = slope
            checks[f"{name}_slope"] = _check(slope, config.tolerances["min_slope"], "min")
    return _write_report(out_dir, "simulate_report.json", "simulate", config, checks, extra)


def cmd_verify_lax(config, out_dir):
    rng = np.random.default_rng(config.seed)
    tol = config.tolerances
    model = config.model()
    zetas = config.zetas()
    d = model.basis.dim
    offshell = 0.0
    pairs = [(config.alpha, config.beta), (config.alpha, config.alpha), (0.0, 0.0)]
    for a, b in pairs:
        m = model.with_params(ModelParams(a, b))
        jp, jm = random_jets(d, (config.samples,), rng)
        for z in zetas:
            offshell = max(offshell, float(np.max(offshell_identity_defect(m, jp, jm, z))))
    g = random_special_unitary(config.n, rng, config.samples)
    ap, am = rng.normal(size=(config.samples, d)), rng.normal(size=(config.samples, d))
    limits = {"zm": 0.0, "dlax_D": 0.0, "dlax_J": 0.0, "gauge": 0.0}
    for z in zetas:
        for key, v in limit_chain_defects(model, g, ap, am, z, config.alpha,
                                          config.beta).items():
            limits[key] = max(limits[key], v)
    _, traj = _simulate(config)
    sweep = lax_curvature_max(model, traj, zetas, config.imag_shift)
    rows = [{"re_zeta": z.real, "im_zeta": z.imag, "alpha": config.alpha,
             "beta": config.beta, "n_sigma": config.n_sigma,
             "max_residual": mx, "l2_residual": l2} for z, (mx, l2) in zip(zetas, sweep)]
    write_sweep_csv(Path(out_dir) / "lax_sweep.csv", rows)
    checks = {
        "offshell_identity": _check(offshell, tol["offshell"]),
        "limit_zm": _check(limits["zm"], tol["limits"]),
        "limit_dlax_D": _check(limits["dlax_D"], tol["limits"]),
        "limit_dlax_J": _check(limits["dlax_J"], tol["limits"]),
        "gauge_chain": _check(limits["gauge"], tol["gauge"]),
        "onshell_curvature": _check(max(mx for mx, _ in sweep), tol["lax_curvature"]),
    }
    return _write_report(out_dir, "lax_report.json", "verify-lax", config, checks,
                         {"imag_shift": config.imag_shift, "zeta_count": len(zetas)})


def run_cascade(config):
    """PCM run, then ``pcm_to_yb`` and ``yb_to_biyb``; returns the pieces."""
    eps, eta = config.epsilon, config.eta
    pcm, traj = _simulate(config, alpha=0.0, beta=0.0)
    source = SolutionLattice.from_trajectory(pcm, traj)
    stage1 = pcm_to_yb(pcm, source, eps, membership_tol=config.tolerances["membership"])
    check1 = verify_pcm_to_yb(pcm, stage1)
    stage2_input = stage1.output.inverted(pcm.basis) if config.lax_form == "J" else stage1.output
    stage2 = yb_to_biyb(pcm, stage2_input, eps, eta, lax_form=config.lax_form,
                        membership_tol=config.tolerances["membership"])
    check2 = verify_yb_to_biyb(pcm, stage2, seed=config.seed)
    source_cut = dataclasses.replace(source, periodic=False)
    residuals = {
        "input": output_residuals(pcm, source_cut),
        "stage1": output_residuals(pcm, stage1.output),
        "output": output_residuals(pcm, stage2.output),
    }
    return stage1, stage2, check1, check2, residuals


def cmd_cascade(config, out_dir):
    tol = config.tolerances
    try:
        stage1, stage2, c1, c2, res = run_cascade(config)
    except BiYBError as exc:
        checks = {"pipeline": {"value": None, "tolerance": 0.0, "mode": "max",
                               "passed": False}}
        return _write_report(out_dir, "cascade_report.json", "cascade", config, checks,
                             {"error": f"{type(exc).__name__}: {exc}"})
    input_eom = max(res["input"])
    checks = {
        "por": _check(c1["por"], tol["cascade_identity"]),
        "final": _check(c2["final"], tol["cascade_identity"]),
        "dd_vs_projection": _check(c1["dd_vs_projection"], tol["dd"]),
        "ddd_vs_projection": _check(c2["ddd_vs_projection"], tol["dd"]),
        "membership_stage1": _check(c1["lie_an_membership"], tol["membership"]),
        "membership_stage2": _check(c2["lie_an_membership"], tol["membership"]),
        "eom_stage1": _check(max(res["stage1"]), tol["eom_ratio"] * max(input_eom, 1e-300)),
        "eom_output": _check(max(res["output"]), tol["eom_ratio"] * max(input_eom, 1e-300)),
    }
    T, N = stage2.output.shape
    grid = {"n_tau": int(T), "n_sigma": int(N), "dtau": stage2.output.dtau,
            "dsigma": stage2.output.dsigma}
    text = cascade_report(
        config.epsilon, config.eta, grid,
        {"por": c1["por"], "final": c2["final"],
         "ddd_vs_inversion": c2["ddd_vs_projection"]},
        {"input": max(res["input"]), "output": max(res["output"])},
        config_hash=config.config_hash())
    (Path(out_dir) / "cascade_identities.json").write_text(text + "\n", encoding="utf-8")
    detail = {"stage1": c1, "stage2": c2,
              "eom_bianchi": {k: list(v) for k, v in res.items()},
              "lax_form": config.lax_form}
    return _write_report(out_dir, "cascade_report.json", "cascade", config, checks,
                         {"detail": detail})


def cmd_monodromy(config, out_dir):
    model, traj = _simulate(config)
    zetas = config.monodromy_zeta_set()
    chunks = [zetas[i:i + 1] for i in range(len(zetas))]
    parts = _map(lambda zs: conserved_trace_drift(model, traj, zs,
                                                  imag_shift=config.imag_shift), chunks)
    report = {"taus": parts[0]["taus"], "zetas": zetas,
              "traces": np.concatenate([p["traces"] for p in parts], axis=1),
              "drift": np.concatenate([p["drift"] for p in parts]),
              "drift_rate": np.concatenate([p["drift_rate"] for p in parts])}
    write_trace_csv(Path(out_dir) / "monodromy_traces.csv", report)
    checks = {"trace_drift": _check(float(np.max(report["drift_rate"])),
                                    config.tolerances["trace_drift"])}
    return _write_report(out_dir, "monodromy_report.json", "monodromy", config, checks,
                         {"imag_shift": config.imag_shift,
                          "drift_rate": [float(v) for v in report["drift_rate"]]})


COMMANDS = {
    "verify-algebra": cmd_verify_algebra,
    "simulate": cmd_simulate,
    "verify-lax": cmd_verify_lax,
    "cascade": cmd_cascade,
    "monodromy": cmd_monodromy,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="biyb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON scenario file")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--seed", type=int, help="initial-data and sampling seed")
        p.add_argument("--level", type=int,
                       help="use ladder level k as the spatial resolution")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "simulate":
            p.add_argument("--ladder", action="store_true",
                           help="run every ladder level and fit convergence slopes")
    return parser


def load_config(args):
    config = ScenarioConfig.from_file(args.config) if args.config else ScenarioConfig()
    n_sigma = None
    if args.level is not None:
        if not 0 <= args.level < len(config.ladder):
            raise ParameterError(f"--level {args.level} outside ladder {config.ladder}")
        n_sigma = config.ladder[args.level]
    return config.with_overrides(seed=args.seed, n_sigma=n_sigma,
                                 out=str(args.out) if args.out else None)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
    except (ParameterError, OSError, ValueError, TypeError) as exc:
        print(f"biyb: invalid configuration: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kwargs = {"ladder": args.ladder} if args.command == "simulate" else {}
    try:
        report = COMMANDS[args.command](config, out_dir, **kwargs)
    except BiYBError as exc:
        print(f"biyb {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name, chk in report["checks"].items():
        status = "PASS" if chk["passed"] else "FAIL"
        print(f"{status} {name}: {chk['value']} ({chk['mode']} {chk['tolerance']})")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
