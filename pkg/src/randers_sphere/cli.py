"""Command-line entry point: ``randers-sphere <command> [options]``.

Every command prints a JSON report to stdout with a ``failures`` array and
exits 0 only when that array is empty (2 for configuration errors). With
``--out DIR`` the report and any data files are written there as well.
Values from ``--config file.json`` are overridden by explicit flags.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _accel
from .cartan_munzner import GenericPolynomial, cm_check
from .families import (
    classify_rank, family_snapshot, focal_gradient_proxy, focal_rank_test, focal_submanifolds,
    sample_level, snapshots_to_csv, snapshots_to_ply, unique_points,
)
from .geodesics import (
    GeodesicSpec, classify_closedness, el_residual, geodesic_eval, geodesic_velocity,
    phase_distance, s2_spec,
)
from .isoparametric import IsoFunction, iso_verify
from .metric import randers_norm
from .presets import (
    FIG1_ABC, FIG1_SPAN, FIG2_ABC, FIG2_SPAN, example_g1, example_g2, g1_focal_points,
    g2_plus_constraint,
)
from .skew import InadmissibleGenerator, SkewGenerator


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    return "%.17g" % v


def _clean(obj):
    """Make a report JSON-serializable (numpy scalars and arrays to Python)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


class Params:
    """Explicit flag > config file value > default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config

    def get(self, name: str, default=None):
        v = getattr(self.args, name, None)
        if v is not None and v is not False:
            return v
        return self.config.get(name, default)

    def positive(self, name: str, default):
        v = self.get(name, default)
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be a number, got {v!r}")
        if not v > 0:
            raise ConfigError(f"{name} must be positive, got {v}")
        return v

    def count(self, name: str, default, minimum: int = 1):
        v = self.get(name, default)
        if isinstance(v, bool) or int(v) != v or int(v) < minimum:
            raise ConfigError(f"{name} must be an integer >= {minimum}, got {v!r}")
        return int(v)


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _generator_from(params: Params, dim: int | None = None) -> SkewGenerator | None:
    raw = params.config.get("Q")
    if raw is None:
        return None
    try:
        Q = SkewGenerator.from_json(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config 'Q' is invalid: {exc}")
    if dim is not None and Q.dim != dim:
        raise ConfigError(f"config 'Q' is {Q.dim}x{Q.dim} but the polynomial lives in R^{dim}")
    return Q


def _iso_function(params: Params) -> tuple[IsoFunction, dict]:
    """Polynomial and generator from --example or the config's 'polynomial'/'Q'."""
    example = params.get("example")
    poly = params.config.get("polynomial")
    info: dict = {}
    if poly is not None and example is None:
        try:
            phi = GenericPolynomial.from_json(poly)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"config 'polynomial' is invalid: {exc}")
        Q = _generator_from(params, phi.dim)
        if Q is None:
            raise ConfigError("a custom polynomial needs a generator 'Q' in the config")
        info["example"] = "custom"
    elif (example or "g1") == "g1":
        phi, Q = example_g1()
        override = _generator_from(params, phi.dim)
        Q = override if override is not None else Q
        info["example"] = "g1"
    elif example == "g2":
        n = params.count("n", 4)
        a = float(params.get("a", 0.3))
        try:
            phi, Q = example_g2(n, a)
        except ValueError as exc:
            raise ConfigError(str(exc))
        info.update(example="g2", n=n, a=a, p=phi.p, q=phi.q)
    else:
        raise ConfigError(f"unknown example {example!r}; use g1 or g2")
    if not Q.admissible:
        raise ConfigError(f"generator is not admissible: min eig(I + Q^2) = {Q.min_eig:.3e}")
    info["Q"] = Q.entries
    return IsoFunction(phi, Q, use_numba=params.get("numba")), info


def _geodesic_setup(params: Params):
    args = params.args
    if getattr(args, "fig1", False):
        return FIG1_ABC, "fig1"
    if getattr(args, "fig2", False):
        return FIG2_ABC, "fig2"
    abc = params.get("abc")
    if abc is not None:
        if len(abc) != 3:
            raise ConfigError("abc needs three numbers")
        return tuple(float(v) for v in abc), "abc"
    return None, "config"


def _closedness(abc, params: Params):
    tol = params.positive("tol", 1e-9) if params.args.command == "classify" else 1e-9
    max_den = params.count("max_den", 10**6)
    return classify_closedness(*abc, tolerance=tol, max_denominator=max_den)


# -- commands -----------------------------------------------------------------------


def cmd_geodesic(params: Params) -> tuple[dict, dict[str, str]]:
    abc, preset = _geodesic_setup(params)
    if abc is not None:
        Q = SkewGenerator.from_abc(*abc)
        if not Q.admissible:
            raise ConfigError(f"(a, b, c) = {abc} violates a^2 + b^2 + c^2 < 1")
        G = s2_spec(*abc)
    else:
        Q = _generator_from(params)
        if Q is None:
            raise ConfigError("give --fig1, --fig2, --abc or a config with 'Q'")
        if not Q.admissible:
            raise ConfigError(f"generator is not admissible: min eig(I + Q^2) = {Q.min_eig:.3e}")
        e = np.eye(Q.dim)
        try:
            G = GeodesicSpec.from_direction(Q, params.config.get("x", e[0]), params.config.get("xbar", e[1]))
        except ValueError as exc:
            raise ConfigError(f"initial data invalid: {exc}")
    span = {"fig1": FIG1_SPAN, "fig2": FIG2_SPAN}.get(preset)
    s_max = span if span is not None else params.positive("s_max", 4 * math.pi)
    resolution = params.count("resolution", 2001, minimum=2)
    ds = params.positive("ds", 5e-4)
    closure_tol = params.positive("tol", 1e-8)

    s = np.linspace(0.0, s_max, resolution)
    P = geodesic_eval(G, s)
    V = geodesic_velocity(G, s)
    unit = float(np.abs(randers_norm(Q.entries, P, V) - 1.0).max())
    dense = np.arange(0.0, s_max + ds / 2, ds)
    el = el_residual(Q, geodesic_eval(G, dense), ds)
    closure_pos = float(np.linalg.norm(P[-1] - P[0]))
    closure_vel = float(np.linalg.norm(V[-1] - V[0]))
    late = s >= 0.1
    report = {
        "command": "geodesic", "preset": preset, "s_max": s_max, "resolution": resolution,
        "Q": Q.entries, "x": G.x, "X": G.X,
        "unit_speed_max_dev": unit, "el_residual_max": el, "el_spacing": ds,
        "closure_position": closure_pos, "closure_velocity": closure_vel,
        "min_return_distance": float(phase_distance(G, s[late]).min()) if late.any() else None,
    }
    failures = []
    if unit >= 1e-9:
        failures.append(f"unit speed violated by {unit:.3e}")
    if el >= 1e-4:
        failures.append(f"Euler-Lagrange residual {el:.3e} >= 1e-4")
    if abc is not None and Q.dim == 3:
        rep = _closedness(abc, params)
        report["closedness"] = rep.to_dict()
        if preset == "fig1":
            if rep.verdict != "closed" or abs(rep.period - 4 * math.pi) > 1e-9:
                failures.append(f"expected a closed curve of length 4 pi, got {rep.verdict} {rep.period}")
            if max(closure_pos, closure_vel) >= closure_tol:
                failures.append(f"curve does not close at s = 4 pi (residual {max(closure_pos, closure_vel):.3e})")
        if preset == "fig2" and rep.verdict != "non-closed":
            failures.append(f"expected a non-closed curve, classifier says {rep.verdict}")
    report["failures"] = failures
    csv = ["s," + ",".join(f"x{i + 1}" for i in range(Q.dim))]
    csv += [",".join(_fmt(v) for v in (si, *p)) for si, p in zip(s, P)]
    return report, {"geodesic.csv": "\n".join(csv) + "\n"}


def cmd_classify(params: Params):
    abc, preset = _geodesic_setup(params)
    if abc is None:
        raise ConfigError("give --fig1, --fig2 or --abc a b c")
    try:
        rep = _closedness(abc, params)
    except (InadmissibleGenerator, ValueError) as exc:
        raise ConfigError(str(exc))
    report = {"command": "classify", "preset": preset, "abc": list(abc), **rep.to_dict()}
    report["failures"] = ["closedness undecided at this tolerance"] if rep.verdict == "undecided" else []
    return report, {}


def cmd_verify(params: Params):
    F, info = _iso_function(params)
    samples = params.count("samples", 500)
    seed = params.count("seed", 0, minimum=0)
    a_tol = params.positive("tol", 2e-4)
    cm = cm_check(F.phi, seed=seed)
    iso = iso_verify(F, samples=samples, seed=seed, A_tol=a_tol, order=params.count("order", 2))
    report = {"command": "verify", **info, "cm": cm.to_dict(), "iso": iso.to_dict()}
    failures = []
    if not cm.passed():
        failures.append("Cartan-Muenzner residuals exceed 1e-10")
    failures += iso.failures
    if params.get("control"):
        ctrl = iso_verify(F, samples=samples, seed=seed, control=True, A_tol=a_tol)
        report["control"] = ctrl.to_dict()
        margin = max(ctrl.maxA_dev, ctrl.maxB_spread)
        if margin <= 1e-2:
            failures.append(f"negative control did not fail clearly (worst deviation {margin:.3e})")
    report["failures"] = failures
    return report, {}


def _levels(params: Params):
    levels = params.get("levels", [-0.9, -0.5, 0.0, 0.5, 0.9])
    levels = [float(t) for t in levels]
    if any(not abs(t) < 1 for t in levels):
        raise ConfigError("family levels must lie in (-1, 1)")
    return levels


def cmd_family(params: Params):
    fmt = params.get("format", "csv")
    if fmt not in ("csv", "ply"):
        raise ConfigError("format must be csv or ply")
    samples = params.count("samples", 200)
    seed = params.count("seed", 0, minimum=0)
    tol = params.positive("tol", 1e-8)
    levels = _levels(params)
    files: dict[str, str] = {}
    failures: list[str] = []

    def run(F, tag):
        L = sample_level(F.phi, 0.0, samples, seed, F.Q)
        snaps = [family_snapshot(F, L, t) for t in levels]
        errs = [float(np.abs(F.iso_eval(S.points) - S.t).max()) for S in snaps]
        for t, e in zip(levels, errs):
            if e >= tol:
                failures.append(f"{tag}: level t={t} off by {e:.3e}")
        files[f"family_{tag}.{fmt}"] = snapshots_to_ply(snaps) if fmt == "ply" else snapshots_to_csv(snaps)
        return snaps, {"levels": levels, "max_level_error": errs}

    if params.get("fig34"):
        phi, Qf = example_g1()
        F3 = IsoFunction(phi, SkewGenerator.zero(phi.n))
        F4 = IsoFunction(phi, Qf)
        s3, r3 = run(F3, "fig3")
        s4, r4 = run(F4, "fig4")
        disp = max(float(np.linalg.norm(a.points - b.points, axis=1).max()) for a, b in zip(s3, s4))
        if disp <= 1e-2:
            failures.append(f"Q = 0 and Q != 0 families coincide (max displacement {disp:.3e})")
        report = {"command": "family", "preset": "fig34", "fig3": r3, "fig4": r4,
                  "Q": Qf.entries, "max_displacement": disp}
    else:
        F, info = _iso_function(params)
        _, r = run(F, info["example"])
        report = {"command": "family", **info, **r}
    report["samples"] = samples
    report["seed"] = seed
    report["failures"] = failures
    return report, files


def cmd_focal(params: Params):
    F, info = _iso_function(params)
    fmt = params.get("format", "csv")
    if fmt not in ("csv", "ply"):
        raise ConfigError("format must be csv or ply")
    samples = params.count("samples", 50)
    seed = params.count("seed", 0, minimum=0)
    tol = params.positive("tol", 1e-12 if info["example"] == "g1" else 1e-10)
    L = sample_level(F.phi, 0.0, samples, seed, F.Q)
    plus, minus = focal_submanifolds(F, L)
    failures = []
    proxy = float(max(focal_gradient_proxy(F, plus.points).max(), focal_gradient_proxy(F, minus.points).max()))
    if proxy >= 1e-4:
        failures.append(f"gradient of f does not vanish on the focal sets ({proxy:.3e})")
    report = {"command": "focal", **info, "samples": samples, "seed": seed, "gradient_proxy_max": proxy}
    g = F.phi.degree
    if info["example"] == "g1":
        pred_p, pred_m = g1_focal_points(F.Q)
        err_p = float(np.abs(plus.points - pred_p).max())
        err_m = float(np.abs(minus.points - pred_m).max())
        report.update(M_plus=unique_points(plus.points), M_minus=unique_points(minus.points),
                      predicted_plus=pred_p, predicted_minus=pred_m, error_plus=err_p, error_minus=err_m)
        if max(err_p, err_m) >= tol:
            failures.append(f"focal points miss the prediction by {max(err_p, err_m):.3e}")
    elif info["example"] == "g2":
        res = float(np.abs(g2_plus_constraint(plus.points, info["p"], info["a"])).max())
        report["plus_constraint_max"] = res
        if res >= tol:
            failures.append(f"M_+ violates its linear equation by {res:.3e}")
    # collapse counts at a few points, against the round-sphere multiplicities
    flags = []
    if F.phi.multiplicities is not None and g in (1, 2):
        # M_+ keeps the first factor, so the second multiplicity collapses there
        m1, m2 = F.phi.multiplicities
        expected = {+1: m2, -1: m1}
        ranks = []
        for x in L.points[: min(5, samples)]:
            for sign in (+1, -1):
                s = sign * math.pi / (2 * g)
                rr = classify_rank(focal_rank_test(F, x, s=s), s, expected[sign])
                ranks.append(rr.to_dict())
                if rr.status != "match":
                    flags.append(f"collapse count {rr.collapsed} vs declared {rr.expected} at s={s:.6g} ({rr.status})")
        report["rank_tests"] = ranks
    report["flags"] = flags
    report["failures"] = failures
    text = snapshots_to_ply([plus, minus]) if fmt == "ply" else snapshots_to_csv([plus, minus])
    return report, {f"focal.{fmt}": text}


def cmd_psi(params: Params):
    F, info = _iso_function(params)
    samples = params.count("samples", 1000)
    seed = params.count("seed", 0, minimum=0)
    tol = params.positive("tol", 1e-10)
    n_scan = params.count("scan", 20, minimum=0)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((samples, F.dim))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Y = F.psi_forward(X)
    back = float(np.linalg.norm(F.psi_inverse(Y, check=False) - X, axis=1).max())
    fwd = float(np.linalg.norm(F.psi_forward(F.psi_inverse(X, check=False)) - X, axis=1).max())
    t_fast = F.psi_inverse_angle(Y[:n_scan]) if n_scan else np.zeros(0)
    t_scan = np.array([F.psi_inverse_angle_scan(y) for y in Y[:n_scan]])
    scan = float(np.abs(t_fast - t_scan).max()) if n_scan else None
    failures = []
    if back >= tol:
        failures.append(f"psi^-1(psi(x)) misses x by {back:.3e}")
    if fwd >= tol:
        failures.append(f"psi(psi^-1(y)) misses y by {fwd:.3e}")
    if scan is not None and scan >= 1e-9:
        failures.append(f"root finder disagrees with the scan oracle by {scan:.3e}")
    use_nb = F.use_numba if F.use_numba is not None else _accel.USE_NUMBA
    report = {"command": "psi", **info, "samples": samples, "seed": seed,
              "backend": "numba" if (use_nb and _accel.HAVE_NUMBA) else "numpy",
              "round_trip_inverse_after_forward": back, "round_trip_forward_after_inverse": fwd,
              "scan_points": n_scan, "scan_agreement": scan, "failures": failures}
    return report, {}


COMMANDS = {
    "geodesic": cmd_geodesic, "classify": cmd_classify, "verify": cmd_verify,
    "family": cmd_family, "focal": cmd_focal, "psi": cmd_psi,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameters (flags override it)")
    common.add_argument("--seed", type=int, help="RNG seed for sampled commands (default 0)")
    common.add_argument("--out", help="directory for the JSON report and data files")
    common.add_argument("--tol", type=float, help="primary tolerance of the command")

    parser = argparse.ArgumentParser(prog="randers-sphere", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def curve_flags(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--fig1", action="store_true", help="(a,b,c) = (0, 1/2, 0) over [0, 4 pi]")
        g.add_argument("--fig2", action="store_true", help="(a,b,c) = (0, 1 - 1/sqrt 2, 0) over [0, 29 pi]")
        g.add_argument("--abc", type=float, nargs=3, metavar=("A", "B", "C"))

    def example_flags(p):
        p.add_argument("--example", choices=["g1", "g2"])
        p.add_argument("--n", type=int, help="sphere dimension for g2 (default 4)")
        p.add_argument("--a", type=float, help="rotation rate for g2 (default 0.3)")
        p.add_argument("--samples", type=int)

    p = sub.add_parser("geodesic", parents=[common], help="sample a geodesic, check unit speed and Euler-Lagrange")
    curve_flags(p)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--resolution", type=int, help="number of CSV samples (default 2001)")
    p.add_argument("--ds", type=float, help="spacing for the Euler-Lagrange oracle (default 5e-4)")
    p.add_argument("--max-den", dest="max_den", type=int)

    p = sub.add_parser("classify", parents=[common], help="closedness of the S^2 geodesic for (a, b, c)")
    curve_flags(p)
    p.add_argument("--max-den", dest="max_den", type=int, help="largest denominator tried (default 1e6)")

    p = sub.add_parser("verify", parents=[common], help="check the isoparametric system for f")
    example_flags(p)
    p.add_argument("--control", action="store_true", help="also run the identity-psi negative control")
    p.add_argument("--order", type=int, choices=[2, 4])

    p = sub.add_parser("family", parents=[common], help="write snapshots of the isoparametric family")
    example_flags(p)
    p.add_argument("--levels", type=float, nargs="+")
    p.add_argument("--fig34", action="store_true", help="g = 1 family for Q = 0 and the figure Q")
    p.add_argument("--format", choices=["csv", "ply"])

    p = sub.add_parser("focal", parents=[common], help="focal submanifolds and collapse counts")
    example_flags(p)
    p.add_argument("--format", choices=["csv", "ply"])

    p = sub.add_parser("psi", parents=[common], help="round-trip and scan-oracle diagnostics for psi")
    example_flags(p)
    p.add_argument("--scan", type=int, help="points checked against the dense-scan oracle (default 20)")
    return parser


def run(argv=None) -> tuple[int, dict]:
    args = build_parser().parse_args(argv)
    try:
        params = Params(args, _load_config(args.config))
        report, files = COMMANDS[args.command](params)
    except (ConfigError, InadmissibleGenerator) as exc:
        report, files = {"command": args.command, "error": str(exc), "failures": [str(exc)]}, {}
        code = 2
    else:
        code = 0 if not report["failures"] else 1
    report["passed"] = code == 0
    text = json.dumps(_clean(report), indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{args.command}.json").write_text(text + "\n")
            for name, body in files.items():
                (out / name).write_text(body)
        except OSError as exc:
            print(f"cannot write to {out}: {exc}", file=sys.stderr)
            return 2, report
    print(text)
    return code, report


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
