"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 domain failure (model not solvable,
gap conditions violated), 3 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .fullsolver import ResourceError, liouvillian_spectrum
from .model import ModelError
from .output import RunManifest, emit, render_csv, render_json
from .reduction import (
    NotSolvableError,
    PatchTooLargeError,
    SubspaceLeakError,
    build_reduced,
    evolve_observable,
    observable_label,
    parse_observable,
)
from .solvability import check_solvable
from .spectral import (
    CertificateError,
    GapConditionError,
    StructureError,
    certify_gap,
    graded_decompose,
    multiset_distance,
    spectrum_via_blocks,
)
from .trajectories import (
    NoisyIsing,
    TimeStepError,
    convergence_report,
    exact_reference,
    run_ensemble,
)

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN, EXIT_RESOURCE = 0, 1, 2, 3

log = logging.getLogger("dissipative_ising")


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load(path: str):
    try:
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        return load_config(path), digest
    except FileNotFoundError:
        raise CliFailure(EXIT_INPUT, f"config file not found: {path}") from None
    except ConfigError as exc:
        raise CliFailure(EXIT_INPUT, f"invalid config: {exc}") from None


def _manifest(args, cfg, digest, params) -> RunManifest:
    return RunManifest(
        command=args.command,
        config_path=args.config,
        config_sha256=digest,
        parameters=params,
        model_hash=cfg.model.model_hash(),
        tool_version=__version__,
        outputs=[p for p in (getattr(args, "out", None), getattr(args, "report", None)) if p],
    )


def _finish(manifest: RunManifest, args) -> None:
    out = getattr(args, "out", None)
    if out and out != "-":
        manifest.write(out + ".manifest.json")


def cmd_check(args) -> int:
    cfg, digest = _load(args.config)
    report = check_solvable(cfg.model)
    manifest = _manifest(args, cfg, digest, {})
    lines = [f"# manifest={manifest.hash}", f"{'site':>4}  {'residual':>12}  solvable"]
    for r in report.sites:
        lines.append(f"{r.site:>4}  {r.residual:12.3e}  {'yes' if r.solvable else 'NO'}")
    lines.append(f"tolerance {report.tolerance:.1e}: {'SOLVABLE' if report.passed else 'NOT SOLVABLE'}")
    print("\n".join(lines))
    if args.json:
        emit(render_json({"manifest_hash": manifest.hash, **report.to_dict()}), args.json)
    return EXIT_OK if report.passed else EXIT_DOMAIN


def _times(cfg, args) -> np.ndarray:
    t_max = cfg.run.t_max if args.t_max is None else args.t_max
    n = cfg.run.n_times if args.n_times is None else args.n_times
    return np.linspace(0.0, t_max, n)


def cmd_evolve(args) -> int:
    cfg, digest = _load(args.config)
    texts = args.observables or list(cfg.run.observables)
    if not texts:
        raise CliFailure(EXIT_INPUT, "no observables given (use --observables or [run].observables)")
    try:
        observables = [parse_observable(t) for t in texts]
    except ValueError as exc:
        raise CliFailure(EXIT_INPUT, str(exc)) from None
    for obs in observables:
        bad = [s for s in obs if not 0 <= s < cfg.model.n_sites]
        if bad:
            raise CliFailure(EXIT_INPUT, f"observable {observable_label(obs)} names site(s) {bad} outside the model")
    times = _times(cfg, args)
    params = {
        "observables": [observable_label(o) for o in observables],
        "t_max": float(times[-1]), "n_times": int(times.size),
        "connected": args.connected, "force": args.force, "method": args.method,
    }
    manifest = _manifest(args, cfg, digest, params)
    rows = []
    exact = True
    for obs in observables:
        label = observable_label(obs)
        series = _evolve_one(cfg, obs, times, args)
        exact = exact and series.exact
        rows.extend((float(t), label, float(v)) for t, v in zip(times, series.values))
        if args.connected and len(obs) >= 2:
            product = np.ones_like(times)
            for site, axis in sorted(obs.items()):
                product = product * _evolve_one(cfg, {site: axis}, times, args).values
            rows.extend(
                (float(t), label + ":connected", float(v))
                for t, v in zip(times, series.values - product)
            )
    comments = [f"manifest={manifest.hash}"]
    if not exact:
        comments.append("NOT EXACT: model violates the solvability constraint (--force)")
    emit(render_csv(["time", "observable", "value"], rows, comments), args.out)
    _finish(manifest, args)
    return EXIT_OK


def _evolve_one(cfg, obs, times, args):
    problem = build_reduced(cfg.model, obs.keys(), cfg.initial_state, force=args.force)
    return evolve_observable(problem, obs, times, method=args.method)


def cmd_trajectories(args) -> int:
    cfg, digest = _load(args.config)
    try:
        system = NoisyIsing.from_model(cfg.model)
    except ValueError as exc:
        raise CliFailure(EXIT_INPUT, str(exc)) from None
    n = cfg.model.n_sites
    texts = args.observables or list(cfg.run.observables)
    try:
        observables = [parse_observable(t) for t in texts] if texts else [
            {s: a} for s in range(n) for a in "XYZ"
        ]
    except ValueError as exc:
        raise CliFailure(EXIT_INPUT, str(exc)) from None
    dt = args.dt
    if dt is None:
        dt = float(cfg.run.extra.get("dt", 0.01 / max(system.energy_scale(), max(system.gamma), 1e-12)))
    seed = cfg.run.seed if args.seed is None else args.seed
    t_max = cfg.run.t_max if args.t_max is None else args.t_max
    params = {
        "M": args.M, "dt": dt, "seed": seed, "t_max": t_max, "frame": args.frame,
        "observables": [observable_label(o) for o in observables], "sample_every": args.sample_every,
    }
    manifest = _manifest(args, cfg, digest, params)
    ens = run_ensemble(
        system, cfg.initial_state, t_max, dt, args.M, seed, observables,
        frame=args.frame, workers=args.workers, sample_every=args.sample_every,
    )
    stderr = ens.stderr
    rows = [
        (float(t), label, float(ens.mean[i, o]), float(stderr[i, o]), ens.M)
        for o, label in enumerate(ens.labels)
        for i, t in enumerate(ens.times)
    ]
    emit(
        render_csv(["time", "observable", "mean", "stderr", "M"], rows, [f"manifest={manifest.hash}"]),
        args.out,
    )
    if args.exact_reference or args.report:
        meta = {"manifest_hash": manifest.hash, **ens.metadata()}
        meta.pop("backend")
        if args.exact_reference:
            ref = exact_reference(system, cfg.initial_state, ens.times, observables)
            meta["convergence"] = convergence_report(ens, ref).to_dict()
        report = args.report or (args.out + ".convergence.json" if args.out and args.out != "-" else None)
        if report:
            emit(render_json(meta), report)
        else:
            sys.stderr.write(render_json(meta))
    _finish(manifest, args)
    return EXIT_OK


def cmd_gap(args) -> int:
    cfg, digest = _load(args.config)
    manifest = _manifest(args, cfg, digest, {})
    try:
        cert = certify_gap(cfg.model)
    except GapConditionError as exc:
        print("no certificate:")
        for f in exc.report.failures:
            print(f"  {f}")
        return EXIT_DOMAIN
    print(f"# manifest={manifest.hash}")
    print(f"certified dissipative gap Gamma = {cert.gamma:.10g}")
    for j, g in enumerate(cert.site_gammas):
        print(f"  site {j}: Gamma_j = {g:.10g}")
    if cert.verified:
        print(f"verified: true gap {cert.true_gap:.10g} >= Gamma, zero eigenvalue simple")
    else:
        print("bound only (system too large for direct verification)")
    doc = {"manifest_hash": manifest.hash, **cert.to_dict()}
    if args.out:
        emit(render_json(doc), args.out)
        _finish(manifest, args)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg, digest = _load(args.config)
    manifest = _manifest(args, cfg, digest, {})
    blocks = graded_decompose(cfg.model, check=False)
    bad = blocks.violations()
    if bad:
        for name, norm in bad:
            sys.stderr.write(f"block {name}: norm {norm:.3e} should vanish\n")
        raise CliFailure(EXIT_DOMAIN, "graded structure violated; model is not solvable")
    parts = []
    for d in range(blocks.n_sites + 1):
        eig = np.linalg.eigvals(blocks.full[d, d])
        parts.extend((float(e.real), float(e.imag), d) for e in eig)
    parts.sort(key=lambda r: (r[0], r[1]))
    direct = multiset_distance(spectrum_via_blocks(blocks), liouvillian_spectrum(cfg.model))
    comments = [
        f"manifest={manifest.hash}",
        f"max_structural_zero_norm={max(blocks.required_zero().values()):.3e}",
        f"distance_to_direct_spectrum={direct:.3e}",
    ]
    emit(render_csv(["real", "imag", "grade"], parts, comments), args.out)
    sys.stderr.write(f"block-union vs direct spectrum: max deviation {direct:.3e}\n")
    _finish(manifest, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dissipative-ising", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-q", "--quiet", action="store_true", help="only warnings on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="test the solvability constraint")
    c.add_argument("config")
    c.add_argument("--json", help="write the report as JSON here")
    c.set_defaults(func=cmd_check)

    e = sub.add_parser("evolve", help="exact observables via finite patches")
    e.add_argument("config")
    e.add_argument("--observables", nargs="+", help="e.g. z@3 xx@2,5")
    e.add_argument("--connected", action="store_true", help="also emit connected correlators")
    e.add_argument("--force", action="store_true", help="run non-solvable models (results marked not exact)")
    e.add_argument("--method", default="auto", choices=["auto", "schrodinger", "heisenberg", "full"])
    e.add_argument("--t-max", type=float)
    e.add_argument("--n-times", type=int)
    e.add_argument("--out", help="CSV path (default stdout)")
    e.set_defaults(func=cmd_evolve)

    t = sub.add_parser("trajectories", help="white-noise trajectory ensemble")
    t.add_argument("config")
    t.add_argument("--M", type=int, default=1000)
    t.add_argument("--dt", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--t-max", type=float)
    t.add_argument("--sample-every", type=int)
    t.add_argument("--observables", nargs="+")
    t.add_argument("--frame", choices=["zz", "xx"], default="zz")
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--exact-reference", action="store_true", help="compare with the exact curves")
    t.add_argument("--report", help="convergence JSON path")
    t.add_argument("--out", help="CSV path (default stdout)")
    t.set_defaults(func=cmd_trajectories)

    g = sub.add_parser("gap", help="certify the dissipative gap")
    g.add_argument("config")
    g.add_argument("--out", help="certificate JSON path")
    g.set_defaults(func=cmd_gap)

    s = sub.add_parser("spectrum", help="Liouvillian spectrum from the graded blocks")
    s.add_argument("config")
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s", stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliFailure as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except NotSolvableError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except (StructureError, SubspaceLeakError, CertificateError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except (ResourceError, PatchTooLargeError) as exc:
        sys.stderr.write(
            f"error: {exc}\nhint: shrink the observable support or coupling range, "
            "or use a smaller system\n"
        )
        return EXIT_RESOURCE
    except (TimeStepError, ModelError, ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
