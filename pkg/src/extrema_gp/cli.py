"""Command-line interface: ``fit``, ``simulate``, and ``validate``.

Exit codes: 0 success, 2 malformed input, 3 numerical failure, 4 validation
tolerance breach.  Every artifact embeds a provenance manifest; set the
``EXTREMA_GP_LOG`` environment variable (DEBUG/INFO/WARNING) for verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .empirical_bayes import EBConfig, select_hyperparams
from .gp import Dataset, Hyperparams, fit, naive_log_lik_t
from .kernel import KernelSpec
from .manifest import (DATA_CSV_SCHEMA, EXTREMA_JSON_SCHEMA,
                       POSTERIOR_CSV_SCHEMA, SIM_REPORT_SCHEMA, RunManifest)
from .posterior import PosteriorGrid, PriorSpec, compute_posterior, log_unnorm_posterior
from .simulate import (PRESETS, SimConfig, generate_dataset, preset_config,
                       run_replications, report_tables)
from .summarize import build_report, hpd_region
from .svgplot import render_density_svg

log = logging.getLogger("extrema_gp")

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4


def _setup_logging():
    level = os.environ.get("EXTREMA_GP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_prior(text: str) -> PriorSpec:
    try:
        family, params = text.split(":", 1)
        if family != "beta":
            raise ValueError
        a, b = (float(v) for v in params.split(","))
        return PriorSpec(a, b)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"prior must look like beta:a,b with positive a and b, got {text!r}"
        )


def read_xy_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column CSV with exact header ``x,y``; '#' lines are
    comments.  Raises ValueError on any malformation."""
    xs, ys = [], []
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != "x,y":
                    raise ValueError(
                        f"{path}:{lineno}: expected header 'x,y', got {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns")
            try:
                xs.append(float(parts[0]))
                ys.append(float(parts[1]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
    if not header_seen:
        raise ValueError(f"{path}: empty file or missing 'x,y' header")
    if not xs:
        raise ValueError(f"{path}: no data rows")
    return np.array(xs), np.array(ys)


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def posterior_csv_text(grid: PosteriorGrid, manifest: RunManifest) -> str:
    lines = [f"# schema: {POSTERIOR_CSV_SCHEMA}", f"# {manifest.comment_line()}",
             "t,density,log_unnorm"]
    for t, d, lu in zip(grid.ts, grid.density, grid.log_unnorm):
        lines.append(f"{t!r},{d!r},{lu!r}")
    return "\n".join(lines) + "\n"


def dataset_csv_text(x, y, manifest: RunManifest) -> str:
    lines = [f"# schema: {DATA_CSV_SCHEMA}", f"# {manifest.comment_line()}", "x,y"]
    for xi, yi in zip(x, y):
        lines.append(f"{xi!r},{yi!r}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# fit
# ----------------------------------------------------------------------

def cmd_fit(args) -> int:
    loaded = None
    if args.manifest:
        doc = json.loads(Path(args.manifest).read_text())
        loaded = RunManifest.from_dict(doc.get("manifest", doc))
        args.input = loaded.source
        args.prior = _parse_prior(loaded.prior)
        args.grid = loaded.grid["grid_size"]
        args.alpha_hpd = loaded.extra["alpha_hpd"]
        args.alpha_ci = loaded.extra["alpha_ci"]
        args.seed = loaded.seeds["eb_seed"]
        args.rescale = loaded.rescale is not None

    try:
        x, y = read_xy_csv(args.input)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    rescale_map = None
    if args.rescale:
        lo, hi = float(x.min()), float(x.max())
        if hi <= lo:
            print("error: cannot rescale a constant x column", file=sys.stderr)
            return EXIT_BAD_INPUT
        x = (x - lo) / (hi - lo)
        rescale_map = {"offset": lo, "scale": hi - lo}

    try:
        data = Dataset(x=x, y=y, allow_duplicates=args.allow_duplicates)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    try:
        if loaded is not None and loaded.hyperparams:
            hp = loaded.hyperparams
            hyper = Hyperparams(lam=hp["lam"], h=hp["h"], sigma2=hp["sigma2"])
        else:
            cfg = EBConfig(starts=args.eb_starts, max_iters=args.eb_max_iters,
                           seed=args.seed)
            hyper = select_hyperparams(data, cfg)
        model = fit(data, hyper, KernelSpec(h=hyper.h))
        grid = compute_posterior(model, args.prior, args.grid)
        hpd = hpd_region(grid, args.alpha_hpd)
        report = build_report(model, grid, hpd, args.alpha_ci)
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    manifest = RunManifest(
        command="fit", source=str(args.input),
        hyperparams={"lam": hyper.lam, "h": hyper.h, "sigma2": hyper.sigma2},
        prior=args.prior.label(),
        grid={"grid_size": args.grid, "t_lo": grid.t_lo, "t_hi": grid.t_hi},
        seeds={"eb_seed": args.seed}, rescale=rescale_map,
        extra={"alpha_hpd": args.alpha_hpd, "alpha_ci": args.alpha_ci},
        created_utc=loaded.created_utc if loaded else None,
    )
    outdir = Path(args.output_dir)
    _write_text(outdir / "posterior.csv", posterior_csv_text(grid, manifest))
    payload = {"schema": EXTREMA_JSON_SCHEMA, "manifest": manifest.to_dict()}
    payload.update(report.to_json_dict())
    _write_text(outdir / "extrema.json", _json_text(payload))
    if args.emit_svg:
        svg = render_density_svg(grid, hpd, report, comment=manifest.comment_line())
        _write_text(outdir / "posterior.svg", svg)
    print(f"m_hat={report.m_hat} extrema="
          f"{[round(e.t_hat, 6) for e in report.estimates]}")
    return EXIT_OK


# ----------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    overrides = {}
    for name in ("sigma", "alpha_hpd", "alpha_ci"):
        v = getattr(args, name)
        if v is not None:
            overrides[name] = v
    if args.prior is not None:
        overrides["prior"] = args.prior
    overrides["grid_size"] = args.grid
    overrides["workers"] = args.workers
    overrides["eb"] = EBConfig(starts=args.eb_starts, max_iters=args.eb_max_iters,
                               seed=args.eb_seed)
    try:
        if args.preset:
            cfg = preset_config(args.preset, n=args.n, replicates=args.replicates,
                                seed=args.seed, **overrides)
        else:
            cfg = SimConfig(n=args.n, replicates=args.replicates, seed=args.seed,
                            **overrides)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    manifest = RunManifest(
        command="simulate", source=args.preset or "custom",
        prior=cfg.prior.label(),
        grid={"grid_size": cfg.grid_size},
        seeds={"seed": cfg.seed, "eb_seed": cfg.eb.seed},
        extra={"n": cfg.n, "replicates": cfg.replicates, "sigma": cfg.sigma,
               "alpha_hpd": cfg.alpha_hpd, "alpha_ci": cfg.alpha_ci},
    )
    outdir = Path(args.output_dir)

    if args.emit_data:
        for i in range(cfg.replicates):
            d = generate_dataset(cfg, i)
            _write_text(outdir / f"data_rep{i:03d}.csv",
                        dataset_csv_text(d.x, d.y, manifest))

    try:
        report = run_replications(cfg)
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    payload = {"schema": SIM_REPORT_SCHEMA, "manifest": manifest.to_dict()}
    payload.update(report.to_json_dict())
    _write_text(outdir / "report.json", _json_text(payload))
    for name, text in report_tables(report).items():
        _write_text(outdir / name,
                    f"# schema: {SIM_REPORT_SCHEMA}\n# {manifest.comment_line()}\n"
                    + text)
    # Wall-clock stats are real but non-deterministic; they live in a side
    # file so report.json stays byte-identical across same-seed runs.
    _write_text(outdir / "timing.json", _json_text(report.runtime))
    hist = report.m_hat_histogram
    print(f"replicates={cfg.replicates} failures={len(report.failures)} "
          f"m_hat_histogram={hist}")
    return EXIT_OK


# ----------------------------------------------------------------------
# validate
# ----------------------------------------------------------------------

def _finite_diff(f, t, step):
    return (f(t + step) - f(t - step)) / (2.0 * step)


def cmd_validate(args) -> int:
    if args.n > 60:
        print(f"error: validation is O(n^3) per point; n={args.n} exceeds the "
              "limit of 60", file=sys.stderr)
        return EXIT_BAD_INPUT

    if args.corrupt_kernel:
        # Negative-control hook: flip the sign of the quadratic correction in
        # the closed-form derivative variance so the oracle must object.
        from . import posterior as _post
        from .kernel import deriv_matrix as _dm, eval_deriv as _ed

        def _broken(model, ts):
            rows = _dm(model.spec, 1, ts, model.data.x)
            mu = rows @ model.weights
            quad = np.einsum("ij,ij->i", rows, model.solve(rows.T).T)
            k11 = _ed(model.spec, 1, 1, ts, ts)
            var = model.hyper.sigma2 / model.n_lambda * (k11 + quad)
            return mu, var, k11

        _post._derivative_stats = _broken

    cfg = SimConfig(n=args.n, replicates=1, seed=args.seed)
    data = generate_dataset(cfg, 0)
    hyper = Hyperparams(lam=0.5 / args.n, h=0.2, sigma2=0.04)
    spec = KernelSpec(h=hyper.h)
    model = fit(data, hyper, spec)
    prior = PriorSpec(1.0, 1.0)

    rng = np.random.Generator(np.random.Philox(key=np.array(
        [args.seed, 2 ** 32], dtype=np.uint64)))
    ts = rng.uniform(0.05, 0.95, size=args.t_count)

    naive = np.array([naive_log_lik_t(data, hyper, spec, t) for t in ts])
    closed = np.asarray(log_unnorm_posterior(model, prior, ts)) - prior.log_pdf(ts)
    diffs = naive - closed
    spread = float(diffs.max() - diffs.min())

    fd_worst = 0.0
    from .gp import mean_f, mean_fprime, var_fprime
    for t in rng.uniform(0.05, 0.95, size=10):
        step = 1e-5
        pairs = [
            (mean_fprime(model, t, 0), _finite_diff(lambda u: mean_f(model, u), t, step)),
            (mean_fprime(model, t, 1), _finite_diff(lambda u: mean_fprime(model, u, 0), t, step)),
            (var_fprime(model, t, 1), _finite_diff(lambda u: var_fprime(model, u, 0), t, step)),
        ]
        for exact, approx in pairs:
            denom = max(abs(exact), 1e-8)
            fd_worst = max(fd_worst, abs(exact - approx) / denom)

    print(f"closed-form vs direct likelihood: max log spread {spread:.3e} "
          f"(tolerance {args.tol:.1e})")
    print(f"derivative finite-difference battery: worst relative deviation "
          f"{fd_worst:.3e} (tolerance 1e-4)")
    if spread > args.tol or fd_worst > 1e-4:
        worst_t = float(ts[int(np.argmax(np.abs(diffs - diffs.mean())))])
        print(f"VALIDATION FAILED; worst t={worst_t!r}", file=sys.stderr)
        return EXIT_VALIDATION
    print("validation passed")
    return EXIT_OK


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="extrema-gp",
        description="Posterior inference on the local extrema of a noisy "
                    "function observed on [0, 1].",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit one dataset from CSV and summarize "
                                   "its local extrema")
    f.add_argument("--input", required=False, help="CSV file with header x,y")
    f.add_argument("--manifest", help="rerun from a previously emitted manifest")
    f.add_argument("--prior", type=_parse_prior, default=PriorSpec(1.0, 1.0),
                   help="prior on the extremum location, e.g. beta:2,3")
    f.add_argument("--grid", type=int, default=2001, help="posterior grid size")
    f.add_argument("--alpha-hpd", type=float, default=0.05)
    f.add_argument("--alpha-ci", type=float, default=0.05)
    f.add_argument("--seed", type=int, default=0, help="seed for optimizer starts")
    f.add_argument("--eb-starts", type=int, default=8)
    f.add_argument("--eb-max-iters", type=int, default=400)
    f.add_argument("--rescale", action="store_true",
                   help="min-max rescale x into [0, 1] (recorded in manifest)")
    f.add_argument("--allow-duplicates", action="store_true")
    f.add_argument("--emit-svg", action="store_true")
    f.add_argument("--output-dir", default=".")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run the seeded replication study")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--replicates", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sigma", type=float, default=None)
    s.add_argument("--prior", type=_parse_prior, default=None)
    s.add_argument("--grid", type=int, default=2001)
    s.add_argument("--alpha-hpd", type=float, default=None)
    s.add_argument("--alpha-ci", type=float, default=None)
    s.add_argument("--workers", type=int, default=0,
                   help="0 = available parallelism")
    s.add_argument("--eb-starts", type=int, default=8)
    s.add_argument("--eb-max-iters", type=int, default=400)
    s.add_argument("--eb-seed", type=int, default=0)
    s.add_argument("--emit-data", action="store_true",
                   help="also write each replicate's dataset as CSV")
    s.add_argument("--output-dir", default=".")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="run the slow direct-likelihood oracle "
                                        "against the closed form")
    v.add_argument("--n", type=int, default=30)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--t-count", type=int, default=50)
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--corrupt-kernel", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "fit" and not args.input and not args.manifest:
        print("error: fit requires --input or --manifest", file=sys.stderr)
        return EXIT_BAD_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
