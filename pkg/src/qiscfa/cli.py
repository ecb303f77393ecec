"""Command line workflows.

Every subcommand writes its fully resolved arguments to
``<out>/<subcommand>.config.json``; ``qiscfa --config FILE`` re-runs it.
Exit codes: 0 ok, 1 usage, 2 data error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .atoms import ExposureMap, atom_spectrum, mosaic
from .demosaic import (
    CarrierError,
    LowPassSpec,
    apply_color_correction,
    build_lowpass,
    demosaic_freq_select,
    extract_carriers,
    fit_color_correction,
)
from .imageio import IMAGE_SUFFIXES, ImageFormatError, read_image, read_pfm, write_image, write_pfm
from .library import AtomLibrary, resolve_basis
from .lp import LPError
from .metrics import (
    MODERATE,
    NO_CROSSTALK,
    SEVERE,
    CrosstalkModel,
    DegenerateAcquisitionError,
    aliasing_metric,
    apply_crosstalk,
    chrominance_sensitivity,
    condition_number,
    constraint_residuals,
    luminance_sensitivity,
    orthogonality_penalty,
    squared_chrominance_sensitivity,
    total_variation,
)
from .optimizer import DesignInfeasible, DesignProblem, multi_start_design, solve_convex_design
from .quality import (
    COLORCHECKER,
    TradeoffConfig,
    cpsnr,
    evaluate,
    luma,
    rgb_to_lab,
    ciede2000,
    ssim,
    tradeoff_svg,
    tradeoff_sweep,
)
from .sensor import FrameStack, QisConfig, diffraction_blur, simulate, tone_map
from .svg import spectrum_layout

log = logging.getLogger("qiscfa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
SWEEP_SIZES = (9, 11, 15, 17, 19, 21)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def g(v) -> str:
    """Six significant digits, as used in every CSV."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def _deltas(text) -> CrosstalkModel:
    if isinstance(text, CrosstalkModel):
        return text
    named = {"none": NO_CROSSTALK, "moderate": MODERATE, "severe": SEVERE}
    if text in named:
        return named[text]
    try:
        vals = [float(t) for t in str(text).split(",")]
    except ValueError:
        raise UsageError(f"bad deltas {text!r}") from None
    if len(vals) != 3:
        raise UsageError("deltas need three values r,g,b")
    return CrosstalkModel(*vals)


def _pair(text):
    try:
        u, v = (int(t) for t in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected u,v but got {text!r}") from None
    return [u, v]


def _write_config(args, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    (out / f"{args.command}.config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _entry(library, spec, basis=None):
    entry = library.resolve(spec)
    b = resolve_basis(basis) if basis else entry.basis
    return entry.atom, b


def _filter(size, sigma):
    return build_lowpass(LowPassSpec(int(size), float(sigma) if sigma else size / 3.0))


def _read_rgb(path) -> np.ndarray:
    im = read_image(path)
    if im.ndim == 2:
        im = np.repeat(im[..., None], 3, axis=2)
    return np.clip(im, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_design(args) -> int:
    out = Path(args.out)
    _write_config(args, out)
    problem = DesignProblem(
        args.rows,
        args.cols,
        lambda_l=args.lambda_l,
        lambda_rho=args.lambda_rho,
        tv_max=args.tvmax,
        deltas=_deltas(args.deltas),
        basis=resolve_basis(args.basis),
        enable_tv=not args.no_tv,
        enable_anti_alias=not args.no_anti_alias,
    )
    if args.convex:
        res = solve_convex_design(problem, tuple(args.omega), phi=args.phi, gamma_min=args.gamma_min)
        atom = res.atom
        summary = {
            "gamma_l": res.gamma_l,
            "gamma_c": res.gamma_c,
            "gamma_c_squared": res.gamma_c**2,
            "tv": res.tv,
            "phi": res.phi,
            "omega": list(res.omega),
            "residuals": res.residuals.as_dict(),
        }
        (out / "trace.csv").write_text(_csv_text(["k", "tau", "objective"], []))
    else:
        ms = multi_start_design(problem, args.starts, seed=args.seed, parallelism=args.parallel)
        best = ms.best
        atom = best.atom
        rows = [[r.k, g(r.tau), g(r.objective)] for r in best.trace.records]
        (out / "trace.csv").write_text(_csv_text(["k", "tau", "objective"], rows))
        start_rows = []
        for i, r in enumerate(ms.results):
            if r is None:
                start_rows.append([i, "", "", "", "", "", "", ms.failures[i]])
            else:
                start_rows.append(
                    [i, g(r.gamma_c), g(r.gamma_l), g(r.rho), g(r.tv), r.trace.iterations, int(r.trace.converged), ""]
                )
        (out / "starts.csv").write_text(
            _csv_text(["start", "gamma_c", "gamma_l", "rho", "tv", "iterations", "converged", "error"], start_rows)
        )
        summary = {
            "best_start": ms.best_index,
            "gamma_l": best.gamma_l,
            "gamma_c": best.gamma_c,
            "gamma_c_squared": best.gamma_c**2,
            "rho": best.rho,
            "tv": best.tv,
            "residuals": best.residuals.as_dict(),
        }
    d = atom.to_dict()
    d["basis"] = problem.basis.to_dict()
    (out / "atom.json").write_text(json.dumps(d, indent=2) + "\n")
    (out / "design.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _metrics_row(atom, basis, deltas, reference):
    jl = aliasing_metric(atom, basis, reference) if reference is not None else math.nan
    try:
        k0 = condition_number(atom, basis, None)
    except DegenerateAcquisitionError:
        k0 = math.inf
    try:
        k1 = condition_number(atom, basis, deltas)
    except DegenerateAcquisitionError:
        k1 = math.inf
    return {
        "gamma_l": luminance_sensitivity(atom, basis),
        "gamma_c": chrominance_sensitivity(atom, basis),
        "tv_raw": total_variation(atom, deltas),
        "tv_norm": total_variation(atom, deltas, normalize=True),
        "rho": orthogonality_penalty(atom, basis),
        "J_l": jl,
        "kappa_no_ctk": k0,
        "kappa_ctk": k1,
    }


def cmd_inspect(args) -> int:
    library = AtomLibrary()
    atom, basis = _entry(library, args.atom, args.basis)
    out = Path(args.out)
    _write_config(args, out)
    deltas = _deltas(args.deltas)
    spec = atom_spectrum(atom, basis)
    M, N = atom.shape
    print(f"atom {atom.name} {M}x{N} basis {basis.name}")
    print("u v l_re l_im alpha_re alpha_im beta_re beta_im")
    for u in range(M):
        for v in range(N):
            vals = [spec.l[u, v], spec.alpha[u, v], spec.beta[u, v]]
            print(f"{u} {v} " + " ".join(f"{g(z.real)} {g(z.imag)}" for z in vals))
    ref = _read_rgb(args.reference) if args.reference else None
    for k, v in _metrics_row(atom, basis, deltas, ref).items():
        print(f"{k} {g(v)}")
    res = constraint_residuals(atom, basis, deltas, args.tvmax, tv_normalized=True, anti_alias=True)
    for k, v in res.as_dict().items():
        print(f"residual_{k} {g(v)}")
    marks = {}
    thr = 1e-6 * atom.K
    for label, arr in (("L", spec.l), ("a", spec.alpha), ("b", spec.beta)):
        for u in range(M):
            for v in range(N):
                if abs(arr[u, v]) >= thr:
                    marks[(u, v)] = (marks[(u, v)] + "," if (u, v) in marks else "") + label
    (out / "spectrum.svg").write_text(spectrum_layout(M, N, marks, title=f"{atom.name} spectrum"))
    try:
        plan = extract_carriers(atom, basis)
    except CarrierError as exc:
        print(f"carrier error: {exc}")
        return EXIT_DATA
    print("carrier plan")
    for line in plan.describe():
        print("  " + line)
    return EXIT_OK


def cmd_metrics(args) -> int:
    library = AtomLibrary()
    out = Path(args.out)
    _write_config(args, out)
    deltas = _deltas(args.deltas)
    ref = _read_rgb(args.reference) if args.reference else None
    cols = ["gamma_l", "gamma_c", "tv_raw", "tv_norm", "rho", "J_l", "kappa_no_ctk", "kappa_ctk"]
    rows = []
    for spec in args.atom:
        atom, basis = _entry(library, spec, args.basis)
        m = _metrics_row(atom, basis, deltas, ref)
        rows.append([atom.name] + [g(m[c]) for c in cols])
    text = _csv_text(["atom_name"] + cols, rows)
    (out / "metrics.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_table(args) -> int:
    library = AtomLibrary()
    out = Path(args.out)
    _write_config(args, out)
    deltas = _deltas(args.deltas)
    ref = _read_rgb(args.reference) if args.reference else None
    rows = []
    for spec in args.atom:
        try:
            atom, basis = _entry(library, spec, args.basis)
            m = _metrics_row(atom, basis, deltas, ref)
            gc2 = squared_chrominance_sensitivity(atom, basis)
            rows.append([atom.name, g(m["gamma_l"]), g(gc2), g(m["tv_norm"]), g(m["J_l"]), g(m["kappa_ctk"]), ""])
        except (ValueError, OSError) as exc:
            rows.append([str(spec), "", "", "", "", "", str(exc)])
    text = _csv_text(["atom", "gamma_l", "gamma_c", "tv", "J_l", "kappa", "error"], rows)
    (out / "table.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_mosaic(args) -> int:
    library = AtomLibrary()
    atom, _ = _entry(library, args.atom)
    out = Path(args.out)
    _write_config(args, out)
    im = _read_rgb(args.image)
    if args.blur > 1:
        im = diffraction_blur(im, args.blur)
    deltas = _deltas(args.deltas)
    acq = apply_crosstalk(atom, deltas) if any(deltas.deltas) else atom
    exp = mosaic(im, acq, args.eta)
    write_pfm(out / "exposure.pfm", exp.theta)
    (out / "exposure.json").write_text(json.dumps({"eta": args.eta}, indent=2) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out)
    _write_config(args, out)
    cfg = QisConfig(args.q, args.eta, args.frames, args.seed)
    if args.exposure:
        exp = ExposureMap(read_pfm(args.exposure))
    else:
        if not (args.image and args.atom):
            raise UsageError("simulate needs --exposure or both --image and --atom")
        atom, _ = _entry(AtomLibrary(), args.atom)
        im = _read_rgb(args.image)
        if args.blur > 1:
            im = diffraction_blur(im, args.blur)
        exp = mosaic(im, atom, cfg.eta)
    simulate(exp, cfg).save(out / "frames.pgm")
    return EXIT_OK


def _chart_correction(atom, basis, deltas, qis, lowpass, mu, white_balance):
    """Color correction fitted on a simulated ColorChecker acquisition."""
    from .quality import _acquire_chart

    cfg = TradeoffConfig(atom, basis, crosstalk=deltas, qis=qis, lowpass=lowpass)
    _, recon = _acquire_chart(cfg)
    qf, labels = COLORCHECKER.patch_pixels(recon, cfg.margin)
    qgt = COLORCHECKER.values[labels].T
    return fit_color_correction(qf, qgt, labels, mu=mu, white_point=cfg.white_point if white_balance else None)


def cmd_demosaic(args) -> int:
    library = AtomLibrary()
    atom, basis = _entry(library, args.atom, args.basis)
    out = Path(args.out)
    _write_config(args, out)
    path = Path(args.input)
    if path.suffix.lower() == ".pfm":
        exp = ExposureMap(read_pfm(path))
        side = path.with_suffix(".json")
        gain = json.loads(side.read_text())["eta"] if side.exists() else args.gain
        qis = QisConfig(eta=gain)
    else:
        stack = FrameStack.load(path)
        exp = tone_map(stack)
        gain = stack.config.eta
        qis = stack.config
    lp = _filter(args.filter_size, args.sigma)
    plan = extract_carriers(atom, basis)
    rgb = demosaic_freq_select(exp, plan, lp, gain=gain)
    if args.mu is not None or args.white_balance:
        cc = _chart_correction(atom, basis, _deltas(args.deltas), qis, lp, args.mu or 0.0, args.white_balance)
        rgb = apply_color_correction(rgb, cc)
        (out / "color_correction.json").write_text(json.dumps(cc.to_dict(), indent=2) + "\n")
    write_image(out / args.output, rgb)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    recon = _read_rgb(args.recon)
    ref = _read_rgb(args.reference)
    rep = evaluate(recon, ref, margin=args.margin, chart=COLORCHECKER if args.chart else None)
    d = rep.to_dict()
    print(json.dumps(d, indent=2, sort_keys=True))
    if args.csv:
        p = Path(args.csv)
        new = not p.exists()
        with open(p, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(["recon", "reference", "cpsnr", "ssim", "mean_ciede2000", "ysnr_proxy"])
            w.writerow([args.recon, args.reference, g(rep.cpsnr), g(rep.ssim), g(rep.mean_ciede2000), g(rep.ysnr_proxy)])
    return EXIT_OK


def image_seed(seed: int, name: str) -> int:
    """Per-image seed from the run seed and the file name."""
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


def _pipeline_image(job):
    path, atom, basis, deltas, qcfg, sizes, sigma, blur, cc = job
    try:
        ref = _read_rgb(path)
    except (OSError, ValueError) as exc:
        return path.name, None, f"unreadable: {exc}"
    if min(ref.shape[:2]) < max(sizes):
        return path.name, None, "image smaller than the filter"
    im = diffraction_blur(ref, blur) if blur > 1 else ref
    acq = apply_crosstalk(atom, deltas) if any(deltas.deltas) else atom
    stack = simulate(mosaic(im, acq, qcfg.eta), qcfg)
    exp = tone_map(stack)
    plan = extract_carriers(atom, basis)
    best = None
    for size in sizes:
        rgb = demosaic_freq_select(exp, plan, _filter(size, sigma), gain=qcfg.eta)
        if cc is not None:
            rgb = apply_color_correction(rgb, cc)
        m = max(sizes) // 2
        a, b = rgb[m:-m, m:-m], ref[m:-m, m:-m]
        score = cpsnr(a, b)
        if best is None or score > best[1]:
            de = float(np.mean(ciede2000(rgb_to_lab(a), rgb_to_lab(b))))
            best = (size, score, ssim(luma(a), luma(b)), de)
    size, score, s, de = best
    return path.name, [path.name, qcfg.seed, size, g(score), g(s), g(de)], None


def cmd_pipeline(args) -> int:
    library = AtomLibrary()
    atom, basis = _entry(library, args.atom, args.basis)
    out = Path(args.out)
    _write_config(args, out)
    deltas = _deltas(args.deltas)
    folder = Path(args.images)
    if not folder.is_dir():
        raise FileNotFoundError(f"{folder} is not a directory")
    files = sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    sizes = SWEEP_SIZES if args.sweep_filter else (args.filter_size,)
    cc = None
    if args.mu is not None or args.white_balance:
        base = QisConfig(args.q, args.eta, args.frames, args.seed)
        cc = _chart_correction(atom, basis, deltas, base, _filter(args.filter_size, args.sigma), args.mu or 0.0, args.white_balance)
    jobs = [
        (p, atom, basis, deltas, QisConfig(args.q, args.eta, args.frames, image_seed(args.seed, p.name)), sizes, args.sigma, args.blur, cc)
        for p in files
    ]
    if args.parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as ex:
            results = list(ex.map(_pipeline_image, jobs))
    else:
        results = [_pipeline_image(j) for j in jobs]
    rows = []
    for name, row, err in sorted(results, key=lambda r: r[0]):
        if err:
            log.warning("skipped %s: %s", name, err)
        else:
            rows.append(row)
    text = _csv_text(["image", "seed", "filter_size", "cpsnr", "ssim", "mean_ciede2000"], rows)
    (out / "pipeline.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def mu_schedule(count: int, mu_min: float, mu_max: float):
    """Zero followed by ``count - 1`` log-spaced values in ``[mu_min, mu_max]``."""
    if count < 2:
        raise ValueError("need at least two mu values")
    return [0.0] + list(np.logspace(math.log10(mu_min), math.log10(mu_max), count - 1))


def cmd_tradeoff(args) -> int:
    library = AtomLibrary()
    out = Path(args.out)
    _write_config(args, out)
    mus = mu_schedule(args.mu_count, args.mu_min, args.mu_max)
    qis = QisConfig(args.q, args.eta, args.frames, args.seed)
    lp = _filter(args.filter_size, args.sigma)
    curves, rows = {}, []
    for spec in args.atom:
        atom, basis = _entry(library, spec, args.basis)
        cfg = TradeoffConfig(
            atom, basis, crosstalk=_deltas(args.deltas), qis=qis, lowpass=lp,
            white_point=None if args.no_white_balance else (0.95, 1.0, 1.0889),
        )
        pts = tradeoff_sweep(cfg, mus)
        curves[atom.name] = pts
        rows += [[atom.name, g(p.mu), g(p.color_error), g(p.mean_ciede2000), g(p.ysnr_proxy)] for p in pts]
    text = _csv_text(["atom", "mu", "color_error", "mean_ciede2000", "ysnr_proxy"], rows)
    (out / "tradeoff.csv").write_text(text)
    (out / "tradeoff.svg").write_text(tradeoff_svg(curves))
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _qis_args(p):
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--eta", type=float, default=2.0)
    p.add_argument("--frames", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)


def _filter_args(p):
    p.add_argument("--filter-size", type=int, default=21)
    p.add_argument("--sigma", type=float, default=None, help="default: filter size / 3")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qiscfa", description="CFA design, QIS simulation and demosaicking.")
    parser.add_argument("--config", help="re-run from a resolved config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("design", help="optimize an atom")
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--lambda-l", type=float, default=0.1)
    p.add_argument("--lambda-rho", type=float, default=0.02)
    p.add_argument("--tvmax", type=float, default=0.131)
    p.add_argument("--deltas", default="moderate")
    p.add_argument("--basis", default="canonical")
    p.add_argument("--no-tv", action="store_true")
    p.add_argument("--no-anti-alias", action="store_true")
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--convex", action="store_true")
    p.add_argument("--omega", type=_pair, default=[1, 1])
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--gamma-min", type=float, default=0.0)
    p.add_argument("--out", default="design_out")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("inspect", help="spectrum, metrics and carrier plan of an atom")
    p.add_argument("--atom", required=True)
    p.add_argument("--basis", default=None)
    p.add_argument("--deltas", default="moderate")
    p.add_argument("--tvmax", type=float, default=0.131)
    p.add_argument("--reference", default=None)
    p.add_argument("--out", default="inspect_out")
    p.set_defaults(func=cmd_inspect)

    for name, func, helptext in (("metrics", cmd_metrics, "metric CSV rows"), ("table", cmd_table, "Table-style CSV")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--atom", action="append", required=True)
        p.add_argument("--basis", default=None)
        p.add_argument("--deltas", default="moderate")
        p.add_argument("--reference", default=None, help="image for the aliasing metric (>= 64x64)")
        p.add_argument("--out", default=f"{name}_out")
        p.set_defaults(func=func)

    p = sub.add_parser("mosaic", help="exposure map of an image under an atom")
    p.add_argument("--atom", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--eta", type=float, default=2.0)
    p.add_argument("--blur", type=int, default=5)
    p.add_argument("--deltas", default="none")
    p.add_argument("--out", default="mosaic_out")
    p.set_defaults(func=cmd_mosaic)

    p = sub.add_parser("simulate", help="QIS frame counts")
    p.add_argument("--exposure", default=None)
    p.add_argument("--image", default=None)
    p.add_argument("--atom", default=None)
    p.add_argument("--blur", type=int, default=5)
    _qis_args(p)
    p.add_argument("--out", default="simulate_out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("demosaic", help="frequency-selection demosaicking")
    p.add_argument("--atom", required=True)
    p.add_argument("--basis", default=None)
    p.add_argument("--input", required=True, help="exposure .pfm or frame-count .pgm")
    _filter_args(p)
    p.add_argument("--gain", type=float, default=1.0, help="gain for exposures without a sidecar")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--white-balance", action="store_true")
    p.add_argument("--deltas", default="none", help="crosstalk assumed when fitting the color correction")
    p.add_argument("--output", default="demosaic.ppm")
    p.add_argument("--out", default="demosaic_out")
    p.set_defaults(func=cmd_demosaic)

    p = sub.add_parser("evaluate", help="quality report of a reconstruction")
    p.add_argument("--recon", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--margin", type=int, default=0)
    p.add_argument("--chart", action="store_true", help="images are ColorChecker renders")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="blur, mosaic, simulate, demosaic and score a folder")
    p.add_argument("--images", required=True)
    p.add_argument("--atom", default="bayer")
    p.add_argument("--basis", default=None)
    p.add_argument("--deltas", default="none")
    p.add_argument("--blur", type=int, default=5)
    _qis_args(p)
    _filter_args(p)
    p.add_argument("--sweep-filter", action="store_true")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--white-balance", action="store_true")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", default="pipeline_out")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("tradeoff", help="color error versus noise sweep over mu")
    p.add_argument("--atom", action="append", default=None)
    p.add_argument("--basis", default=None)
    p.add_argument("--deltas", default="moderate")
    _qis_args(p)
    _filter_args(p)
    p.add_argument("--mu-count", type=int, default=20)
    p.add_argument("--mu-min", type=float, default=1e-2)
    p.add_argument("--mu-max", type=float, default=1e8)
    p.add_argument("--no-white-balance", action="store_true")
    p.add_argument("--out", default="tradeoff_out")
    p.set_defaults(func=cmd_tradeoff)
    parser.commands = sub.choices
    return parser


def _parse(argv):
    argv = list(argv)
    if "--config" not in argv:
        args = build_parser().parse_args(argv)
    else:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            raise UsageError("--config needs a file")
        cfg = json.loads(Path(argv[i + 1]).read_text())
        rest = argv[:i] + argv[i + 2 :]
        command = cfg.pop("command", None)
        if command is None:
            raise UsageError("config file has no subcommand")
        if rest and rest[0] == command:
            rest = rest[1:]
        parser = build_parser()
        if command not in parser.commands:
            raise UsageError(f"config file names unknown subcommand {command!r}")
        sub = parser.commands[command]
        sub.set_defaults(**cfg)
        # Required options are satisfied by the config file.
        for action in sub._actions:
            if action.dest in cfg:
                action.required = False
        args = parser.parse_args([command] + rest)
    if not args.command:
        raise UsageError("a subcommand is required")
    if args.command == "tradeoff" and not args.atom:
        args.atom = ["bayer"]
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DesignInfeasible, LPError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, ValueError, ImageFormatError, CarrierError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
