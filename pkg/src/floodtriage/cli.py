"""Command-line entry point.

Subcommands map one-to-one onto pipeline stages, plus `run` (end to end),
`eval` (score outputs against ground truth), and `ablate` (detection
channel sweep). Exit codes: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import detect as det
from . import synth
from .config import PipelineConfig, read_config, write_config
from .depth import DepthField
from .errors import FloodTriageError
from .figures import (
    save_depth_figure,
    save_irr_curve,
    save_posterior_figure,
    save_severity_figure,
)
from .outputs import build_rows, write_geojson, write_summary, write_triage_csv
from .pipeline import PipelineParams, depth_stage, detect_stage, run_pipeline, score_stage
from .raster import Raster, RasterStack
from .raster_io import read_raster, write_raster
from .ranking import assign_tiers, rank
from .scoring import load_curves
from .synth import ScenarioInputs, ScenarioSpec, ScenarioTruth
from .tables import (
    read_parcels,
    read_scored,
    read_truth_table,
    write_parcels,
    write_scored,
    write_truth_table,
)


class UsageError(Exception):
    pass


def _require(cfg: PipelineConfig, names: list[str]) -> None:
    """Validation-first: every needed input path must exist before compute."""
    for name in names:
        value = getattr(cfg, name)
        paths = value if isinstance(value, list) else [value]
        if value is None or not paths:
            raise UsageError(f"config is missing required path {name!r}")
        for p in paths:
            if not Path(p).exists():
                raise UsageError(f"{name} path does not exist: {p}")


def _detect_requirements(cfg: PipelineConfig) -> list[str]:
    names = ["dem", "pre", "post", "reference"]
    if det.CHANNEL_CCI in cfg.channels:
        names += ["coh_pre", "coh_co", "urban"]
    if det.CHANNEL_HAND in cfg.channels:
        names += ["drainage"]
    return names


def _zeros_like(dem: Raster, dtype=bool) -> Raster:
    return Raster(dem.transform, np.zeros(dem.transform.shape, dtype=dtype))


def _load_inputs(cfg: PipelineConfig, need_parcels: bool = True) -> ScenarioInputs:
    dem = read_raster(cfg.dem)
    pre = RasterStack([read_raster(p) for p in cfg.pre])
    post = read_raster(cfg.post)

    def opt(path, dtype=bool):
        return read_raster(path) if path and Path(path).exists() else _zeros_like(dem, dtype)

    parcels = []
    if need_parcels and cfg.parcels:
        parcels = read_parcels(cfg.parcels)
    return ScenarioInputs(
        dem=dem,
        pre_stack=pre,
        post=post,
        coh_pre=opt(cfg.coh_pre, float),
        coh_co=opt(cfg.coh_co, float),
        urban=opt(cfg.urban),
        drainage=opt(cfg.drainage),
        permanent_water=opt(cfg.permanent_water),
        reference=read_raster(cfg.reference),
        parcels=parcels,
        sar_date=cfg.sar_date,
    )


def _out_dir(cfg: PipelineConfig, override) -> Path:
    out = Path(override) if override else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(cfg: PipelineConfig, args) -> PipelineParams:
    seed = getattr(args, "seed", None)
    if seed is None and cfg.seed is None:
        raise UsageError("seed is mandatory: set --seed or the config 'seed' key")
    params = cfg.to_params(seed)
    channels = getattr(args, "channels", None)
    if channels:
        chans = frozenset(c.strip().upper() for c in channels.split(","))
        params.detection = det.DetectionConfig(
            **{**params.detection.__dict__, "channels_enabled": chans}
        )
    return params


def _load_truth(cfg: PipelineConfig) -> ScenarioTruth | None:
    if not (cfg.truth_mask and Path(cfg.truth_mask).exists()):
        return None
    mask = read_raster(cfg.truth_mask)
    depth = read_raster(cfg.truth_depth) if cfg.truth_depth else mask
    rows = read_truth_table(cfg.truth_properties) if cfg.truth_properties else []
    return ScenarioTruth(
        mask=mask, depth=depth, true_dem=mask,
        true_wse=np.zeros(mask.transform.shape), properties=rows,
    )


def cmd_synth(args) -> int:
    spec = ScenarioSpec(
        n_rows=args.rows, n_cols=args.cols, cell_size_m=args.cell_size,
        terrain=args.terrain, wse_kind=args.wse_kind, looks=args.looks,
        urban_fraction=args.urban_fraction,
        dem_noise_sigma_m=args.dem_noise_sigma, seed=args.seed,
    )
    inputs, truth = synth.generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    write_raster(inputs.dem, out / "dem.grd")
    pre_paths = []
    for i, layer in enumerate(inputs.pre_stack):
        name = f"pre_{i:02d}.grd"
        write_raster(layer, out / name)
        pre_paths.append(str(out / name))
    write_raster(inputs.post, out / "post.grd")
    write_raster(inputs.coh_pre, out / "coh_pre.grd")
    write_raster(inputs.coh_co, out / "coh_co.grd")
    write_raster(inputs.urban, out / "urban.grd")
    write_raster(inputs.drainage, out / "drainage.grd")
    write_raster(inputs.permanent_water, out / "permanent_water.grd")
    write_raster(inputs.reference, out / "reference.grd")
    write_raster(truth.mask, out / "truth_mask.grd")
    write_raster(truth.depth, out / "truth_depth.grd")
    write_parcels(inputs.parcels, out / "parcels.csv")
    write_truth_table(truth.properties, out / "truth_properties.csv")

    cfg = PipelineConfig(
        dem=str(out / "dem.grd"), pre=pre_paths, post=str(out / "post.grd"),
        coh_pre=str(out / "coh_pre.grd"), coh_co=str(out / "coh_co.grd"),
        urban=str(out / "urban.grd"), drainage=str(out / "drainage.grd"),
        permanent_water=str(out / "permanent_water.grd"),
        reference=str(out / "reference.grd"), parcels=str(out / "parcels.csv"),
        truth_mask=str(out / "truth_mask.grd"),
        truth_depth=str(out / "truth_depth.grd"),
        truth_properties=str(out / "truth_properties.csv"),
        output_dir=str(out / "products"), sar_date=spec.sar_date,
        seed=args.seed, dem_sigma_m=max(spec.dem_noise_sigma_m, 0.5),
        theta_damage_usd=spec.theta_damage_usd,
    )
    write_config(cfg, out / "config.txt")
    print(f"scenario written to {out}")
    return 0


def cmd_detect(args) -> int:
    cfg = read_config(args.config)
    if args.channels:
        cfg.channels = tuple(c.strip().upper() for c in args.channels.split(","))
    _require(cfg, _detect_requirements(cfg))
    params = _params(cfg, args)
    inputs = _load_inputs(cfg, need_parcels=False)
    out = _out_dir(cfg, args.out)
    posterior, mask, hand = detect_stage(inputs, params)
    write_raster(posterior, out / "posterior.grd")
    write_raster(mask, out / "extent.grd")
    write_raster(hand, out / "hand.grd")
    save_posterior_figure(posterior, mask, out / "posterior.png")
    print(f"flooded cells: {int(mask.cells.sum())}")
    return 0


def cmd_depth(args) -> int:
    cfg = read_config(args.config)
    _require(cfg, ["dem"])
    out = _out_dir(cfg, args.out)
    extent_path = out / "extent.grd"
    if not extent_path.exists():
        raise UsageError(f"no extent raster at {extent_path}; run `detect` first")
    params = _params(cfg, args)
    mask = read_raster(extent_path)
    dem = read_raster(cfg.dem)
    perm = None
    if cfg.permanent_water and Path(cfg.permanent_water).exists():
        perm = read_raster(cfg.permanent_water)
    field = depth_stage(mask, dem, perm, params)
    write_raster(field.depth, out / "depth.grd")
    write_raster(field.ci_low, out / "depth_ci_low.grd")
    write_raster(field.ci_high, out / "depth_ci_high.grd")
    write_raster(field.kriging_variance, out / "kriging_variance.grd")
    save_depth_figure(field, out / "depth.png")
    d = field.depth.filled()
    print(f"mean depth (m): {np.nanmean(d):.3f}")
    return 0


def _load_depth_field(out: Path) -> DepthField:
    for name in ("depth", "depth_ci_low", "depth_ci_high", "kriging_variance"):
        if not (out / f"{name}.grd").exists():
            raise UsageError(f"no {name} raster in {out}; run `depth` first")
    return DepthField(
        depth=read_raster(out / "depth.grd"),
        ci_low=read_raster(out / "depth_ci_low.grd"),
        ci_high=read_raster(out / "depth_ci_high.grd"),
        kriging_variance=read_raster(out / "kriging_variance.grd"),
    )


def cmd_score(args) -> int:
    cfg = read_config(args.config)
    _require(cfg, ["parcels"])
    out = _out_dir(cfg, args.out)
    params = _params(cfg, args)
    field = _load_depth_field(out)
    extent_path = out / "extent.grd"
    if not extent_path.exists():
        raise UsageError(f"no extent raster at {extent_path}; run `detect` first")
    mask = read_raster(extent_path)
    parcels = read_parcels(cfg.parcels)
    curves = load_curves(cfg.curve_file) if cfg.curve_file else None
    scored = score_stage(field, mask, parcels, params, curves)
    write_scored(scored, out / "scored.csv")
    n_high = sum(1 for sp in scored if sp.high_severity)
    print(f"scored {len(scored)} properties, {n_high} high-severity")
    return 0


def _triage_products(cfg, params, out: Path, scored, mask: Raster) -> None:
    ranked = rank(scored)
    tiers = assign_tiers(ranked, params.boundaries)
    rows = build_rows(ranked, tiers, cfg.sar_date)
    write_triage_csv(rows, out / "triage.csv")
    footprints = {sp.property.parcel_id: sp.property.footprint for sp in ranked}
    write_geojson(rows, footprints, out / "triage.geojson")
    truth = _load_truth(cfg)
    truth_high = truth.high_severity_ids() if truth else None
    write_summary(
        rows, ranked, truth_high,
        inundated_cells=int(mask.cells.sum()),
        cell_area_m2=mask.transform.cell_area,
        path=out / "summary.txt",
        boundaries=params.boundaries,
    )
    save_severity_figure([sp.severity for sp in ranked], tiers,
                         out / "severity_by_tier.png")
    if truth_high:
        save_irr_curve(ranked, truth_high, out / "irr_recall.png")


def cmd_triage(args) -> int:
    cfg = read_config(args.config)
    _require(cfg, ["parcels"])
    out = _out_dir(cfg, args.out)
    params = _params(cfg, args)
    scored_path = out / "scored.csv"
    if not scored_path.exists():
        raise UsageError(f"no scored table at {scored_path}; run `score` first")
    extent_path = out / "extent.grd"
    if not extent_path.exists():
        raise UsageError(f"no extent raster at {extent_path}; run `detect` first")
    parcels = read_parcels(cfg.parcels)
    scored = read_scored(scored_path, parcels)
    mask = read_raster(extent_path)
    _triage_products(cfg, params, out, scored, mask)
    print(f"triage products written to {out}")
    return 0


def cmd_run(args) -> int:
    cfg = read_config(args.config)
    _require(cfg, _detect_requirements(cfg) + ["parcels"])
    params = _params(cfg, args)
    inputs = _load_inputs(cfg)
    out = _out_dir(cfg, args.out)
    curves = load_curves(cfg.curve_file) if cfg.curve_file else None
    result = run_pipeline(inputs, params, curves)
    write_raster(result.posterior, out / "posterior.grd")
    write_raster(result.mask, out / "extent.grd")
    write_raster(result.hand, out / "hand.grd")
    save_posterior_figure(result.posterior, result.mask, out / "posterior.png")
    if result.depth_field is not None:
        field = result.depth_field
        write_raster(field.depth, out / "depth.grd")
        write_raster(field.ci_low, out / "depth_ci_low.grd")
        write_raster(field.ci_high, out / "depth_ci_high.grd")
        write_raster(field.kriging_variance, out / "kriging_variance.grd")
        save_depth_figure(field, out / "depth.png")
    write_scored(result.scored, out / "scored.csv")
    _triage_products(cfg, params, out, result.scored, result.mask)
    print(f"pipeline products written to {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = read_config(args.config)
    out = _out_dir(cfg, args.out)
    truth = _load_truth(cfg)
    if truth is None:
        raise UsageError("config has no truth_mask path; nothing to evaluate against")
    extent_path = out / "extent.grd"
    if not extent_path.exists():
        raise UsageError(f"no extent raster at {extent_path}; run the pipeline first")
    pred_mask = read_raster(extent_path)
    pred_depth = None
    if (out / "depth.grd").exists():
        pred_depth = read_raster(out / "depth.grd")
    ranked = None
    if (out / "scored.csv").exists():
        ranked = rank(read_scored(out / "scored.csv"))
    report = synth.oracle_metrics(pred_mask, pred_depth, ranked, truth)
    lines = ["EVALUATION", "=========="]
    for group, metrics in report.items():
        lines.append(group)
        for key, value in metrics.items():
            if isinstance(value, dict):
                for k2, v2 in value.items():
                    lines.append(f"  {key}@{k2}: {v2:.6g}")
            elif isinstance(value, float):
                lines.append(f"  {key}: {value:.6g}")
            else:
                lines.append(f"  {key}: {value}")
    text = "\n".join(lines) + "\n"
    (out / "eval.txt").write_text(text)
    print(text, end="")
    return 0


ABLATION_SETS = (
    ("BCR", frozenset({det.CHANNEL_BCR})),
    ("BCR+HAND", frozenset({det.CHANNEL_BCR, det.CHANNEL_HAND})),
    ("BCR+CCI", frozenset({det.CHANNEL_BCR, det.CHANNEL_CCI})),
    ("BCR+CCI+HAND", frozenset({det.CHANNEL_BCR, det.CHANNEL_CCI,
                                det.CHANNEL_HAND})),
)


def cmd_ablate(args) -> int:
    from .ranking import extent_metrics

    cfg = read_config(args.config)
    _require(cfg, _detect_requirements(cfg))
    truth = _load_truth(cfg)
    if truth is None:
        raise UsageError("ablation needs a truth_mask path in the config")
    params = _params(cfg, args)
    inputs = _load_inputs(cfg, need_parcels=False)
    out = _out_dir(cfg, args.out)
    lines = ["channels,iou,precision,recall,f1"]
    print(f"{'channels':<14} {'iou':>7} {'precision':>10} {'recall':>7} {'f1':>7}")
    for label, channels in ABLATION_SETS:
        variant = det.DetectionConfig(
            **{**params.detection.__dict__, "channels_enabled": channels}
        )
        vp = PipelineParams(**{**params.__dict__, "detection": variant})
        _, mask, _ = detect_stage(inputs, vp)
        m = extent_metrics(mask, truth.mask)
        lines.append(f"{label},{m['iou']:.6g},{m['precision']:.6g},"
                     f"{m['recall']:.6g},{m['f1']:.6g}")
        print(f"{label:<14} {m['iou']:7.4f} {m['precision']:10.4f} "
              f"{m['recall']:7.4f} {m['f1']:7.4f}")
    (out / "ablation.csv").write_text("\r\n".join(lines) + "\r\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodtriage",
        description="SAR flood detection, depth estimation, and claims triage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scenario bundle")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--terrain", default="tilted", choices=synth.TERRAIN_KINDS)
    p.add_argument("--rows", type=int, default=128)
    p.add_argument("--cols", type=int, default=128)
    p.add_argument("--cell-size", type=float, default=10.0)
    p.add_argument("--wse-kind", default="constant", choices=synth.WSE_KINDS)
    p.add_argument("--looks", type=int, default=5)
    p.add_argument("--urban-fraction", type=float, default=0.0)
    p.add_argument("--dem-noise-sigma", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    def stage(name, help_, func, seed_required=False, channels=False):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None, help="override config output_dir")
        sp.add_argument("--seed", type=int, required=seed_required, default=None)
        if channels:
            sp.add_argument("--channels", default=None,
                            help="comma list from BCR,CCI,HAND (BCR mandatory)")
        sp.set_defaults(func=func)

    stage("detect", "flood extent from SAR change + terrain", cmd_detect,
          channels=True)
    stage("depth", "depth field with Monte Carlo CIs", cmd_depth,
          seed_required=True)
    stage("score", "per-property severity and confidence", cmd_score)
    stage("triage", "ranking, tiers, and output products", cmd_triage)
    stage("run", "full pipeline end to end", cmd_run, seed_required=True)
    stage("eval", "score products against ground truth", cmd_eval)
    stage("ablate", "detection channel-set sweep", cmd_ablate,
          seed_required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloodTriageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
