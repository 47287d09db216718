"""Command-line entry point: ``braidrecon <synth|fit|refine|eval|simulate>``.

Exit codes: 0 success, 1 validation or configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import formats
from .config import RunConfig
from .fit import Objective, adjust_radius, fit, initialize
from .raster import mask_strands, real_edges
from .refine import allocate, refine_all
from .simulate import simulate_coarse, truth_midline, vertical_params
from .strands import StrandSet, ValidationError
from .synth import BraidParams, generate

log = logging.getLogger("braidrecon")


def _require(cfg: RunConfig, *keys: str) -> None:
    missing = [k for k in keys if not cfg[k]]
    if missing:
        raise ValidationError(f"missing required config keys: {', '.join(missing)}")


def _out(cfg: RunConfig, name: str) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _target_edges(cfg: RunConfig):
    if cfg["edges"]:
        return formats.load_mask(cfg["edges"])
    if cfg["mask"]:
        mask = formats.load_mask(cfg["mask"])
        image = formats.load_image(cfg["image"]) if cfg["image"] else None
        return real_edges(mask, cfg.canny_config(), image)
    return None


def _synth_params(cfg: RunConfig) -> BraidParams:
    fields = dict(a=cfg["a"], b=cfg["b"], w=cfg["w"], t_step=cfg["t_step"], radius=cfg["radius"],
                  n_bunches=cfg["n_bunches"], shift_z=cfg["shift_z"])
    if cfg["midline"]:
        midline = formats.load_midline(cfg["midline"])
        n = cfg["n_points"] or int(round(midline.length())) + 1
        xy = midline.resample(n)
        k = np.arange(n)
        return BraidParams(n_points=n, shift_x=xy[:, 0], shift_y=xy[:, 1] - k * cfg["t_step"], **fields)
    return vertical_params(cfg.projection(), n_points=cfg["n_points"] or 200, **fields)


def cmd_synth(cfg: RunConfig) -> None:
    params = _synth_params(cfg).with_noise(cfg["seed"])
    braid = generate(params, cfg["seed"])
    formats.save_strands(braid.tube_strands, _out(cfg, "synth.strands"))
    formats.export_ply(braid.tube_strands, _out(cfg, "synth.ply"), braid.bunch_of)
    formats.save_params(params, _out(cfg, "synth_params.json"))
    print(f"centerlines={braid.n_bunches}")
    print(f"radius={params.radius!r}")


def cmd_simulate(cfg: RunConfig) -> None:
    truth = _synth_params(cfg).with_noise(cfg["seed"])
    strands, mask, edges = simulate_coarse(truth, cfg["noise_sigma"], cfg["strands_per_bunch"],
                                           cfg["seed"], cfg.projection(), cfg["softness"])
    formats.save_strands(strands, _out(cfg, "coarse.strands"))
    formats.save_pgm(mask, _out(cfg, "mask.pgm"))
    formats.save_pgm(edges, _out(cfg, "edges.pgm"))
    formats.save_midline(truth_midline(truth), _out(cfg, "midline.txt"))
    formats.save_params(truth, _out(cfg, "truth.json"))
    print(f"strands={len(strands)}")
    print(f"points={strands.n_points}")


def _braid_region(cfg: RunConfig) -> StrandSet:
    coarse = formats.load_strands(cfg["coarse"])
    if not cfg["mask"]:
        return coarse
    inside, _ = mask_strands(coarse, formats.load_mask(cfg["mask"]), cfg.projection(), cfg["mask_threshold"])
    return inside


def cmd_fit(cfg: RunConfig) -> None:
    _require(cfg, "coarse", "midline")
    strands = _braid_region(cfg)
    midline = formats.load_midline(cfg["midline"])
    edges = _target_edges(cfg)
    init = formats.load_params(cfg["params"]) if cfg["params"] else None
    trace = fit(strands, edges, midline, cfg.loss_weights(), cfg.fit_config(), init=init, spec=cfg.projection())
    formats.save_trace(trace, _out(cfg, "trace.csv"))
    formats.save_params(trace.params, _out(cfg, "fitted_params.json"))
    print(f"initial_l_total={trace.reports[0].l_total!r}")
    print(f"final_l_total={trace.best_report.l_total!r}")
    if trace.diverged:
        print("diverged=1")


def cmd_eval(cfg: RunConfig) -> None:
    _require(cfg, "coarse")
    strands = _braid_region(cfg)
    if cfg["params"]:
        params = formats.load_params(cfg["params"]).with_noise(cfg["seed"])
    else:
        _require(cfg, "midline")
        params = initialize(formats.load_midline(cfg["midline"]), strands, cfg.fit_config())
    report = Objective(strands, _target_edges(cfg), cfg.loss_weights(), cfg.projection(), cfg["softness"])(params)
    for key in ("l_pc", "l_proj", "l_reg", "l_total"):
        print(f"{key}={getattr(report, key)!r}")


def cmd_refine(cfg: RunConfig) -> None:
    _require(cfg, "coarse", "mask", "params")
    coarse = formats.load_strands(cfg["coarse"])
    mask = formats.load_mask(cfg["mask"])
    params = formats.load_params(cfg["params"]).with_noise(cfg["seed"])
    braid = adjust_radius(generate(params, cfg["seed"]), cfg["radius_window"])
    refined = refine_all(coarse, mask, braid, cfg.refine_config(), cfg.projection())
    # color by bunch using the allocation of the braid region
    inside, _ = mask_strands(coarse, mask, cfg.projection(), cfg["mask_threshold"])
    alloc = allocate(inside, braid, cfg.refine_config())
    formats.save_strands(refined, _out(cfg, "refined.strands"))
    formats.export_ply(refined, _out(cfg, "refined.ply"), alloc.bunch_of)
    print(f"strands={len(refined)}")
    print(f"allocated={len(alloc.bunch_of)}")


COMMANDS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "refine": cmd_refine,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="braidrecon", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = RunConfig.load(args.config, args.set)
        COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level diagnostic
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
