"""Command-line entry points for the full train/sample/edit/eval lifecycle.

Configuration precedence is defaults < config file < flags; every command
writes a ``config_snapshot.json`` into its run directory sufficient to
reproduce the run.  Errors print machine-readable JSON: exit code 2 for
invalid configuration (with the offending field), 3 for missing
checkpoints, 1 otherwise.
"""

from __future__ import annotations

import json
import os
import sys
from functools import wraps

import click
import numpy as np

from . import data as data_mod
from .ablation import run_ablation_suite
from .checkpoint import CheckpointError
from .config import ConfigError, DiffusionConfig, VaeConfig
from .editing import EditSpec, EditSpecError, GuidanceConfig, guided_sample
from .motionfile import atomic_write_json, dumps_motion, _atomic_write_text
from .sampling import InferenceBundle, sample_text_to_motion
from .skeleton import standard_skeleton
from .text import TokenizerError
from .train_ldm import train_stage2
from .train_vae import load_stage1_model, train_stage1


def _emit(payload: dict, as_json: bool):
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        for key, value in payload.items():
            click.echo(f"{key}: {value}")


def _fail(code: int, error_code: str, message: str, **extra):
    doc = {"error": {"code": error_code, "message": message, **extra}}
    click.echo(json.dumps(doc, sort_keys=True), err=True)
    sys.exit(code)


def _seed_override(seed: int) -> int:
    env = os.environ.get("MOLA_SEED")
    return int(env) if env else seed


def cli_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(2, "invalid_config", str(exc), field=exc.field)
        except (EditSpecError, TokenizerError, data_mod.DatasetError) as exc:
            _fail(2, "invalid_config", str(exc))
        except CheckpointError as exc:
            _fail(3, "missing_checkpoint", str(exc))
        except FileNotFoundError as exc:
            _fail(3, "missing_checkpoint", str(exc))

    return wrapper


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        if path.endswith((".yaml", ".yml")):
            import yaml

            return yaml.safe_load(fh) or {}
        return json.load(fh)


def _snapshot(out: str, payload: dict):
    os.makedirs(out, exist_ok=True)
    atomic_write_json(os.path.join(out, "config_snapshot.json"), payload)


@click.group()
@click.option("--json", "as_json", is_flag=True, help="machine-readable stdout")
@click.pass_context
def main(ctx, as_json):
    ctx.ensure_object(dict)
    ctx.obj["json"] = as_json


@main.group()
def dataset():
    """Dataset generation."""


@dataset.command("build")
@click.option("--n", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--skeleton", "skeleton_key", type=click.Choice(["22", "5", "toy5", "human22"]), default="5")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@cli_errors
def dataset_build(ctx, n, seed, skeleton_key, out):
    seed = _seed_override(seed)
    skel = standard_skeleton(skeleton_key)
    split = data_mod.build_dataset(n, seed, skel)
    data_mod.save_dataset(split, out)
    _snapshot(out, {"command": "dataset build", "n": n, "seed": seed, "skeleton": skeleton_key})
    _emit({"out": out, "train": len(split.train), "val": len(split.val), "test": len(split.test)}, ctx.obj["json"])


@main.group()
def train():
    """Model training."""


@train.command("vae")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_file", type=click.Path(exists=True))
@click.option("--adversary", type=click.Choice(["none", "gan", "san"]))
@click.option("--dz", type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@cli_errors
def train_vae_cmd(ctx, dataset_dir, config_file, adversary, dz, seed, out):
    seed = _seed_override(seed)
    overrides = _load_config_file(config_file)
    if adversary is not None:
        overrides["adversary"] = adversary
    if dz is not None:
        overrides["d_z"] = dz
    cfg = VaeConfig.from_dict(overrides)
    split = data_mod.load_dataset(dataset_dir)
    _snapshot(out, {"command": "train vae", "dataset": os.path.abspath(dataset_dir), "seed": seed,
                    "config": cfg.to_dict()})
    result = train_stage1(split, cfg, seed, out_dir=out)
    final = [r for r in result.log if "val_mpjpe" in r][-1]
    _emit({"out": out, "iters": cfg.total_iters, "val_mpjpe": final["val_mpjpe"]}, ctx.obj["json"])


@train.command("ldm")
@click.option("--vae-ckpt", "vae_ckpt", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_file", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@cli_errors
def train_ldm_cmd(ctx, vae_ckpt, dataset_dir, config_file, seed, out):
    seed = _seed_override(seed)
    cfg = DiffusionConfig.from_dict(_load_config_file(config_file))
    split = data_mod.load_dataset(dataset_dir)
    stage1 = load_stage1_model(vae_ckpt)
    _snapshot(out, {"command": "train ldm", "vae_ckpt": os.path.abspath(vae_ckpt),
                    "dataset": os.path.abspath(dataset_dir), "seed": seed, "config": cfg.to_dict()})
    stage2 = train_stage2(stage1, split, cfg, seed, out_dir=os.path.join(out, "stage2"))
    bundle = InferenceBundle.from_results(stage1, stage2, out_dir=out)
    final = [r for r in stage2.log if "val_mse" in r][-1]
    _emit({"out": out, "checkpoint_id": bundle.checkpoint_id, "val_mse": final["val_mse"]}, ctx.obj["json"])


@main.command("sample")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--text", required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--n", default=1, show_default=True)
@click.option("--cfg-scale", type=float)
@click.option("--steps", type=int)
@click.option("--delta", type=float)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@cli_errors
def sample_cmd(ctx, ckpt, text, seed, n, cfg_scale, steps, delta, out):
    seed = _seed_override(seed)
    bundle = InferenceBundle.load(ckpt)
    _snapshot(out, {"command": "sample", "ckpt": os.path.abspath(ckpt), "text": text, "seed": seed,
                    "n": n, "cfg_scale": cfg_scale, "steps": steps, "delta": delta,
                    "checkpoint_id": bundle.checkpoint_id})
    paths = []
    for i in range(n):
        motion, meta = sample_text_to_motion(text, seed + i, bundle, cfg_scale, steps, delta)
        path = os.path.join(out, f"sample_{seed + i:06d}.motion.json")
        _atomic_write_text(path, dumps_motion(motion, generator=meta))
        paths.append(path)
    _emit({"out": out, "files": len(paths), "first": paths[0]}, ctx.obj["json"])


@main.command("edit")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--spec", "spec_file", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@cli_errors
def edit_cmd(ctx, ckpt, spec_file, seed, out):
    seed = _seed_override(seed)
    bundle = InferenceBundle.load(ckpt)
    with open(spec_file, encoding="utf-8") as fh:
        doc = json.load(fh)
    spec = EditSpec.from_dict(doc)
    gcfg = GuidanceConfig.from_dict(doc.get("guidance") or {})
    _snapshot(out, {"command": "edit", "ckpt": os.path.abspath(ckpt), "spec": os.path.abspath(spec_file),
                    "seed": seed, "checkpoint_id": bundle.checkpoint_id})
    motion, info = guided_sample(spec, seed, gcfg, bundle)
    path = os.path.join(out, "edited.motion.json")
    _atomic_write_text(path, dumps_motion(motion, generator={
        "seed": seed, "s": info["s"], "S": info["S"], "delta": info["delta"],
        "checkpoint_id": bundle.checkpoint_id,
    }))
    atomic_write_json(os.path.join(out, "guidance_info.json"),
                      {k: v for k, v in info.items() if k != "loss_trace"} | {"final_loss": info["loss_trace"][-1] if info["loss_trace"] else None})
    _emit({"out": path, "length": motion.length}, ctx.obj["json"])


@main.command("eval")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--metrics", default="all", show_default=True)
@click.option("--samples", default=64, show_default=True, help="generated samples for distribution metrics")
@click.option("--mm-captions", default=4, show_default=True)
@click.option("--mm-repeats", default=5, show_default=True)
@click.option("--eval-iters", default=300, show_default=True)
@click.option("--aits-n", default=0, show_default=True, help="prompts to time (0 = skip)")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_file", required=True, type=click.Path())
@click.pass_context
@cli_errors
def eval_cmd(ctx, ckpt, dataset_dir, metrics, samples, mm_captions, mm_repeats, eval_iters, aits_n, seed, out_file):
    from .evaluation_runner import evaluate_bundle

    seed = _seed_override(seed)
    bundle = InferenceBundle.load(ckpt)
    split = data_mod.load_dataset(dataset_dir)
    report = evaluate_bundle(
        bundle, split, seed=seed, n_samples=samples, mm_captions=mm_captions,
        mm_repeats=mm_repeats, eval_iters=eval_iters, aits_n=aits_n,
        which=metrics,
    )
    out_dir = os.path.dirname(os.path.abspath(out_file)) or "."
    os.makedirs(out_dir, exist_ok=True)
    atomic_write_json(out_file, report.to_dict())
    _snapshot(out_dir, {"command": "eval", "ckpt": os.path.abspath(ckpt), "dataset": os.path.abspath(dataset_dir),
                        "seed": seed, "samples": samples})
    _emit(report.to_dict(), ctx.obj["json"])


@main.command("ablate")
@click.option("--grid", "grid_file", required=True, type=click.Path(exists=True))
@click.option("--seeds", default=1, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
@cli_errors
def ablate_cmd(ctx, grid_file, seeds, out):
    grid = _load_config_file(grid_file)
    dataset_dir = grid.get("dataset")
    if dataset_dir:
        split = data_mod.load_dataset(dataset_dir)
    else:
        split = data_mod.build_dataset(
            grid.get("n", 120), grid.get("dataset_seed", 0), standard_skeleton(grid.get("skeleton", "5"))
        )
    seed_list = [_seed_override(0) + i for i in range(seeds)]
    _snapshot(out, {"command": "ablate", "grid": grid, "seeds": seed_list})
    report = run_ablation_suite(grid, split, seed_list, out_dir=out)
    _emit({"out": out, "rows": len(report["rows"]), "control_rows": len(report["control_rows"])}, ctx.obj["json"])


@main.command("serve")
@click.option("--workspace", default=lambda: os.environ.get("MOLA_WORKSPACE", "./workspace"))
@click.option("--port", default=lambda: int(os.environ.get("MOLA_PORT", "8990")), type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--workers", default=1, show_default=True, help="job worker threads")
@click.pass_context
@cli_errors
def serve_cmd(ctx, workspace, port, host, workers):
    import uvicorn

    from .service import create_app

    app = create_app(workspace, workers=workers)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
