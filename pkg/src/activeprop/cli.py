"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .backends import TinyModelParams, make_backend
from .io import (DataError, ImageRecord, read_annotations, read_proposals, write_annotations,
                 write_heatmap, write_proposals)
from .metrics import evaluate
from .nms import NmsSchedule, multithreshold_reorder
from .scenes import SceneSet, SceneSpec, generate_scenes
from .search import EngineConfig, attention_map, propose
from .training import TrainConfig, train

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_json(path, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_config(cls, path, what: str):
    if path is None:
        return cls()
    doc = _load_json(path, what)
    try:
        return cls.from_json(doc) if hasattr(cls, "from_json") else cls(**doc)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid {what}: {exc}") from None


def _load_scenes(path):
    doc = _load_json(path, "scenes manifest")
    try:
        spec = SceneSpec.from_dict(doc["spec"])
        return SceneSet(spec, int(doc["count"]), int(doc.get("start", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid scenes manifest: {exc}") from None


def cmd_gen_synthetic(args) -> None:
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    spec = SceneSpec(seed=args.seed)
    scenes = generate_scenes(spec, args.count)
    records = [ImageRecord(s.image_id, s.extent.width, s.extent.height, s.gts, s.categories) for s in scenes]
    write_annotations(args.out_annotations, records)
    manifest = {"spec": spec.to_dict(), "count": args.count, "start": 0}
    Path(args.out_scenes).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> None:
    cfg = _load_config(TrainConfig, args.config, "training config")
    cfg.seed = args.seed
    if args.iterations is not None:
        cfg.iterations = args.iterations
    cfg.log_every = 0
    scenes = _load_scenes(args.scenes)
    params, losses = train(scenes, cfg)
    params.save(args.out_model)
    if args.log:
        with open(args.log, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "loss", "lr"])
            for it, loss in enumerate(losses):
                w.writerow([it + 1, repr(float(loss)), repr(cfg.lr_at(it))])


def cmd_propose(args) -> None:
    cfg = _load_config(EngineConfig, args.config, "engine config")
    cfg = replace(cfg, seed=args.seed)
    backend_name = args.backend or ("learned" if args.model else "oracle")
    params = None
    if backend_name == "learned":
        if not args.model:
            raise UsageError("the learned backend needs --model")
        try:
            params = TinyModelParams.load(args.model)
        except FileNotFoundError:
            raise DataError(f"model file not found: {args.model}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{args.model}: invalid model file: {exc}") from None
    backend = make_backend(backend_name, params, seed=args.seed)
    scenes = _load_scenes(args.scenes)
    if args.emit_attention:
        Path(args.emit_attention).mkdir(parents=True, exist_ok=True)
    out = {}
    for scene in scenes:
        boxes, scores, trace = propose(scene, backend, cfg, return_trace=True)
        out[scene.image_id] = (boxes, scores)
        if args.emit_attention:
            for t, grid in enumerate(attention_map(trace.candidates, scene.extent), start=1):
                write_heatmap(grid, Path(args.emit_attention) / f"image{scene.image_id}_iter{t}.pgm")
    write_proposals(args.out_proposals, out)


def _parse_ks(text: str) -> list[int]:
    try:
        ks = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--ks must be comma-separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise UsageError("--ks needs at least one positive integer")
    return ks


def cmd_eval(args) -> None:
    ks = _parse_ks(args.ks)
    images = read_annotations(args.annotations)
    props = read_proposals(args.proposals)
    stray = sorted(set(props) - set(images))
    if stray:
        raise DataError(f"{args.proposals}: proposals for unknown image id {stray[0]}")
    empty = np.zeros((0, 4))
    boxes = [props.get(i, (empty, None))[0] for i in images]
    report = evaluate(boxes, [img.gts for img in images.values()], ks)
    report.write_json(args.out_report)
    if args.curves:
        report.write_curves_csv(args.curves)


def cmd_reorder_nms(args) -> None:
    sched = _load_config(NmsSchedule, args.schedule, "schedule")
    out = {}
    for img_id, (boxes, scores) in read_proposals(args.proposals).items():
        try:
            idx, new_scores, _ = multithreshold_reorder(boxes, scores, sched)
        except ValueError as exc:
            raise DataError(f"image {img_id}: {exc}") from None
        out[img_id] = (boxes[idx], new_scores)
    write_proposals(args.out, out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="activeprop", description="Active box proposal engine.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-synthetic", help="generate synthetic scenes and their annotations")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out-annotations", required=True)
    g.add_argument("--out-scenes", required=True)
    g.set_defaults(func=cmd_gen_synthetic)

    t = sub.add_parser("train", help="train the tiny in-out model")
    t.add_argument("--scenes", required=True, help="scenes manifest from gen-synthetic")
    t.add_argument("--config", help="training config JSON")
    t.add_argument("--out-model", required=True)
    t.add_argument("--log", help="CSV file for the per-iteration loss")
    t.add_argument("--iterations", type=int, help="override the configured iteration count")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("propose", help="run the active search on every scene")
    r.add_argument("--scenes", required=True)
    r.add_argument("--model", help="trained parameters (implies --backend learned)")
    r.add_argument("--backend", choices=("oracle", "noisy", "learned"))
    r.add_argument("--config", help="engine config JSON")
    r.add_argument("--out-proposals", required=True)
    r.add_argument("--emit-attention", metavar="DIR", help="write per-iteration attention maps (PGM)")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_propose)

    e = sub.add_parser("eval", help="average recall of a proposal file")
    e.add_argument("--annotations", required=True)
    e.add_argument("--proposals", required=True)
    e.add_argument("--ks", default="10,100,1000")
    e.add_argument("--out-report", required=True)
    e.add_argument("--curves", help="CSV file for recall-vs-IoU curves")
    e.set_defaults(func=cmd_eval)

    n = sub.add_parser("reorder-nms", help="multi-threshold re-ordering of a proposal file")
    n.add_argument("--proposals", required=True)
    n.add_argument("--schedule", help="JSON with 'thresholds' and 'counts'")
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_reorder_nms)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"activeprop {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"activeprop {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
