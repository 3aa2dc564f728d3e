"""Command-line front end: indexing, toy data, synthesis, eval, serving."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import pngio
from .compose import SynthesisConfig, sample_variants
from .index import DatasetError, IndexFormatError, ingest, load_index, save_index
from .metrics import rebuild_instance_map, self_reconstruction, stage_report
from .raster import InstanceMap, LabelMap, RasterError
from .toygen import ToySpec, generate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labelcollage",
                                     description="Exemplar-based image synthesis from label maps")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="exemplar index maintenance")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p_build = index_sub.add_parser("build", help="ingest a dataset directory into an index file")
    p_build.add_argument("--data", required=True, help="dataset root directory")
    p_build.add_argument("--out", required=True, help="output index file")
    p_build.add_argument("--workers", type=int, default=4)

    p_toy = sub.add_parser("toygen", help="generate a synthetic exemplar dataset")
    p_toy.add_argument("--scenes", type=int, required=True)
    p_toy.add_argument("--categories", type=int, required=True)
    p_toy.add_argument("--size", type=int, default=256)
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--out", required=True)
    p_toy.add_argument("--cliques", type=int, default=None)

    p_synth = sub.add_parser("synth", help="synthesize composites for a query map pair")
    p_synth.add_argument("--index", required=True)
    p_synth.add_argument("--labels", required=True, help="query label map (16-bit PNG)")
    p_synth.add_argument("--instances", required=True, help="query instance map (16-bit PNG)")
    p_synth.add_argument("--variants", type=int, default=1)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--topn", type=int, default=100)
    p_synth.add_argument("--topk", type=int, default=5)
    p_synth.add_argument("--filter-side", type=int, default=50)
    p_synth.add_argument("--stages", default="shape,part,pixel",
                         help="comma-separated subset of shape,part,pixel")
    p_synth.add_argument("--out", required=True, help="output directory")

    p_eval = sub.add_parser("eval", help="desk-scale quality metrics")
    p_eval.add_argument("mode", choices=["self", "report"])
    p_eval.add_argument("--index", required=True)
    p_eval.add_argument("--sample", type=int, default=20)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--topn", type=int, default=100)
    p_eval.add_argument("--topk", type=int, default=5)
    p_eval.add_argument("--out", default=None, help="optional JSON report path")

    p_serve = sub.add_parser("serve", help="run the HTTP synthesis service")
    p_serve.add_argument("--index", required=True)
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--persist", default=None, help="directory for job persistence")
    return parser


def _cmd_index_build(args) -> int:
    lib = ingest(args.data, workers=args.workers)
    save_index(lib, args.out)
    print(f"indexed {len(lib)} exemplars -> {args.out}")
    return 0


def _cmd_toygen(args) -> int:
    spec = ToySpec(scenes=args.scenes, categories=args.categories, size=args.size,
                   seed=args.seed, cliques=args.cliques)
    root = generate(spec, args.out)
    print(f"wrote {spec.scenes} scenes under {root}")
    return 0


def _cmd_synth(args) -> int:
    lib = load_index(args.index)
    labels = LabelMap(pngio.read_gray16(args.labels), lib.num_categories)
    instances = InstanceMap(pngio.read_gray16(args.instances))
    stages = tuple(s for s in args.stages.split(",") if s)
    config = SynthesisConfig(top_n=args.topn, top_k=args.topk,
                             filter_side=args.filter_side, seed=args.seed, stages=stages)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    variants = sample_variants(labels, instances, lib, config, args.variants)
    elapsed = time.perf_counter() - t0
    report = {"elapsed_seconds": elapsed, "variants": []}
    for i, comp in enumerate(variants):
        pngio.write_rgb(out / f"variant_{i}.png", comp.image)
        rep = stage_report(comp)
        report["variants"].append({
            "file": f"variant_{i}.png",
            "selections": comp.selections,
            "digest": comp.query_digest,
            **rep.to_dict(),
        })
    (out / "report.json").write_text(json.dumps(report, indent=2))
    (out / "report.txt").write_text(
        "\n\n".join(f"variant={i}\n" + stage_report(c).to_text() for i, c in enumerate(variants)) + "\n"
    )
    print(f"wrote {len(variants)} variants to {out} in {elapsed:.1f}s")
    return 0


def _cmd_eval(args) -> int:
    lib = load_index(args.index)
    rng = np.random.default_rng(args.seed)
    sample = min(args.sample, len(lib))
    ids = rng.choice(len(lib), size=sample, replace=False)
    config = SynthesisConfig(top_n=args.topn, top_k=args.topk)

    if args.mode == "self":
        scores = [self_reconstruction(lib, int(i), config) for i in ids]
        payload = {
            "samples": sample,
            "mean_self_reconstruction": float(np.mean(scores)),
            "min_self_reconstruction": float(np.min(scores)),
        }
        for key, value in payload.items():
            print(f"{key}={value}")
    else:
        from .compose import synthesize

        reports = []
        for i in ids:
            rec = lib.record(int(i))
            comp = synthesize(rec.labels, rebuild_instance_map(lib, int(i)), lib, config)
            reports.append(stage_report(comp))
        payload = {
            "samples": sample,
            "mean_shape_fraction": float(np.mean([r.shape_fraction for r in reports])),
            "mean_part_fraction": float(np.mean([r.part_fraction for r in reports])),
            "mean_pixel_fraction": float(np.mean([r.pixel_fraction for r in reports])),
            "mean_fill_coverage": float(np.mean([r.fill_coverage for r in reports])),
            "mean_survivor_fraction": float(np.mean([r.survivor_fraction for r in reports])),
        }
        for key, value in payload.items():
            print(f"{key}={value}")
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    lib = load_index(args.index)
    app = create_app(lib, persist_dir=args.persist)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "index":
            return _cmd_index_build(args)
        if args.command == "toygen":
            return _cmd_toygen(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "serve":
            return _cmd_serve(args)
        parser.error(f"unknown command {args.command}")
    except (DatasetError, IndexFormatError, RasterError, pngio.PngError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
