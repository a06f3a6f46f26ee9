"""Command-line surface: synth, train, detect, count, eval.

Every command is deterministic given its config and --seed; all randomness
flows from that single seed. Failures exit nonzero with a single
"error: ..." line on stderr. Config keys may also be overridden through
ODOCOUNT_* environment variables.
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import bundle as bundle_io
from . import dsp, formats, pipeline
from .config import load_config, parse_flat_file, write_flat_file
from .evaluation import CONDITIONS, crossvalidate
from .scene import LabeledScene, SceneConfig, generate_scene

CLI_SYSTEMS = {"odo": "odo", "hmm": "hmm", "combined": "odo_hmm", "onset-count": "onset_count"}


def _scene_config(path, seed=None):
    raw = parse_flat_file(path) if path else {}
    fields = {f.name: f for f in dataclasses.fields(SceneConfig)}
    kwargs = {}
    band = [None, None]
    for key, value in raw.items():
        if key == "call_band_lo_hz":
            band[0] = float(value)
        elif key == "call_band_hi_hz":
            band[1] = float(value)
        elif key in fields:
            typ = type(fields[key].default)
            kwargs[key] = float(value) if typ is float else typ(value)
        else:
            raise ValueError(f"{path}: unknown scene config key {key!r}")
    if band != [None, None]:
        default = SceneConfig().call_band_hz
        kwargs["call_band_hz"] = (band[0] if band[0] is not None else default[0],
                                  band[1] if band[1] is not None else default[1])
    if seed is not None:
        kwargs["seed"] = seed
    return SceneConfig(**kwargs)


def _load_session(audio_path, labels_path):
    clip = dsp.read_wav(audio_path)
    truth = formats.read_annotation_csv(labels_path)
    return LabeledScene(audio=clip, truth=truth)


def cmd_synth(args):
    cfg = _scene_config(args.config, args.seed)
    scene = generate_scene(cfg)
    os.makedirs(args.out, exist_ok=True)
    dsp.write_wav(os.path.join(args.out, "scene.wav"), scene.audio)
    formats.write_annotation_csv(os.path.join(args.out, "annotations.csv"),
                                 scene.truth, confidence=False)
    manifest = dataclasses.asdict(cfg)
    manifest["call_band_lo_hz"] = cfg.call_band_hz[0]
    manifest["call_band_hi_hz"] = cfg.call_band_hz[1]
    del manifest["call_band_hz"]
    manifest["n_events"] = len(scene.truth)
    write_flat_file(os.path.join(args.out, "manifest.txt"),
                    {k: manifest[k] for k in sorted(manifest)})
    print(f"wrote {args.out}/scene.wav ({scene.audio.duration_seconds:.1f} s, "
          f"{scene.audio.sample_rate} Hz) with {len(scene.truth)} events")
    return 0


def _pairs(values, what):
    if len(values) % 2 != 0:
        raise ValueError(f"{what} expects WAV/CSV pairs, got {len(values)} paths")
    return [(values[i], values[i + 1]) for i in range(0, len(values), 2)]


def cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    scenes = [_load_session(a, l) for a, l in _pairs(args.data, "train")]
    bundle = pipeline.train_bundle(scenes, cfg, train_hmms=not args.skip_hmm)
    if args.flat_prior:
        bundle.prior_kind = "flat"
    bundle_io.save_bundle(bundle, args.out)
    print(f"bundle written to {args.out}")
    print(f"  prior kind:     {bundle.prior_kind}")
    print(f"  K (max simultaneous events): {bundle.k_max}")
    print(f"  threshold (gmm prior):  {bundle.threshold_gmm!r}")
    print(f"  threshold (flat prior): {bundle.threshold_flat!r}")
    for name in sorted(bundle.calibration):
        print(f"  calibration[{name}]: {bundle.calibration[name]!r}")
    return 0


def cmd_detect(args):
    bundle = bundle_io.load_bundle(args.bundle)
    clip = dsp.read_wav(args.audio)
    system = CLI_SYSTEMS[args.system]
    decoder = pipeline.Decoder(bundle, clip)
    transcript = decoder.transcript(system)
    formats.write_annotation_csv(args.out, transcript, confidence=True)
    print(f"{len(transcript)} events -> {args.out}")
    return 0


def cmd_count(args):
    from .evaluation import window_spans

    bundle = bundle_io.load_bundle(args.bundle)
    clip = dsp.read_wav(args.audio)
    system = CLI_SYSTEMS[args.system]
    decoder = pipeline.Decoder(bundle, clip)
    spans = window_spans(clip.duration_seconds, args.window_seconds)
    counts = decoder.window_counts(system, spans)
    formats.write_counts_csv(args.out, spans, counts)
    print(f"total estimated events: {float(np.sum(counts))!r} over {len(spans)} windows "
          f"-> {args.out}")
    return 0


def cmd_eval(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    sessions = [_load_session(a, l) for a, l in _pairs(args.data, "eval")]
    conditions = tuple(args.conditions.split(","))
    unknown = set(conditions) - set(CONDITIONS)
    if unknown:
        raise ValueError(f"unknown conditions: {sorted(unknown)}")
    report = crossvalidate(sessions, cfg, conditions=conditions)
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "results.csv")
    report.to_csv(csv_path)
    print(report.summary())
    print(f"results -> {csv_path}")
    if args.plots:
        for p in formats.plot_report(report, args.out_dir, conditions=list(conditions)):
            print(f"plot -> {p}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="odocount",
        description="Detect and count overlapping acoustic events of one class "
                    "in long recordings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled scene")
    p.add_argument("--config", default=None, help="flat key=value scene config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train a model bundle on labeled audio")
    p.add_argument("--data", nargs="+", required=True, metavar="PATH",
                   help="alternating audio.wav annotations.csv pairs")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="bundle output path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--flat-prior", action="store_true",
                   help="make the odo system use the flat duration prior")
    p.add_argument("--skip-hmm", action="store_true", help="train the odo systems only")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("detect", help="write an event transcript for a recording")
    p.add_argument("--bundle", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--system", choices=["odo", "hmm", "combined"], default="odo")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("count", help="windowed event-count estimates")
    p.add_argument("--bundle", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--system", choices=list(CLI_SYSTEMS), default="odo")
    p.add_argument("--window-seconds", type=float, default=10.0)
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("eval", help="two-fold crossvalidation over labeled sessions")
    p.add_argument("--data", nargs="+", required=True, metavar="PATH",
                   help="alternating audio.wav annotations.csv pairs (>= 2 sessions)")
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--conditions", default=",".join(CONDITIONS))
    p.add_argument("--plots", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
