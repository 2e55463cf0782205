"""Command-line interface: ``convbf {enhance,bench,metrics,simulate}``.

Exit codes: 0 success, 1 usage/configuration error, 2 I/O error,
3 numerical failure. Log level comes from the ``CONVBF_LOG`` environment
variable (default WARNING).
"""
import argparse
import dataclasses
import logging
import os
import sys
import time

from . import bench, metrics, pipeline, simulate
from .audio_io import read_wav, write_wav
from .config import ConfigError, load_config
from .errors import AudioFormatError, NumericalError
from .stft import StftConfig

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

logger = logging.getLogger("convbf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_pipeline_flags(p):
    p.add_argument("--method", choices=pipeline.METHODS)
    p.add_argument("--delay", type=int, help="prediction delay b in frames (default 4)")
    p.add_argument("--lw", type=int, help="one regression order for every band")
    p.add_argument("--schedule", help="band:order list, e.g. 800:12,1500:10,3000:8,6000:6,8000:6")
    p.add_argument("--iterations", type=int, help="sigma^2/steering estimation passes (default 2)")
    p.add_argument("--ref-channel", type=int, dest="ref_channel")
    p.add_argument("--head-ms", type=float, dest="head_ms")
    p.add_argument("--tail-ms", type=float, dest="tail_ms")
    p.add_argument("--loading", type=float, help="relative diagonal loading (default 1e-8)")
    p.add_argument("--config", help="key=value config file with [pipeline]/[scene]/[bench] sections")


def _merged(section, args, keys):
    """Config-file section overridden by any flags that were given."""
    out = dict(section)
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


PIPELINE_KEYS = ("method", "delay", "lw", "schedule", "iterations", "ref_channel",
                 "head_ms", "tail_ms", "loading")


def build_pipeline_config(values, sample_rate=16000, default_method="wpd"):
    """Map flat ``[pipeline]`` values onto a :class:`PipelineConfig`."""
    stft_cfg = StftConfig.from_ms(values.get("frame_ms", 32.0), values.get("hop_ms", 8.0),
                                  sample_rate)
    delay = values.get("delay", pipeline.DEFAULT_DELAY)
    if values.get("lw") is not None and values.get("schedule") is not None:
        raise UsageError("--lw and --schedule are mutually exclusive")
    try:
        if values.get("lw") is not None:
            schedule = pipeline.BandSchedule(((0.0, sample_rate / 2.0, values["lw"]),), delay)
        elif values.get("schedule") is not None:
            schedule = pipeline.parse_schedule(values["schedule"], delay, sample_rate)
        else:
            base = pipeline.default_schedule(sample_rate)
            schedule = pipeline.BandSchedule(base.bands, delay)
        return pipeline.PipelineConfig(
            method=values.get("method") or default_method,
            iterations=values.get("iterations", pipeline.DEFAULT_ITERATIONS),
            stft=stft_cfg,
            schedule=schedule,
            q=values.get("ref_channel", 0),
            head_ms=values.get("head_ms", 225.0),
            tail_ms=values.get("tail_ms", 75.0),
            loading=values.get("loading", 1e-8),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_scene_spec(values):
    keys = {f.name for f in dataclasses.fields(simulate.SceneSpec)}
    kwargs = {k: v for k, v in values.items() if k in keys}
    try:
        return simulate.SceneSpec(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config_sections(path):
    if not path:
        return {}
    try:
        return load_config(path)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _echo_config(cfg, stream):
    for key, val in cfg.describe().items():
        print(f"config.{key}={val}", file=stream)


def cmd_enhance(args):
    sections = _config_sections(args.config)
    values = _merged(sections.get("pipeline", {}), args, PIPELINE_KEYS)
    # validate against the default rate before touching audio
    build_pipeline_config(values)
    buf = read_wav(args.input)
    cfg = build_pipeline_config(values, buf.sample_rate)
    if cfg.q >= buf.channels:
        raise UsageError(f"reference channel {cfg.q} but input has {buf.channels} channels")
    start = time.perf_counter()
    out, diag = pipeline.enhance(buf, cfg)
    write_wav(args.output, out, args.encoding)
    diag.runtime_s = time.perf_counter() - start
    print(diag.to_text())
    return EXIT_OK


def cmd_bench(args):
    sections = _config_sections(args.spec_file)
    bench_values = dict(sections.get("bench", {}))
    for key in ("scenes", "seed"):
        if getattr(args, key) is not None:
            bench_values[key] = getattr(args, key)
    if args.baseline:
        bench_values["baseline"] = True
    scene_values = dict(sections.get("scene", {}))
    t60_lo = scene_values.pop("t60_min", 0.25)
    t60_hi = scene_values.pop("t60_max", 0.7)
    if t60_hi < t60_lo or t60_lo <= 0:
        raise UsageError("need 0 < t60_min <= t60_max")
    scene = build_scene_spec(scene_values)
    pvalues = _merged(sections.get("pipeline", {}), args, PIPELINE_KEYS)
    pvalues.pop("method", None)
    pcfg = build_pipeline_config(pvalues, scene.sample_rate)
    methods = tuple(m.strip() for m in bench_values.get("methods", ",".join(pipeline.METHODS)).split(",")
                    if m.strip())
    bad = [m for m in methods if m not in pipeline.METHODS]
    if bad:
        raise UsageError(f"unknown methods: {', '.join(bad)}")
    cfg = bench.BenchConfig(scenes=bench_values.get("scenes", 20), seed=bench_values.get("seed", 0),
                            t60_range=(t60_lo, t60_hi), scene=scene, pipeline_cfg=pcfg,
                            methods=methods, baseline=bench_values.get("baseline", False))
    if cfg.scenes < 1:
        raise UsageError("scenes must be >= 1")
    _echo_config(pcfg, sys.stderr)
    rows = bench.run_bench(cfg, jobs=max(1, args.jobs))
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write(bench.format_csv(rows))
    for method, vals in bench.summarize(rows).items():
        print(f"{method:8s} cd={vals['cd']:.3f} fwssnr={vals['fwssnr']:.3f} "
              f"drr_gain={vals['drr_gain']:.3f}")
    return EXIT_OK


def cmd_metrics(args):
    ref = read_wav(args.reference)
    test = read_wav(args.test)
    ref = ref.channel(args.ref_index)
    test = test.channel(args.test_index)
    rep = metrics.evaluate(ref, test)
    sys.stdout.write(metrics.format_metric_rows([(args.id, args.method, rep)]))
    return EXIT_OK


def cmd_simulate(args):
    sections = _config_sections(args.config)
    values = dict(sections.get("scene", {}))
    values.pop("t60_min", None)
    values.pop("t60_max", None)
    for key in ("channels", "t60", "snr_db", "duration_s", "seed"):
        val = getattr(args, key)
        if val is not None:
            values[key] = val
    scene = simulate.mix_scene(build_scene_spec(values))
    paths = simulate.export_scene(scene, args.outdir)
    for name, path in paths.items():
        print(f"{name}={path}")
    print(f"measured_snr_db={scene.measured_snr_db():.3f}")
    print(f"early_to_late_db={scene.drr_db(0):.3f}")
    return EXIT_OK


def make_parser():
    parser = _Parser(prog="convbf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enhance", help="enhance a multichannel WAV file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--encoding", choices=("float32", "int16"), default="float32")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("bench", help="run all methods on seeded synthetic scenes")
    p.add_argument("spec_file", help="config file with [bench], [scene] and [pipeline] sections")
    p.add_argument("out_csv")
    p.add_argument("--scenes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--baseline", action="store_true", help="also emit unprocessed 'none' rows")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("metrics", help="CD and FWSSNR of a test file against a reference")
    p.add_argument("reference")
    p.add_argument("test")
    p.add_argument("--id", default="utt")
    p.add_argument("--method", default="-")
    p.add_argument("--ref-index", type=int, default=0, help="channel of the reference file")
    p.add_argument("--test-index", type=int, default=0, help="channel of the test file")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="write one synthetic scene as WAV files")
    p.add_argument("outdir")
    p.add_argument("--channels", type=int)
    p.add_argument("--t60", type=float)
    p.add_argument("--snr-db", type=float, dest="snr_db")
    p.add_argument("--duration-s", type=float, dest="duration_s")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    level = os.environ.get("CONVBF_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"convbf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, AudioFormatError) as exc:
        print(f"convbf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"convbf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
