"""Command-line entry point: registration runs, diagnostics, and self-test."""

import argparse
import sys

import numpy as np

from . import report
from .errors import InvalidInputError, MeshFormatError, SolverError
from .mesh import box_diagonal, joint_bounding_box, load_obj, save_obj, unvectorize
from .optimizer import OptimizerConfig, register
from .sdf import dump_volume, make_quadrature

DEFAULTS = {
    "grid": "32,32,32",
    "pad": "0.05",
    "modes": "30",
    "stall-start": "0.1",
    "stall-end": "0.001",
    "reg-lambda": "0.0",
    "sign": "pseudonormal",
    "snapshot-every": "0",
    "threads": "all",
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="sdfreg",
        description="Non-rigid mesh registration by signed-distance-field "
        "matching in an adaptive skinning-eigenmode subspace.",
    )
    p.add_argument("--source", help="source OBJ mesh (deforms)")
    p.add_argument("--target", help="target OBJ mesh (static)")
    p.add_argument("--output", help="path for the registered OBJ")
    p.add_argument("--grid", metavar="RX,RY,RZ",
                   help=f"quadrature grid resolution (default: {DEFAULTS['grid']})")
    p.add_argument("--pad", type=float, metavar="F",
                   help=f"bounding-box pad fraction (default: {DEFAULTS['pad']})")
    p.add_argument("--modes", type=int, metavar="M",
                   help=f"maximum skinning modes (default: {DEFAULTS['modes']})")
    p.add_argument("--stall-start", type=float, metavar="F",
                   help="stall threshold for the first stage "
                        f"(default: {DEFAULTS['stall-start']})")
    p.add_argument("--stall-end", type=float, metavar="F",
                   help="stall threshold for the final stage "
                        f"(default: {DEFAULTS['stall-end']})")
    p.add_argument("--reg-lambda", type=float, metavar="F",
                   help="Dirichlet regularizer weight "
                        f"(default: {DEFAULTS['reg-lambda']})")
    p.add_argument("--sign", choices=["pseudonormal", "winding"],
                   help="target inside/outside test "
                        f"(default: {DEFAULTS['sign']})")
    p.add_argument("--normalize", action="store_true", default=None,
                   help="rescale both meshes to unit joint bounding-box diagonal "
                        "(inverted on output; default: off)")
    p.add_argument("--snapshot-every", type=int, metavar="N",
                   help="write a snapshot OBJ every N accepted steps, 0 = off "
                        f"(default: {DEFAULTS['snapshot-every']})")
    p.add_argument("--trace", metavar="PATH",
                   help="write the per-iteration trace CSV here "
                        "(a PNG figure is rendered next to it)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering the trace figure")
    p.add_argument("--threads", metavar="N",
                   help="worker threads for distance queries, 'all' or a count "
                        f"(default: {DEFAULTS['threads']})")
    p.add_argument("--dump-volume", metavar="PATH",
                   help="write the target SDF grid as raw float64 + header")
    p.add_argument("--config", metavar="PATH",
                   help="key=value config file; command-line flags override it")
    p.add_argument("--selftest", action="store_true",
                   help="run the embedded oracle suite and exit")
    return p


def _load_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"{path} line {line_no}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


class Settings:
    """Flag > config file > built-in default resolution."""

    def __init__(self, args, file_values):
        self.args = args
        self.file_values = file_values

    def get(self, key):
        flag = getattr(self.args, key.replace("-", "_"), None)
        if flag is not None:
            return flag
        if key in self.file_values:
            return self.file_values[key]
        return DEFAULTS.get(key)

    def grid(self):
        raw = str(self.get("grid"))
        parts = raw.split(",")
        if len(parts) != 3:
            raise InvalidInputError(f"--grid wants RX,RY,RZ, got {raw!r}")
        return tuple(int(p) for p in parts)

    def workers(self):
        raw = str(self.get("threads"))
        return -1 if raw == "all" else max(1, int(raw))

    def flag(self, key):
        value = self.get(key)
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes", "on")
        return bool(value)


def run(settings):
    for key in ("source", "target", "output"):
        if not settings.get(key):
            print(f"error: --{key} is required", file=sys.stderr)
            return 1
    try:
        source = load_obj(settings.get("source"))
        target = load_obj(settings.get("target"))
    except (OSError, MeshFormatError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    scale = 1.0
    if settings.flag("normalize"):
        scale = 1.0 / box_diagonal(joint_bounding_box(source, target, 0.0))
        source = source.with_vertices(source.vertices * scale)
        target = target.with_vertices(target.vertices * scale)

    config = OptimizerConfig(
        max_modes=int(settings.get("modes")),
        stall_start=float(settings.get("stall-start")),
        stall_end=float(settings.get("stall-end")),
        reg_lambda=float(settings.get("reg-lambda")),
        stall_scale=1.0 if settings.flag("normalize") else None,
    )
    workers = settings.workers()

    snapshot_every = int(settings.get("snapshot-every"))
    out_path = settings.get("output")
    state = {"accepted": 0}

    def on_step(stage, iteration, x):
        state["accepted"] += 1
        if snapshot_every > 0 and state["accepted"] % snapshot_every == 0:
            snap = unvectorize(x / scale if scale != 1.0 else x, source.triangles)
            stem = out_path.rsplit(".", 1)[0]
            save_obj(snap, f"{stem}_snapshot_s{stage:03d}_i{iteration:06d}.obj")

    try:
        quad = make_quadrature(source, target, settings.grid(),
                               float(settings.get("pad")),
                               sign_mode=settings.get("sign"), workers=workers)
        if settings.get("dump-volume"):
            dump_volume(quad, settings.get("dump-volume"))
        result, trace = register(source, target, config, quad=quad,
                                 workers=workers, on_step=on_step)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2

    if scale != 1.0:
        result = result.with_vertices(result.vertices / scale)
    try:
        save_obj(result, out_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    trace_path = settings.get("trace")
    if trace_path:
        trace.to_csv(trace_path)
        if not settings.args.no_figures:
            rows = report.read_trace_csv(trace_path)
            figure_path = trace_path.rsplit(".", 1)[0] + ".png"
            report.render_trace_figure(rows, figure_path,
                                       title=f"terminated: {trace.termination}")
    print(f"registered mesh written to {out_path} ({trace.termination}, "
          f"{len(trace.accepted_energies())} accepted steps)")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.selftest:
        from .diagnostics import selftest

        return selftest()
    file_values = {}
    if args.config:
        try:
            file_values = _load_config_file(args.config)
        except (OSError, InvalidInputError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    try:
        return run(Settings(args, file_values))
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
