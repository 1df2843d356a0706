"""Command line entry point: ``ehgtensor <subcommand> ...``.

Exit codes::

    0  success
    2  bad arguments or configuration
    3  malformed input file (tensor, CSV, annotations, config)
    4  numerical failure during inference
    5  I/O error (missing file, permission, disk)
"""

import argparse
import json
import logging
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from . import io as eio
from .baselines import GRIDS, METHODS, grid_search, run_method
from .errors import ArgumentError, ConfigurationError, EhgError, FormatError, NumericalError
from .evaluation import compare_methods, format_table, simulation_annotations, snr_db
from .signal_prep import FilterSpec, preprocess
from .simulator import SimConfig, simulate

log = logging.getLogger("ehgtensor")

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_FORMAT = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

EXIT_CODES = {
    ArgumentError: EXIT_ARGUMENT,
    ConfigurationError: EXIT_ARGUMENT,
    FormatError: EXIT_FORMAT,
    NumericalError: EXIT_NUMERICAL,
    OSError: EXIT_IO,
}

ALL_METHODS = ["vb-tucker", "brtf-cp", "rpca", "pca", "hosvd", "cp-als", "bipolar", "wavelet"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ArgumentError(f"{self.prog}: {message}")


# -- value parsing ---------------------------------------------------------------------


def parse_value(text):
    """Config/flag string to int, float, bool, tuple of numbers, or str."""
    if not isinstance(text, str):
        return text
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", ""):
        return None
    if "," in t:
        return tuple(parse_value(p) for p in t.split(","))
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def parse_rank(text):
    value = parse_value(text)
    if isinstance(value, int):
        return value
    if isinstance(value, tuple) and len(value) == 3 and all(isinstance(v, int) for v in value):
        return value
    raise ArgumentError(f"rank must be an integer or R1,R2,R3; got {text!r}")


def _section(cfg, name):
    return {k: parse_value(v) for k, v in cfg.get(name, {}).items()}


def _load_priors(path):
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    else:
        doc = _section(eio.read_config(path), "priors")
    known = {"a_tau", "b_tau", "a_gamma", "b_gamma", "a_lambda", "b_lambda"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown prior keys {sorted(unknown)}")
    return {k: float(v) for k, v in doc.items()}


# -- manifest ----------------------------------------------------------------------------


def _versions():
    import scipy

    out = {"ehgtensor": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}
    try:
        import pywt

        out["pywavelets"] = pywt.__version__
    except ImportError:
        pass
    return out


def write_manifest(out_dir, command, config, inputs, outputs, timings):
    manifest = {
        "command": command,
        "config": config,
        "versions": _versions(),
        "inputs": {p: eio.file_digest(p) for p in inputs},
        "outputs": {os.path.relpath(p, out_dir): eio.file_digest(p) for p in outputs},
        "timings_s": timings,
    }
    eio.write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


# -- subcommands ---------------------------------------------------------------------------


def _sim_config(opts):
    kw = {}
    for key in ("seed", "duration_s", "sample_rate_hz", "target_snr_db", "snr_reference"):
        if opts.get(key) is not None:
            kw[key] = opts[key]
    if "seed" in kw:
        kw["seed"] = int(kw["seed"])
    return SimConfig(**kw)


def _write_simulation(out_dir, bundle):
    fs = bundle.config.sample_rate_hz
    paths = []
    for name in ("y", "s_true", "x_true", "e_true"):
        p = os.path.join(out_dir, f"{name}.ehgt")
        eio.write_tensor(p, getattr(bundle, name), fs)
        paths.append(p)
    p = os.path.join(out_dir, "config.json")
    eio.write_json(p, bundle.config.to_dict())
    paths.append(p)
    p = os.path.join(out_dir, "annotations.json")
    eio.write_annotations(p, simulation_annotations(bundle.config))
    paths.append(p)
    return paths


def cmd_simulate(args):
    cfg = eio.read_config(args.config) if args.config else {}
    opts = _section(cfg, "simulate")
    for key in ("seed", "duration_s", "sample_rate_hz", "target_snr_db", "snr_reference"):
        flag = getattr(args, key)
        if flag is not None:
            opts[key] = flag
    t0 = time.perf_counter()
    bundle = simulate(_sim_config(opts))
    paths = _write_simulation(args.out, bundle)
    write_manifest(args.out, "simulate", {"simulate": opts}, [], paths, {"simulate": time.perf_counter() - t0})
    return EXIT_OK


def cmd_preprocess(args):
    t0 = time.perf_counter()
    x, fs = eio.read_tensor(args.input)
    fs = args.fs or fs
    if not fs:
        raise ArgumentError("sampling rate unknown: the file has none and --fs was not given")
    spec = FilterSpec(f_lo_hz=args.low_hz, f_hi_hz=args.high_hz, order=args.order)
    target = fs / args.decimate
    out, new_fs = preprocess(x, fs, trim_seconds=args.trim_seconds, spec=spec, target_fs=target, force=args.force)
    eio.write_tensor(args.out, out, new_fs)
    config = {"preprocess": {"trim_seconds": args.trim_seconds, "low_hz": args.low_hz, "high_hz": args.high_hz,
                             "order": args.order, "decimate": args.decimate, "fs": fs, "force": args.force}}
    write_manifest(os.path.dirname(os.path.abspath(args.out)), "preprocess", config, [args.input], [args.out],
                   {"preprocess": time.perf_counter() - t0})
    return EXIT_OK


def _method_params(args):
    m = args.method
    p = {}
    if m in ("vb-tucker", "brtf-cp"):
        for key in ("max_iters", "tol", "prune_threshold"):
            if getattr(args, key) is not None:
                p[key] = getattr(args, key)
        if args.init_rank is not None:
            p["init_rank"] = parse_rank(args.init_rank)
        if args.priors:
            p["priors"] = _load_priors(args.priors)
    elif m == "pca":
        p["k"] = args.k if args.k is not None else 2
    elif m == "hosvd":
        p["ranks"] = parse_rank(args.ranks) if args.ranks else (2, 2, 2)
    elif m == "cp-als":
        p["rank"] = args.rank if args.rank is not None else 3
        for key in ("max_iters", "tol"):
            if getattr(args, key) is not None:
                p[key] = getattr(args, key)
    elif m == "rpca":
        for key in ("lam", "tol", "max_iters"):
            if getattr(args, key) is not None:
                p[key] = getattr(args, key)
    elif m == "wavelet":
        if args.levels is not None:
            p["levels"] = args.levels
    return p


def _diagnostics_json(diag):
    # wall time goes to the manifest so that output files stay reproducible
    return {k: v for k, v in diag.items() if k not in ("wall_time_s", "sparse")}


def decompose_to(out_dir, y, fs, method, seed, params):
    out = run_method(method, y, seed=seed, **params)
    paths = []
    tensors = {"s": out.localized, "x": out.distributed}
    if out.localized.shape == y.shape:
        tensors["e"] = y - out.distributed - out.localized
    for name, t in tensors.items():
        p = os.path.join(out_dir, f"{name}.ehgt")
        eio.write_tensor(p, t, fs)
        paths.append(p)
    p = os.path.join(out_dir, "diagnostics.json")
    diag = _diagnostics_json(out.diagnostics)
    diag.update({"method": method, "seed": seed, "params": params})
    eio.write_json(p, diag)
    paths.append(p)
    return out, paths


def cmd_decompose(args):
    t0 = time.perf_counter()
    y, fs = eio.read_tensor(args.input)
    params = _method_params(args)
    out, paths = decompose_to(args.out, y, fs, args.method, args.seed, params)
    timings = {"decompose": time.perf_counter() - t0}
    if "wall_time_s" in out.diagnostics:
        timings["inference"] = out.diagnostics["wall_time_s"]
    write_manifest(args.out, "decompose", {"decompose": {"method": args.method, "seed": args.seed, **params}},
                   [args.input], paths, timings)
    return EXIT_OK


def _load_truth(truth_dir):
    from .simulator import GroundTruthBundle

    parts = {}
    for name in ("y", "s_true", "x_true", "e_true"):
        parts[name], _ = eio.read_tensor(os.path.join(truth_dir, f"{name}.ehgt"))
    with open(os.path.join(truth_dir, "config.json"), encoding="utf-8") as fh:
        config = SimConfig.from_dict(json.load(fh))
    return GroundTruthBundle(config=config, **parts)


def _method_list(text):
    methods = [m.strip() for m in text.split(",") if m.strip()] if text else []
    for m in methods:
        if m not in METHODS:
            raise ArgumentError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
    return methods


def _params_from_config(cfg, methods):
    params = {}
    for m in methods:
        sec = _section(cfg, f"params.{m}")
        if "init_rank" in sec:
            sec["init_rank"] = parse_rank(str(cfg[f"params.{m}"]["init_rank"]))
        params[m] = sec
    return params


def cmd_evaluate(args):
    t0 = time.perf_counter()
    y, fs = eio.read_tensor(args.input)
    truth = _load_truth(args.truth) if args.truth else None
    ann = eio.read_annotations(args.annotations) if args.annotations else None
    methods = _method_list(args.methods)
    cfg = eio.read_config(args.config) if args.config else {}
    params = _params_from_config(cfg, methods)
    report = compare_methods(y, truth=truth, ann=ann, methods=methods, n_runs=args.runs, fs=fs, params=params)
    paths = _write_report(args.out, report)
    inputs = [args.input] + ([args.annotations] if args.annotations else [])
    write_manifest(args.out, "evaluate", {"evaluate": {"methods": methods, "runs": args.runs, "params": params}},
                   inputs, paths, {"evaluate": time.perf_counter() - t0})
    return EXIT_OK


def _write_report(out_dir, report):
    p_json = os.path.join(out_dir, "report.json")
    p_txt = os.path.join(out_dir, "report.txt")
    eio.write_json(p_json, report)
    eio.atomic_write(p_txt, format_table(report) + "\n")
    return [p_json, p_txt]


def cmd_scalogram(args):
    from .evaluation import scalogram

    x, fs = eio.read_tensor(args.input)
    fs = args.fs or fs
    if not fs:
        raise ArgumentError("sampling rate unknown: the file has none and --fs was not given")
    i, j = parse_value(args.electrode)
    if not (0 <= i < x.shape[0] and 0 <= j < x.shape[1]):
        raise ArgumentError(f"electrode ({i},{j}) outside the {x.shape[0]}x{x.shape[1]} grid")
    freqs, mag = scalogram(x[i, j], fs, args.f_min, args.f_max, args.n_freqs)
    t = np.arange(x.shape[2]) / fs
    lines = ["freq_hz," + ",".join(repr(float(v)) for v in t)]
    for f, row in zip(freqs, mag):
        lines.append(repr(float(f)) + "," + ",".join(repr(float(v)) for v in row))
    eio.atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


# -- pipeline ------------------------------------------------------------------------------


def resolve_pipeline_config(cfg):
    """Typed, fully defaulted pipeline configuration from INI sections."""
    pipe = _section(cfg, "pipeline")
    mode = pipe.get("mode", "simulated")
    if mode not in ("simulated", "recording"):
        raise ConfigurationError(f"pipeline mode must be 'simulated' or 'recording', got {mode!r}")
    ev = _section(cfg, "evaluate")
    methods = ev.get("methods", ",".join(ALL_METHODS))
    methods = _method_list(",".join(methods) if isinstance(methods, tuple) else str(methods))
    resolved = {
        "pipeline": {"mode": mode},
        "evaluate": {
            "methods": methods,
            "runs": int(ev.get("runs", 100)),
            "tune": bool(ev.get("tune", False)),
            "seed0": int(ev.get("seed0", 0)),
        },
        "params": _params_from_config(cfg, methods),
    }
    if mode == "simulated":
        sim = _section(cfg, "simulate")
        resolved["simulate"] = _sim_config(sim).to_dict()
    else:
        inp = _section(cfg, "input")
        if "path" not in inp:
            raise ConfigurationError("[input] needs a path")
        resolved["input"] = {
            "path": str(inp["path"]),
            "annotations": str(inp["annotations"]) if inp.get("annotations") else None,
            "rows": int(inp.get("rows", 4)),
            "cols": int(inp.get("cols", 4)),
            "sample_rate_hz": float(inp["sample_rate_hz"]) if inp.get("sample_rate_hz") else None,
            "units_mv": bool(inp.get("units_mv", True)),
            "has_header": bool(inp.get("has_header", True)),
            "skip_columns": int(inp.get("skip_columns", 0)),
        }
        pre = _section(cfg, "preprocess")
        resolved["preprocess"] = {
            "trim_seconds": float(pre.get("trim_seconds", 60.0)),
            "low_hz": float(pre.get("low_hz", 0.05)),
            "high_hz": float(pre.get("high_hz", 4.0)),
            "order": int(pre.get("order", 4)),
            "target_fs": float(pre.get("target_fs", 10.0)),
        }
    return resolved


def _freeze(params):
    return {m: {k: (tuple(v) if isinstance(v, list) else v) for k, v in p.items()} for m, p in params.items()}


def run_pipeline(config, out_dir):
    """Execute a resolved pipeline config; returns (output paths, input paths, timings)."""
    timings = {}
    paths, inputs = [], []
    ev = config["evaluate"]
    params = _freeze(config["params"])
    if config["pipeline"]["mode"] == "simulated":
        t0 = time.perf_counter()
        bundle = simulate(SimConfig.from_dict(config["simulate"]))
        paths += _write_simulation(out_dir, bundle)
        timings["simulate"] = time.perf_counter() - t0
        if ev["tune"]:
            t0 = time.perf_counter()
            tuned = {}
            for m in ev["methods"]:
                best, scores = grid_search(m, bundle.y, bundle.s_true, GRIDS.get(m), seed=ev["seed0"])
                params[m] = {**best, **params.get(m, {})}
                tuned[m] = {"best": best, "scores": [[s, c] for s, c in scores]}
            p = os.path.join(out_dir, "tuning.json")
            eio.write_json(p, tuned)
            paths.append(p)
            timings["tune"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        report = compare_methods(
            bundle.y, truth=bundle, ann=simulation_annotations(bundle.config), methods=ev["methods"],
            n_runs=ev["runs"], fs=bundle.config.sample_rate_hz, params=params, seed0=ev["seed0"],
        )
        report["params"] = params
        paths += _write_report(out_dir, report)
        timings["evaluate"] = time.perf_counter() - t0
        return paths, inputs, timings

    inp = config["input"]
    pre = config["preprocess"]
    t0 = time.perf_counter()
    src = inp["path"]
    inputs.append(src)
    if src.endswith(".ehgt"):
        raw, fs = eio.read_tensor(src)
        fs = inp["sample_rate_hz"] or fs
    else:
        if not inp["sample_rate_hz"]:
            raise ConfigurationError("[input] sample_rate_hz is required for CSV recordings")
        layout = eio.CsvLayout.row_major(inp["rows"], inp["cols"], inp["sample_rate_hz"], units_mv=inp["units_mv"],
                                         has_header=inp["has_header"], skip_columns=inp["skip_columns"])
        raw, fs = eio.ingest_csv(src, layout), inp["sample_rate_hz"]
    spec = FilterSpec(f_lo_hz=pre["low_hz"], f_hi_hz=pre["high_hz"], order=pre["order"])
    y, new_fs = preprocess(raw, fs, trim_seconds=pre["trim_seconds"], spec=spec, target_fs=pre["target_fs"])
    p = os.path.join(out_dir, "preprocessed.ehgt")
    eio.write_tensor(p, y, new_fs)
    paths.append(p)
    timings["preprocess"] = time.perf_counter() - t0
    ann = None
    if inp["annotations"]:
        inputs.append(inp["annotations"])
        ann = eio.read_annotations(inp["annotations"])
        # the recording was trimmed, so shift the annotation clock accordingly
        ann = shift_annotations(ann, -pre["trim_seconds"], y.shape[2] / new_fs)
    t0 = time.perf_counter()
    smoke = {}
    for m in ev["methods"]:
        out, written = decompose_to(os.path.join(out_dir, m), y, new_fs, m, ev["seed0"], params.get(m, {}))
        paths += written
        if ann is not None and out.localized.shape == y.shape:
            residual = y - out.distributed - out.localized
            smoke[m] = smoke_check(y, out.localized, out.distributed, residual, new_fs, ann)
    timings["decompose"] = time.perf_counter() - t0
    if ann is not None:
        report = compare_methods(y, ann=ann, methods=ev["methods"], n_runs=1, fs=new_fs, params=params, seed0=ev["seed0"])
        report["raw_snr_db"] = snr_db(y, new_fs, ann).to_dict()
        report["smoke"] = smoke
        paths += _write_report(out_dir, report)
    return paths, inputs, timings


def shift_annotations(ann, offset_s, duration_s):
    """Move intervals by ``offset_s`` and clip them to ``[0, duration_s]``; empty ones are dropped."""
    from .evaluation import AnnotationSet, Interval

    out = []
    for iv in ann.intervals:
        lo, hi = max(iv.start_s + offset_s, 0.0), min(iv.end_s + offset_s, duration_s)
        if hi > lo:
            out.append(Interval(iv.kind, lo, hi))
    return AnnotationSet(tuple(out))


RECONSTRUCTION_RTOL = 1e-12


def dummy_energy_fraction(x, fs, ann):
    from .evaluation import _interval_mask

    mask = _interval_mask(x.shape[2], fs, ann.of_kind("dummy"))
    total = float(np.sum(x * x))
    return float(np.sum(x[:, :, mask] ** 2)) / total if total > 0 else 0.0


def smoke_check(y, localized, distributed, residual, fs, ann):
    """Reconstruction of ``y`` from the three parts and between-contraction energy of the localized part.

    The sum is compared to ``y`` at a 1e-12 relative bound since adding three
    float64 tensors back is not guaranteed to round to the same bits.
    """
    err = float(np.max(np.abs(localized + distributed + residual - y)))
    scale = float(np.max(np.abs(y))) or 1.0
    return {
        "reconstruction_max_abs_error": err,
        "reconstruction_exact": bool(err <= RECONSTRUCTION_RTOL * scale),
        "dummy_fraction_raw": dummy_energy_fraction(y, fs, ann),
        "dummy_fraction_localized": dummy_energy_fraction(localized, fs, ann),
    }


def cmd_pipeline(args):
    if bool(args.config) == bool(args.manifest):
        raise ArgumentError("pipeline needs exactly one of --config or --manifest")
    if args.manifest:
        with open(args.manifest, encoding="utf-8") as fh:
            try:
                config = json.load(fh)["config"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise FormatError(f"{args.manifest}: not a run manifest ({exc})") from exc
    else:
        config = resolve_pipeline_config(eio.read_config(args.config))
    t0 = time.perf_counter()
    paths, inputs, timings = run_pipeline(config, args.out)
    timings["total"] = time.perf_counter() - t0
    write_manifest(args.out, "pipeline", config, inputs, paths, timings)
    report = os.path.join(args.out, "report.txt")
    if os.path.exists(report) and not args.quiet:
        with open(report, encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="ehgtensor", description="Sparse + low-rank + noise decomposition of EHG tensors")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write a synthetic recording and its ground truth")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--duration-s", dest="duration_s", type=float)
    s.add_argument("--fs", dest="sample_rate_hz", type=float)
    s.add_argument("--snr-db", dest="target_snr_db", type=float)
    s.add_argument("--snr-reference", choices=["localized", "total"])
    s.add_argument("--config", help="INI file with a [simulate] section; flags win")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("preprocess", help="trim, bandpass and decimate a tensor file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--fs", type=float, help="override the sampling rate stored in the file")
    s.add_argument("--trim-seconds", type=float, default=60.0)
    s.add_argument("--low-hz", type=float, default=0.05)
    s.add_argument("--high-hz", type=float, default=4.0)
    s.add_argument("--order", type=int, default=4)
    s.add_argument("--decimate", type=int, default=1, help="keep every n-th sample")
    s.add_argument("--force", action="store_true", help="decimate even if the passband would alias")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("decompose", help="split a tensor into localized and distributed parts")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--method", default="vb-tucker", choices=sorted(METHODS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--init-rank", help="R1,R2,R3 (vb-tucker) or R (brtf-cp)")
    s.add_argument("--prune-threshold", type=float)
    s.add_argument("--priors", help="INI ([priors] section) or JSON file of Gamma hyperparameters")
    s.add_argument("--k", type=int, help="pca: number of components")
    s.add_argument("--ranks", help="hosvd: R1,R2,R3")
    s.add_argument("--rank", type=int, help="cp-als: number of components")
    s.add_argument("--lam", type=float, help="rpca: sparsity weight")
    s.add_argument("--levels", type=int, help="wavelet: decomposition depth")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("evaluate", help="score methods by correlation and/or SNR")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--truth", help="directory written by `simulate`")
    s.add_argument("--annotations", help="annotation JSON")
    s.add_argument("--methods", default=",".join(ALL_METHODS))
    s.add_argument("--runs", type=int, default=100, help="seeded runs per stochastic method")
    s.add_argument("--config", help="INI file with [params.<method>] sections")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("scalogram", help="Morlet scalogram of one electrode as CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--electrode", default="0,0", help="row,col")
    s.add_argument("--fs", type=float)
    s.add_argument("--f-min", type=float, default=0.05)
    s.add_argument("--f-max", type=float, default=4.0)
    s.add_argument("--n-freqs", type=int, default=64)
    s.set_defaults(func=cmd_scalogram)

    s = sub.add_parser("pipeline", help="run a full configured experiment")
    s.add_argument("--config", help="INI pipeline configuration")
    s.add_argument("--manifest", help="re-run from a previous manifest.json")
    s.add_argument("--out", required=True)
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(func=cmd_pipeline)
    return p


def exit_code_for(exc):
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except (EhgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
