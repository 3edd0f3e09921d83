"""Command-line front end.

Subcommands: synth, preprocess, correlate, tune, train, eval, stream.
Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/convergence
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DataError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="eegmood",
                     description="EEG emotion recognition pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="JSON generator spec")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, required=True,
                   help="overrides the spec file seed")

    p = sub.add_parser("preprocess",
                       help="channel-select, filter raw 512 Hz data, and "
                            "apply common average referencing")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--channels", type=int, choices=(5, 32))

    p = sub.add_parser("correlate",
                       help="per-channel wavelet-entropy correlation "
                            "against a probe channel")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--probe", required=True)
    p.add_argument("--band", required=True,
                   choices=("theta", "alpha", "beta", "gamma"))
    p.add_argument("--out", required=True, help="CSV output (a PNG figure "
                   "is written alongside)")

    p = sub.add_parser("tune", help="grid-search C and gamma")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--target", required=True, choices=("val", "aro"))
    p.add_argument("--mode", default="indep", choices=("indep",))
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--subsample", default="1/3",
                   help="fraction of the pooled data to search on")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tau", type=int, default=1, choices=(1, 3))
    p.add_argument("--baseline-removal", action="store_true")

    p = sub.add_parser("train", help="train classifier(s) on a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--target", required=True, choices=("val", "aro"))
    p.add_argument("--chained", choices=("valaro", "aroval"))
    p.add_argument("--tau", type=int, default=3, choices=(1, 3))
    p.add_argument("--baseline-removal", action="store_true")
    p.add_argument("--C", type=float, default=200.0)
    p.add_argument("--gamma", default="scale")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="run experiment configurations and "
                       "write a report (plus a PNG figure alongside)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--config", required=True, help="JSON experiment list")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--report", required=True)

    p = sub.add_parser("stream", help="real-time classification service")
    p.add_argument("--config", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--listen", help="addr:port TCP listener")
    group.add_argument("--stdin", action="store_true")

    return parser


def _parse_fraction(text: str) -> float:
    if "/" in text:
        num, _, den = text.partition("/")
        return float(num) / float(den)
    return float(text)


def _parse_gamma(text: str):
    return text if text == "scale" else float(text)


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON: {exc}") from exc


def _cmd_synth(args) -> int:
    from .datastore import generate_synthetic, parse_synth_spec, write_dataset

    doc = _load_json(args.spec)
    doc["seed"] = args.seed
    spec = parse_synth_spec(doc)
    recordings = generate_synthetic(spec)
    write_dataset(recordings, args.out)
    print(f"wrote {len(recordings)} recordings "
          f"({spec.n_subjects} subjects x {spec.n_trials} trials) to "
          f"{args.out}")
    return 0


def _cmd_preprocess(args) -> int:
    from .datastore import read_dataset, write_dataset
    from .signals import (CHANNELS_5, RAW_RATE_HZ,
                          common_average_reference, preprocess_raw,
                          select_channels)
    from dataclasses import replace

    recordings = read_dataset(args.input)
    out = []
    for rec in recordings:
        if args.channels == 5 and rec.n_channels != 5:
            rec = select_channels(rec, CHANNELS_5)
        elif args.channels == 32 and rec.n_channels != 32:
            raise DataError(
                f"subject {rec.subject_id} trial {rec.trial_id} has "
                f"{rec.n_channels} channels, cannot produce 32")
        full = np.hstack([rec.baseline, rec.evoked])
        rate = rec.sample_rate_hz
        if rate == RAW_RATE_HZ:
            full = preprocess_raw(full, rate)
            rate = 128.0
        elif rate != 128.0:
            raise DataError(
                f"subject {rec.subject_id} trial {rec.trial_id}: "
                f"unsupported rate {rate:g} Hz (need 512 or 128)")
        full = common_average_reference(full)
        split = round(3.0 * rate)
        out.append(replace(rec, sample_rate_hz=rate,
                           baseline=full[:, :split], evoked=full[:, split:]))
    write_dataset(out, args.out)
    print(f"preprocessed {len(out)} recordings -> {args.out}")
    return 0


def _cmd_correlate(args) -> int:
    from .datastore import read_dataset
    from .features import BandFeatures, band_features_of, channel_correlation
    from .figures import save_correlation_figure
    from .wavelet import Band

    recordings = read_dataset(args.input)
    band = Band(args.band)
    trials = [BandFeatures(values=band_features_of(rec.evoked),
                           channels=rec.channels) for rec in recordings]
    corr = channel_correlation(trials, args.probe, band)
    out_path = Path(args.out)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("channel,r\n")
        for name, r in corr.items():
            fh.write(f"{name},{'NA' if r is None else repr(r)}\n")
    fig_path = out_path.with_suffix(".png")
    save_correlation_figure(corr, args.probe.upper(), band, fig_path)
    print(f"wrote {out_path} and {fig_path}")
    return 0


def _cmd_tune(args) -> int:
    from .datastore import read_dataset
    from .evaluation import build_dataset, stratified_subsample
    from .svm import GAMMA_SCALE, grid_search

    recordings = read_dataset(args.input)
    channels = recordings[0].n_channels
    X, y_val, y_aro, _, _ = build_dataset(
        recordings, channels, args.tau, args.baseline_removal)
    y = y_val if args.target == "val" else y_aro
    fraction = _parse_fraction(args.subsample)
    keep = stratified_subsample(y, fraction, args.seed)
    best, table = grid_search(X[keep], [y[i] for i in keep], k=args.k,
                              seed=args.seed)
    print(f"grid search on {len(keep)}/{len(y)} samples, "
          f"{args.k}-fold stratified CV")
    print(f"{'C':>8} {'gamma':>10} {'mean':>8} {'std':>8}")
    for cell in table:
        accs = np.array(cell.fold_accuracies)
        print(f"{cell.C:>8g} {cell.gamma:>10g} {accs.mean():>8.4f} "
              f"{accs.std():>8.4f}")
    gamma = best.gamma if best.gamma != GAMMA_SCALE else "scale"
    print(f"best: C={best.C:g} gamma={gamma}")
    return 0


def _cmd_train(args) -> int:
    from .datastore import read_dataset
    from .evaluation import build_dataset
    from .svm import (RbfParams, save_model, train_chained, train_smo, VALARO)

    recordings = read_dataset(args.input)
    channels = recordings[0].n_channels
    X, y_val, y_aro, _, _ = build_dataset(
        recordings, channels, args.tau, args.baseline_removal)
    params = RbfParams(C=args.C, gamma=_parse_gamma(args.gamma))
    if args.chained:
        model = train_chained(X, y_val, y_aro, args.chained, params=params)
        first_dim, second_dim = (("arousal", "valence")
                                 if args.chained == VALARO
                                 else ("valence", "arousal"))
        first_path = Path(f"{args.out}.{first_dim}")
        second_path = Path(f"{args.out}.{second_dim}")
        save_model(model.first, first_path)
        save_model(model.second, second_path)
        print(f"wrote {first_path} (first stage, {model.first.n_features} "
              f"features) and {second_path} (conditioned, "
              f"{model.second.n_features} features)")
        return 0
    y = y_val if args.target == "val" else y_aro
    model = train_smo(X, y, params)
    save_model(model, args.out)
    print(f"wrote {args.out} ({len(model.dual_coeffs)} support vectors, "
          f"{model.n_features} features)")
    return 0


def _experiment_from_doc(doc: dict, seed: int):
    from .evaluation import ExperimentConfig

    known = {"target", "mode", "channels", "tau_s", "baseline_removed",
             "model", "k", "C", "gamma", "standardize", "tol", "seed",
             "grouped_trials"}
    unknown = set(doc) - known
    if unknown:
        raise DataError(f"unknown experiment fields: {sorted(unknown)}")
    doc = dict(doc)
    doc.setdefault("seed", seed)
    mode = doc.get("mode", "independent")
    doc["mode"] = {"indep": "independent", "dep": "dependent"}.get(mode, mode)
    target = doc.get("target", "valence")
    doc["target"] = {"val": "valence", "aro": "arousal"}.get(target, target)
    return ExperimentConfig(**doc)


def _cmd_eval(args) -> int:
    from .datastore import read_dataset
    from .evaluation import run_experiment, write_reports
    from .figures import save_report_figure

    recordings = read_dataset(args.input)
    doc = _load_json(args.config)
    experiments = doc["experiments"] if isinstance(doc, dict) else doc
    if isinstance(experiments, dict):
        experiments = [experiments]
    if not experiments:
        raise DataError(f"{args.config}: no experiments defined")
    reports = []
    for exp_doc in experiments:
        cfg = _experiment_from_doc(exp_doc, args.seed)
        report = run_experiment(recordings, cfg)
        reports.append(report)
        print(f"{cfg.target}/{cfg.mode}/{cfg.channels}ch/tau{cfg.tau_s}"
              f"/{'bl' if cfg.baseline_removed else 'raw'}/{cfg.model}: "
              f"mean={report.mean:.4f} std={report.stddev:.4f}")
    write_reports(reports, args.report)
    fig_path = Path(args.report).with_suffix(".png")
    save_report_figure(reports, fig_path)
    print(f"wrote {args.report} and {fig_path}")
    return 0


def _cmd_stream(args) -> int:
    from dataclasses import replace

    from .stream import load_stream_config, serve

    cfg = load_stream_config(args.config)
    if args.stdin:
        cfg = replace(cfg, transport="stdin")
    elif args.listen:
        cfg = replace(cfg, transport="tcp", listen=args.listen)
    serve(cfg)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "correlate": _cmd_correlate,
    "tune": _cmd_tune,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "stream": _cmd_stream,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
