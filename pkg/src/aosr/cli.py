"""Command-line surface: gen, ratio, train, eval, sweep, verify.

Every command resolves its settings from built-in defaults, then an
optional flat ``key = value`` config file, then explicit flags, and
writes the resolved settings next to its outputs as ``<out-stem>.config``
so any run can be reproduced from that file alone. All file writes are
atomic (temp file + rename). Exit codes: 0 success, 1 validation error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import net
from .dataio import (
    Dataset,
    atomic_write_text,
    default_unknown_box,
    gen_double_moon,
    gen_gaussian_blob,
    gen_unknown_uniform,
    load_dataset,
    load_features,
    save_dataset,
    save_features,
)
from .errors import InvalidArgument, NumericalFailure, ParseError
from .evalmetrics import accuracy, confusion, macro_f1, sweep_error_curve
from .net import TrainConfig
from .pipeline import (
    AosrConfig,
    aosr_predict,
    load_aosr_model,
    run_aosr,
    save_aosr_model,
)
from .ratio import iforest_fit, kulsif_fit, median_bandwidth, ratio_predict, weights_from_iforest
from .reweight import estimate_u_zero_mass, select_tau
from .rng import Rng
from .risk import compute_risk_report
from .svgplot import PlotSeries, emit_svg_lines
from .theorylab import (
    RateExperimentConfig,
    mlp_for_rate_experiment,
    rate_gap_experiment,
    uniform_gap_task,
)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise InvalidArgument(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError:
        raise InvalidArgument(f"expected a comma list of integers, got {text!r}")


_TRAIN_KNOBS = {
    "aux_multiple": (int, 3),
    "beta": (float, 0.05),
    "t": (float, 0.10),
    "method": (str, "iforest"),
    "lambda": (float, 1e-2),
    "epochs": (int, 200),
    "batch_size": (int, 64),
    "learning_rate": (float, 1e-3),
    "hidden_width": (int, 64),
    "box_margin": (float, 0.2),
    "recompute_mu": (_parse_bool, True),
}

# key -> (parse fn, default); None default means required unless noted
COMMAND_KEYS = {
    "gen": {
        "kind": (str, None),
        "n": (int, None),
        "noise": (float, -1.0),  # -1 means "kind default"
        "margin": (float, 0.2),
        "dim": (int, 2),
        "seed": (int, 0),
        "out": (str, None),
    },
    "ratio": {
        "method": (str, "iforest"),
        "source": (str, None),
        "aux": (str, None),
        "lambda": (float, 1e-2),
        "t": (float, 0.10),
        "beta": (float, 0.05),
        "seed": (int, 0),
        "out": (str, None),
    },
    "train": {
        "data": (str, None),
        **_TRAIN_KNOBS,
        "seed": (int, 0),
        "out": (str, None),
    },
    "eval": {
        "model": (str, None),
        "known": (str, None),
        "unknown": (str, ""),
        "report": (str, None),
        "seed": (int, 0),
    },
    "sweep": {
        "sizes": (_parse_int_list, None),
        "trials": (int, 5),
        "noise": (float, 0.05),
        **_TRAIN_KNOBS,
        "seed": (int, 0),
        "out": (str, None),
    },
    "verify": {
        "experiment": (str, "theorem3"),
        "beta": (float, 0.05),
        "tau": (float, 0.25),
        "sizes": (_parse_int_list, (100, 400, 1600, 6400)),
        "trials": (int, 10),
        "ratio_source": (str, "true"),
        "seed": (int, 0),
        "out": (str, None),
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgument(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="aosr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, keys in COMMAND_KEYS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None)
        for key in keys:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)
    return parser


def load_config_file(path: str, keys: dict) -> dict:
    """Parse a flat ``key = value`` file, rejecting unknown keys."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = value', got {raw.rstrip()!r}", lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in keys:
                raise ParseError(f"unknown config key {key!r}", lineno)
            values[key] = value.strip()
    return values


def _resolve(command: str, args: argparse.Namespace) -> dict:
    keys = COMMAND_KEYS[command]
    resolved = {k: default for k, (_, default) in keys.items()}
    if args.config is not None:
        for key, raw in load_config_file(args.config, keys).items():
            resolved[key] = keys[key][0](raw)
    for key in keys:
        raw = getattr(args, key)
        if raw is not None:
            resolved[key] = keys[key][0](raw)
    missing = [k for k, v in resolved.items() if v is None]
    if missing:
        raise InvalidArgument(
            f"{command}: missing required settings: {', '.join(sorted(missing))}"
        )
    return resolved


def _config_text(command: str, values: dict) -> str:
    lines = [f"# command: {command}"]
    for key in sorted(values):
        value = values[key]
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _write_effective_config(command: str, values: dict, out_path: str) -> None:
    stem = os.path.splitext(out_path)[0]
    atomic_write_text(stem + ".config", _config_text(command, values))


def _aosr_config(values: dict) -> AosrConfig:
    train_cfg = TrainConfig(
        epochs=values["epochs"],
        batch_size=values["batch_size"],
        learning_rate=values["learning_rate"],
    )
    return AosrConfig(
        closed_train=train_cfg,
        open_train=train_cfg,
        aux_multiple=values["aux_multiple"],
        box_margin=values["box_margin"],
        weight_method=values["method"],
        beta=values["beta"],
        t=values["t"],
        recompute_mu=values["recompute_mu"],
        kulsif_lambda=values["lambda"],
        hidden_width=values["hidden_width"],
        seed=values["seed"],
    )


def _load_source_features(path: str) -> np.ndarray:
    """Accept either a labeled dataset CSV or a bare feature CSV."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header.endswith(",label"):
        return load_dataset(path).features
    return load_features(path)


def cmd_gen(values: dict) -> None:
    rng = Rng(values["seed"])
    kind = values["kind"]
    if kind == "moon":
        if values["noise"] < 0:
            values["noise"] = 0.05
        save_dataset(gen_double_moon(values["n"], values["noise"], rng), values["out"])
    elif kind == "blob":
        if values["noise"] < 0:
            values["noise"] = 1.0
        rows = gen_gaussian_blob(
            values["n"], np.zeros(values["dim"]), values["noise"], rng
        )
        save_features(rows, values["out"])
    elif kind == "unknown":
        rows = gen_unknown_uniform(
            values["n"], default_unknown_box(), values["margin"], rng
        )
        save_features(rows, values["out"])
    else:
        raise InvalidArgument(f"unknown --kind {kind!r} (moon|blob|unknown)")


def cmd_ratio(values: dict) -> None:
    source = _load_source_features(values["source"])
    aux = load_features(values["aux"])
    method = values["method"]
    if method == "iforest":
        forest = iforest_fit(source, rng=Rng(values["seed"]).derive("weights"))
        weights = weights_from_iforest(forest, aux)
    elif method == "kulsif":
        sigma = median_bandwidth(np.vstack([source, aux]))
        model = kulsif_fit(source, aux, values["lambda"], sigma)
        weights = ratio_predict(model, aux)
    else:
        raise InvalidArgument(f"unknown --method {method!r} (iforest|kulsif)")

    d = aux.shape[1]
    lines = [",".join([f"f{i}" for i in range(d)] + ["weight"])]
    for row, w in zip(aux, weights):
        lines.append(",".join([repr(float(v)) for v in row] + [repr(float(w))]))
    atomic_write_text(values["out"], "\n".join(lines) + "\n")

    tau = select_tau(weights, values["t"])
    u0 = estimate_u_zero_mass(weights, tau)
    gp = f"{1.0 / u0!r}" if u0 > 0 else "undefined"
    print(
        f"tau={tau!r} u_zero_mass={u0!r} "
        f"gamma={1.0 / (1.0 + values['beta'] * u0)!r} gamma_prime={gp}"
    )


def cmd_train(values: dict) -> None:
    data = load_dataset(values["data"])
    data.require_known_only()
    config = _aosr_config(values)
    result = run_aosr(config, data)
    save_aosr_model(result.model, values["out"])
    stem = os.path.splitext(values["out"])[0]

    trace_lines = ["epoch,mu,objective"]
    for epoch, (mu, obj) in enumerate(
        zip(result.mu_trace, result.objective_trace)
    ):
        trace_lines.append(f"{epoch},{mu!r},{obj!r}")
    atomic_write_text(stem + ".trace.csv", "\n".join(trace_lines) + "\n")

    preds = aosr_predict(result.model, data.features)
    train_accuracy = float(np.mean(preds == data.labels))
    report = compute_risk_report(
        result.model.open,
        result.encoded,
        result.t_features,
        result.aux_weights,
        result.model.weight_params,
        result.mu_trace[-1],
    )
    payload = {
        "train_accuracy": train_accuracy,
        "closed_train_accuracy": result.closed_accuracy,
        "tau": result.model.weight_params.tau,
        "u_zero_mass": result.model.weight_params.u_zero_mass,
        "final_mu": result.mu_trace[-1],
        **json.loads(report.to_json()),
    }
    atomic_write_text(stem + ".report.json", json.dumps(payload, sort_keys=True) + "\n")


def cmd_eval(values: dict) -> None:
    model = load_aosr_model(values["model"])
    c = model.num_known_classes
    known = load_dataset(values["known"], num_known_classes=c, allow_unknown=True)
    features = [known.features]
    truth = [known.labels]
    if values["unknown"]:
        unknown_rows = load_features(values["unknown"])
        features.append(unknown_rows)
        truth.append(np.full(unknown_rows.shape[0], c, dtype=np.int64))
    all_features = np.vstack(features)
    all_truth = np.concatenate(truth)
    preds = aosr_predict(model, all_features)

    cm = confusion(all_truth, preds, c + 1)
    known_preds = preds[: known.n]
    payload = {
        "accuracy": accuracy(cm),
        "macro_f1": macro_f1(cm),
        "known_accuracy": float(np.mean(known_preds == known.labels)),
        "confusion": cm.counts.tolist(),
    }
    if values["unknown"]:
        unknown_preds = preds[known.n :]
        payload["unknown_rejection_rate"] = float(np.mean(unknown_preds == c))
    atomic_write_text(values["report"], json.dumps(payload, sort_keys=True) + "\n")


def cmd_sweep(values: dict) -> None:
    config = _aosr_config(values)
    result = sweep_error_curve(
        values["sizes"], values["trials"], config, Rng(values["seed"]),
        noise=values["noise"],
    )
    bounds = {n: (lo, hi) for n, lo, hi in result.bounds}
    lines = ["n,trial,error,bound_low,bound_high"]
    for n, trial, err in result.rows:
        lo, hi = bounds[n]
        lines.append(f"{n},{trial},{err!r},{lo!r},{hi!r}")
    atomic_write_text(values["out"], "\n".join(lines) + "\n")

    stem = os.path.splitext(values["out"])[0]
    summary_lines = ["n,mean_error,stderr"]
    for n, mean_error, stderr in result.summary:
        summary_lines.append(f"{n},{mean_error!r},{stderr!r}")
    atomic_write_text(stem + ".summary.csv", "\n".join(summary_lines) + "\n")

    series = [
        PlotSeries(
            "mean error",
            tuple((float(n), mean_err) for n, mean_err, _ in result.summary),
        ),
        PlotSeries(
            "0.5/sqrt(n)", tuple((float(n), lo) for n, lo, _ in result.bounds)
        ),
        PlotSeries(
            "8/sqrt(n)", tuple((float(n), hi) for n, _, hi in result.bounds)
        ),
    ]
    emit_svg_lines(series, "training samples", "mixed-test error",
                   stem + ".svg", log_log=False)


def cmd_verify(values: dict) -> None:
    if values["experiment"] != "theorem3":
        raise InvalidArgument(
            f"unknown --experiment {values['experiment']!r} (expected theorem3)"
        )
    config = RateExperimentConfig(
        beta=values["beta"],
        tau=values["tau"],
        n_grid=tuple(values["sizes"]),
        trials=values["trials"],
        ratio_source=values["ratio_source"],
    )
    rng = Rng(values["seed"])
    task = uniform_gap_task()
    h = mlp_for_rate_experiment(task, rng.derive("hypothesis"))
    result = rate_gap_experiment(h, task, config, rng)

    lines = ["n,trial,gap"]
    for n, trial, gap in result.rows:
        lines.append(f"{n},{trial},{gap!r}")
    lines.append("")
    lines.append("n,median_gap")
    for n, gap in result.median_gaps:
        lines.append(f"{n},{gap!r}")
    atomic_write_text(values["out"], "\n".join(lines) + "\n")

    stem = os.path.splitext(values["out"])[0]
    summary = {
        "slope": result.slope,
        "oracle": result.oracle,
        "median_gaps": {str(n): gap for n, gap in result.median_gaps},
    }
    atomic_write_text(stem + ".summary.json", json.dumps(summary, sort_keys=True) + "\n")

    series = [
        PlotSeries(
            "median gap", tuple((float(n), g) for n, g in result.median_gaps)
        )
    ]
    emit_svg_lines(series, "sample size", "approximation gap",
                   stem + ".svg", log_log=True)


_HANDLERS = {
    "gen": cmd_gen,
    "ratio": cmd_ratio,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def _dispatch(argv) -> int:
    args = _build_parser().parse_args(argv)
    values = _resolve(args.command, args)
    out_path = values.get("report") if args.command == "eval" else values.get("out")
    _HANDLERS[args.command](values)
    _write_effective_config(args.command, values, out_path)
    return 0


def main(argv=None) -> int:
    try:
        return _dispatch(argv)
    except (InvalidArgument, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
