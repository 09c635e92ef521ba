"""Command-line front end: config parsing, sweeps, machine-readable reports.

Config files are flat `key=value` pairs separated by whitespace or
newlines, with `#` comments. Dotted keys address nested fields, e.g.
`channel.eta2` or `eve.spy_wavelength_nm`. Every key has a documented
default and unknown keys are rejected, so a typo cannot silently fall back
to a default. Values must not contain whitespace.

Reports are one row per sweep point, either CSV (default) or JSON lines.
A row echoes the complete configuration plus the master seed, so any row
can be reproduced exactly. The CSV schema is versioned via the
`schema_version` column, currently 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

from . import __version__
from .adversary import EveStrategy
from .channel import ChannelConfig, DetectionPolicy, CHECKPOINTS
from .photonics import FilterConfig, Leg
from .protocol import RoundTranscript
from .session import (
    SessionConfig,
    SessionStats,
    aggregate_stats,
    analytic_qber_oracle,
    run_round,
)

SCHEMA_VERSION = 1

ORACLE_SCENARIOS = ("intercept_resend_fixed_basis", "ipa_inband_sample_one")

_LEG_NAMES = {"leg1": Leg.LEG1_A_TO_B, "leg2": Leg.LEG2_B_TO_A}
_LEG_LABELS = {v: k for k, v in _LEG_NAMES.items()}


class ConfigError(ValueError):
    """A config file could not be parsed or validated."""


@dataclass(frozen=True)
class _Key:
    kind: str  # int | float | bool | str | leg | checkpoints
    default: object  # None marks a deferred default (resolved at build time)


# Session configuration keys, in report column order. Filter centers
# default to the channel wavelength when not given explicitly.
_SESSION_KEYS: dict[str, _Key] = {
    "rounds": _Key("int", 1000),
    "n_photons_per_pulse": _Key("int", 1),
    "readout_mode": _Key("str", "majority_vote"),
    "p_check": _Key("float", 0.0),
    "qber_sample_fraction": _Key("float", 0.1),
    "master_seed": _Key("int", 0),
    "channel.eta1": _Key("float", 1.0),
    "channel.eta2": _Key("float", 1.0),
    "channel.eta3": _Key("float", 1.0),
    "channel.wavelength_nm": _Key("float", 1550.0),
    "channel.alice_filter.enabled": _Key("bool", False),
    "channel.alice_filter.center_nm": _Key("float", None),
    "channel.alice_filter.bandwidth_nm": _Key("float", math.inf),
    "channel.bob_filter.enabled": _Key("bool", False),
    "channel.bob_filter.center_nm": _Key("float", None),
    "channel.bob_filter.bandwidth_nm": _Key("float", math.inf),
    "detection.per_round_rule": _Key("str", "exact_match"),
    "detection.expected_count_model": _Key("str", "lossless_exact"),
    "detection.k_sigma": _Key("float", 3.0),
    "detection.aggregate_rule": _Key("str", "none"),
    "detection.alpha": _Key("float", 0.01),
    "detection.checkpoints": _Key("checkpoints", ("bob_leg1",)),
    "eve.kind": _Key("str", "passive"),
    "eve.analyzer_policy": _Key("str", "fixed_angle"),
    "eve.analyzer_angle": _Key("float", 0.0),
    "eve.n_steal": _Key("int", 1),
    "eve.n_spy": _Key("int", 1),
    "eve.spy_wavelength_nm": _Key("float", 1550.5),
    "eve.spy_polarization": _Key("float", 0.0),
    "eve.injection_leg": _Key("leg", Leg.LEG2_B_TO_A),
    "eve.readout": _Key("str", "ideal_angle_oracle"),
    "eve.analyzer_grid_size": _Key("int", 64),
    "eve.separation_resolution_nm": _Key("float", 0.05),
}

_EXPERIMENT_KEYS: dict[str, _Key] = {
    "sweep.param": _Key("str", None),
    "sweep.values": _Key("str", None),
    "output.format": _Key("str", "csv"),
    "output.path": _Key("str", None),
    "emit_transcripts": _Key("bool", False),
}

# Any scalar session key can be swept; the checkpoint list cannot.
SWEEPABLE_KEYS = tuple(k for k, v in _SESSION_KEYS.items() if v.kind != "checkpoints")

_METRIC_FIELDS = (
    "key_rounds",
    "check_rounds",
    "erasures",
    "sampled_rounds",
    "final_key_length",
    "qber",
    "full_qber",
    "eve_information",
    "alarms",
    "aggregate_test_p_value",
    "aggregate_alarm",
)


@dataclass(frozen=True)
class ExperimentSpec:
    """A parsed experiment: base config, optional sweep, output routing."""

    base: SessionConfig
    sweep_param: str | None = None
    sweep_values: tuple | None = None
    output_format: str = "csv"
    output_path: str | None = None
    emit_transcripts: bool = False


def _parse_scalar(key: str, kind: str, text: str):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            value = float(text)
            if math.isnan(value):
                raise ValueError("nan is not allowed")
            return value
        if kind == "bool":
            if text == "true":
                return True
            if text == "false":
                return False
            raise ValueError("expected true or false")
        if kind == "leg":
            if text not in _LEG_NAMES:
                raise ValueError("expected leg1 or leg2")
            return _LEG_NAMES[text]
        if kind == "checkpoints":
            parts = tuple(text.split(","))
            for part in parts:
                if part not in CHECKPOINTS:
                    raise ValueError(f"unknown checkpoint {part!r}")
            return parts
        return text
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key}: {text!r} ({exc})") from None


def _render_scalar(kind: str, value) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "leg":
        return _LEG_LABELS[value]
    if kind == "checkpoints":
        return ",".join(value)
    if kind == "float":
        return repr(float(value))
    return str(value)


def _tokenize(text: str) -> list[tuple[int, str, str]]:
    """Split config text into (line_number, key, value) triples."""
    triples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        for token in body.split():
            key, sep, value = token.partition("=")
            if not sep or not key:
                raise ConfigError(f"line {lineno}: expected key=value, got {token!r}")
            if not value:
                raise ConfigError(f"line {lineno}: empty value for key {key!r}")
            triples.append((lineno, key, value))
    return triples


def build_session_config(values: dict) -> SessionConfig:
    """Assemble a SessionConfig from a complete flat value dict."""
    wavelength = values["channel.wavelength_nm"]

    def filter_for(prefix: str) -> FilterConfig:
        center = values[f"{prefix}.center_nm"]
        try:
            return FilterConfig(
                center_nm=wavelength if center is None else center,
                bandwidth_nm=values[f"{prefix}.bandwidth_nm"],
                enabled=values[f"{prefix}.enabled"],
            )
        except ValueError as exc:
            raise ConfigError(f"{prefix}: {exc}") from None

    channel = ChannelConfig(
        eta1=values["channel.eta1"],
        eta2=values["channel.eta2"],
        eta3=values["channel.eta3"],
        legitimate_wavelength_nm=wavelength,
        alice_input_filter=filter_for("channel.alice_filter"),
        bob_input_filter=filter_for("channel.bob_filter"),
    )
    detection = DetectionPolicy(
        per_round_rule=values["detection.per_round_rule"],
        expected_count_model=values["detection.expected_count_model"],
        k_sigma=values["detection.k_sigma"],
        aggregate_rule=values["detection.aggregate_rule"],
        alpha=values["detection.alpha"],
        checkpoints=values["detection.checkpoints"],
    )
    eve = EveStrategy(
        kind=values["eve.kind"],
        analyzer_policy=values["eve.analyzer_policy"],
        analyzer_angle=values["eve.analyzer_angle"],
        n_steal=values["eve.n_steal"],
        n_spy=values["eve.n_spy"],
        spy_wavelength_nm=values["eve.spy_wavelength_nm"],
        spy_polarization=values["eve.spy_polarization"],
        injection_leg=values["eve.injection_leg"],
        readout=values["eve.readout"],
        analyzer_grid_size=values["eve.analyzer_grid_size"],
        separation_resolution_nm=values["eve.separation_resolution_nm"],
    )
    return SessionConfig(
        rounds=values["rounds"],
        n_photons_per_pulse=values["n_photons_per_pulse"],
        readout_mode=values["readout_mode"],
        p_check=values["p_check"],
        qber_sample_fraction=values["qber_sample_fraction"],
        channel=channel,
        detection=detection,
        eve=eve,
        master_seed=values["master_seed"],
    )


def flatten_session_config(config: SessionConfig) -> dict:
    """Flat value dict for a SessionConfig; inverse of build_session_config."""
    ch = config.channel
    det = config.detection
    eve = config.eve
    return {
        "rounds": config.rounds,
        "n_photons_per_pulse": config.n_photons_per_pulse,
        "readout_mode": config.readout_mode,
        "p_check": config.p_check,
        "qber_sample_fraction": config.qber_sample_fraction,
        "master_seed": config.master_seed,
        "channel.eta1": ch.eta1,
        "channel.eta2": ch.eta2,
        "channel.eta3": ch.eta3,
        "channel.wavelength_nm": ch.legitimate_wavelength_nm,
        "channel.alice_filter.enabled": ch.alice_input_filter.enabled,
        "channel.alice_filter.center_nm": ch.alice_input_filter.center_nm,
        "channel.alice_filter.bandwidth_nm": ch.alice_input_filter.bandwidth_nm,
        "channel.bob_filter.enabled": ch.bob_input_filter.enabled,
        "channel.bob_filter.center_nm": ch.bob_input_filter.center_nm,
        "channel.bob_filter.bandwidth_nm": ch.bob_input_filter.bandwidth_nm,
        "detection.per_round_rule": det.per_round_rule,
        "detection.expected_count_model": det.expected_count_model,
        "detection.k_sigma": det.k_sigma,
        "detection.aggregate_rule": det.aggregate_rule,
        "detection.alpha": det.alpha,
        "detection.checkpoints": det.checkpoints,
        "eve.kind": eve.kind,
        "eve.analyzer_policy": eve.analyzer_policy,
        "eve.analyzer_angle": eve.analyzer_angle,
        "eve.n_steal": eve.n_steal,
        "eve.n_spy": eve.n_spy,
        "eve.spy_wavelength_nm": eve.spy_wavelength_nm,
        "eve.spy_polarization": eve.spy_polarization,
        "eve.injection_leg": eve.injection_leg,
        "eve.readout": eve.readout,
        "eve.analyzer_grid_size": eve.analyzer_grid_size,
        "eve.separation_resolution_nm": eve.separation_resolution_nm,
    }


def parse_config(text: str) -> ExperimentSpec:
    """Parse config text into a validated ExperimentSpec.

    Raises ConfigError with a line number for syntax problems and with the
    offending key for domain problems.
    """
    values = {key: spec.default for key, spec in _SESSION_KEYS.items()}
    extras = {key: spec.default for key, spec in _EXPERIMENT_KEYS.items()}
    seen: set[str] = set()
    sweep_values_text: str | None = None

    for lineno, key, value_text in _tokenize(text):
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _SESSION_KEYS:
            values[key] = _parse_scalar(key, _SESSION_KEYS[key].kind, value_text)
        elif key in _EXPERIMENT_KEYS:
            if key == "sweep.values":
                sweep_values_text = value_text
            else:
                extras[key] = _parse_scalar(key, _EXPERIMENT_KEYS[key].kind, value_text)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    try:
        base = build_session_config(values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    sweep_param = extras["sweep.param"]
    sweep_values: tuple | None = None
    if (sweep_param is None) != (sweep_values_text is None):
        raise ConfigError("sweep.param and sweep.values must be given together")
    if sweep_param is not None:
        if sweep_param not in SWEEPABLE_KEYS:
            raise ConfigError(
                f"sweep.param {sweep_param!r} does not name a sweepable scalar field"
            )
        kind = _SESSION_KEYS[sweep_param].kind
        sweep_values = tuple(
            _parse_scalar("sweep.values", kind, part)
            for part in sweep_values_text.split(",")
        )
        if not sweep_values:
            raise ConfigError("sweep.values must list at least one value")

    output_format = extras["output.format"]
    if output_format not in ("csv", "jsonl"):
        raise ConfigError(f"output.format must be csv or jsonl, got {output_format!r}")

    spec = ExperimentSpec(
        base=base,
        sweep_param=sweep_param,
        sweep_values=sweep_values,
        output_format=output_format,
        output_path=extras["output.path"],
        emit_transcripts=extras["emit_transcripts"],
    )
    # Validate every sweep point now so errors surface at parse time.
    expand_sweep(spec)
    return spec


def render_config(spec: ExperimentSpec) -> str:
    """Render a spec as config text; parse_config(render_config(s)) == s."""
    lines = []
    flat = flatten_session_config(spec.base)
    for key, meta in _SESSION_KEYS.items():
        value = flat[key]
        if value is None:
            continue
        lines.append(f"{key}={_render_scalar(meta.kind, value)}")
    if spec.sweep_param is not None:
        kind = _SESSION_KEYS[spec.sweep_param].kind
        rendered = ",".join(_render_scalar(kind, v) for v in spec.sweep_values)
        lines.append(f"sweep.param={spec.sweep_param}")
        lines.append(f"sweep.values={rendered}")
    lines.append(f"output.format={spec.output_format}")
    if spec.output_path is not None:
        lines.append(f"output.path={spec.output_path}")
    lines.append(f"emit_transcripts={_render_scalar('bool', spec.emit_transcripts)}")
    return "\n".join(lines) + "\n"


def expand_sweep(spec: ExperimentSpec) -> list[SessionConfig]:
    """The session configs an experiment will run, in sweep order."""
    if spec.sweep_param is None:
        return [spec.base]
    configs = []
    flat = flatten_session_config(spec.base)
    for value in spec.sweep_values:
        point = dict(flat)
        point[spec.sweep_param] = value
        try:
            configs.append(build_session_config(point))
        except ValueError as exc:
            raise ConfigError(f"sweep value {value!r} for {spec.sweep_param}: {exc}") from None
    return configs


def run_experiment(
    spec: ExperimentSpec,
) -> list[tuple[SessionConfig, SessionStats, list[RoundTranscript] | None]]:
    """Run every sweep point; returns (config, stats, transcripts?) per point."""
    results = []
    for config in expand_sweep(spec):
        transcripts = [run_round(config, i) for i in range(config.rounds)]
        stats = aggregate_stats(config, transcripts)
        results.append((config, stats, transcripts if spec.emit_transcripts else None))
    return results


def _metric_values(stats: SessionStats) -> dict:
    return {
        "key_rounds": stats.key_rounds,
        "check_rounds": stats.check_rounds,
        "erasures": stats.erasures,
        "sampled_rounds": stats.sampled_rounds,
        "final_key_length": stats.final_key_length,
        "qber": stats.qber,
        "full_qber": stats.full_qber,
        "eve_information": stats.eve_information,
        "alarms": stats.alarms,
        "aggregate_test_p_value": stats.aggregate_p_value,
        "aggregate_alarm": stats.aggregate_alarm,
    }


def _config_echo(config: SessionConfig) -> dict[str, str]:
    flat = flatten_session_config(config)
    return {key: _render_scalar(meta.kind, flat[key]) for key, meta in _SESSION_KEYS.items()}


def write_csv(results, stream) -> None:
    columns = ["schema_version", *_SESSION_KEYS.keys(), *_METRIC_FIELDS]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for config, stats, _ in results:
        echo = _config_echo(config)
        metrics = _metric_values(stats)
        row = [str(SCHEMA_VERSION)]
        row.extend(echo[key] for key in _SESSION_KEYS)
        for field in _METRIC_FIELDS:
            value = metrics[field]
            if value is None:
                row.append("")
            elif isinstance(value, bool):
                row.append("true" if value else "false")
            elif isinstance(value, float):
                row.append(repr(value))
            else:
                row.append(str(value))
        writer.writerow(row)


def write_jsonl(results, stream) -> None:
    for config, stats, _ in results:
        record = {
            "schema_version": SCHEMA_VERSION,
            "config": _config_echo(config),
            "metrics": _metric_values(stats),
        }
        stream.write(json.dumps(record, sort_keys=False) + "\n")


def write_transcripts(results, stream) -> None:
    for index, (_, _, transcripts) in enumerate(results):
        for t in transcripts or ():
            record = {
                "sweep_index": index,
                "round_id": t.round_id,
                "is_check_round": t.is_check_round,
                "alice_bit": t.alice_bit,
                "bob_outcome": t.bob_outcome,
                "bob_leg1_count": t.bob_leg1_count,
                "alice_leg2_count": t.alice_leg2_count,
                "bob_leg3_count": t.bob_leg3_count,
                "eve_guess": t.eve_guess,
            }
            stream.write(json.dumps(record) + "\n")


def _cmd_run(args) -> int:
    with open(args.config_file, "r", encoding="utf-8") as fh:
        spec = parse_config(fh.read())
    if args.seed is not None:
        flat = flatten_session_config(spec.base)
        flat["master_seed"] = args.seed
        spec = ExperimentSpec(
            base=build_session_config(flat),
            sweep_param=spec.sweep_param,
            sweep_values=spec.sweep_values,
            output_format=spec.output_format,
            output_path=spec.output_path,
            emit_transcripts=spec.emit_transcripts,
        )
    output_format = args.format or spec.output_format
    output_path = args.output or spec.output_path
    if spec.emit_transcripts and output_path is None:
        raise ConfigError("emit_transcripts requires an output path")

    results = run_experiment(spec)
    writer = write_csv if output_format == "csv" else write_jsonl
    if output_path is None:
        writer(results, sys.stdout)
    else:
        with open(output_path, "w", encoding="utf-8", newline="") as fh:
            writer(results, fh)
        if spec.emit_transcripts:
            with open(
                output_path + ".transcripts.jsonl", "w", encoding="utf-8", newline=""
            ) as fh:
                write_transcripts(results, fh)
    return 0


def _cmd_oracle(args) -> int:
    if args.scenario == "ipa_inband_sample_one":
        value = analytic_qber_oracle(args.scenario, f_spy=args.f_spy)
    else:
        value = analytic_qber_oracle(args.scenario)
    print(repr(value))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kkkp-sim",
        description="Monte Carlo simulator of the KKKP blind-polarization QKD "
        "protocol, the invisible photon attack, and its countermeasures.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment described by a config file")
    run_p.add_argument("config_file", help="path to a key=value config file")
    run_p.add_argument("--seed", type=int, default=None, help="override master_seed")
    run_p.add_argument("--output", default=None, help="report path (default: stdout)")
    run_p.add_argument("--format", choices=("csv", "jsonl"), default=None)

    oracle_p = sub.add_parser("oracle", help="print a closed-form QBER oracle value")
    oracle_p.add_argument("scenario", choices=ORACLE_SCENARIOS)
    oracle_p.add_argument(
        "--f-spy", type=float, default=None, help="spy fraction for ipa_inband_sample_one"
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_oracle(args)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
