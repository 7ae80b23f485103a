"""Command-line entry point: extract, analyze, compare, synth."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from zoneinfo import ZoneInfo

from . import analytics, synthgen
from .displacement import (
    FilterConfig,
    MPH_TO_MPS,
    read_displacements_csv,
    run_extraction,
    write_displacements_csv,
)
from .errors import GeotripsError, ConfigError
from .records import (
    build_timelines,
    dedupe_records,
    parse_records,
    write_records_csv,
    write_rejects_csv,
)
from .zones import load_zones

TZ_ENV_VAR = "GEOTRIPS_TZ"


def _load_flat_config(path: str) -> dict[str, str]:
    """Flat `key = value` config file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _merged(args: argparse.Namespace, filecfg: dict[str, str], key: str, default, cast):
    flag_value = getattr(args, key, None)
    if flag_value is not None:
        return flag_value
    if key in filecfg:
        raw = filecfg[key]
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _default_tz() -> str:
    return os.environ.get(TZ_ENV_VAR, "UTC")


def _infer_format(path: str, declared: str | None) -> str:
    if declared:
        return declared
    return "jsonl" if path.endswith((".jsonl", ".ndjson", ".json")) else "csv"


def _print_report_table(report_dict: dict) -> None:
    width = max(len(k) for k in report_dict)
    for key, value in report_dict.items():
        if key == "average_displacements_per_traveler":
            value = f"{value:.1f}"
        print(f"{key:<{width}}  {value}")


def cmd_extract(args: argparse.Namespace) -> int:
    filecfg = _load_flat_config(args.config) if args.config else {}
    input_path = _merged(args, filecfg, "input", None, str)
    zones_path = _merged(args, filecfg, "zones", None, str)
    out_dir = _merged(args, filecfg, "out", "out", str)
    fmt = _infer_format(input_path or "", _merged(args, filecfg, "format", None, str))
    tz_name = _merged(args, filecfg, "tz", _default_tz(), str)
    legacy = _merged(args, filecfg, "legacy_timestamps", False, bool)
    workers = _merged(args, filecfg, "workers", 1, int)

    if input_path is None:
        raise ConfigError("no input file given (--input or config 'input')")
    if zones_path is None:
        raise ConfigError("no zones file given (--zones or config 'zones')")
    if not os.path.exists(input_path):
        raise ConfigError(f"input file not found: {input_path}")
    if not os.path.exists(zones_path):
        raise ConfigError(f"zones file not found: {zones_path}")

    cfg = FilterConfig(
        min_tweets=_merged(args, filecfg, "min_tweets", 100, int),
        max_speed=_merged(args, filecfg, "max_speed_mph", 100.0, float) * MPH_TO_MPS,
        time_window=_merged(args, filecfg, "time_window_h", 2.0, float) * 3600.0,
        min_displacement_distance=_merged(args, filecfg, "min_displacement_m", 100.0, float),
    )
    tz = ZoneInfo(tz_name)

    os.makedirs(out_dir, exist_ok=True)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    parsed = parse_records(input_path, format=fmt, legacy_tz=tz if legacy else None)
    timings["parse"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    records, duplicates = dedupe_records(parsed.records)
    timelines = build_timelines(records)
    timings["timelines"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    zs = load_zones(zones_path)
    timings["zones"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    displacements, report = run_extraction(timelines, zs, cfg, workers=workers)
    timings["extraction"] = time.perf_counter() - t0

    report.lines_read = parsed.lines_read
    report.rejected_lines = len(parsed.rejects)
    report.parsed_records = len(parsed.records)
    report.duplicates_removed = duplicates
    report.stage_seconds = timings
    report.validate()

    t0 = time.perf_counter()
    with open(os.path.join(out_dir, "displacements.csv"), "w", encoding="utf-8", newline="") as fh:
        write_displacements_csv(displacements, fh)
    with open(os.path.join(out_dir, "rejects.csv"), "w", encoding="utf-8", newline="") as fh:
        write_rejects_csv(parsed.rejects, fh)
    with open(os.path.join(out_dir, "users.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("user_id,tweet_count\n")
        for uid in sorted(timelines):
            fh.write(f"{uid},{len(timelines[uid].records)}\n")
    timings["write"] = time.perf_counter() - t0

    report_dict = report.to_dict()
    # Timings go to a separate file so report.json stays byte-identical
    # across runs and worker counts.
    stage_seconds = report_dict.pop("stage_seconds")
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report_dict, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "timings.json"), "w", encoding="utf-8") as fh:
        json.dump(stage_seconds, fh, indent=2, sort_keys=True)
        fh.write("\n")

    _print_report_table(report_dict)
    return 0


def _profiles_from(displacements, users_path: str) -> list[analytics.UserProfile]:
    import csv

    disp_counts: dict[str, int] = {}
    for d in displacements:
        disp_counts[d.user_id] = disp_counts.get(d.user_id, 0) + 1
    profiles = []
    with open(users_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["user_id", "tweet_count"]:
            raise ConfigError(f"{users_path}: expected header 'user_id,tweet_count'")
        for row in reader:
            if not row:
                continue
            profiles.append(
                analytics.UserProfile(row[0], int(row[1]), disp_counts.get(row[0], 0))
            )
    return profiles


def cmd_analyze(args: argparse.Namespace) -> int:
    filecfg = _load_flat_config(args.config) if args.config else {}
    disp_path = _merged(args, filecfg, "displacements", None, str)
    if disp_path is None:
        raise ConfigError("no displacement CSV given")
    if not os.path.exists(disp_path):
        raise ConfigError(f"displacement file not found: {disp_path}")
    users_path = _merged(
        args, filecfg, "users", os.path.join(os.path.dirname(disp_path), "users.csv"), str
    )
    out_dir = _merged(args, filecfg, "out", "out", str)
    tz = ZoneInfo(_merged(args, filecfg, "tz", _default_tz(), str))
    focal = _merged(args, filecfg, "focal_zone", None, str)
    include_intra = _merged(args, filecfg, "include_intra", False, bool)
    include_external = _merged(args, filecfg, "include_external", False, bool)
    cutoff = _merged(args, filecfg, "group_cutoff", 0.01, float)

    displacements = read_displacements_csv(disp_path)
    os.makedirs(out_dir, exist_ok=True)

    matrix = analytics.aggregate_od(
        displacements, include_intra=include_intra, include_external=include_external
    )
    with open(os.path.join(out_dir, "od_counts.csv"), "w", encoding="utf-8", newline="") as fh:
        analytics.write_od_csv(matrix, fh, kind="counts")
    with open(os.path.join(out_dir, "od_proportions.csv"), "w", encoding="utf-8", newline="") as fh:
        analytics.write_od_csv(matrix, fh, kind="proportions")

    hist_all = analytics.aggregate_time_of_day(
        displacements, tz, include_intra=include_intra
    )
    with open(os.path.join(out_dir, "histogram_all.csv"), "w", encoding="utf-8", newline="") as fh:
        analytics.write_histogram_csv(hist_all, fh)
    if focal:
        for suffix, kwargs in (
            (f"from_{focal}", {"origin": focal}),
            (f"to_{focal}", {"destination": focal}),
        ):
            hist = analytics.aggregate_time_of_day(
                displacements, tz, include_intra=include_intra, **kwargs
            )
            path = os.path.join(out_dir, f"histogram_{suffix}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                analytics.write_histogram_csv(hist, fh)

    if not os.path.exists(users_path):
        raise ConfigError(
            f"users file not found: {users_path} (written by 'extract'; pass --users)"
        )
    profiles = _profiles_from(displacements, users_path)
    partition = analytics.classify_groups(profiles, cutoff=cutoff)
    with open(os.path.join(out_dir, "groups.csv"), "w", encoding="utf-8", newline="") as fh:
        analytics.write_groups_csv(partition, profiles, fh)

    print(f"od zones: {len(matrix.zone_ids)}; displacements in OD: {matrix.total}")
    print(f"histogram displacements: {hist_all.total}")
    print(
        f"high-frequency users: {len(partition.high_group)} "
        f"(share of displacements: {partition.share_of_displacements_high:.3f})"
    )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    labels_a, values_a = analytics.read_series_csv(args.series_a)
    labels_b, values_b = analytics.read_series_csv(args.series_b)
    if args.normalize:
        values_a = analytics.normalize(values_a)
        values_b = analytics.normalize(values_b)
    result = analytics.compare_distributions(values_a, values_b, labels=labels_a)
    payload = {
        "labels": result.labels,
        "l1_distance": result.l1_distance,
        "pearson_r": result.pearson_r,
        "n_bins": len(result.labels),
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _parse_synth_config(path: str) -> synthgen.SynthConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    zones_path = doc.get("zones")
    if not zones_path:
        raise ConfigError("synth config needs a 'zones' GeoJSON path")
    if not os.path.isabs(zones_path):
        zones_path = os.path.join(os.path.dirname(os.path.abspath(path)), zones_path)
    if not os.path.exists(zones_path):
        raise ConfigError(f"zones file not found: {zones_path}")
    zs = load_zones(zones_path)
    od_raw = doc.get("od_weights") or {}
    od_weights = {
        (origin, dest): float(w)
        for origin, dests in od_raw.items()
        for dest, w in dests.items()
    }
    kwargs = {}
    for key in (
        "seed",
        "n_agents",
        "tweet_floor",
        "tweet_scale",
        "tweet_alpha",
        "tweet_cap",
        "trip_fraction",
        "gps_noise_sigma",
        "anomaly_rate",
        "tz",
        "time_window",
        "max_speed",
        "min_tweets",
        "min_displacement_distance",
    ):
        if key in doc:
            kwargs[key] = doc[key]
    for key in ("weekday_schedule", "weekend_schedule"):
        if key in doc:
            kwargs[key] = tuple(float(x) for x in doc[key])
    for key in ("period_start", "period_end"):
        if key in doc:
            raw = doc[key]
            dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
            kwargs[key] = dt
    return synthgen.SynthConfig(zone_map=zs, od_weights=od_weights, **kwargs)


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _parse_synth_config(args.config)
    if args.seed is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    records, trips = synthgen.generate(cfg)
    with open(os.path.join(out_dir, "corpus.csv"), "w", encoding="utf-8", newline="") as fh:
        write_records_csv(records, fh)
    with open(os.path.join(out_dir, "ground_truth.csv"), "w", encoding="utf-8", newline="") as fh:
        synthgen.write_ground_truth_csv(trips, fh)
    print(f"wrote {len(records)} records, {len(trips)} recoverable trips")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geotrips",
        description="Extract displacement and travel-behavior products from geotagged point streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run the full displacement extraction pipeline")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--input", dest="input", help="CSV or JSONL input file")
    p.add_argument("--format", choices=["csv", "jsonl"], dest="format")
    p.add_argument("--zones", dest="zones", help="GeoJSON zone map")
    p.add_argument("--out", dest="out", help="output directory (default ./out)")
    p.add_argument("--min-tweets", dest="min_tweets", type=int)
    p.add_argument("--max-speed-mph", dest="max_speed_mph", type=float)
    p.add_argument("--time-window-h", dest="time_window_h", type=float)
    p.add_argument("--min-displacement-m", dest="min_displacement_m", type=float)
    p.add_argument("--tz", dest="tz", help=f"analysis timezone (default ${TZ_ENV_VAR} or UTC)")
    p.add_argument(
        "--legacy-timestamps",
        dest="legacy_timestamps",
        action="store_const",
        const=True,
        help="also accept 'M/D/YYYY HH:MM' timestamps in the analysis timezone",
    )
    p.add_argument("--workers", dest="workers", type=int)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("analyze", help="aggregate a displacement CSV into OD/histogram/group products")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--displacements", dest="displacements", help="displacement CSV from 'extract'")
    p.add_argument("--users", dest="users", help="users.csv from 'extract'")
    p.add_argument("--out", dest="out")
    p.add_argument("--tz", dest="tz")
    p.add_argument("--focal-zone", dest="focal_zone")
    p.add_argument("--include-intra", dest="include_intra", action="store_const", const=True)
    p.add_argument("--include-external", dest="include_external", action="store_const", const=True)
    p.add_argument("--group-cutoff", dest="group_cutoff", type=float)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="compare two normalized reference series")
    p.add_argument("series_a")
    p.add_argument("series_b")
    p.add_argument("--normalize", action="store_true", help="normalize inputs before comparing")
    p.add_argument("--out", help="write the comparison JSON here instead of stdout")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--config", required=True, help="JSON synth config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", default="synth_out")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GeotripsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
