import hashlib
import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd
import scipy

import modules
from modules.harness import DOMINANCE_TARGET, ExperimentConfig, ResultRecord, record_conventions, time_to_target
from modules.spectrum import GapProfile, gap_summary

logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "instance_id", "seed", "connectivity", "n_qubits", "strategy", "total_time",
    "err_pct", "fidelity", "final_energy", "ground_energy", "best_params",
    "eval_count", "wall_time", "status", "reason",
]


def write_csv(frame: pd.DataFrame, file_path, comments: Optional[dict] = None) -> Path:
    """
    Writes plot-ready CSV: header row, '.' decimals, LF line endings.

    Args:
        frame (pd.DataFrame): Data in its final column order.
        file_path (str | Path): Destination.
        comments (dict, optional): Written first as '# key=value' lines.

    Returns:
        Path: The written file.
    """
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        for key, value in (comments or {}).items():
            f.write(f"# {key}={json.dumps(value)}\n")
        frame.to_csv(f, index=False, lineterminator="\n")
    return path


def write_json(payload, file_path) -> Path:
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=False)
        f.write("\n")
    return path


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical JSON of the config; the worker count is not part of the content."""
    content = config.to_dict()
    content.pop("workers", None)
    canonical = json.dumps(content, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_manifest(
    config: ExperimentConfig,
    output_dir,
    seeds: Iterable[int],
    files: Iterable[Path],
    diagnostics: Optional[dict] = None,
) -> Path:
    manifest = {
        "config_hash": config_hash(config),
        "config": config.to_dict(),
        "seeds": sorted(set(int(s) for s in seeds)),
        "version": modules.__version__,
        "libraries": {"numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__},
        "conventions": record_conventions(),
        "files": [Path(p).name for p in files],
    }
    if diagnostics:
        manifest["diagnostics"] = diagnostics
    return write_json(manifest, Path(output_dir) / "manifest.json")


def records_frame(records: list[ResultRecord]) -> pd.DataFrame:
    rows = []
    for record in records:
        row = {k: v for k, v in asdict(record).items() if k in RECORD_COLUMNS}
        row["best_params"] = json.dumps(row["best_params"])
        rows.append(row)
    return pd.DataFrame(rows, columns=RECORD_COLUMNS)


def emit_records(records: list[ResultRecord], aggregates: pd.DataFrame, config: ExperimentConfig, output_dir=None) -> list[Path]:
    """
    Writes a sweep: records.json, records.csv, aggregates.csv, time_to_target.csv and manifest.json.

    Records are sorted by (N, T, strategy, instance id) before writing.
    """
    out = Path(output_dir or config.output_dir)
    records = sorted(records, key=lambda r: r.key)
    files = [
        write_json([r.as_dict() for r in records], out / "records.json"),
        write_csv(records_frame(records), out / "records.csv"),
        write_csv(aggregates, out / "aggregates.csv"),
        write_csv(time_to_target(aggregates), out / "time_to_target.csv"),
    ]
    files.append(write_manifest(config, out, [r.seed for r in records], files))
    logger.info("Wrote %d files to %s", len(files), out)
    return files


def emit_profiles(profiles: dict[str, GapProfile], config: ExperimentConfig, output_dir=None) -> list[Path]:
    """
    Writes one gap_<strategy>.csv per profile, gap_summary.csv and manifest.json.

    Each profile file carries its instance count and seed list as header comments;
    dominance shares over the ramp go to gap_summary.csv and the manifest diagnostics.
    """
    out = Path(output_dir or config.output_dir)
    files = []
    for strategy, profile in profiles.items():
        frame = pd.DataFrame({"s": profile.grid, "gap": profile.gaps})
        comments = {"strategy": strategy, "instances": profile.instance_count, "seeds": [int(s) for s in profile.seeds]}
        files.append(write_csv(frame, out / f"gap_{strategy}.csv", comments))
    summary = pd.DataFrame([gap_summary(p) for p in profiles.values()], columns=["strategy", "min_gap", "s_at_min", "monotone", "dominance"])
    files.append(write_csv(summary, out / "gap_summary.csv"))
    seeds = [s for p in profiles.values() for s in p.seeds]
    dominance = {s: p.dominance for s, p in profiles.items() if p.dominance is not None}
    diagnostics = {"dominance_over_ramp": dominance, "dominance_target": DOMINANCE_TARGET} if dominance else None
    files.append(write_manifest(config, out, seeds, files, diagnostics))
    return files


def emit(result, config: ExperimentConfig, output_dir=None) -> list[Path]:
    """Writes a sweep result (records, aggregates) or a dict of gap profiles."""
    if isinstance(result, dict):
        return emit_profiles(result, config, output_dir)
    records, aggregates = result
    return emit_records(records, aggregates, config, output_dir)
