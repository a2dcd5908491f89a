import json

import pandas as pd

from modules.evolve import Trajectory
from modules.hamiltonian import ProblemInstance
from modules.harness import ResultRecord


def load_instances(file_path: str) -> list[ProblemInstance]:
    """
    Loads an instance file written by the `gen` command.

    Args:
        file_path (str): JSON file holding a list of instances.

    Returns:
        list[ProblemInstance]: Instances ordered by instance id.
    """
    with open(file_path) as f:
        payload = json.load(f)
    instances = [ProblemInstance.from_json(item) for item in payload]
    return sorted(instances, key=lambda inst: inst.instance_id)


def load_trajectory(file_path: str) -> Trajectory:
    return Trajectory.load(file_path)


def load_records(file_path: str) -> list[ResultRecord]:
    """Loads ResultRecords from a JSON records file, sorted by (N, T, strategy, instance id)."""
    with open(file_path) as f:
        payload = json.load(f)
    return sorted((ResultRecord.from_dict(item) for item in payload), key=lambda r: r.key)


def load_records_frame(file_path: str) -> pd.DataFrame:
    """
    Loads a records CSV for analysis.

    This function performs the following steps:
    - Reads the CSV, skipping '#' header comments.
    - Sorts rows by N, T, strategy and instance id.
    - Drops repeated runs of the same key, keeping the last one written.

    Args:
        file_path (str): Path to a records CSV.

    Returns:
        pd.DataFrame: One row per (N, T, strategy, instance).
    """
    df = pd.read_csv(file_path, comment="#")
    keys = ["n_qubits", "total_time", "strategy", "instance_id"]
    df_sorted = df.sort_values(by=keys, kind="stable")
    return df_sorted.drop_duplicates(subset=keys, keep="last").reset_index(drop=True)
