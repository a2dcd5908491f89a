import math


def render_tile(label: str, value: str) -> str:
    """
    Formats one summary tile as a fixed-width line.

    Args:
        label (str): The descriptive text (e.g. "E%").
        value (str): The formatted value (e.g. "0.0123").

    Returns:
        str: The line, label left-aligned in 22 columns.
    """
    return f"{label:<22}{value}"


def render_tiles(tiles: list[tuple[str, str]]) -> None:
    for label, value in tiles:
        print(render_tile(label, value))


def _fmt(value: float, spec: str = ".6g") -> str:
    return "nan" if value is None or (isinstance(value, float) and math.isnan(value)) else format(value, spec)


def record_tiles(record) -> list[tuple[str, str]]:
    """Tiles for one ResultRecord."""
    tiles = [
        ("Instance", f"{record.connectivity} N={record.n_qubits} #{record.instance_id}"),
        ("Strategy", record.strategy),
        ("T", _fmt(record.total_time)),
    ]
    if not record.ok:
        return tiles + [("Status", f"failed ({record.reason})")]
    return tiles + [
        ("E%", _fmt(record.err_pct, ".4f")),
        ("Fidelity", _fmt(record.fidelity, ".4f")),
        ("<H_f>_T", _fmt(record.final_energy, ".8f")),
        ("E0", _fmt(record.ground_energy, ".8f")),
        ("Evaluations", str(record.eval_count)),
        ("Wall time [s]", _fmt(record.wall_time, ".2f")),
    ]


def report_tiles(report) -> list[tuple[str, str]]:
    """Tiles for an AnnealTimeReport."""
    if report.skipped:
        return [("T", _fmt(report.t_f_actual)), ("Prediction", f"skipped ({report.skipped})")]
    return [
        ("T", _fmt(report.t_f_actual)),
        ("Predicted T", _fmt(report.t_f_predicted, ".6f")),
        ("Residual", _fmt(report.residual, ".2e")),
        ("C", _fmt(report.coefficient_C, ".6g")),
        ("i Tr(rho[Hf,Hi])", _fmt(report.denominator, ".6g")),
        ("Boundary term", _fmt(report.boundary_term_tf, ".3g")),
    ]
