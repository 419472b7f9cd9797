"""Run-directory summarization: totals, per-individual table, fitness figure."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .engine import ORACLES
from .jsonio import loads


@dataclass
class RunSummary:
    rows: list[dict]
    best_per_generation: list[float]
    oracle_counts: dict[str, int]
    violating: int
    aborted: bool
    warnings: list[str]

    @property
    def executed(self) -> int:
        return len(self.rows)


def _rows_from_report(doc: dict) -> list[dict]:
    rows = []
    for gen in doc.get("generations", []):
        for ind in gen.get("individuals", []):
            row = {
                "generation": gen["generation"],
                "individual_id": ind["individual_id"],
                "parent_id": ind.get("parent_id") or "",
                "fitness": ind["fitness"],
                "agent_failure": ind.get("agent_failure", False),
                "trace_ref": ind.get("trace_ref", ""),
            }
            violated = {v["oracle"] for v in ind.get("verdicts", []) if v["violated"]}
            for oracle in ORACLES:
                row[oracle] = oracle in violated
            rows.append(row)
    return rows


def _rows_from_folders(run_dir: Path, warnings: list[str]) -> list[dict]:
    rows = []
    for gen_dir in sorted(run_dir.glob("gen_*")):
        for ind_dir in sorted(gen_dir.glob("ind_*")):
            missing = [name for name in ("scenario.scn.json", "trace.json",
                                         "verdicts.json", "fitness.json")
                       if not (ind_dir / name).is_file()]
            if missing:
                warnings.append(f"{ind_dir.relative_to(run_dir)}: missing {missing}")
            if "fitness.json" in missing:
                continue
            info = loads((ind_dir / "fitness.json").read_text())
            row = {
                "generation": info.get("generation", -1),
                "individual_id": info.get("individual_id", ind_dir.name),
                "parent_id": info.get("parent_id") or "",
                "fitness": info.get("fitness", float("nan")),
                "agent_failure": info.get("agent_failure", False),
                "trace_ref": info.get("trace_ref", ""),
            }
            violated = set()
            if "verdicts.json" not in missing:
                verdicts = loads((ind_dir / "verdicts.json").read_text())
                violated = {v["oracle"] for v in verdicts if v["violated"]}
            for oracle in ORACLES:
                row[oracle] = oracle in violated
            rows.append(row)
    return rows


def summarize_run(run_dir: str | Path) -> RunSummary:
    """Collect per-individual rows from report.json, or the folders if absent."""
    run_dir = Path(run_dir)
    warnings: list[str] = []
    report_path = run_dir / "report.json"
    best = []
    aborted = False
    if report_path.is_file():
        doc = loads(report_path.read_text())
        rows = _rows_from_report(doc)
        best = [float(b) for b in doc.get("best_fitness_per_generation", [])]
        aborted = bool(doc.get("aborted", False))
    else:
        warnings.append("report.json missing; reconstructing from gen_* folders")
        rows = _rows_from_folders(run_dir, warnings)
        per_gen: dict[int, float] = {}
        for row in rows:
            g = row["generation"]
            per_gen[g] = min(per_gen.get(g, float("inf")), row["fitness"])
        best = [per_gen[g] for g in sorted(per_gen)]
        aborted = True
    if report_path.is_file():
        rows_from_disk = _rows_from_folders(run_dir, warnings)
        if len(rows_from_disk) != len(rows):
            warnings.append(
                f"report lists {len(rows)} individuals but {len(rows_from_disk)} "
                f"are on disk")
    counts = {oracle: sum(1 for r in rows if r[oracle]) for oracle in ORACLES}
    violating = sum(1 for r in rows if any(r[o] for o in ORACLES))
    return RunSummary(rows=rows, best_per_generation=best, oracle_counts=counts,
                      violating=violating, aborted=aborted, warnings=warnings)


def write_individuals_csv(run_dir: str | Path, summary: RunSummary) -> Path:
    path = Path(run_dir) / "individuals.csv"
    fields = ["generation", "individual_id", "parent_id", "fitness",
              "agent_failure", *ORACLES, "trace_ref"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in summary.rows:
            out = dict(row)
            out["fitness"] = f"{row['fitness']:.6f}"
            writer.writerow(out)
    return path


def write_fitness_figure(run_dir: str | Path, summary: RunSummary) -> Path:
    """Best-fitness trajectory with violating generations marked."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(run_dir) / "fitness_trajectory.svg"
    fig, ax = plt.subplots(figsize=(6, 4))
    gens = list(range(len(summary.best_per_generation)))
    ax.plot(gens, summary.best_per_generation, marker="o", color="tab:blue",
            label="best fitness")
    violating_gens = sorted({row["generation"] for row in summary.rows
                             if any(row[o] for o in ORACLES)})
    for g in violating_gens:
        if g < len(summary.best_per_generation):
            ax.plot([g], [summary.best_per_generation[g]], marker="x",
                    markersize=10, color="crimson")
    ax.set_xlabel("generation")
    ax.set_ylabel("min ego-NPC distance (m)")
    ax.set_title("best fitness per generation (x = violation found)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def format_summary(run_dir: str | Path, summary: RunSummary) -> str:
    lines = [f"run directory: {run_dir}"]
    if summary.aborted:
        lines.append("NOTE: run is partial (aborted or no final report)")
    lines.append(f"scenarios executed: {summary.executed}")
    lines.append("violations by oracle: " + "  ".join(
        f"{oracle}={summary.oracle_counts[oracle]}" for oracle in ORACLES))
    lines.append(f"individuals with any violation: {summary.violating}")
    if summary.best_per_generation:
        trajectory = " -> ".join(f"{b:.2f}" for b in summary.best_per_generation)
        lines.append(f"best fitness per generation: {trajectory}")
    for warning in summary.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines)
