"""Report rendering: results JSON, text tables, per-run trace CSVs, figures."""

import csv
import json
import os

from ..errors import StorageError

_METHOD_NAMES = {
    "none": "None",
    "random": "Random",
    "similarity": "Similarity",
    "sliding_window": "Sliding window",
    "hard_mining": "Hard mining",
}
_SCENARIO_TITLES = {
    "single": "Single-domain test scenarios",
    "multi": "Multi-domain test scenarios",
}


def _split_label(label: str):
    pre, _, rest = label.partition("+")
    mission = rest.split("+")[0]
    mission_name = _METHOD_NAMES.get(mission, mission)
    if mission == "similarity":
        mission_name = "Similarity-based"
    return _METHOD_NAMES.get(pre, pre), mission_name


def render_tables(results: dict) -> str:
    """Text tables mirroring the per-policy result layout, in percent points."""
    lines = []
    for scenario, block in sorted(results["scenarios"].items()):
        title = _SCENARIO_TITLES.get(scenario, scenario)
        lines.append(title)
        lines.append("=" * len(title))
        header = (
            f"{'Pretrain mining':<16}| {'Mission mining':<16}| "
            f"{'Initial mAP':>11} | {'mAP increase':>12} | {'mAP % increase':>14}"
        )
        lines.append(header)
        lines.append("-" * len(header))
        for label in results["policy_order"]:
            cell = block["cells"].get(label, {})
            pre_name, mis_name = _split_label(label)
            if "mean_initial_map" in cell:
                initial = 100.0 * cell["mean_initial_map"]
                increase = 100.0 * cell["mean_map_increase"]
                pct = cell["pct_increase"]
                lines.append(
                    f"{pre_name:<16}| {mis_name:<16}| {initial:>11.1f} | "
                    f"{increase:>+12.2f} | {pct:>+13.2f}%"
                )
            else:
                lines.append(f"{pre_name:<16}| {mis_name:<16}| {'n/a':>11} | "
                             f"{'n/a':>12} | {'n/a':>14}")
        n_err = sum(len(c.get("errors", [])) for c in block["cells"].values())
        if n_err:
            lines.append(f"({n_err} failed runs excluded)")
        lines.append("")
    return "\n".join(lines) + "\n"


def write_trace_csv(report: dict, path):
    """Per-frame series of one run: loss, rolling mAP, detections, model version."""
    frames = report.get("frames", [])
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["step", "domain_id", "frame_index", "loss", "rolling_map",
                 "n_detections", "model_version"]
            )
            for step in range(len(report.get("loss_curve", []))):
                domain_id, frame_index = frames[step]
                writer.writerow(
                    [
                        step, domain_id, frame_index,
                        f"{report['loss_curve'][step]:.9f}",
                        f"{report['rolling_map'][step]:.9f}",
                        report["detection_counts"][step],
                        report["model_versions"][step],
                    ]
                )
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def write_report(results: dict, reports: dict, out_dir, timings: dict | None = None):
    """Write sweep-results.json, tables.txt, and per-run traces under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "sweep-results.json")
    with open(results_path, "w", encoding="utf-8") as fh:
        json.dump(results, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "tables.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_tables(results))
    traces_dir = os.path.join(out_dir, "traces")
    os.makedirs(traces_dir, exist_ok=True)
    for run_id in sorted(reports):
        report = reports[run_id]
        if report.get("error") and "loss_curve" not in report:
            continue
        write_trace_csv(report, os.path.join(traces_dir, f"{run_id}.csv"))
        with open(
            os.path.join(traces_dir, f"{run_id}.selections.jsonl"), "w", encoding="utf-8"
        ) as fh:
            for trace in report.get("selection_traces", []):
                fh.write(json.dumps(trace, sort_keys=True) + "\n")
    if timings is not None:
        with open(os.path.join(out_dir, "timings.json"), "w", encoding="utf-8") as fh:
            json.dump(timings, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return results_path


def write_figures(results: dict, out_dir, traces_dir=None):
    """Render summary figures next to the delimited output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    written = []

    for scenario, block in sorted(results["scenarios"].items()):
        labels, increases = [], []
        for label in results["policy_order"]:
            cell = block["cells"].get(label, {})
            if "mean_map_increase" in cell:
                pre, mis = _split_label(label)
                labels.append(f"{pre}\n{mis}")
                increases.append(100.0 * cell["mean_map_increase"])
        if not labels:
            continue
        fig, ax = plt.subplots(figsize=(10, 4.5))
        colors = ["#2a6f97" if v >= 0 else "#bc4749" for v in increases]
        ax.bar(range(len(labels)), increases, color=colors)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, fontsize=8)
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_ylabel("mean mAP increase (points)")
        ax.set_title(_SCENARIO_TITLES.get(scenario, scenario))
        fig.tight_layout()
        path = os.path.join(fig_dir, f"increase_by_policy_{scenario}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

        if traces_dir and os.path.isdir(traces_dir):
            fig, axes = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
            missions = block.get("missions", [])
            first_mission = missions[0]["mission_id"] if missions else None
            for label in results["policy_order"]:
                cell = block["cells"].get(label, {})
                run = next(
                    (r for r in cell.get("runs", []) if r["mission_id"] == first_mission),
                    None,
                )
                if run is None:
                    continue
                csv_path = os.path.join(traces_dir, f"{run['run_id']}.csv")
                if not os.path.exists(csv_path):
                    continue
                steps, losses, rmaps = [], [], []
                with open(csv_path, "r", encoding="utf-8") as fh:
                    for row in csv.DictReader(fh):
                        steps.append(int(row["step"]))
                        losses.append(float(row["loss"]))
                        rmaps.append(float(row["rolling_map"]))
                axes[0].plot(steps, losses, label=label, linewidth=0.9)
                axes[1].plot(steps, rmaps, linewidth=0.9)
            axes[0].set_ylabel("frame loss")
            axes[1].set_ylabel("rolling mAP")
            axes[1].set_xlabel("mission frame")
            axes[0].legend(fontsize=6, ncol=3)
            axes[0].set_title(f"{_SCENARIO_TITLES.get(scenario, scenario)}: first mission traces")
            fig.tight_layout()
            path = os.path.join(fig_dir, f"traces_{scenario}.png")
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    return written
