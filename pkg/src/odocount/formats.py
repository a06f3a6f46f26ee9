"""On-disk text formats: annotation CSVs, count CSVs, result plots.

Annotation rows are ``onset_seconds,duration_seconds[,confidence]``; floats
are printed with repr so a round trip through the parser is exact.
"""

import numpy as np

from .odo import Event, Transcript


def write_annotation_csv(path, transcript, confidence=True):
    with open(path, "w") as fh:
        if confidence:
            fh.write("onset_seconds,duration_seconds,confidence\n")
            for ev in transcript.events:
                fh.write(f"{ev.onset_seconds!r},{ev.duration_seconds!r},{ev.confidence!r}\n")
        else:
            fh.write("onset_seconds,duration_seconds\n")
            for ev in transcript.events:
                fh.write(f"{ev.onset_seconds!r},{ev.duration_seconds!r}\n")


def read_annotation_csv(path):
    events = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["onset_seconds", "duration_seconds"]:
            raise ValueError(f"{path}: unrecognized annotation header {header}")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected at least 2 columns")
            conf = float(parts[2]) if len(parts) > 2 else 1.0
            events.append(Event(onset_seconds=float(parts[0]),
                                duration_seconds=float(parts[1]),
                                confidence=conf))
    return Transcript.from_events(events)


def write_counts_csv(path, spans, counts):
    with open(path, "w") as fh:
        fh.write("window_start_seconds,window_end_seconds,estimated_count\n")
        for (a, b), c in zip(spans, counts):
            fh.write(f"{a!r},{b!r},{float(c)!r}\n")


def plot_report(report, out_dir, conditions=None, systems=None):
    """Grouped-bar charts of mean F-measure and RMS count error with fold-range
    error bars; the RMS axis is inverted so up means better."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .evaluation import CONDITIONS

    if conditions is None:
        conditions = [c for c in CONDITIONS if any(r.condition == c for r in report.rows)]
    if systems is None:
        systems = sorted({r.system for r in report.rows})

    paths = []
    for metric, fname, invert in (("f_measure", "transcription_f.png", False),
                                  ("rms_count_error", "count_rms.png", True)):
        plotted = [s for s in systems if any(r.metric == metric and r.system == s
                                             for r in report.rows)]
        if not plotted:
            continue
        fig, ax = plt.subplots(figsize=(8, 4))
        width = 0.8 / len(plotted)
        x = np.arange(len(conditions))
        for i, sys_name in enumerate(plotted):
            means, errs = [], [[], []]
            for cond in conditions:
                vals = report.values(sys_name, cond, metric)
                m = np.mean(vals) if vals else np.nan
                lo, hi = report.fold_range(sys_name, cond, metric)
                means.append(m)
                errs[0].append(m - lo if vals else 0)
                errs[1].append(hi - m if vals else 0)
            ax.bar(x + i * width, means, width, yerr=errs, capsize=3, label=sys_name)
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels(conditions)
        ax.set_ylabel(metric)
        if invert:
            ax.invert_yaxis()
        ax.legend(fontsize=8)
        fig.tight_layout()
        out = f"{out_dir}/{fname}"
        fig.savefig(out, dpi=120)
        plt.close(fig)
        paths.append(out)
    return paths
