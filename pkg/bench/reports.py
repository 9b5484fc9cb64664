'''
Report files for one or more evaluated models:

- report.md    accuracy table (overall plus one column per class), latency
               table (mean, P10, P90) and precision / macro F1
- table1.csv   full-precision accuracies, blank where undefined
- table2.csv   full-precision latency statistics
- confusion_<model>.csv / .svg   count grid and heatmap per model
- report.json  everything above in one document
- audit.json   consistency audit findings, when given
'''
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib
import pandas as pd
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from classify.profiles import OUTCOMES

from .metrics import (
    CLASSES, macro_f1, overall_accuracy, per_class_accuracy, per_class_precision,
)

logger = logging.getLogger(__name__)

FORMATS = ('md', 'csv', 'json')


@dataclass(frozen=True)
class ModelReport:
    model_name: str
    matrix: object
    stats: Optional[object] = None
    hardware: Optional[str] = None


def model_slug(name):
    return re.sub(r'[^A-Za-z0-9._-]+', '_', name)


def _percent(value):
    return 'n/a' if value is None else f'{100 * float(value):.2f}%'


def _float(value):
    return None if value is None else float(value)


def accuracy_frame(reports):
    rows = []
    for report in reports:
        accuracy = per_class_accuracy(report.matrix)
        row = {'model': report.model_name, 'overall': float(overall_accuracy(report.matrix))}
        row.update({c: _float(accuracy[c]) for c in CLASSES})
        rows.append(row)
    return pd.DataFrame(rows, columns=['model', 'overall', *CLASSES])


def timing_frame(reports):
    rows = [
        {
            'model': report.model_name,
            'hardware': report.hardware or '',
            'mean_s': report.stats.mean_s,
            'p10_s': report.stats.p10_s,
            'p90_s': report.stats.p90_s,
            'n': report.stats.n,
        }
        for report in reports if report.stats is not None
    ]
    return pd.DataFrame(rows, columns=['model', 'hardware', 'mean_s', 'p10_s', 'p90_s', 'n'])


def confusion_frame(matrix):
    return pd.DataFrame(matrix.counts, index=pd.Index(CLASSES, name='true'), columns=list(OUTCOMES))


def render_markdown(reports):
    header = ['Model', 'Overall'] + [c.capitalize() for c in CLASSES]
    lines = ['# Classifier benchmark', '', '## Accuracy', '']
    lines.append('| ' + ' | '.join(header) + ' |')
    lines.append('|' + '---|' * len(header))
    if reports:
        counts = [str(reports[0].matrix.row_sum(c)) for c in CLASSES]
        lines.append(f'| Image Count | {reports[0].matrix.total} | ' + ' | '.join(counts) + ' |')
    for report in reports:
        accuracy = per_class_accuracy(report.matrix)
        cells = [_percent(overall_accuracy(report.matrix))] + [_percent(accuracy[c]) for c in CLASSES]
        lines.append(f'| {report.model_name} | ' + ' | '.join(cells) + ' |')

    timed = [report for report in reports if report.stats is not None]
    if timed:
        lines += ['', '## Computation time (s)', '', '| Model | Hardware | Mean | P10 | P90 |', '|---|---|---|---|---|']
        for report in timed:
            s = report.stats
            lines.append(
                f'| {report.model_name} | {report.hardware or ""} | '
                f'{s.mean_s:.3f} | {s.p10_s:.3f} | {s.p90_s:.3f} |'
            )

    lines += ['', '## Precision', '', '| Model | ' + ' | '.join(c.capitalize() for c in CLASSES) + ' | Macro F1 |']
    lines.append('|' + '---|' * (len(CLASSES) + 2))
    for report in reports:
        precision = per_class_precision(report.matrix)
        cells = [_percent(precision[c]) for c in CLASSES] + [_percent(macro_f1(report.matrix))]
        lines.append(f'| {report.model_name} | ' + ' | '.join(cells) + ' |')
    return '\n'.join(lines) + '\n'


def render_confusion_svg(matrix, title, path):
    '''
    Heatmap with one labelled square per (true, predicted) pair; each square
    carries the id `cell-<row>-<column>`.
    '''
    counts = matrix.counts
    cmap = matplotlib.colormaps['Blues']
    rows, cols = counts.shape
    fig = Figure(figsize=(1.0 + 0.9 * cols, 1.0 + 0.8 * rows))
    ax = fig.subplots()
    for r in range(rows):
        total = counts[r].sum()
        for c in range(cols):
            share = counts[r, c] / total if total else 0.0
            square = Rectangle((c, r), 1, 1, facecolor=cmap(0.1 + 0.9 * share), edgecolor='white')
            square.set_gid(f'cell-{r}-{c}')
            ax.add_patch(square)
            ax.text(c + 0.5, r + 0.5, str(int(counts[r, c])), ha='center', va='center',
                    color='white' if share > 0.5 else 'black', fontsize=9)
    ax.set_xlim(0, cols)
    ax.set_ylim(rows, 0)
    ax.set_xticks([c + 0.5 for c in range(cols)], labels=list(OUTCOMES), rotation=45, ha='right')
    ax.set_yticks([r + 0.5 for r in range(rows)], labels=list(CLASSES))
    ax.set_xlabel('Predicted')
    ax.set_ylabel('True')
    ax.set_title(title)
    fig.tight_layout()
    with matplotlib.rc_context({'svg.hashsalt': 'sortcell', 'svg.fonttype': 'none'}):
        fig.savefig(path, format='svg', metadata={'Date': None})
    return path


def emit_report(reports, out_dir, formats=FORMATS, audit=None):
    '''
    Write the report files for `reports` (ModelReport list) into `out_dir`.
    Returns the written paths.
    '''
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if 'md' in formats:
        path = out_dir / 'report.md'
        path.write_text(render_markdown(reports))
        written.append(path)
    if 'csv' in formats:
        accuracy_frame(reports).to_csv(out_dir / 'table1.csv', index=False)
        timing_frame(reports).to_csv(out_dir / 'table2.csv', index=False)
        written += [out_dir / 'table1.csv', out_dir / 'table2.csv']
        for report in reports:
            slug = model_slug(report.model_name)
            confusion_frame(report.matrix).to_csv(out_dir / f'confusion_{slug}.csv')
            written.append(out_dir / f'confusion_{slug}.csv')
            written.append(render_confusion_svg(report.matrix, report.model_name, out_dir / f'confusion_{slug}.svg'))
    if 'json' in formats:
        path = out_dir / 'report.json'
        path.write_text(json.dumps(report_document(reports), indent=2, sort_keys=True) + '\n')
        written.append(path)
    if audit is not None:
        path = out_dir / 'audit.json'
        path.write_text(json.dumps(audit, indent=2, sort_keys=True) + '\n')
        written.append(path)
    logger.info('wrote %d report files to %s', len(written), out_dir)
    return written


def report_document(reports):
    models = []
    for report in reports:
        accuracy = per_class_accuracy(report.matrix)
        precision = per_class_precision(report.matrix)
        models.append({
            'model': report.model_name,
            'hardware': report.hardware,
            'overall_accuracy': float(overall_accuracy(report.matrix)),
            'accuracy': {c: _float(accuracy[c]) for c in CLASSES},
            'precision': {c: _float(precision[c]) for c in CLASSES},
            'macro_f1': _float(macro_f1(report.matrix)),
            'confusion': report.matrix.to_rows(),
            'timing': report.stats.to_document() if report.stats is not None else None,
        })
    return {'classes': list(CLASSES), 'outcomes': list(OUTCOMES), 'models': models}
