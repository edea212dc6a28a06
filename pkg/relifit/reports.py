"""
Rendering of fit and comparison results.

Markdown tables follow the per-release layout "Sr. No. | Model | Estimated
Parameter values | SSE | MSE" with a win-rate summary after the last
release. CSV output goes through pandas; JSON output is key-sorted and
carries no timestamps, so identical inputs give identical bytes.
"""

import glob
import json
import logging
import os

import jsonschema
import pandas as pd

from relifit.exceptions import SchemaError
from relifit.fitter import SCHEMA_TAG, FitResult
from relifit.model import ModelKind

logger = logging.getLogger(__name__)

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'schemas')
SCHEMA_FILES = {
    'fit': 'fit_result.schema.json',
    'compare': 'compare_report.schema.json',
}
TABLE_HEADER = '| Sr. No. | Model | Estimated Parameter values | SSE | MSE |'
TABLE_RULE = '|---|---|---|---|---|'
CSV_COLUMNS = ['release_id', 'release_kind', 'rank', 'model', 'status', 'phi', 'N', 'N_rounded',
               'gamma', 'mu', 'llf', 'sse', 'mse', 'error']


def fmt_number(value):
    """Six significant digits, the precision shared by every text format."""
    if value is None:
        return '-'
    return f"{value:.6g}"


def parameter_text(result):
    """'φ=1.2345E-03, N=52, γ=1.0022' style cell."""
    if not result.ok:
        return f"fit failed ({result.error_code}: {result.error})"
    parts = [f"φ={result.phi:.4E}", f"N={result.n_rounded}"]
    if result.gamma is not None:
        parts.append(f"γ={result.gamma:.4f}")
    return ', '.join(parts)


def release_table(comparison):
    """Markdown block for one release."""
    title = f"### Release {comparison.release_id}"
    if comparison.release_kind:
        title += f" ({comparison.release_kind})"
    lines = [title, '', TABLE_HEADER, TABLE_RULE]
    for rank, result in comparison.ranking:
        serial = str(rank) if rank is not None else '-'
        lines.append(f"| {serial} | {result.kind.label} | {parameter_text(result)} | "
                     f"{fmt_number(result.sse)} | {fmt_number(result.mse)} |")
    return '\n'.join(lines)


def win_rate_line(metric, rates, scope=None):
    """'Win rate by SSE: JM 10/12 (83.33%), SW 2/12 (16.67%)'."""
    label = f"Win rate by {metric.upper()}"
    if scope:
        label += f" ({scope} releases)"
    cells = [f"{ModelKind.parse(w.model).label} {w.wins}/{w.releases} ({w.percent_text})" for w in rates]
    return f"{label}: " + ', '.join(cells)


def render_compare_markdown(report):
    """
    Markdown rendering of a comparison report.

    Args:
        report: CompareReport

    Returns:
        One table per release followed by the win-rate lines, overall and per release kind
    """
    blocks = [release_table(c) for c in report.comparisons]
    summary = [win_rate_line(metric, rates) for metric, rates in report.rates.items()]
    for scope, by_metric in report.rates_by_kind.items():
        summary += [win_rate_line(metric, rates, scope) for metric, rates in by_metric.items()]
    blocks.append('\n'.join(summary))
    return '\n\n'.join(blocks) + '\n'


def compare_frame(report):
    """One row per (release, model)."""
    rows = []
    for comparison in report.comparisons:
        for rank, result in comparison.ranking:
            rows.append({
                'release_id': comparison.release_id,
                'release_kind': comparison.release_kind,
                'rank': rank,
                'model': result.model,
                'status': result.status,
                'phi': result.phi,
                'N': result.n_initial,
                'N_rounded': result.n_rounded,
                'gamma': result.gamma,
                'mu': result.mu,
                'llf': result.llf,
                'sse': result.sse,
                'mse': result.mse,
                'error': result.error,
            })
    frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
    frame['rank'] = frame['rank'].astype('Int64')
    frame['N_rounded'] = frame['N_rounded'].astype('Int64')
    return frame


def render_compare_csv(report):
    return compare_frame(report).to_csv(index=False, lineterminator='\n')


def to_json(document):
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + '\n'


def render_compare(report, fmt):
    """Render a CompareReport as 'md', 'csv' or 'json'."""
    if fmt == 'md':
        return render_compare_markdown(report)
    if fmt == 'csv':
        return render_compare_csv(report)
    if fmt == 'json':
        return to_json(report.to_dict())
    raise SchemaError(f"unknown output format '{fmt}' (expected md, csv or json)")


def load_schema(name):
    path = os.path.join(SCHEMA_DIR, SCHEMA_FILES[name])
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)


def validate_document(document, name):
    """
    Validate a JSON document against a shipped schema.

    Args:
        document: Parsed JSON (dict)
        name: 'fit' or 'compare'

    Raises:
        SchemaError: when the document does not conform
    """
    try:
        jsonschema.validate(instance=document, schema=load_schema(name))
    except jsonschema.ValidationError as e:
        where = '/'.join(str(p) for p in e.absolute_path) or '<root>'
        raise SchemaError(f"{name} document invalid at {where}: {e.message}")


def write_text(path, text):
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(text)
    logger.info(f"Wrote {path}")


def mu_plot_frame(results_dir):
    """
    (release_id, gamma, mu) rows from Proposed FitResult files in a directory.

    Files that are not relifit/1 fit results, or are not successful Proposed
    fits, are skipped with a warning.
    """
    if not os.path.isdir(results_dir):
        raise FileNotFoundError(f"results directory not found: {results_dir}")
    paths = sorted(glob.glob(os.path.join(results_dir, '*.json')))
    rows = []
    for path in paths:
        with open(path, 'r', encoding='utf-8') as handle:
            try:
                data = json.load(handle)
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                logger.warning(f"Skipping {path}: not JSON ({e})")
                continue
        if not isinstance(data, dict) or data.get('schema') != SCHEMA_TAG or 'report' in data:
            logger.warning(f"Skipping {path}: not a relifit/1 fit result")
            continue
        try:
            result = FitResult.from_dict(data)
        except (KeyError, TypeError, ValueError) as e:
            logger.warning(f"Skipping {path}: incomplete fit result ({e!r})")
            continue
        if result.kind is not ModelKind.PROPOSED or not result.ok:
            logger.warning(f"Skipping {path}: not a successful Proposed fit")
            continue
        rows.append({'release_id': result.release_id, 'gamma': result.gamma, 'mu': result.mu})
    logger.info(f"Collected {len(rows)} modulation value(s) from {results_dir}")
    return pd.DataFrame(rows, columns=['release_id', 'gamma', 'mu'])


def render_mu_plot(frame):
    return frame.to_csv(index=False, lineterminator='\n')
