import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from relifit.exceptions import DomainError, RelifitError
from relifit.fitter import SCHEMA_TAG, FitResult, ModelFitter
from relifit.model import ModelKind

logger = logging.getLogger(__name__)

METRICS = ('sse', 'mse')


def parse_model_list(names):
    """
    Parse a model list such as 'jm,sw,proposed' or ['jm', 'sw'].

    Returns:
        Tuple of distinct ModelKind values in the given order
    """
    if isinstance(names, str):
        names = [n for n in names.split(',') if n.strip()]
    kinds = []
    for name in names:
        kind = ModelKind.parse(name)
        if kind not in kinds:
            kinds.append(kind)
    if not kinds:
        raise DomainError("at least one model is required")
    return tuple(kinds)


def _sort_key(result):
    mse = result.mse if result.mse is not None else math.inf
    return (result.sse, mse, -result.llf)


def rank_results(results):
    """
    Order fit results best first.

    Successful fits are ranked by SSE ascending, ties broken by MSE ascending
    and then LLF descending; failed fits follow unranked in input order.

    Returns:
        List of (rank or None, FitResult)
    """
    fitted = sorted((r for r in results if r.ok), key=_sort_key)
    failed = [r for r in results if not r.ok]
    return [(rank, r) for rank, r in enumerate(fitted, start=1)] + [(None, r) for r in failed]


@dataclass
class ReleaseComparison:
    """All model fits of one release, ranked."""

    release_id: str
    ranking: List[tuple]
    release_kind: Optional[str] = None

    @property
    def results(self):
        return [r for _, r in self.ranking]

    def winner(self, metric='sse'):
        """Best model by the given metric, or None when no model qualifies."""
        if metric == 'sse':
            ranked = [r for rank, r in self.ranking if rank is not None]
            return ranked[0].kind if ranked else None
        if metric == 'mse':
            scored = [r for rank, r in self.ranking if rank is not None and r.mse is not None]
            if not scored:
                return None
            return min(scored, key=lambda r: (r.mse, r.sse, -r.llf)).kind
        raise DomainError(f"unknown metric '{metric}' (expected one of {METRICS})")

    def to_dict(self):
        rows = []
        for rank, result in self.ranking:
            row = result.to_dict()
            row['rank'] = rank
            rows.append(row)
        return {'release_id': self.release_id, 'release_kind': self.release_kind, 'rows': rows}


@dataclass(frozen=True)
class WinRate:
    model: str
    wins: int
    releases: int

    @property
    def percent(self):
        return 100.0 * self.wins / self.releases if self.releases else 0.0

    @property
    def percent_text(self):
        return f"{self.percent:.2f}%"

    def to_dict(self):
        return {'model': self.model, 'wins': self.wins, 'releases': self.releases, 'percent': self.percent_text}


def win_rates(comparisons, kinds, metric='sse'):
    """
    Share of releases each model wins.

    Releases where no model qualifies under the metric are left out of the
    denominator.

    Args:
        comparisons: ReleaseComparison list
        kinds: Models to report, in display order
        metric: 'sse' or 'mse'

    Returns:
        List of WinRate, one per kind
    """
    winners = [c.winner(metric) for c in comparisons]
    decided = [w for w in winners if w is not None]
    return [WinRate(kind.value, sum(1 for w in decided if w is kind), len(decided)) for kind in kinds]


@dataclass
class CompareReport:
    """Comparison of several models over one or more releases."""

    models: tuple
    comparisons: List[ReleaseComparison]
    rates: Dict[str, List[WinRate]] = field(default_factory=dict)
    rates_by_kind: Dict[str, Dict[str, List[WinRate]]] = field(default_factory=dict)

    def to_dict(self):
        return {
            'schema': SCHEMA_TAG,
            'report': 'compare',
            'models': [k.value for k in self.models],
            'releases': [c.to_dict() for c in self.comparisons],
            'win_rates': {metric: [w.to_dict() for w in rates] for metric, rates in self.rates.items()},
            'win_rates_by_kind': {
                release_kind: {metric: [w.to_dict() for w in rates] for metric, rates in by_metric.items()}
                for release_kind, by_metric in self.rates_by_kind.items()
            },
        }


class ModelComparator:
    def __init__(self, fitter=None, model_workers=1):
        """
        Fits a set of models to each release and ranks them.

        Args:
            fitter: ModelFitter used for every fit
            model_workers: Models fitted concurrently within a release
        """
        self.fitter = fitter or ModelFitter()
        self.model_workers = max(1, int(model_workers))

    def _fit_one(self, series, kind):
        try:
            return self.fitter.fit(series, kind)
        except RelifitError as e:
            logger.warning(f"{kind.label} fit failed on release {series.release_id}: {e}")
            return FitResult.failed(series, kind, e)

    def compare(self, series, kinds, release_kind=None):
        """
        Fit every model to one release; failures become unranked rows.

        Args:
            series: FailureSeries
            kinds: Models to fit
            release_kind: Optional 'major' or 'minor' label

        Returns:
            ReleaseComparison
        """
        kinds = parse_model_list(kinds)
        if self.model_workers > 1 and len(kinds) > 1:
            with ThreadPoolExecutor(max_workers=min(self.model_workers, len(kinds))) as executor:
                results = list(executor.map(lambda k: self._fit_one(series, k), kinds))
        else:
            results = [self._fit_one(series, kind) for kind in kinds]
        comparison = ReleaseComparison(series.release_id, rank_results(results), release_kind)
        winner = comparison.winner('sse')
        logger.info(f"Release {series.release_id}: best by SSE is {winner.label if winner else 'none'}")
        return comparison

    def compare_releases(self, series_list, kinds, windows=None):
        """
        Compare models over several releases and summarize win rates.

        Args:
            series_list: FailureSeries per release
            kinds: Models to fit
            windows: Optional ReleaseWindow list supplying major/minor labels

        Returns:
            CompareReport
        """
        kinds = parse_model_list(kinds)
        if not series_list:
            raise DomainError("no releases to compare")
        labels = {w.release_id: w.kind for w in (windows or [])}
        comparisons = [self.compare(s, kinds, labels.get(s.release_id)) for s in series_list]

        report = CompareReport(kinds, comparisons)
        report.rates = {metric: win_rates(comparisons, kinds, metric) for metric in METRICS}
        if labels:
            for release_kind in ('major', 'minor'):
                subset = [c for c in comparisons if c.release_kind == release_kind]
                if subset:
                    report.rates_by_kind[release_kind] = {
                        metric: win_rates(subset, kinds, metric) for metric in METRICS
                    }
        return report


def compare(series, kinds, options=None, model_workers=1):
    """Fit and rank models on a single release."""
    return ModelComparator(ModelFitter(options), model_workers).compare(series, kinds)


def compare_releases(series_list, kinds, options=None, windows=None, model_workers=1):
    """Fit and rank models on every release, with cross-release win rates."""
    return ModelComparator(ModelFitter(options), model_workers).compare_releases(series_list, kinds, windows)
