import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from relifit.exceptions import DomainError, SchemaError

logger = logging.getLogger(__name__)

FAILURE_COLUMNS = ['release', 'interval_index', 't', 'failures']
BUG_COLUMNS = ['bug_id', 'report_time']
WINDOW_COLUMNS = ['release', 'start', 'end', 'kind']
RELEASE_KINDS = ('major', 'minor')

TIME_UNIT_SECONDS = {
    'seconds': 1.0,
    'minutes': 60.0,
    'hours': 3600.0,
    'days': 86400.0,
}

_UNIT_COMMENT = re.compile(r'^#\s*unit:\s*(\S+)\s*$')


@dataclass(frozen=True)
class FailureSeries:
    """
    Ordered inter-failure observations of one release.

    Args:
        release_id: Release label, e.g. "3.2"
        intervals: Interval lengths t_i (> 0)
        failures: Failures observed in each interval (>= 1)
        time_unit: Unit of the interval lengths, None when unknown
    """

    release_id: str
    intervals: Tuple[float, ...]
    failures: Tuple[int, ...]
    time_unit: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'release_id', str(self.release_id))
        intervals = tuple(float(t) for t in self.intervals)
        if len(intervals) != len(self.failures):
            raise DomainError("intervals and failures must have the same length")
        failures = []
        for k in self.failures:
            if isinstance(k, float) and not k.is_integer():
                raise DomainError(f"failure counts must be integers (got {k})")
            failures.append(int(k))
        for position, (t, k) in enumerate(zip(intervals, failures), start=1):
            if not (t > 0.0 and math.isfinite(t)):
                raise DomainError(f"release {self.release_id}: interval {position} has non-positive length {t}")
            if k < 1:
                raise DomainError(f"release {self.release_id}: interval {position} has failure count {k} < 1")
        object.__setattr__(self, 'intervals', intervals)
        object.__setattr__(self, 'failures', tuple(failures))

        # derived arrays, kept out of the dataclass fields
        cum = np.cumsum(np.asarray(failures, dtype=np.int64))
        object.__setattr__(self, '_t', np.asarray(intervals, dtype=float))
        object.__setattr__(self, '_cum', cum)
        object.__setattr__(self, '_cum_prev', np.concatenate(([0], cum[:-1])) if len(cum) else cum)
        object.__setattr__(self, '_index', np.arange(1, len(intervals) + 1))
        for array in (self._t, self._cum, self._cum_prev, self._index):
            array.setflags(write=False)

    @classmethod
    def from_cumulative(cls, release_id, intervals, cumulative, time_unit=None):
        """Build a series from cumulative counts n_i instead of per-interval counts."""
        cumulative = [int(c) for c in cumulative]
        failures = [c - p for c, p in zip(cumulative, [0] + cumulative[:-1])]
        return cls(release_id, tuple(intervals), tuple(failures), time_unit)

    def __len__(self):
        return len(self.intervals)

    @property
    def records(self):
        return list(zip(self.intervals, self.failures))

    @property
    def t(self):
        return self._t

    @property
    def cum(self):
        """Cumulative failure counts n_i."""
        return self._cum

    @property
    def cum_prev(self):
        """Cumulative failure counts n_{i-1}, with n_0 = 0."""
        return self._cum_prev

    @property
    def index(self):
        """1-based interval ordinals."""
        return self._index

    @property
    def total_failures(self):
        return int(self._cum[-1]) if len(self._cum) else 0

    @property
    def total_time(self):
        return float(self._t.sum())

    def relabel(self, release_id):
        return FailureSeries(release_id, self.intervals, self.failures, self.time_unit)


_PARSER_LINE = re.compile(r'line (\d+)')


def _check_encoding(path):
    with open(path, 'rb') as handle:
        for row, raw in enumerate(handle, start=1):
            try:
                raw.decode('utf-8')
            except UnicodeDecodeError as e:
                raise SchemaError(f"not valid UTF-8 ({e.reason})", row=row, path=path)


def _read_comment_unit(path):
    unit = None
    header_line = 1
    with open(path, 'r', encoding='utf-8') as handle:
        for line in handle:
            if not line.startswith('#'):
                break
            match = _UNIT_COMMENT.match(line.strip())
            if match:
                unit = match.group(1)
            header_line += 1
    return unit, header_line


def _read_table(path, required, comment=None):
    _check_encoding(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, comment=comment, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise SchemaError("file is empty", path=path)
    except pd.errors.ParserError as e:
        match = _PARSER_LINE.search(str(e))
        row = int(match.group(1)) if match else None
        raise SchemaError(f"malformed CSV row: {str(e).split(':')[-1].strip()}", row=row, path=path)
    # short rows come back as NaN even with dtype=str
    df = df.fillna('')
    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}", path=path)
    return df


def _parse_number(value, kind, column, row, path):
    try:
        number = kind(value.strip())
    except (TypeError, ValueError):
        raise SchemaError(f"column '{column}' has invalid value '{value}'", row=row, path=path)
    return number


def _parse_count(value, column, row, path):
    number = _parse_number(value, float, column, row, path)
    if not number.is_integer():
        raise SchemaError(f"column '{column}' must be an integer (got '{value}')", row=row, path=path)
    return int(number)


def load_failure_csv(path):
    """
    Load a failure-interval CSV into one FailureSeries per release.

    Args:
        path: CSV with header release,interval_index,t,failures and an
            optional leading '# unit: <unit>' comment

    Returns:
        List of FailureSeries in order of first appearance
    """
    df = _read_table(path, FAILURE_COLUMNS, comment='#')
    unit, header_line = _read_comment_unit(path)

    grouped: Dict[str, List[Tuple[int, float, int]]] = {}
    seen = set()
    for position, row in enumerate(df.itertuples(index=False)):
        line = header_line + 1 + position
        release = getattr(row, 'release').strip()
        if not release:
            raise SchemaError("empty release label", row=line, path=path)
        index = _parse_count(getattr(row, 'interval_index'), 'interval_index', line, path)
        t = _parse_number(getattr(row, 't'), float, 't', line, path)
        k = _parse_count(getattr(row, 'failures'), 'failures', line, path)
        if index < 1:
            raise SchemaError(f"interval_index must be >= 1 (got {index})", row=line, path=path)
        if not (t > 0.0 and math.isfinite(t)):
            raise SchemaError(f"interval length t must be positive (got {t})", row=line, path=path)
        if k < 1:
            raise SchemaError(f"failures must be >= 1 (got {k})", row=line, path=path)
        if (release, index) in seen:
            raise SchemaError(f"duplicate interval {index} for release {release}", row=line, path=path)
        seen.add((release, index))
        grouped.setdefault(release, []).append((index, t, k))

    series_list = []
    for release, rows in grouped.items():
        rows.sort(key=lambda item: item[0])
        series_list.append(FailureSeries(
            release,
            tuple(t for _, t, _ in rows),
            tuple(k for _, _, k in rows),
            time_unit=unit,
        ))
    logger.info(f"Loaded {len(series_list)} release(s) from {path}")
    return series_list


def failure_frame(series_list):
    """Failure-interval rows of several series as a DataFrame."""
    rows = []
    for series in series_list:
        for index, (t, k) in enumerate(series.records, start=1):
            rows.append({'release': series.release_id, 'interval_index': index, 't': t, 'failures': k})
    return pd.DataFrame(rows, columns=FAILURE_COLUMNS)


def write_failure_csv(series_list, path):
    """
    Write series in the failure-interval CSV format.

    The output re-loads to the same series, and loading then writing a file
    produced here reproduces it byte for byte.

    Args:
        series_list: FailureSeries to write
        path: Output path
    """
    units = {s.time_unit for s in series_list if s.time_unit is not None}
    if len(units) > 1:
        raise DomainError(f"cannot write series with mixed time units: {sorted(units)}")
    df = failure_frame(series_list)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        if units:
            handle.write(f"# unit: {units.pop()}\n")
        df.to_csv(handle, index=False, lineterminator='\n')
    logger.info(f"Wrote {len(df)} interval(s) for {len(series_list)} release(s) to {path}")


@dataclass(frozen=True)
class BugRecord:
    """One bug report; optional columns are carried without interpretation."""

    bug_id: str
    report_time: pd.Timestamp
    extra: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not str(self.bug_id).strip():
            raise DomainError("bug_id must be non-empty")
        try:
            object.__setattr__(self, 'report_time', parse_timestamp(self.report_time))
        except (TypeError, ValueError) as e:
            raise DomainError(f"bug {self.bug_id}: invalid report_time: {e}")


@dataclass(frozen=True)
class ReleaseWindow:
    """Reporting window [start, end) of one release."""

    release_id: str
    start: pd.Timestamp
    end: pd.Timestamp
    kind: str = 'minor'

    def __post_init__(self):
        try:
            start, end = parse_timestamp(self.start), parse_timestamp(self.end)
        except (TypeError, ValueError) as e:
            raise DomainError(f"release {self.release_id}: invalid window bound: {e}")
        if not start < end:
            raise DomainError(f"release {self.release_id}: window start must precede end")
        kind = str(self.kind).strip().lower()
        if kind not in RELEASE_KINDS:
            raise DomainError(f"release {self.release_id}: kind must be major or minor (got '{self.kind}')")
        object.__setattr__(self, 'release_id', str(self.release_id))
        object.__setattr__(self, 'start', start)
        object.__setattr__(self, 'end', end)
        object.__setattr__(self, 'kind', kind)

    def contains(self, timestamp):
        return self.start <= timestamp < self.end


def parse_timestamp(value):
    """Parse an ISO-8601 timestamp; aware values are converted to naive UTC."""
    timestamp = pd.Timestamp(value)
    if pd.isna(timestamp):
        raise ValueError(f"missing timestamp '{value}'")
    if timestamp.tzinfo is not None:
        timestamp = timestamp.tz_convert('UTC').tz_localize(None)
    return timestamp


def validate_windows(windows):
    """Sort windows by start and check they do not overlap."""
    ordered = sorted(windows, key=lambda w: w.start)
    for previous, current in zip(ordered, ordered[1:]):
        if current.start < previous.end:
            raise DomainError(f"release windows {previous.release_id} and {current.release_id} overlap")
    ids = [w.release_id for w in ordered]
    if len(set(ids)) != len(ids):
        raise DomainError("release window labels must be unique")
    return ordered


@dataclass(frozen=True)
class Grouping:
    """How bugs inside a window become intervals: one per distinct report time, or fixed-width bins."""

    mode: str = 'per-failure'
    width: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ('per-failure', 'fixed'):
            raise DomainError(f"unknown grouping '{self.mode}'")
        if self.mode == 'fixed' and not (self.width is not None and self.width > 0):
            raise DomainError("fixed grouping needs a positive width")

    @classmethod
    def parse(cls, text):
        """Parse 'per-failure' or 'fixed:<width>[h]'; the width is always in hours."""
        text = str(text).strip().lower()
        if text in ('per-failure', 'perfailure'):
            return cls('per-failure')
        match = re.fullmatch(r'fixed:([0-9]*\.?[0-9]+(?:e[-+]?[0-9]+)?)h?', text)
        if not match:
            raise DomainError(f"grouping must be 'per-failure' or 'fixed:<width>h' (got '{text}')")
        return cls('fixed', float(match.group(1)))


@dataclass
class IngestResult:
    """Series emitted by ingestion plus accounting for bugs that did not become failures."""

    series: List[FailureSeries]
    outside_windows: int = 0
    anchors: int = 0
    undersized: int = 0
    undersized_releases: List[str] = field(default_factory=list)

    @property
    def skipped(self):
        """Bugs not counted in any interval."""
        return self.outside_windows + self.anchors + self.undersized

    @property
    def counted(self):
        return sum(s.total_failures for s in self.series)


class BugReportProcessor:
    def __init__(self, grouping=None, time_unit='hours'):
        """
        Turns bug-report exports into per-release failure series.

        Args:
            grouping: Grouping rule (default: one interval per distinct report time)
            time_unit: Unit of the emitted interval lengths
        """
        if time_unit not in TIME_UNIT_SECONDS:
            raise DomainError(f"unknown time unit '{time_unit}'")
        self.grouping = grouping or Grouping()
        self.time_unit = time_unit
        self.unit_seconds = TIME_UNIT_SECONDS[time_unit]

    def load_bug_reports(self, path):
        """
        Load bug reports from CSV.

        Args:
            path: CSV with header bug_id,report_time[,summary,status,commit,commit_time]

        Returns:
            List of BugRecord
        """
        df = _read_table(path, BUG_COLUMNS)
        extras = [c for c in df.columns if c not in BUG_COLUMNS]
        bugs = []
        for position, row in enumerate(df.to_dict('records')):
            line = position + 2
            try:
                bugs.append(BugRecord(
                    row['bug_id'].strip(),
                    row['report_time'],
                    {c: row[c] for c in extras},
                ))
            except (ValueError, TypeError) as e:
                raise SchemaError(str(e), row=line, path=path)
        logger.info(f"Loaded {len(bugs)} bug report(s) from {path}")
        return bugs

    def load_windows(self, path):
        """
        Load release windows from CSV.

        Args:
            path: CSV with header release,start,end,kind

        Returns:
            Windows ordered by start time
        """
        df = _read_table(path, WINDOW_COLUMNS)
        windows = []
        for position, row in enumerate(df.to_dict('records')):
            try:
                windows.append(ReleaseWindow(row['release'].strip(), row['start'], row['end'], row['kind']))
            except (ValueError, TypeError) as e:
                raise SchemaError(str(e), row=position + 2, path=path)
        try:
            return validate_windows(windows)
        except DomainError as e:
            raise SchemaError(str(e), path=path)

    def _in_unit(self, delta):
        return delta.total_seconds() / self.unit_seconds

    @property
    def bin_width(self):
        """Fixed-grouping width converted from hours to the output time unit."""
        return self.grouping.width * TIME_UNIT_SECONDS['hours'] / self.unit_seconds

    def _per_failure(self, window, times, result):
        counts = pd.Series(times).value_counts().sort_index()
        if len(counts) < 2:
            return None
        result.anchors += int(counts.iloc[0])
        stamps = list(counts.index)
        intervals = [self._in_unit(b - a) for a, b in zip(stamps, stamps[1:])]
        return intervals, [int(c) for c in counts.iloc[1:]]

    def _fixed_width(self, window, times, result):
        if len(times) < 2:
            return None
        offsets = np.array([self._in_unit(t - window.start) for t in times])
        width = self.bin_width
        bins = np.floor(offsets / width).astype(np.int64)
        counts = np.bincount(bins)
        intervals, failures = [], []
        pending = 0.0
        # empty bins are merged forward into the next non-empty one
        for count in counts:
            pending += width
            if count > 0:
                intervals.append(pending)
                failures.append(int(count))
                pending = 0.0
        return intervals, failures

    def build_series(self, window, times, result):
        """Emit the FailureSeries for one window from its sorted report times."""
        if self.grouping.mode == 'fixed':
            built = self._fixed_width(window, times, result)
        else:
            built = self._per_failure(window, times, result)
        if built is None:
            logger.warning(f"Release {window.release_id} has fewer than two failures; emitting an empty series")
            result.undersized += len(times)
            result.undersized_releases.append(window.release_id)
            return FailureSeries(window.release_id, (), (), self.time_unit)
        intervals, failures = built
        return FailureSeries(window.release_id, tuple(intervals), tuple(failures), self.time_unit)

    def ingest(self, bugs, windows):
        """
        Assign bugs to release windows and emit one series per window.

        Args:
            bugs: BugRecord list
            windows: ReleaseWindow list

        Returns:
            IngestResult with the series and skip accounting
        """
        if not bugs:
            raise DomainError("no bug reports to ingest")
        windows = validate_windows(windows)
        per_window = {w.release_id: [] for w in windows}
        result = IngestResult(series=[])
        for bug in bugs:
            owner = next((w for w in windows if w.contains(bug.report_time)), None)
            if owner is None:
                result.outside_windows += 1
                continue
            per_window[owner.release_id].append(bug.report_time)

        for window in windows:
            times = sorted(per_window[window.release_id])
            result.series.append(self.build_series(window, times, result))

        if result.outside_windows:
            logger.warning(f"Skipped {result.outside_windows} bug report(s) outside every release window")
        logger.info(f"Ingested {len(bugs)} bug report(s): {result.counted} failure(s) in "
                    f"{len(result.series)} release(s), {result.skipped} skipped")
        return result

    def process(self, bug_path, windows_path):
        """Full pipeline: load both CSVs and ingest."""
        bugs = self.load_bug_reports(bug_path)
        windows = self.load_windows(windows_path)
        return self.ingest(bugs, windows)


def ingest_bug_reports(bugs, windows, grouping='per-failure', time_unit='hours'):
    """
    Turn bug reports into per-release failure series.

    Args:
        bugs: BugRecord list
        windows: ReleaseWindow list
        grouping: Grouping or its text form ('per-failure', 'fixed:24h')
        time_unit: Unit of emitted interval lengths

    Returns:
        IngestResult
    """
    if not isinstance(grouping, Grouping):
        grouping = Grouping.parse(grouping)
    return BugReportProcessor(grouping, time_unit).ingest(bugs, windows)
