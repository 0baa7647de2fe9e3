"""Cause-effect pair files: parsing, day-window restriction, serialization,
and an idempotent fetcher for the public pair repository."""

from __future__ import annotations

import os
import urllib.error
import urllib.request
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DomainError, FetchError, ParseError, UnsupportedPairError

DEFAULT_BASE_URL = "https://webdav.tuebingen.mpg.de/cause-effect/"
DATA_DIR_ENV = "CAUSAL_GAP_DATA_DIR"

_MAX_DOWNLOAD_BYTES = 10 * 1024 * 1024
_TIMEOUT_S = 30.0

SUMMER_LO, SUMMER_HI = 91, 273
FIRST_DAYS = 183


@dataclass(frozen=True)
class PairMeta:
    pair_id: int
    cause_col: int
    effect_col: int
    weight: float


@dataclass(frozen=True)
class CauseEffectPair:
    id: int
    x: np.ndarray
    y: np.ndarray
    raw_columns: np.ndarray
    meta: PairMeta
    rows_in: int
    rows_dropped: int

    @property
    def rows_used(self) -> int:
        return len(self.x)


def parse_meta(line: str) -> PairMeta:
    """One pairmeta record: id, cause first/last column, effect first/last
    column, weight. Multi-column ranges are rejected (bivariate only)."""
    fields = line.split()
    if len(fields) != 6:
        raise ParseError(f"pairmeta record needs 6 fields, got {len(fields)}: {line!r}")
    try:
        pair_id = int(fields[0])
        c_first, c_last, e_first, e_last = (int(f) for f in fields[1:5])
        weight = float(fields[5])
    except ValueError as exc:
        raise ParseError(f"malformed pairmeta record {line!r}") from exc
    if c_first != c_last or e_first != e_last:
        raise UnsupportedPairError(
            f"pair {pair_id} has multi-column cause/effect ranges; only bivariate pairs supported"
        )
    return PairMeta(pair_id, c_first, e_first, weight)


def load_pairmeta(path: str | Path) -> dict[int, PairMeta]:
    """All bivariate records keyed by pair id; multivariate records skipped."""
    out: dict[int, PairMeta] = {}
    for raw in Path(path).read_text().splitlines():
        if not raw.strip():
            continue
        try:
            meta = parse_meta(raw)
        except UnsupportedPairError:
            continue
        out[meta.pair_id] = meta
    return out


def load_pair(path: str | Path, meta: PairMeta) -> CauseEffectPair:
    """Parse a whitespace-separated numeric pair file; rows with non-finite
    entries are dropped and counted."""
    path = Path(path)
    text = path.read_text()
    rows: list[list[float]] = []
    ncol = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        if ncol is None:
            ncol = len(tokens)
        elif len(tokens) != ncol:
            raise ParseError(
                f"{path.name}: line {lineno} has {len(tokens)} columns, expected {ncol}"
            )
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise ParseError(f"{path.name}: non-numeric token on line {lineno}") from exc
    if not rows:
        raise ParseError(f"{path.name}: no data rows")
    if not (1 <= meta.cause_col <= ncol and 1 <= meta.effect_col <= ncol):
        raise ParseError(
            f"{path.name}: metadata columns ({meta.cause_col}, {meta.effect_col}) "
            f"exceed the {ncol} file columns"
        )
    mat = np.asarray(rows, dtype=float)
    finite = np.all(np.isfinite(mat), axis=1)
    dropped = int((~finite).sum())
    mat = mat[finite]
    if len(mat) < 20:
        raise ParseError(f"{path.name}: only {len(mat)} usable rows after preprocessing")
    return CauseEffectPair(
        id=meta.pair_id,
        x=mat[:, meta.cause_col - 1].copy(),
        y=mat[:, meta.effect_col - 1].copy(),
        raw_columns=mat,
        meta=meta,
        rows_in=len(rows),
        rows_dropped=dropped,
    )


def restrict_days(pair: CauseEffectPair, mode: str) -> CauseEffectPair:
    """Day-window restriction on the cause (day-of-year) variable.

    summer_window keeps day indices in [91, 273] (183 days, realizing the
    April-September calendar window in leap and non-leap years alike);
    first_183 keeps day <= 183; none is the identity.
    """
    if mode == "none":
        return pair
    if mode == "summer_window":
        keep = (pair.x >= SUMMER_LO) & (pair.x <= SUMMER_HI)
    elif mode == "first_183":
        keep = pair.x <= FIRST_DAYS
    else:
        raise DomainError(f"unknown restriction mode {mode!r}")
    if not keep.any():
        raise DomainError(f"restriction {mode!r} removed every row")
    return replace(
        pair,
        x=pair.x[keep],
        y=pair.y[keep],
        raw_columns=pair.raw_columns[keep],
        rows_in=pair.rows_used,
        rows_dropped=int((~keep).sum()),
    )


def write_pair(pair: CauseEffectPair, path: str | Path) -> None:
    """Canonical two-column serialization, 17 significant digits."""
    lines = [f"{a:.17g} {b:.17g}" for a, b in zip(pair.x, pair.y)]
    Path(path).write_text("\n".join(lines) + "\n")


def resolve_data_dir(cli_value: str | None = None) -> Path | None:
    if cli_value:
        return Path(cli_value)
    env = os.environ.get(DATA_DIR_ENV)
    return Path(env) if env else None


def load_pair_by_id(data_dir: str | Path, pair_id: int) -> CauseEffectPair:
    data_dir = Path(data_dir)
    meta_path = data_dir / "pairmeta.txt"
    if not meta_path.exists():
        raise ParseError(f"no pairmeta.txt in {data_dir}")
    metas = load_pairmeta(meta_path)
    if pair_id not in metas:
        raise ParseError(f"pair {pair_id} not listed in {meta_path}")
    return load_pair(data_dir / f"pair{pair_id:04d}.txt", metas[pair_id])


def _download(url: str, dest: Path) -> None:
    try:
        with urllib.request.urlopen(url, timeout=_TIMEOUT_S) as resp:
            data = resp.read(_MAX_DOWNLOAD_BYTES + 1)
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise FetchError(f"download failed for {url}: {exc}") from exc
    if len(data) > _MAX_DOWNLOAD_BYTES:
        raise FetchError(f"{url} exceeds the {_MAX_DOWNLOAD_BYTES} byte cap")
    dest.write_bytes(data)


def _parses_numeric(path: Path) -> bool:
    try:
        for raw in path.read_text().splitlines()[:5]:
            for tok in raw.split():
                float(tok)
        return path.stat().st_size > 0
    except (OSError, ValueError):
        return False


def fetch_pairs(ids, base_url: str = DEFAULT_BASE_URL, dest: str | Path = ".") -> list[Path]:
    """Download pairNNNN.txt files plus pairmeta.txt into dest; existing
    files that already parse are skipped. Each downloaded file is verified
    to parse before success is reported."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    if not base_url.endswith("/"):
        base_url += "/"
    fetched: list[Path] = []
    names = [f"pair{int(i):04d}.txt" for i in ids] + ["pairmeta.txt"]
    for name in names:
        target = dest / name
        if target.exists() and _parses_numeric(target):
            fetched.append(target)
            continue
        _download(base_url + name, target)
        if not _parses_numeric(target):
            raise FetchError(f"downloaded {name} does not parse as numeric text")
        fetched.append(target)
    metas = load_pairmeta(dest / "pairmeta.txt")
    for i in ids:
        if int(i) not in metas:
            raise FetchError(f"pair {i} missing from fetched pairmeta.txt")
        load_pair(dest / f"pair{int(i):04d}.txt", metas[int(i)])
    return fetched
