"""CSV ingestion, the stable-link filter, run configuration and report files."""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import platform
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .network import (DataValidationError, FirmFinancials, ValidationReport, build_bank_layer,
                      build_network, validate_layers)
from .production import (DEFAULT_EPS, DEFAULT_FLOOR_SHARE, DEFAULT_MAX_ITER, ESSENTIAL,
                         EssentialityTable)
from .synth import Dataset

logger = logging.getLogger(__name__)

EDGE_COLUMNS = ("supplier_id", "buyer_id", "weight")
TRANSACTION_COLUMNS = ("supplier_id", "buyer_id", "weight", "quarter")
FIRM_COLUMNS = ("firm_id", "product_code", "revenue", "material_costs", "other_profit", "equity",
                "short_term_assets", "short_term_liabilities", "pd")
LOAN_COLUMNS = ("firm_id", "bank_id", "exposure")
BANK_COLUMNS = ("bank_id", "equity")
ESSENTIALITY_COLUMNS = ("supplier_product", "buyer_sector", "class")

QUARTERS = ("Q1", "Q2", "Q3", "Q4")

FSRI_RANK_COLUMNS = ("rank", "firm", "FSRI", "FSRI_eq", "FSRI_l", "FSRI_dir", "FSRI_indir",
                     "ESRI", "s_out", "loan_total")
ESRI_COLUMNS = ("firm", "ESRI", "s_out", "iterations", "converged")
ADJUSTED_PD_COLUMNS = ("firm", "pd", "q", "n_critical", "critical")
HISTOGRAM_COLUMNS = ("series", "bank", "bin_lo", "bin_hi", "count")

# headline values of the original empirical study; carried for comparison only
REFERENCE_VALUES = {
    "fsri_rank": "fsri_plateau~0.15 (confidential data, not reproduced)",
    "bank_risk": ("mean rho EL/VaR/ES 4.3/4.5/3.2; system 4.9/9.7/7.8; "
                  "pd-adjusted 6.2/4.2/3.9 (confidential data, not reproduced)"),
}


class IngestError(DataValidationError):
    """A CSV file violates its schema; carries the file, line and column."""

    def __init__(self, path, message, line=None, column=None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = self.path
        if line is not None:
            where += f":{line}"
        if column is not None:
            where += f" [{column}]"
        super().__init__(f"{where}: {message}")


class ConfigError(ValueError):
    """A configuration value is missing, unknown or out of range."""


# ---------------------------------------------------------------- reading

def _data_lines(path: Path) -> list[int]:
    # 1-based file line of every data row (header excluded)
    lines = []
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            s = raw.strip()
            if s and not s.startswith("#"):
                lines.append(no)
    return lines[1:]


def read_table(path, columns, text=()) -> pd.DataFrame:
    """Read a CSV with a mandatory header; columns not in ``text`` must be numeric.

    Lines starting with ``#`` are comments. Extra columns are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestError(path, "file not found")
    try:
        df = pd.read_csv(path, comment="#", dtype=str, keep_default_na=False,
                         skip_blank_lines=True, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise IngestError(path, "empty file; a header row is required", line=1) from None
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise IngestError(path, f"unreadable CSV ({exc})") from None
    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise IngestError(path, f"missing column(s) {', '.join(missing)}", line=1,
                          column=missing[0])
    df = df[list(columns)].copy()
    lines = _data_lines(path)
    for col in columns:
        raw = df[col].str.strip()
        empty = np.flatnonzero((raw == "").to_numpy())
        if empty.size:
            r = int(empty[0])
            raise IngestError(path, "empty value", line=lines[r], column=col)
        if col in text:
            df[col] = raw
            continue
        try:
            # astype parses with round-trip precision; to_numeric does not
            df[col] = raw.astype(float)
        except ValueError:
            bad = np.flatnonzero(pd.to_numeric(raw, errors="coerce").isna().to_numpy())
            r = int(bad[0])
            raise IngestError(path, f"not a number: {raw.iloc[r]!r}", line=lines[r],
                              column=col) from None
    df.attrs["lines"] = lines
    return df


def _ids(df, col, path, count=None) -> np.ndarray:
    vals = df[col].to_numpy()
    lines = df.attrs.get("lines", [])
    bad = np.flatnonzero((vals != np.floor(vals)) | (vals < 0))
    if bad.size:
        r = int(bad[0])
        raise IngestError(path, f"id must be a non-negative integer, got {vals[r]}",
                          line=lines[r] if lines else None, column=col)
    ids = vals.astype(np.int64)
    if count is not None:
        bad = np.flatnonzero(ids >= count)
        if bad.size:
            r = int(bad[0])
            raise IngestError(path, f"unknown id {ids[r]}", line=lines[r] if lines else None,
                              column=col)
    return ids


def _dense_index(df, col, path) -> np.ndarray:
    """Row order that sorts the table by id; ids must be exactly 0..n-1."""
    ids = _ids(df, col, path)
    n = ids.shape[0]
    seen = np.bincount(ids, minlength=n) if n else np.zeros(0, dtype=np.int64)
    lines = df.attrs.get("lines", [])
    if n and (seen.shape[0] > n or np.any(seen > 1)):
        dup = np.flatnonzero(seen > 1)
        if dup.size:
            r = int(np.flatnonzero(ids == dup[0])[1])
            raise IngestError(path, f"duplicate id {dup[0]}", line=lines[r], column=col)
        r = int(np.argmax(ids))
        raise IngestError(path, f"ids must be contiguous 0..{n - 1}, got {ids[r]}",
                          line=lines[r], column=col)
    return np.argsort(ids, kind="stable")


def stable_transactions(transactions: pd.DataFrame) -> pd.DataFrame:
    """Keep transactions of pairs that trade at least twice in two different quarters."""
    tx = transactions
    if tx.empty:
        return tx.iloc[0:0].copy()
    grp = tx.groupby(["supplier_id", "buyer_id"], sort=False)
    count = grp["quarter"].transform("size")
    quarters = grp["quarter"].transform("nunique")
    return tx[(count >= 2) & (quarters >= 2)].copy()


def stable_link_filter(transactions: pd.DataFrame) -> pd.DataFrame:
    """Edge list of stable pairs; the weight is the sum of the pair's amounts."""
    kept = stable_transactions(transactions)
    if kept.empty:
        return pd.DataFrame({c: pd.Series(dtype=float) for c in EDGE_COLUMNS})
    out = kept.groupby(["supplier_id", "buyer_id"], sort=True)["weight"].sum().reset_index()
    return out[list(EDGE_COLUMNS)]


def read_transactions(path) -> pd.DataFrame:
    df = read_table(path, TRANSACTION_COLUMNS, text=("quarter",))
    q = df["quarter"].str.upper()
    bad = np.flatnonzero(~q.isin(QUARTERS).to_numpy())
    if bad.size:
        r = int(bad[0])
        raise IngestError(path, f"quarter must be one of Q1..Q4, got {df['quarter'].iloc[r]!r}",
                          line=df.attrs["lines"][r], column="quarter")
    amt = df["weight"].to_numpy()
    bad = np.flatnonzero(~(amt > 0))
    if bad.size:
        r = int(bad[0])
        raise IngestError(path, f"amount must be positive, got {amt[r]}",
                          line=df.attrs["lines"][r], column="weight")
    df["quarter"] = q
    return df


def read_essentiality(path) -> EssentialityTable:
    df = read_table(path, ESSENTIALITY_COLUMNS, text=ESSENTIALITY_COLUMNS)
    table = EssentialityTable()
    for r, (a, b, cls) in enumerate(df.itertuples(index=False)):
        try:
            table.set(a, b, cls)
        except ValueError as exc:
            raise IngestError(path, str(exc), line=df.attrs["lines"][r], column="class") from None
    return table


@dataclass(frozen=True)
class DataPaths:
    firms: Path
    loans: Path
    banks: Path
    edges: Path | None = None
    transactions: Path | None = None
    essentiality: Path | None = None

    @classmethod
    def in_dir(cls, directory) -> "DataPaths":
        """Standard file names in one directory; transactions are used when no edges exist."""
        d = Path(directory)
        edges = d / "edges.csv"
        tx = d / "transactions.csv"
        ess = d / "essentiality.csv"
        return cls(firms=d / "firms.csv", loans=d / "loans.csv", banks=d / "banks.csv",
                   edges=edges if edges.exists() or not tx.exists() else None,
                   transactions=tx if not edges.exists() and tx.exists() else None,
                   essentiality=ess if ess.exists() else None)


def ingest(paths: DataPaths) -> tuple[Dataset, ValidationReport]:
    """Load and cross-validate the four layers plus the optional essentiality table."""
    firms = read_table(paths.firms, FIRM_COLUMNS, text=("product_code",))
    order = _dense_index(firms, "firm_id", paths.firms)
    firms = firms.iloc[order]
    n = firms.shape[0]
    try:
        fin = FirmFinancials(**{c: firms[c].to_numpy(dtype=float) for c in FIRM_COLUMNS[2:]})
    except DataValidationError as exc:
        raise IngestError(paths.firms, str(exc)) from None

    if paths.edges is not None:
        edges = read_table(paths.edges, EDGE_COLUMNS)
        edge_path = paths.edges
    elif paths.transactions is not None:
        tx = read_transactions(paths.transactions)
        edges = stable_link_filter(tx)
        edge_path = paths.transactions
        logger.info("stable-link filter kept %d of %d transactions as %d links",
                    len(stable_transactions(tx)), len(tx), len(edges))
    else:
        raise IngestError(paths.firms, "no edges or transactions file given")
    sup = _ids(edges, "supplier_id", edge_path, n)
    buy = _ids(edges, "buyer_id", edge_path, n)
    w = edges["weight"].to_numpy(dtype=float)
    bad = np.flatnonzero(~(w > 0))
    if bad.size:
        r = int(bad[0])
        line = edges.attrs["lines"][r] if "lines" in edges.attrs else None
        raise IngestError(edge_path, f"weight must be positive, got {w[r]}", line=line,
                          column="weight")
    network = build_network(np.column_stack([sup, buy, w]), firms["product_code"].to_numpy())

    banks_df = read_table(paths.banks, BANK_COLUMNS)
    border = _dense_index(banks_df, "bank_id", paths.banks)
    equity = banks_df["equity"].to_numpy(dtype=float)[border]
    loans = read_table(paths.loans, LOAN_COLUMNS)
    lf = _ids(loans, "firm_id", paths.loans, n)
    lb = _ids(loans, "bank_id", paths.loans, equity.shape[0])
    le = loans["exposure"].to_numpy(dtype=float)
    bad = np.flatnonzero(~(le >= 0))
    if bad.size:
        r = int(bad[0])
        raise IngestError(paths.loans, f"exposure must be >= 0, got {le[r]}",
                          line=loans.attrs["lines"][r], column="exposure")
    banks = build_bank_layer(n, np.column_stack([lf, lb, le]), equity)

    ess = read_essentiality(paths.essentiality) if paths.essentiality else EssentialityTable()
    report = validate_layers(network, fin, banks)
    return Dataset(network=network, financials=fin, banks=banks, essentiality=ess), report


def _write_csv(df: pd.DataFrame, path: Path, header_lines=()) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            df.to_csv(fh, index=False, lineterminator="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def write_dataset(ds: Dataset, directory) -> dict[str, Path]:
    """Write the dataset in the ingest schemas; floats keep full precision."""
    d = Path(directory)
    net, fin, banks = ds.network, ds.financials, ds.banks
    files = {}
    files["edges"] = _write_csv(pd.DataFrame({
        "supplier_id": net.supplier, "buyer_id": net.buyer, "weight": net.weight}),
        d / "edges.csv")
    cols = {"firm_id": np.arange(net.n), "product_code": net.product_of.astype(str)}
    cols.update({c: getattr(fin, c) for c in FIRM_COLUMNS[2:]})
    files["firms"] = _write_csv(pd.DataFrame(cols), d / "firms.csv")
    files["loans"] = _write_csv(pd.DataFrame({
        "firm_id": banks.firm, "bank_id": banks.bank, "exposure": banks.exposure}),
        d / "loans.csv")
    files["banks"] = _write_csv(pd.DataFrame({
        "bank_id": np.arange(banks.m), "equity": banks.equity}), d / "banks.csv")
    pairs = ds.essentiality.essential_pairs()
    files["essentiality"] = _write_csv(pd.DataFrame({
        "supplier_product": [a for a, _ in pairs], "buyer_sector": [b for _, b in pairs],
        "class": [ESSENTIAL] * len(pairs)}, columns=list(ESSENTIALITY_COLUMNS)),
        d / "essentiality.csv")
    return files


# ---------------------------------------------------------------- config

@dataclass
class RunConfig:
    """Everything that determines a run's numbers.

    Data come from ``data_dir`` (standard file names), explicit file paths,
    or a synthetic ``preset``. ``tol`` > 0 enables the approximate cascade.
    """

    preset: str | None = None
    data_dir: str | None = None
    edges: str | None = None
    transactions: str | None = None
    firms: str | None = None
    loans: str | None = None
    banks: str | None = None
    essentiality: str | None = None
    eps: float = DEFAULT_EPS
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = 0.0
    floor_share: float = DEFAULT_FLOOR_SHARE
    lgd: float = 1.0
    n_scenarios: int = 10_000
    q: float = 0.95
    seed: int = 0
    bank_client_threshold: int = 0
    workers: int = 1
    histogram_bins: int = 40

    def validate(self) -> "RunConfig":
        checks = [
            (self.eps > 0, "eps must be > 0"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.tol >= 0, "tol must be >= 0"),
            (0.0 <= self.floor_share <= 1.0, "floor_share must be in [0, 1]"),
            (0.0 < self.lgd <= 1.0, "lgd must be in (0, 1]"),
            (self.n_scenarios >= 1, "n_scenarios must be >= 1"),
            (0.0 < self.q < 1.0, "q must be in (0, 1)"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.bank_client_threshold >= 0, "bank_client_threshold must be >= 0"),
            (self.workers >= 1, "workers must be >= 1"),
            (self.histogram_bins >= 1, "histogram_bins must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def data_paths(self) -> DataPaths | None:
        if self.preset:
            return None
        if self.data_dir:
            base = DataPaths.in_dir(self.data_dir)
        elif self.firms and self.loans and self.banks:
            base = DataPaths(firms=Path(self.firms), loans=Path(self.loans),
                             banks=Path(self.banks))
        else:
            raise ConfigError("no data source: set preset, data_dir, or firms/loans/banks paths")
        over = {k: Path(getattr(self, k)) for k in
                ("edges", "transactions", "firms", "loans", "banks", "essentiality")
                if getattr(self, k)}
        if "transactions" in over and "edges" not in over:
            over["edges"] = None
        kw = {f.name: getattr(base, f.name) for f in fields(DataPaths)}
        kw.update(over)
        return DataPaths(**kw)


_PATH_KEYS = ("data_dir", "edges", "transactions", "firms", "loans", "banks", "essentiality")


def _coerce(name: str, value):
    if value is None:
        return None
    ftype = {f.name: f.type for f in fields(RunConfig)}[name]
    text = str(value).strip()
    if text.lower() in ("", "none") and "None" in str(ftype):
        return None
    try:
        if "int" in str(ftype):
            return int(text)
        if "float" in str(ftype):
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    return text


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read the ``[run]`` section of an INI file, then apply overrides (flags win).

    Relative data paths in the file are resolved against the file's directory.
    """
    values = {}
    known = {f.name for f in fields(RunConfig)}
    if path is not None:
        path = Path(path)
        parser = configparser.ConfigParser()
        try:
            read = parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not read:
            raise ConfigError(f"{path}: cannot read config file")
        if not parser.has_section("run"):
            raise ConfigError(f"{path}: missing [run] section")
        for key, raw in parser.items("run"):
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r}")
            val = _coerce(key, raw)
            if key in _PATH_KEYS and val is not None and not Path(val).is_absolute():
                val = str((path.parent / val).resolve())
            values[key] = val
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown setting {key!r}")
        values[key] = _coerce(key, val)
    return RunConfig(**values).validate()


def save_config(config: RunConfig, path) -> Path:
    parser = configparser.ConfigParser()
    parser["run"] = {k: ("none" if v is None else str(v)) for k, v in asdict(config).items()}
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
    return path


# ---------------------------------------------------------------- reports

def versions() -> str:
    import numba
    import scipy

    from . import __version__
    return (f"supplyrisk {__version__}; python {platform.python_version()}; "
            f"numpy {np.__version__}; scipy {scipy.__version__}; pandas {pd.__version__}; "
            f"numba {numba.__version__}")


def provenance(config: RunConfig, report: str, extra: dict | None = None) -> list[str]:
    """Comment lines heading every report. Only ``created`` varies between reruns."""
    lines = [
        f"report={report}",
        f"config_sha256={config.digest()}",
        f"seed={config.seed}",
        f"versions={versions()}",
        f"config={config.canonical()}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    if report in REFERENCE_VALUES:
        lines.append(f"reference={REFERENCE_VALUES[report]}")
    lines.append(f"created={datetime.now(timezone.utc).isoformat(timespec='seconds')}")
    return lines


def fsri_rank_table(fsri, s_out, loan_total) -> pd.DataFrame:
    """FSRI ranking, largest first; ties keep firm order."""
    if fsri is None or len(fsri) == 0:
        return pd.DataFrame({c: [] for c in FSRI_RANK_COLUMNS})
    order = np.lexsort((fsri.firms, -fsri.fsri))
    firms = fsri.firms[order]
    return pd.DataFrame({
        "rank": np.arange(1, order.shape[0] + 1),
        "firm": firms,
        "FSRI": fsri.fsri[order],
        "FSRI_eq": fsri.fsri_eq[order],
        "FSRI_l": fsri.fsri_l[order],
        "FSRI_dir": fsri.fsri_dir[order],
        "FSRI_indir": fsri.fsri_indir[order],
        "ESRI": fsri.esri[order],
        "s_out": np.asarray(s_out)[firms],
        "loan_total": np.asarray(loan_total)[firms],
    })


def esri_table(esri, firms, s_out) -> pd.DataFrame:
    if esri is None:
        return pd.DataFrame({c: [] for c in ESRI_COLUMNS})
    firms = np.asarray(firms)
    return pd.DataFrame({"firm": firms, "ESRI": esri.esri, "s_out": np.asarray(s_out)[firms],
                         "iterations": esri.iterations, "converged": esri.converged})


def _measure_cols(prefix, ms):
    return {f"EL_{prefix}": [m.el for m in ms], f"VaR_{prefix}": [m.var for m in ms],
            f"ES_{prefix}": [m.es for m in ms]}


BANK_RISK_COLUMNS = ("bank", "clients", "EL_dir", "VaR_dir", "ES_dir", "EL_adj", "VaR_adj",
                     "ES_adj", "rho_EL", "rho_VaR", "rho_ES", "EL_pd", "VaR_pd", "ES_pd",
                     "rho_pd_EL", "rho_pd_VaR", "rho_pd_ES")


def bank_risk_table(dist=None, q: float = 0.95, clients=None, pd_dist=None,
                    client_threshold: int = 0) -> pd.DataFrame:
    """Per-bank risk measures, amplification factors and their averages.

    Rows are the banks, then ``system`` (equity-weighted losses) and ``mean``
    (average ratio over banks with at least ``client_threshold`` clients;
    undefined ratios are left out). ``*_pd`` columns hold the run with
    contagion-adjusted default probabilities, compared against the direct
    losses of ``dist``.
    """
    from .stress import amplification, risk_table

    if dist is None or dist.count == 0:
        return pd.DataFrame({c: [] for c in BANK_RISK_COLUMNS})
    d_bank, d_sys = risk_table(dist, q, "direct")
    a_bank, a_sys = risk_table(dist, q, "adjusted")
    m = len(d_bank)
    clients = np.zeros(m, dtype=np.int64) if clients is None else np.asarray(clients)
    include = clients >= client_threshold
    amp = amplification(d_bank, a_bank, d_sys, a_sys, include=include)
    rows = {"bank": [str(k) for k in range(m)] + ["system", "mean"],
            "clients": list(clients) + [int(clients.sum()), int(include.sum())]}
    blank = [np.nan, np.nan]
    for key, vals in _measure_cols("dir", d_bank + [d_sys]).items():
        rows[key] = vals + [np.nan]
    for key, vals in _measure_cols("adj", a_bank + [a_sys]).items():
        rows[key] = vals + [np.nan]
    nan = lambda v: np.nan if v is None else v
    for name in ("el", "var", "es"):
        col = {"el": "EL", "var": "VaR", "es": "ES"}[name]
        rows[f"rho_{col}"] = [nan(v) for v in getattr(amp, name)] + \
            [nan(amp.system[name]), nan(getattr(amp, f"mean_{name}"))]
    if pd_dist is not None and pd_dist.count:
        p_bank, p_sys = risk_table(pd_dist, q, "adjusted")
        pamp = amplification(d_bank, p_bank, d_sys, p_sys, include=include)
        for key, vals in _measure_cols("pd", p_bank + [p_sys]).items():
            rows[key] = vals + [np.nan]
        for name in ("el", "var", "es"):
            col = {"el": "EL", "var": "VaR", "es": "ES"}[name]
            rows[f"rho_pd_{col}"] = [nan(v) for v in getattr(pamp, name)] + \
                [nan(pamp.system[name]), nan(getattr(pamp, f"mean_{name}"))]
    else:
        for key in BANK_RISK_COLUMNS[11:]:
            rows[key] = [np.nan] * m + blank
    return pd.DataFrame(rows, columns=list(BANK_RISK_COLUMNS))


def loss_histogram_table(series: dict, bins: int = 40) -> pd.DataFrame:
    """Histograms of loss samples; ``series`` maps a name to a LossDistribution.

    Every bank (and the system) gets one set of bin edges shared by all series,
    spanning 0 to the largest loss seen.
    """
    series = {k: v for k, v in series.items() if v is not None and v.count}
    if not series:
        return pd.DataFrame({c: [] for c in HISTOGRAM_COLUMNS})
    first = next(iter(series.values()))
    m = first.direct.shape[1]
    out = []
    for b in list(range(m)) + ["system"]:
        samples = {}
        for name, dist in series.items():
            if b == "system":
                samples[f"{name}_direct"] = dist.system_direct
                samples[f"{name}_adjusted"] = dist.system_adjusted
            else:
                samples[f"{name}_direct"] = dist.direct[:, b]
                samples[f"{name}_adjusted"] = dist.adjusted[:, b]
        top = max(float(s.max()) for s in samples.values())
        edges = np.linspace(0.0, top if top > 0 else 1.0, bins + 1)
        for name, s in samples.items():
            counts, _ = np.histogram(s, bins=edges)
            out.append(pd.DataFrame({"series": name, "bank": str(b), "bin_lo": edges[:-1],
                                     "bin_hi": edges[1:], "count": counts}))
    return pd.concat(out, ignore_index=True)[list(HISTOGRAM_COLUMNS)]


def adjusted_pd_table(adj) -> pd.DataFrame:
    if adj is None:
        return pd.DataFrame({c: [] for c in ADJUSTED_PD_COLUMNS})
    return pd.DataFrame({
        "firm": np.arange(adj.pd.shape[0]),
        "pd": adj.pd,
        "q": adj.q,
        "n_critical": adj.n_critical,
        "critical": [" ".join(str(int(j)) for j in c) for c in adj.critical],
    })


def read_adjusted_pd(path, n: int | None = None) -> np.ndarray:
    """The ``q`` column of an adjusted_pd.csv, in firm order."""
    df = read_table(path, ("firm", "q"))
    order = _dense_index(df, "firm", path)
    q = df["q"].to_numpy(dtype=float)[order]
    if n is not None and q.shape[0] != n:
        raise IngestError(path, f"has {q.shape[0]} firms, the dataset has {n}")
    bad = np.flatnonzero((q < 0) | (q > 1))
    if bad.size:
        r = int(order[bad[0]])
        raise IngestError(path, f"q must lie in [0, 1], got {q[bad[0]]}",
                          line=df.attrs["lines"][r], column="q")
    return q


def write_report(df: pd.DataFrame, path, config: RunConfig, report: str,
                 extra: dict | None = None) -> Path:
    return _write_csv(df, Path(path), provenance(config, report, extra))


def emit_reports(out_dir, config: RunConfig, *, fsri=None, params=None, banks=None,
                 dist=None, pd_dist=None, adjusted=None,
                 extra: dict | None = None) -> dict[str, Path]:
    """Write the four standard reports; missing results give headers-only files."""
    out = Path(out_dir)
    s_out = params.s_out if params is not None else None
    loan_total = banks.loan_total() if banks is not None else None
    clients = banks.clients_per_bank() if banks is not None else None
    tables = {
        "fsri_rank": fsri_rank_table(fsri, s_out, loan_total),
        "bank_risk": bank_risk_table(dist, config.q, clients, pd_dist,
                                     config.bank_client_threshold),
        "loss_histograms": loss_histogram_table({"idiosyncratic": dist, "pd_adjusted": pd_dist},
                                                config.histogram_bins),
        "adjusted_pd": adjusted_pd_table(adjusted),
    }
    return {name: write_report(df, out / f"{name}.csv", config, name, extra)
            for name, df in tables.items()}
