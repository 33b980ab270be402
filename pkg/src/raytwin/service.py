"""Throughput mapping, service-threshold coverage, CDFs and macro-diversity margins.

Feasibility against a rate threshold r is decided in the SINR domain,
``sinr >= 2**(r/B) - 1``. It is the same set as ``B*log2(1+sinr) >= r`` in
exact arithmetic; in floating point it keeps the boundary sharp to one ulp of
SINR, which the rate domain cannot do (``1 + sinr`` absorbs tiny SINR steps).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

XR_MIN = 30e6
URLLC = 100e6
V2X = 700e6
XR_PREMIUM = 1.7e9


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class Threshold:
    label: str
    rate: float  # bit/s


@dataclass(frozen=True)
class ServiceThresholds:
    items: tuple

    def __post_init__(self):
        items = tuple(t if isinstance(t, Threshold) else Threshold(*t) for t in self.items)
        if not items:
            raise ValueError("at least one service threshold is required")
        labels = [t.label for t in items]
        if len(set(labels)) != len(labels):
            raise ValueError(f"threshold labels must be unique: {labels}")
        for t in items:
            if not (t.rate > 0 and math.isfinite(t.rate)):
                raise ValueError(f"threshold {t.label!r}: rate must be positive and finite")
        object.__setattr__(self, "items", items)

    @classmethod
    def default(cls):
        return cls((Threshold("XR-min", XR_MIN), Threshold("URLLC", URLLC), Threshold("V2X", V2X),
                    Threshold("XR-premium", XR_PREMIUM)))

    def sorted(self):
        return ServiceThresholds(tuple(sorted(self.items, key=lambda t: t.rate)))

    def by_label(self, label):
        for t in self.items:
            if t.label == label:
                return t
        raise KeyError(label)

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)


def spectral_efficiency(sinr_linear):
    """log2(1 + sinr) in bit/s/Hz."""
    s = np.asarray(sinr_linear, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("sinr must be non-negative")
    c = np.log2(1.0 + s)
    return float(c) if c.ndim == 0 else c


def throughput(c, bandwidth):
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    r = np.asarray(c, dtype=np.float64) * bandwidth
    return float(r) if r.ndim == 0 else r


def required_sinr(rate, bandwidth):
    """Smallest linear SINR whose throughput reaches ``rate``."""
    with np.errstate(over="ignore"):
        q = np.exp2(np.asarray(rate, dtype=np.float64) / bandwidth) - 1.0
    return float(q) if q.ndim == 0 else q


@dataclass
class ThroughputField:
    rate: np.ndarray  # bit/s, NaN outside valid cells
    sinr_linear: np.ndarray
    bandwidth: float
    valid: np.ndarray

    @classmethod
    def from_sinr(cls, sinr_linear, bandwidth, valid=None):
        s = np.asarray(sinr_linear, dtype=np.float64)
        if valid is None:
            valid = ~np.isnan(s)
        valid = np.asarray(valid, bool)
        s = np.where(valid, s, np.nan)
        with np.errstate(invalid="ignore"):
            rate = np.where(valid, bandwidth * np.log2(1.0 + np.where(valid, s, 0.0)), np.nan)
        return cls(rate, s, float(bandwidth), valid)

    @classmethod
    def from_fields(cls, fields, bandwidth):
        with np.errstate(over="ignore"):
            s = 10.0 ** (fields.sinr_best_db / 10.0)
        return cls.from_sinr(s, bandwidth, fields.valid)

    def feasible(self, rate):
        return self.valid & (np.where(self.valid, self.sinr_linear, -1.0)
                             >= required_sinr(rate, self.bandwidth))


def threshold_mask(field_, rate):
    """Cells meeting ``rate`` (inclusive) and their share of the valid cells."""
    if not rate > 0:
        raise ValueError("rate threshold must be positive")
    n = int(field_.valid.sum())
    if n == 0:
        raise ReportError("no valid cells")
    mask = field_.feasible(rate)
    return mask, int(mask.sum()) / n


@dataclass(frozen=True)
class EmpiricalCDF:
    """Right-continuous empirical distribution of per-cell rate.

    ``values``/``fractions`` tabulate P(R <= value) over the distinct rates.
    Evaluation at an arbitrary rate goes through the SINR domain, like
    ``threshold_mask``, so ``1 - cdf.left(r)`` is exactly the mask fraction.
    """

    values: np.ndarray  # distinct sorted rates
    fractions: np.ndarray  # P(R <= value)
    n: int
    sinr: np.ndarray = field(repr=False, default=None)  # sorted SINR of the valid cells
    bandwidth: float = 1.0

    def __call__(self, r):
        """P(R <= r)."""
        q = required_sinr(r, self.bandwidth)
        return int(np.searchsorted(self.sinr, q, side="right")) / self.n

    def left(self, r):
        """P(R < r), the left limit."""
        q = required_sinr(r, self.bandwidth)
        return int(np.searchsorted(self.sinr, q, side="left")) / self.n


def empirical_cdf(field_):
    vals = field_.rate[field_.valid]
    if vals.size == 0:
        raise ReportError("empirical CDF needs at least one valid cell")
    uniq, counts = np.unique(vals, return_counts=True)
    return EmpiricalCDF(uniq, np.cumsum(counts) / vals.size, int(vals.size),
                        np.sort(field_.sinr_linear[field_.valid]), field_.bandwidth)


def band_partition(nested, total=1):
    """Split nested 'at least' shares into disjoint bands.

    ``nested`` are shares for ascending thresholds (so non-increasing). Returns
    ``(bands, below)`` where ``bands[i]`` lies between threshold i and i+1 and
    the last band is above the top threshold. Exact for integers, Fractions and
    Decimals.
    """
    nested = list(nested)
    if not nested:
        raise ValueError("need at least one share")
    for a, b in zip(nested, nested[1:]):
        if b > a:
            raise ValueError("shares must be non-increasing with the threshold")
    bands = [a - b for a, b in zip(nested, nested[1:])] + [nested[-1]]
    return bands, total - nested[0]


@dataclass
class ServiceReport:
    labels: tuple
    rates: tuple
    fractions: tuple
    counts: tuple
    band_labels: tuple
    band_fractions: tuple
    below_fraction: float
    n_valid: int
    cdf: EmpiricalCDF = field(repr=False)
    bandwidth: float = 0.0


def coverage_report(field_, thresholds):
    """Nested coverage fractions and the disjoint bands between thresholds."""
    th = list(thresholds)
    rates = [t.rate for t in th]
    if rates != sorted(rates):
        raise ValueError("thresholds must be sorted by ascending rate")
    cdf = empirical_cdf(field_)
    n = cdf.n
    counts = [int(threshold_mask(field_, t.rate)[0].sum()) for t in th]
    bands, below = band_partition(counts, n)
    names = [t.label for t in th]
    band_labels = tuple(f"[{a}, {b})" for a, b in zip(names, names[1:])) + (f">= {names[-1]}",)
    return ServiceReport(tuple(names), tuple(rates), tuple(c / n for c in counts), tuple(counts),
                         band_labels, tuple(b / n for b in bands), below / n, n, cdf,
                         field_.bandwidth)


UNAVAILABLE = "macro-diversity unavailable"


@dataclass
class MacroDiversityReport:
    available: bool
    margin_db: np.ndarray  # NaN where undefined, +inf where censored
    n_defined: int
    n_censored: int
    cdf_values: np.ndarray
    cdf_fractions: np.ndarray
    quantiles: dict
    within_3db: float
    within_6db: float
    above_6db: float
    flag: str = ""


def macro_diversity(fields, urllc_rate, bandwidth):
    """Best minus second-best SINR on the cells that meet the URLLC rate."""
    shape = fields.valid.shape
    if fields.n_tx < 2:
        return MacroDiversityReport(False, np.full(shape, np.nan), 0, 0, np.zeros(0), np.zeros(0),
                                    {}, math.nan, math.nan, math.nan, UNAVAILABLE)
    tf = ThroughputField.from_fields(fields, bandwidth)
    defined = tf.feasible(urllc_rate)
    best = fields.sinr_best_db
    second = fields.sinr_second_db
    margin = np.full(shape, np.nan)
    censored = defined & np.isneginf(second)
    finite = defined & ~censored
    margin[finite] = best[finite] - second[finite]
    margin[censored] = np.inf
    vals = np.sort(margin[finite])
    n_def = int(defined.sum())
    if vals.size:
        uniq, cnt = np.unique(vals, return_counts=True)
        cdf_f = np.cumsum(cnt) / n_def  # censored cells sit above every finite margin
        q = {f"p{int(p * 100)}": float(np.quantile(vals, p)) for p in (0.1, 0.5, 0.9)}
    else:
        uniq, cdf_f, q = np.zeros(0), np.zeros(0), {}
    if n_def:
        w3 = int((vals <= 3.0).sum()) / n_def
        w6 = int((vals <= 6.0).sum()) / n_def
        a6 = 1.0 - w6
    else:
        w3 = w6 = a6 = math.nan
    return MacroDiversityReport(True, margin, n_def, int(censored.sum()), uniq, cdf_f, q, w3, w6, a6)


# -- serialisation -------------------------------------------------------------

def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


CDF_LEVELS = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)


def report_to_dict(service, macro=None, meta=None):
    doc = {"meta": dict(meta or {})}
    doc["service"] = {
        "bandwidth_hz": service.bandwidth,
        "n_valid_cells": service.n_valid,
        "thresholds": [{"label": lab, "rate_bps": r, "cells": c, "fraction": f}
                       for lab, r, c, f in zip(service.labels, service.rates, service.counts,
                                               service.fractions)],
        "bands": [{"band": b, "fraction": f}
                  for b, f in zip(service.band_labels, service.band_fractions)],
        "below_lowest_fraction": service.below_fraction,
        "cdf": {"rate_bps": [float(v) for v in service.cdf.values],
                "fraction": [float(v) for v in service.cdf.fractions]},
    }
    if macro is not None:
        doc["macro_diversity"] = {
            "available": macro.available,
            "flag": macro.flag,
            "defined_cells": macro.n_defined,
            "censored_cells": macro.n_censored,
            "quantiles_db": {k: _num(v) for k, v in macro.quantiles.items()},
            "fraction_within_3db": _num(macro.within_3db),
            "fraction_within_6db": _num(macro.within_6db),
            "fraction_above_6db": _num(macro.above_6db),
            "cdf": {"margin_db": [float(v) for v in macro.cdf_values],
                    "fraction": [float(v) for v in macro.cdf_fractions]},
        }
    return doc


def report_to_json(service, macro=None, meta=None):
    return json.dumps(report_to_dict(service, macro, meta), indent=2, sort_keys=True) + "\n"


def _rate_str(r):
    if r >= 1e9:
        return f"{r / 1e9:.4g} Gbps"
    return f"{r / 1e6:.4g} Mbps"


def report_to_text(service, macro=None, meta=None):
    out = []
    for k, v in (meta or {}).items():
        out.append(f"{k}: {v}")
    if out:
        out.append("")
    out.append(f"valid cells: {service.n_valid}")
    out.append(f"bandwidth: {service.bandwidth / 1e6:.4g} MHz")
    out.append("")
    out.append("coverage (rate >= threshold)")
    for lab, r, c, f in zip(service.labels, service.rates, service.counts, service.fractions):
        out.append(f"  {lab:<12} {_rate_str(r):>12}  {f:.4f}  ({c} cells)")
    out.append("bands")
    for b, f in zip(service.band_labels, service.band_fractions):
        out.append(f"  {b:<28} {f:.4f}")
    out.append(f"  {'below ' + service.labels[0]:<28} {service.below_fraction:.4f}")
    out.append("")
    out.append("throughput CDF")
    vals = service.cdf.values
    for p in CDF_LEVELS:
        i = min(int(np.searchsorted(service.cdf.fractions, p, side="left")), len(vals) - 1)
        out.append(f"  F = {p:.2f}  at  {_rate_str(float(vals[i]))}")
    for lab, r in zip(service.labels, service.rates):
        out.append(f"  F({_rate_str(r)}) = {service.cdf(r):.4f}")
    if macro is not None:
        out.append("")
        out.append("macro-diversity margin (best - second SINR, URLLC cells)")
        if not macro.available:
            out.append(f"  {macro.flag}")
        else:
            out.append(f"  defined cells: {macro.n_defined}  censored (no second server): "
                       f"{macro.n_censored}")
            for k, v in macro.quantiles.items():
                out.append(f"  {k}: {v:.4f} dB")
            if macro.n_defined:
                out.append(f"  within 3 dB: {macro.within_3db:.4f}")
                out.append(f"  within 6 dB: {macro.within_6db:.4f}")
                out.append(f"  above 6 dB: {macro.above_6db:.4f}")
    return "\n".join(out) + "\n"
