"""
Simulation presets, dataset files, replicate fitting and aggregate reports.

Dataset files are JSON objects::

    {"n": 3, "p": 4, "count": 100,
     "observations": [[x11, x12, ..., x34], ...],   # row-major, one list per matrix
     "location": [[...], ...]}                       # optional n x p matrix

A long-format CSV with header ``obs,row,col,value`` (zero-based indices) is
accepted as well.
"""

import csv
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ecm import FitConfig, fit
from .errors import DomainError, MatskewError
from .matnorm import MatrixParamSet
from .matrixdist import FAMILIES, GH, NIG, VG, MatrixSkewModel, mixing_from_dict, sample
from .rng import spawn_rngs

__all__ = [
    "PRESETS",
    "ValidationError",
    "SimulationConfig",
    "simulate_replicates",
    "write_dataset",
    "read_dataset",
    "read_long_csv",
    "fit_replicates",
    "AggregateReport",
    "column_histograms",
    "peak_bin_fraction",
    "column_skewness",
    "worker_count",
]

LOCATION_1 = [[0, 1, -1, 0], [1, 0, 0, -1], [0, 1, -1, 0]]
SKEW_1 = [[1, -1, 0, 1], [1, -1, 0, 1], [1, -1, 0, 1]]
LOCATION_2 = [[-5, 0, 0, 1], [-2, 1, 3, 0], [0, 0, 6, 1]]
SKEW_2 = [[1, -1, 0, 1], [0.5, -1, 0, -0.5], [0, -1, 0, 0]]
ROW_SCALE = [[1.0, 0.5, 0.1], [0.5, 1.0, 0.5], [0.1, 0.5, 1.0]]
COLUMN_SCALE = [[1.0, 0, 0, 0], [0, 1.0, 0.5, 0.5], [0, 0.5, 1.0, 0.1], [0, 0.5, 0.1, 1.0]]

_SIM_MIXING = {
    "sim1": {"gh": GH(2.0, 2.0), "vg": VG(2.0), "nig": NIG(4.0)},
    "sim2": {"gh": GH(2.0, -2.0), "vg": VG(4.0), "nig": NIG(2.0)},
}
_SIM_MEANS = {"sim1": (LOCATION_1, SKEW_1), "sim2": (LOCATION_2, SKEW_2)}

PRESETS = tuple(f"{s}-{f}" for s in ("sim1", "sim2") for f in ("gh", "vg", "nig"))

LAMBDA_DISPERSION_LIMIT = 1.0


class ValidationError(DomainError):
    """Malformed input file or configuration."""


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    name: str
    params: MatrixParamSet
    mixing: object
    replicates: int = 50
    observations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 1 or self.observations < 1:
            raise ValidationError("replicates and observations must be >= 1")

    @property
    def family(self):
        return self.mixing.tag

    @property
    def model(self):
        return MatrixSkewModel(self.params, self.mixing)

    @classmethod
    def from_preset(cls, name, replicates=50, observations=100, seed=0):
        try:
            sim, family = name.split("-")
            loc, skew = _SIM_MEANS[sim]
            mixing = _SIM_MIXING[sim][family]
        except (ValueError, KeyError):
            raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
        params = MatrixParamSet(loc, skew, ROW_SCALE, COLUMN_SCALE)
        return cls(name, params, mixing, int(replicates), int(observations), int(seed))

    @classmethod
    def from_dict(cls, d):
        """Build from a parsed config file.

        Either ``{"preset": name, ...}`` or an explicit model with keys
        ``m, a, sigma, psi, mixing`` (``mixing`` as written by ``to_dict`` of
        a mixing law).  ``replicates``, ``observations``, ``seed`` and
        ``name`` are optional.
        """
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        opts = {k: d[k] for k in ("replicates", "observations", "seed") if k in d}
        try:
            if "preset" in d:
                return cls.from_preset(d["preset"], **opts)
            params = MatrixParamSet(d["m"], d["a"], d["sigma"], d["psi"])
            return cls(d.get("name", d["mixing"].get("family", "custom")), params,
                       mixing_from_dict(d["mixing"]), **{k: int(v) for k, v in opts.items()})
        except KeyError as exc:
            raise ValidationError(f"config is missing key {exc}") from None
        except (TypeError, ValueError, MatskewError) as exc:
            raise ValidationError(f"invalid config: {exc}") from None


def simulate_replicates(config):
    """One ``(observations, n, p)`` array per replicate, replicate ``k`` on child stream ``k``."""
    model = config.model
    return [sample(rng, model, config.observations) for rng in spawn_rngs(config.seed, config.replicates)]


def _atomic_write(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj):
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_dataset(path, x, location=None):
    x = np.asarray(x, dtype=float)
    count, n, p = x.shape
    doc = {"n": n, "p": p, "count": count, "observations": x.reshape(count, n * p).tolist()}
    if location is not None:
        doc["location"] = np.asarray(location, dtype=float).tolist()
    _atomic_write(path, dump_json(doc))


def _parse_dataset(doc, source):
    if not isinstance(doc, dict):
        raise ValidationError(f"{source}: top level must be a JSON object")
    try:
        n, p = int(doc["n"]), int(doc["p"])
        obs = doc["observations"]
    except KeyError as exc:
        raise ValidationError(f"{source}: missing key {exc}") from None
    except (TypeError, ValueError):
        raise ValidationError(f"{source}: n and p must be integers") from None
    if n < 1 or p < 1:
        raise ValidationError(f"{source}: n and p must be >= 1")
    if not isinstance(obs, list) or not obs:
        raise ValidationError(f"{source}: observations must be a non-empty list")
    for i, row in enumerate(obs):
        if not isinstance(row, list) or len(row) != n * p:
            raise ValidationError(f"{source}: observation {i} must be a list of {n * p} numbers")
    try:
        x = np.array(obs, dtype=float).reshape(len(obs), n, p)
    except (TypeError, ValueError):
        raise ValidationError(f"{source}: observations must be numeric") from None
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{source}: observations must be finite")
    if "count" in doc and doc["count"] != len(obs):
        raise ValidationError(f"{source}: count is {doc['count']} but {len(obs)} observations given")
    location = doc.get("location")
    if location is not None:
        try:
            location = np.array(location, dtype=float)
        except (TypeError, ValueError):
            raise ValidationError(f"{source}: location must be numeric") from None
        if location.shape != (n, p):
            raise ValidationError(f"{source}: location must be {n} x {p}")
    return x, location


def read_dataset(path):
    """``(observations, location or None)`` from a JSON dataset or long-format CSV."""
    path = os.fspath(path)
    if path.lower().endswith(".csv"):
        return read_long_csv(path), None
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    return _parse_dataset(doc, path)


def read_long_csv(path):
    """Read ``obs,row,col,value`` rows (zero-based) into an ``(N, n, p)`` array."""
    entries = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header] != ["obs", "row", "col", "value"]:
                raise ValidationError(f"{path}:1: header must be obs,row,col,value")
            for line_no, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                try:
                    o, r, c = (int(v) for v in rec[:3])
                    val = float(rec[3])
                    if len(rec) != 4 or min(o, r, c) < 0 or not math.isfinite(val):
                        raise ValueError
                except (ValueError, IndexError):
                    raise ValidationError(f"{path}:{line_no}: malformed record {rec!r}") from None
                if (o, r, c) in entries:
                    raise ValidationError(f"{path}:{line_no}: duplicate cell {(o, r, c)}")
                entries[(o, r, c)] = val
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    if not entries:
        raise ValidationError(f"{path}: no records")
    keys = np.array(list(entries))
    count, n, p = (int(v) + 1 for v in keys.max(axis=0))
    if len(entries) != count * n * p:
        raise ValidationError(f"{path}: expected {count * n * p} cells, found {len(entries)}")
    x = np.empty((count, n, p))
    for (o, r, c), val in entries.items():
        x[o, r, c] = val
    return x


def worker_count(requested=None):
    """Worker processes: ``requested``, else ``MATSKEW_THREADS``, else the CPU count."""
    if requested is None:
        env = os.environ.get("MATSKEW_THREADS")
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ValidationError(f"MATSKEW_THREADS must be an integer, got {env!r}") from None
    cpus = os.cpu_count() or 1
    if requested is None:
        return cpus
    if requested < 1:
        raise ValidationError("worker count must be >= 1")
    return min(requested, cpus)


def _fit_one(job):
    index, x, family, epsilon, max_iter, init_seed = job
    cfg = FitConfig(family=family, epsilon=epsilon, max_iter=max_iter, init_seed=init_seed)
    try:
        res = fit(x, cfg)
    except MatskewError as exc:
        return {"replicate": index, "status": "failed", "error": str(exc)}
    out = res.to_dict()
    out["replicate"] = index
    out["status"] = "converged" if res.converged else "max_iter"
    return out


def fit_replicates(datasets, family, epsilon=1e-6, max_iter=2000, init_seed=0, workers=1):
    """Fit every dataset; results come back in input order whatever the worker count."""
    jobs = [(k, x, family, epsilon, max_iter, init_seed) for k, x in enumerate(datasets)]
    if workers <= 1 or len(jobs) <= 1:
        return [_fit_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_fit_one, jobs))


_MIXING_KEYS = {"gh": ("lambda", "omega"), "vg": ("gamma",), "nig": ("gamma_tilde",)}
_MATRIX_KEYS = ("m", "a", "sigma", "psi")


@dataclass
class AggregateReport:
    """Componentwise means and population SDs over converged replicates."""

    name: str
    family: str
    dims: tuple
    truth: dict
    means: dict
    sds: dict
    replicates: list

    @classmethod
    def from_fits(cls, name, family, dims, truth, fits):
        done = [f for f in fits if f["status"] == "converged"]
        means, sds = {}, {}
        keys = _MATRIX_KEYS + _MIXING_KEYS[family]
        for key in keys:
            if key in _MATRIX_KEYS:
                vals = np.array([f[key] for f in done], dtype=float)
            else:
                vals = np.array([f["mixing"][key] for f in done], dtype=float)
            if len(vals):
                means[key] = vals.mean(axis=0).tolist()
                sds[key] = vals.std(axis=0).tolist()
            else:
                means[key] = sds[key] = None
        diag = []
        for f in fits:
            row = {"replicate": f["replicate"], "status": f["status"]}
            if f["status"] == "failed":
                row["error"] = f["error"]
            else:
                row["iterations"] = f["iterations"]
                row["loglik"] = f["loglik"]
                row.update({k: f["mixing"][k] for k in _MIXING_KEYS[family]})
            diag.append(row)
        return cls(name, family, tuple(dims), truth, means, sds, diag)

    @property
    def counts(self):
        out = {"converged": 0, "max_iter": 0, "failed": 0}
        for r in self.replicates:
            out[r["status"]] += 1
        return out

    @property
    def lambda_dispersion_high(self):
        if self.family != "gh" or self.sds.get("lambda") is None or self.counts["converged"] < 2:
            return None
        return bool(self.sds["lambda"] > LAMBDA_DISPERSION_LIMIT)

    def to_dict(self):
        return {
            "name": self.name,
            "family": self.family,
            "n": self.dims[0],
            "p": self.dims[1],
            "truth": self.truth,
            "mean": self.means,
            "sd": self.sds,
            "counts": self.counts,
            "lambda_dispersion_high": self.lambda_dispersion_high,
            "lambda_dispersion_limit": LAMBDA_DISPERSION_LIMIT if self.family == "gh" else None,
            "replicates": self.replicates,
        }

    def to_text(self, digits=4):
        """Plain table: each estimate's mean with its SD underneath."""
        fmt = f"{{:{digits + 6}.{digits}f}}"
        c = self.counts
        lines = [
            f"{self.name}: family {self.family}, {len(self.replicates)} replicates "
            f"({c['converged']} converged, {c['max_iter']} hit max_iter, {c['failed']} failed)",
            "means and population SDs over converged replicates",
            "",
        ]
        for key in _MATRIX_KEYS:
            lines.append(f"{key.upper()} mean (sd)")
            if self.means[key] is None:
                lines.append("  n/a")
            else:
                for mrow, srow in zip(self.means[key], self.sds[key]):
                    lines.append("  " + " ".join(fmt.format(v) for v in mrow)
                                 + "   (" + " ".join(fmt.format(v) for v in srow) + ")")
            lines.append("")
        for key in _MIXING_KEYS[self.family]:
            if self.means[key] is None:
                lines.append(f"{key}: n/a")
            else:
                lines.append(f"{key}: {fmt.format(self.means[key]).strip()} "
                             f"({fmt.format(self.sds[key]).strip()})")
        if self.family == "gh":
            flag = self.lambda_dispersion_high
            lines.append(f"lambda dispersion above {LAMBDA_DISPERSION_LIMIT}: "
                         f"{'n/a' if flag is None else ('yes' if flag else 'no')}")
        lines.append("")
        lines.append("replicate  status     iterations  loglik")
        for r in self.replicates:
            if r["status"] == "failed":
                lines.append(f"{r['replicate']:9d}  failed     {r['error']}")
            else:
                lines.append(f"{r['replicate']:9d}  {r['status']:<9s}  {r['iterations']:10d}  {r['loglik']:.6f}")
        return "\n".join(lines) + "\n"


def column_histograms(x, bins=30, value_range=None):
    """Per-column histograms pooling all rows and observations.

    Returns a list with ``(edges, counts)`` per column.  ``value_range`` is
    either None (each column spans its own min..max), one ``(lo, hi)`` pair,
    or a list of pairs, one per column.
    """
    x = np.asarray(x, dtype=float)
    p = x.shape[-1]
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    if value_range is None or np.ndim(value_range) == 1:
        ranges = [value_range] * p
    else:
        ranges = list(value_range)
        if len(ranges) != p:
            raise ValidationError(f"need {p} column ranges, got {len(ranges)}")
    out = []
    for j in range(p):
        vals = x[..., j].ravel()
        rng = ranges[j]
        if rng is None:
            lo, hi = float(vals.min()), float(vals.max())
            if lo == hi:
                lo, hi = lo - 0.5, hi + 0.5
            rng = (lo, hi)
        counts, edges = np.histogram(vals, bins=bins, range=rng)
        out.append((edges, counts))
    return out


def peak_bin_fraction(histograms):
    """Mean over columns of the tallest bin's share of that column's count."""
    return float(np.mean([c.max() / max(c.sum(), 1) for _, c in histograms]))


def column_skewness(x, location, column):
    """Third standardized moment of ``X[:, :, column] - location[:, column]``, rows pooled."""
    d = (np.asarray(x, dtype=float) - np.asarray(location, dtype=float))[..., column].ravel()
    m2 = float(np.mean(d * d))
    return float(np.mean(d ** 3)) / m2 ** 1.5


def histogram_csv(histograms, location=None):
    lines = ["column,bin_left,bin_right,count,location"]
    for j, (edges, counts) in enumerate(histograms):
        loc = "" if location is None else repr(float(np.mean(np.asarray(location)[:, j])))
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            lines.append(f"{j + 1},{float(lo)!r},{float(hi)!r},{int(c)},{loc}")
    return "\n".join(lines) + "\n"


def family_names():
    return tuple(FAMILIES)
