"""CSV and JSON serialisation for densities, pmfs, sweeps and fit reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from typing import Sequence

import numpy as np

from . import __version__
from .dist import CountPmf, DiscretizedDensity


def _fmt(x: float) -> str:
    # repr round-trips floats exactly and is stable across runs
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return repr(x)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def density_csv(dens: DiscretizedDensity) -> str:
    with np.errstate(divide="ignore"):
        logm = np.log10(dens.mass)
    return _csv(["support", "mass", "log10_mass"], zip(dens.grid, dens.mass, logm))


def pmf_csv(pmf: CountPmf) -> str:
    return _csv(["support", "mass", "log10_mass"], zip(pmf.support, pmf.probs, pmf.log_probs))


def density_envelope(dens: DiscretizedDensity) -> dict:
    return {
        "kind": "discretized_density",
        "version": __version__,
        "model": dict(dens.params),
        "grid": {"kind": dens.grid_kind.value, "bins": len(dens)},
        "truncation_mass": dens.truncated,
        "support": dens.grid.tolist(),
        "mass": dens.mass.tolist(),
    }


def pmf_envelope(pmf: CountPmf) -> dict:
    return {
        "kind": "count_pmf",
        "version": __version__,
        "model": dict(pmf.params),
        "grid": {"kind": "integer", "k_max": pmf.k_max},
        "truncation_mass": pmf.truncation,
        "support": pmf.support.tolist(),
        "mass": pmf.probs.tolist(),
    }


def pmf_from_envelope(doc: dict) -> CountPmf:
    if doc.get("kind") != "count_pmf":
        raise ValueError("not a count_pmf envelope")
    return CountPmf(np.asarray(doc["mass"], dtype=float), params=doc.get("model", {}))


def sweep_csv(points) -> str:
    rows = []
    for p in points:
        for k, v in p.histogram.counts.items():
            rows.append((p.energy, k, v))
    return _csv(["energy", "k", "frequency"], rows)


def profile_csv(fit) -> str:
    return _csv(["m", "objective"], fit.profile)


def config_digest(config: dict) -> str:
    """Stable digest of a JSON-serialisable configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")
