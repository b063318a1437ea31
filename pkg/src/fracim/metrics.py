"""Range-Doppler map quality: MSE, SINR, EVM and CFAR detection scores.

Both maps are scaled to unit peak magnitude before any comparison.  Object
cells are the ground-truth cells plus their 3x3 neighbourhood.  Detection
uses a 2-D cell-averaging CFAR on ``|test|^2`` followed by local-maximum
picking; a detection within one bin (range and Doppler) of an object counts
as a hit.
"""
from dataclasses import asdict, dataclass
from typing import List, Sequence, Tuple
import csv

import numpy as np
from scipy.ndimage import maximum_filter, uniform_filter


@dataclass(frozen=True)
class MetricConfig:
    train: int = 8
    guard: int = 2
    pfa: float = 1e-4
    match_radius: int = 1
    neighbourhood: int = 1


@dataclass(frozen=True)
class FrameMetrics:
    mse: float
    sinr_db: float
    evm: float
    tpr: float
    far: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def as_row(self):
        return asdict(self)


@dataclass(frozen=True)
class GroundTruthObjects:
    """``(range_bin, doppler_bin, amplitude)`` per object; Doppler bins are signed."""

    cells: Tuple[Tuple[int, int, complex], ...] = ()

    def map_cells(self, shape):
        """Map coordinates with zero Doppler at column ``n_doppler // 2``."""
        n_range, n_dop = shape
        out = []
        for rb, db, _ in self.cells:
            if not 0 <= rb < n_range:
                raise ValueError(f"range bin {rb} outside map with {n_range} bins")
            out.append((int(rb), int(db + n_dop // 2) % n_dop))
        return out

    @classmethod
    def from_frame(cls, frame_cfg):
        from .sigmodel import object_cells

        return cls(tuple(object_cells(frame_cfg)))


def normalize(rd):
    rd = np.asarray(rd)
    peak = np.abs(rd).max()
    return rd / peak if peak > 0 else rd


def object_mask(shape, cells, radius=1):
    mask = np.zeros(shape, dtype=bool)
    for r, d in cells:
        rows = np.arange(r - radius, r + radius + 1)
        rows = rows[(rows >= 0) & (rows < shape[0])]
        cols = np.arange(d - radius, d + radius + 1) % shape[1]
        mask[np.ix_(rows, cols)] = True
    return mask


def ca_cfar_2d(power, train=8, guard=2, pfa=1e-4):
    """Cell-averaging CFAR; returns the boolean detection map.

    The training band is the ring between a ``(2*(guard+train)+1)``-square and
    a ``(2*guard+1)``-square around each cell.  Range edges are reflected,
    Doppler wraps.
    """
    power = np.asarray(power, dtype=float)
    outer = 2 * (guard + train) + 1
    inner = 2 * guard + 1
    n_train = outer**2 - inner**2
    modes = ("reflect", "wrap")
    s_outer = uniform_filter(power, size=outer, mode=modes) * outer**2
    s_inner = uniform_filter(power, size=inner, mode=modes) * inner**2
    noise = (s_outer - s_inner) / n_train
    factor = n_train * (pfa ** (-1.0 / n_train) - 1.0)
    return power > factor * noise


def detect_peaks(power, cfg=MetricConfig()):
    hits = ca_cfar_2d(power, cfg.train, cfg.guard, cfg.pfa)
    local_max = power >= maximum_filter(power, size=3, mode=("reflect", "wrap"))
    return hits & local_max & (power > 0)


def match_detections(det, cells, radius=1):
    """Greedy matching of detected cells to objects; returns ``(tp, fp, fn)``."""
    det_idx = list(zip(*np.nonzero(det)))
    n_dop = det.shape[1]
    used = set()
    tp = 0
    for r, d in cells:
        best = None
        for i, (dr, dd) in enumerate(det_idx):
            if i in used:
                continue
            dd_wrap = min(abs(dd - d), n_dop - abs(dd - d))
            if abs(dr - r) <= radius and dd_wrap <= radius:
                best = i
                break
        if best is not None:
            used.add(best)
            tp += 1
    fp = len(det_idx) - len(used)
    fn = len(cells) - tp
    return tp, fp, fn


def f1_from_counts(tp, fp, fn):
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def frame_metrics(test, reference, gt, cfg=MetricConfig()):
    """Compare ``test`` to ``reference`` on the object cells listed in ``gt``.

    Raises
    ------
    ValueError
        If the maps differ in shape.
    """
    test = np.asarray(getattr(test, "data", test))
    reference = np.asarray(getattr(reference, "data", reference))
    if test.shape != reference.shape:
        raise ValueError(f"map shapes differ: {test.shape} vs {reference.shape}")
    t = normalize(test)
    r = normalize(reference)
    cells = gt.map_cells(t.shape) if isinstance(gt, GroundTruthObjects) else list(gt)
    err = np.abs(t - r) ** 2
    mse = float(err.mean())

    mask = object_mask(t.shape, cells, cfg.neighbourhood)
    p = np.abs(t) ** 2
    sig = p[mask].sum()
    rest = p[~mask].sum()
    if sig == 0:
        sinr_db = -300.0
    elif rest == 0:
        sinr_db = 300.0
    else:
        sinr_db = float(10.0 * np.log10(sig / rest))

    if cells:
        at = tuple(np.array(cells).T)
        ref_mag = np.abs(r[at])
        e = np.abs(t[at] - r[at]) ** 2
        evm = float(100.0 * np.sqrt(e.mean() / max((ref_mag**2).mean(), 1e-300)))
    else:
        evm = 0.0

    det = detect_peaks(p, cfg)
    tp, fp, fn = match_detections(det, cells, cfg.match_radius)
    tpr = tp / (tp + fn) if cells else 1.0
    non_object = det.size - len(cells)
    far = fp / non_object if non_object else 0.0
    return FrameMetrics(mse, sinr_db, evm, float(tpr), float(far), float(f1_from_counts(tp, fp, fn)), tp, fp, fn)


def ecdf(values):
    """Sorted ``(value, cumulative fraction)`` pairs, one per distinct value."""
    v = np.sort(np.asarray(list(values), dtype=float))
    if v.size == 0:
        raise ValueError("ecdf of an empty sample")
    uniq, counts = np.unique(v, return_counts=True)
    frac = np.cumsum(counts) / v.size
    frac[-1] = 1.0
    return [(float(a), float(b)) for a, b in zip(uniq, frac)]


METRIC_COLUMNS = ("frame", "method", "mse", "sinr_db", "evm", "tpr", "far", "f1", "tp", "fp", "fn")
METRIC_NAMES = ("mse", "sinr_db", "evm", "tpr", "far", "f1")


def write_metrics_csv(path, rows):
    """``rows`` are dicts with the keys of ``METRIC_COLUMNS``."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in METRIC_COLUMNS})


def read_metrics_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out = {"frame": int(row["frame"]), "method": row["method"]}
            for k in METRIC_COLUMNS[2:]:
                out[k] = float(row[k])
            rows.append(out)
    return rows


def write_ecdf_csv(path, pairs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "fraction"])
        for v, f in pairs:
            w.writerow([_fmt(v), _fmt(f)])


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def medians(rows, methods: Sequence[str]):
    out = {}
    for m in methods:
        sel = [r for r in rows if r["method"] == m]
        out[m] = {k: float(np.median([r[k] for r in sel])) for k in METRIC_NAMES} if sel else {}
    return out
