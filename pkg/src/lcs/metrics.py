"""PSNR and the rate-distortion sweep.

A sweep encodes one image at every (scheme, rate, trial) cell, reconstructs
it and records the PSNR.  Trial ``t`` uses seed ``base_seed + t``.  Schemes:

``proposed``
    line-based sampling, one operator shared by every line.
``conventional``
    one dense operator over the whole vectorised image.  Cells whose
    operator would exceed the capacity cap are recorded as
    ``skipped-capacity`` instead of being run.

Reports are written as CSV (one row per cell plus one ``trial=mean`` row per
scheme and rate), JSON, and a whitespace-separated ``.dat`` file that gnuplot
can plot directly.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import json
import math
import time

import numpy as np

from .errors import CapacityError, DimensionError, DivergenceError, LcsError, ReportMismatchError
from .imaging import Image
from .sampling import DEFAULT_CAPACITY, SEED_MASK, encode_image, encode_whole
from .tvsolver import SolverConfig, reconstruct

__all__ = [
    "PEAK",
    "PSNR_CAP_DB",
    "DEFAULT_RATES",
    "SCHEMES",
    "CSV_COLUMNS",
    "mse",
    "psnr",
    "RdRow",
    "RdReport",
    "rd_sweep",
    "compare_report",
    "write_csv",
    "read_csv",
    "write_json",
    "write_dat",
]

PEAK = 255.0
#: PSNR reported for identical images, keeping reports finite.
PSNR_CAP_DB = 99.0
DEFAULT_RATES = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
SCHEMES = ("proposed", "conventional")
CSV_COLUMNS = (
    "image_id", "scheme", "rate", "trial", "seed",
    "psnr_db", "mse", "iterations", "wall_ms", "status",
)


def _pixels(img):
    return img.pixels if isinstance(img, Image) else np.asarray(img, dtype=np.float64)


def mse(reference, candidate):
    a, b = _pixels(reference), _pixels(candidate)
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare images of shape {a.shape} and {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(reference, candidate):
    """``10 log10(255^2 / MSE)`` in dB; identical images give ``PSNR_CAP_DB``."""
    err = mse(reference, candidate)
    if err == 0.0:
        return PSNR_CAP_DB
    return 10.0 * math.log10(PEAK**2 / err)


@dataclass
class RdRow:
    image_id: str
    scheme: str
    rate: float
    trial: int
    seed: int
    psnr_db: float = math.nan
    mse: float = math.nan
    iterations: int = 0
    wall_ms: float = 0.0
    status: str = "ok"

    @property
    def ok(self):
        return self.status == "ok"

    def key(self):
        return (self.scheme, self.rate, self.trial)


@dataclass
class RdReport:
    """Detail rows of a sweep, sorted by (scheme, rate, trial).

    ``reconstructions`` optionally maps ``(scheme, rate)`` to the first-trial
    reconstruction; it is not serialised.
    """

    image_id: str
    rows: list = field(default_factory=list)
    reconstructions: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.rows.sort(key=RdRow.key)

    @property
    def schemes(self):
        return sorted({r.scheme for r in self.rows})

    def rates(self, scheme=None):
        return sorted({r.rate for r in self.rows if scheme is None or r.scheme == scheme})

    def select(self, scheme):
        return RdReport(self.image_id, [r for r in self.rows if r.scheme == scheme])

    def mean_rows(self):
        """One aggregate row per (scheme, rate), averaging the successful trials."""
        out = []
        for scheme in self.schemes:
            for rate in self.rates(scheme):
                cell = [r for r in self.rows if r.scheme == scheme and r.rate == rate]
                good = [r for r in cell if r.ok]
                if good:
                    out.append(RdRow(
                        self.image_id, scheme, rate, "mean", None,
                        float(np.mean([r.psnr_db for r in good])),
                        float(np.mean([r.mse for r in good])),
                        float(np.mean([r.iterations for r in good])),
                        float(np.mean([r.wall_ms for r in good])),
                        "ok",
                    ))
                else:
                    out.append(RdRow(self.image_id, scheme, rate, "mean", None,
                                     status=cell[0].status))
        return out

    def means(self, scheme):
        """``{rate: mean PSNR}`` for one scheme (NaN where every trial failed)."""
        return {r.rate: r.psnr_db for r in self.mean_rows() if r.scheme == scheme}

    def fingerprint(self):
        """Everything except wall time, for determinism checks."""
        return [(r.scheme, r.rate, r.trial, r.seed, r.psnr_db, r.mse, r.iterations, r.status)
                for r in self.rows]


def _run_cell(pixels, image_id, scheme, rate, trial, seed, config, line_len, capacity,
              keep):
    image = Image(pixels)
    row = RdRow(image_id, scheme, rate, trial, seed)
    t0 = time.perf_counter()
    rec = None
    try:
        if scheme == "proposed":
            sample = encode_image(image, rate, seed, line_len)
        else:
            sample = encode_whole(image, rate, seed, capacity)
        rec, state = reconstruct(sample, config)
    except CapacityError:
        row.status = "skipped-capacity"
    except DivergenceError:
        row.status = "diverged"
    except LcsError as exc:
        row.status = f"error: {exc}"
    else:
        row.psnr_db = psnr(image, rec)
        row.mse = mse(image, rec)
        row.iterations = state.iterations
    row.wall_ms = 1000.0 * (time.perf_counter() - t0)
    return row, (rec if keep else None)


def rd_sweep(image, rates=DEFAULT_RATES, trials=5, base_seed=0, schemes=("proposed",),
             config=None, *, image_id="image", line_len=None, capacity=DEFAULT_CAPACITY,
             jobs=1, keep_reconstructions=False):
    """Run the rate-distortion protocol on ``image``.

    Every (scheme, rate, trial) cell is independent; with ``jobs > 1`` they run
    in worker processes, and the report is identical to a serial run apart
    from wall times.  Failures are recorded in the row status rather than
    raised.  With ``keep_reconstructions`` the first-trial image of each
    (scheme, rate) is kept in ``report.reconstructions``.
    """
    rates = [float(r) for r in rates]
    if not rates or any(not (0.0 < r <= 1.0) for r in rates):
        raise ValueError(f"rates must lie in (0, 1], got {rates}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    unknown = set(schemes) - set(SCHEMES)
    if unknown:
        raise ValueError(f"unknown schemes {sorted(unknown)}")
    config = config or SolverConfig()
    cells = [
        (image.pixels, image_id, s, r, t, (base_seed + t) & SEED_MASK, config, line_len,
         capacity, keep_reconstructions and t == 0)
        for s in sorted(set(schemes)) for r in rates for t in range(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, *zip(*cells)))
    else:
        results = [_run_cell(*c) for c in cells]
    report = RdReport(image_id, [row for row, _ in results])
    for row, rec in results:
        if rec is not None:
            report.reconstructions[(row.scheme, row.rate)] = rec
    return report


def _pick(report, scheme):
    if scheme is not None:
        sub = report.select(scheme)
        if not sub.rows:
            raise ReportMismatchError(f"report {report.image_id!r} has no {scheme!r} rows")
        return scheme
    if len(report.schemes) != 1:
        raise ReportMismatchError(
            f"report {report.image_id!r} holds schemes {report.schemes}; choose one"
        )
    return report.schemes[0]


def compare_report(a, b, scheme_a=None, scheme_b=None):
    """Per-rate gain ``mean PSNR(a) - mean PSNR(b)`` in dB, as ``{rate: gain}``."""
    sa, sb = _pick(a, scheme_a), _pick(b, scheme_b)
    ma, mb = a.means(sa), b.means(sb)
    if set(ma) != set(mb):
        raise ReportMismatchError(
            f"rate sets differ: {sorted(ma)} vs {sorted(mb)}"
        )
    return {rate: ma[rate] - mb[rate] for rate in sorted(ma)}


# -- report files --------------------------------------------------------------------


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(report, path):
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(CSV_COLUMNS)
        for row in report.rows + report.mean_rows():
            d = asdict(row)
            out.writerow([_fmt(d[c]) for c in CSV_COLUMNS])


def read_csv(path):
    """Load the detail rows of a report CSV; ``mean`` rows are recomputed, not read."""
    rows = []
    image_ids = set()
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(CSV_COLUMNS[:-1]) - set(reader.fieldnames or ())
        if missing:
            raise ReportMismatchError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            image_ids.add(rec["image_id"])
            if rec["trial"] == "mean":
                continue
            num = lambda k: float(rec[k]) if rec[k] else math.nan  # noqa: E731
            rows.append(RdRow(
                rec["image_id"], rec["scheme"], float(rec["rate"]), int(rec["trial"]),
                int(rec["seed"]) if rec["seed"] else None, num("psnr_db"), num("mse"),
                int(float(rec["iterations"] or 0)), num("wall_ms"),
                rec.get("status") or "ok",
            ))
    return RdReport(",".join(sorted(image_ids)), rows)


def write_json(report, path):
    doc = {
        "image_id": report.image_id,
        "peak": PEAK,
        "psnr_cap_db": PSNR_CAP_DB,
        "rows": [asdict(r) for r in report.rows],
        "means": [
            {"scheme": r.scheme, "rate": r.rate, "mean_psnr_db": r.psnr_db,
             "mean_mse": r.mse, "status": r.status}
            for r in report.mean_rows()
        ],
    }

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, list):
            return [clean(v) for v in o]
        return o

    with open(path, "w") as f:
        json.dump(clean(doc), f, indent=2)


def write_dat(report, path):
    """Mean PSNR per rate, one column per scheme, for plotting with gnuplot."""
    schemes = report.schemes
    means = {s: report.means(s) for s in schemes}
    with open(path, "w") as f:
        f.write("# rate " + " ".join(schemes) + "\n")
        for rate in report.rates():
            vals = [means[s].get(rate, math.nan) for s in schemes]
            f.write(f"{rate:g} " + " ".join("nan" if math.isnan(v) else f"{v:.4f}"
                                               for v in vals) + "\n")
