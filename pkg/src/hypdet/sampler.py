"""Seeded Monte Carlo over approximate Weil-Petersson random surfaces.

The Weil-Petersson volume form in Fenchel-Nielsen coordinates is
Lebesgue d(length) ^ d(twist) on each curve of a pants decomposition, so
the sampler draws each length uniformly from (l_min, l_max] and each
twist uniformly from [0, length).  That samples one Dehn-twist cell, not
moduli space: the mapping class group action is over-counted, and no
correction is attempted.  Every report carries the "WP-cell
approximation" label for this reason; whether the cell bias matters at
small genus is unknown and is reported, not fixed.

Randomness is counter-based (Philox keyed by seed and coordinate index,
counter set from the sample index), so a record is a pure function of
(config, index) no matter how samples are scheduled across threads.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, HypdetError, MomentDivergesByTheorem
from .fuchsian import FenchelNielsen, build_surface_group, standard_pants_graph
from .selberg import SHORT_LENGTH, QuadratureParams, constant_E, log_det, lower_bound_check
from .spectrum import enumerate_geodesics

WP_CELL_CAVEAT = (
    "WP-cell approximation: lengths/twists drawn Lebesgue-uniformly in one "
    "Dehn-twist cell; the mapping class group action is over-counted and "
    "the small-genus bias of this proxy is unknown."
)


@dataclass(frozen=True)
class SamplerConfig:
    genus: int
    n_samples: int
    seed: int
    l_max: float = 6.0
    l_min: float = 0.5    # sampling floor; may be lowered to the hard 0.05
    spectrum_cutoff: float = 8.0
    eta: float = 0.02           # spectral-gap threshold, must sit below 3/16
    alpha: float = 0.5
    c_short: float = 4.0
    beta_list: tuple = (0.5, 1.0, 1.5)

    def __post_init__(self):
        if not (isinstance(self.genus, int) and self.genus >= 2):
            raise DomainError("genus must be an integer >= 2")
        if not (isinstance(self.n_samples, int) and self.n_samples >= 0):
            raise DomainError("n_samples must be a nonnegative integer")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise DomainError("seed must fit in 64 bits")
        if not (0.05 <= self.l_min < self.l_max):
            raise DomainError("need 0.05 <= l_min < l_max (group conditioning floor)")
        if not (self.spectrum_cutoff > SHORT_LENGTH):
            raise DomainError("spectrum cutoff must exceed the collar threshold")
        if not (0.0 < self.eta < 3.0 / 16.0):
            raise DomainError("eta must lie in (0, 3/16)")
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must lie in (0, 1)")
        if not (self.c_short > 0.0):
            raise DomainError("c_short must be positive")
        object.__setattr__(self, "beta_list", tuple(float(b) for b in self.beta_list))
        for b in self.beta_list:
            if not (0.0 < b < 2.0):
                raise DomainError("beta_list entries must lie in (0, 2)")


@dataclass
class SampleRecord:
    index: int
    fn_coords: FenchelNielsen
    log_det_norm: float
    log_z0_norm: float
    lambda1_est: float
    short_pairs: int
    in_ag: bool
    errors: dict = field(default_factory=dict)


def sample_surface(cfg, index):
    """Fenchel-Nielsen draw for sample `index`; pure in (seed, index)."""
    if not (0 <= index < cfg.n_samples):
        raise DomainError("sample index %d outside 0..%d" % (index, cfg.n_samples - 1))
    edges = standard_pants_graph(cfg.genus)
    lengths = []
    twists = []
    for coord in range(3 * cfg.genus - 3):
        gen = np.random.Generator(
            np.random.Philox(key=[cfg.seed, coord], counter=[index, 0, 0, 0])
        )
        u1, u2 = gen.random(), gen.random()
        # u in [0,1) mapped downward so lengths land in (l_min, l_max]
        ell = cfg.l_max - (cfg.l_max - cfg.l_min) * u1
        lengths.append(ell)
        twists.append(ell * u2)
    return FenchelNielsen(
        genus=cfg.genus, edges=edges, lengths=tuple(lengths), twists=tuple(twists)
    ).validate()


def _short_pair_count(spectrum):
    # oriented primitive classes with an iterate below the collar threshold
    total = 0
    for e in spectrum.entries:
        if e.length <= SHORT_LENGTH:
            total += 2 * e.multiplicity * int(SHORT_LENGTH / e.length)
    return total


def run_sample(cfg, index):
    """Full pipeline for one sample: build, enumerate, determinant, record."""
    fn = sample_surface(cfg, index)
    group = build_surface_group(fn)
    spec = enumerate_geodesics(group, cfg.spectrum_cutoff)
    rep = log_det(spec, cfg.genus, QuadratureParams())
    norm = 4.0 * math.pi * (cfg.genus - 1.0)
    record = SampleRecord(
        index=index,
        fn_coords=fn,
        log_det_norm=rep.log_det / norm,
        log_z0_norm=rep.log_z0_prime_heat / norm,
        lambda1_est=rep.lambda1_est,
        short_pairs=_short_pair_count(spec),
        in_ag=False,
        errors={
            "quadrature": rep.quadrature_error,
            "truncation": rep.truncation_error,
            "product": rep.product_error,
            "combined": rep.combined_error(),
        },
    )
    record.in_ag = bool(
        record.lambda1_est >= cfg.eta
        and record.short_pairs <= cfg.c_short * cfg.genus ** cfg.alpha
    )
    identity_gap = record.log_det_norm - record.log_z0_norm - constant_E()
    if abs(identity_gap) > 1e-12:
        raise DomainError(
            "bookkeeping identity violated by %.3g on sample %d" % (identity_gap, index)
        )
    bound = lower_bound_check(spec, cfg.genus, rep)
    if not bound.passed:
        raise DomainError("short-geodesic lower bound failed on sample %d" % index)
    return record


def _pairwise_sum(values):
    """Fixed-order pairwise reduction; independent of thread scheduling."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def _mean(values):
    return _pairwise_sum(values) / len(values) if values else math.nan


def wilson_interval(k, n, z=1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise DomainError("Wilson interval needs at least one trial")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def ag_event_stats(records, eta, c_short, alpha):
    """Empirical A(g) membership with Wilson intervals.

    Thresholds are explicit so one fleet can be scanned across bands;
    membership is re-evaluated from the stored gap estimate and short-pair
    count rather than trusted from the records.
    """
    records = list(records)
    if not records:
        raise DomainError("A(g) statistics need a nonempty record list")
    n = len(records)
    genus = records[0].fn_coords.genus
    cap = c_short * genus ** alpha
    k_ag = sum(1 for r in records if r.lambda1_est >= eta and r.short_pairs <= cap)
    k_gap = sum(1 for r in records if r.lambda1_est < eta)
    k_short = sum(1 for r in records if r.short_pairs > cap)
    out = {}
    for name, k in (("in_ag", k_ag), ("gap_below_eta", k_gap), ("short_excess", k_short)):
        lo, hi = wilson_interval(k, n)
        out[name] = {"count": k, "fraction": k / n, "wilson_lo": lo, "wilson_hi": hi}
    out["n"] = n
    return out


def moment_estimate(records, beta):
    """Empirical beta-moment of |log_det_norm| with jackknife stderr."""
    if beta >= 2.0:
        raise MomentDivergesByTheorem(
            "the beta >= 2 moment of the normalized determinant is infinite "
            "over the WP ensemble; refusing to estimate it"
        )
    if beta <= 0.0:
        raise DomainError("beta must be positive")
    vals = [abs(r.log_det_norm) ** beta for r in records]
    n = len(vals)
    if n == 0:
        raise DomainError("moment estimate needs at least one record")
    total = _pairwise_sum(vals)
    mean = total / n
    if n == 1:
        return mean, math.inf
    loo = [(total - v) / (n - 1) for v in vals]
    var = _pairwise_sum([(x - mean) ** 2 for x in loo]) * (n - 1) / n
    return mean, math.sqrt(max(0.0, var))


def _histogram(values, bins=12):
    if not values:
        return []
    lo, hi = min(values), max(values)
    if hi <= lo:
        return [{"bin_lo": lo, "bin_hi": hi, "count": len(values)}]
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in values:
        i = min(int((v - lo) / width), bins - 1)
        counts[i] += 1
    return [
        {"bin_lo": lo + i * width, "bin_hi": lo + (i + 1) * width, "count": c}
        for i, c in enumerate(counts)
    ]


def mc_experiment(cfg, threads=1):
    """Fleet experiment: distributions of the normalized determinant.

    Failed samples are recorded with their cause and excluded from the
    estimators; nothing is silently dropped.  The report is a pure
    function of the config: thread count only changes scheduling, and
    aggregation always runs in sample-index order.
    """
    if threads < 1:
        raise DomainError("threads must be >= 1")
    indices = list(range(cfg.n_samples))

    def one(i):
        try:
            return i, run_sample(cfg, i), None
        except HypdetError as exc:
            return i, None, "%s: %s" % (type(exc).__name__, exc)

    if threads == 1 or not indices:
        raw = [one(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(one, indices))
    raw.sort(key=lambda tup: tup[0])
    records = [r for _, r, err in raw if err is None]
    exclusions = [{"index": i, "error": err} for i, _, err in raw if err is not None]

    report = {
        "label": "WP-cell approximation",
        "caveat": WP_CELL_CAVEAT,
        "config": {
            "genus": cfg.genus,
            "n_samples": cfg.n_samples,
            "seed": cfg.seed,
            "l_max": cfg.l_max,
            "l_min": cfg.l_min,
            "spectrum_cutoff": cfg.spectrum_cutoff,
            "eta": cfg.eta,
            "alpha": cfg.alpha,
            "c_short": cfg.c_short,
            "beta_list": list(cfg.beta_list),
        },
        "n_success": len(records),
        "n_excluded": len(exclusions),
        "exclusions": exclusions,
        "records": [
            {
                "index": r.index,
                "lengths": list(r.fn_coords.lengths),
                "twists": list(r.fn_coords.twists),
                "log_det_norm": r.log_det_norm,
                "log_z0_norm": r.log_z0_norm,
                "lambda1_est": r.lambda1_est,
                "short_pairs": r.short_pairs,
                "in_ag": r.in_ag,
                "errors": dict(r.errors),
            }
            for r in records
        ],
    }
    if records:
        dets = [r.log_det_norm for r in records]
        report["mean_log_det_norm"] = _mean(dets)
        report["mean_abs_log_det_norm"] = _mean([abs(v) for v in dets])
        moments = {}
        for b in cfg.beta_list:
            mean, err = moment_estimate(records, b)
            moments["%.6g" % b] = {"mean": mean, "stderr": err}
        report["moments"] = moments
        report["ag_stats"] = ag_event_stats(
            records, eta=cfg.eta, c_short=cfg.c_short, alpha=cfg.alpha
        )
        report["histogram"] = _histogram(dets)
    else:
        report["mean_log_det_norm"] = None
        report["moments"] = {}
        report["ag_stats"] = None
        report["histogram"] = []
    return report


def records_csv(report):
    """Per-sample CSV; one row per successful record."""
    head = (
        "index,log_det_norm,log_z0_norm,lambda1_est,short_pairs,in_ag,"
        "err_combined,lengths,twists"
    )
    rows = [head]
    for r in report["records"]:
        rows.append(
            "%d,%.17g,%.17g,%.17g,%d,%d,%.17g,%s,%s"
            % (
                r["index"],
                r["log_det_norm"],
                r["log_z0_norm"],
                r["lambda1_est"],
                r["short_pairs"],
                1 if r["in_ag"] else 0,
                r["errors"]["combined"],
                ";".join("%.17g" % x for x in r["lengths"]),
                ";".join("%.17g" % x for x in r["twists"]),
            )
        )
    return "\n".join(rows) + "\n"


def histogram_csv(report):
    rows = ["bin_lo,bin_hi,count"]
    for b in report["histogram"]:
        rows.append("%.17g,%.17g,%d" % (b["bin_lo"], b["bin_hi"], b["count"]))
    return "\n".join(rows) + "\n"
