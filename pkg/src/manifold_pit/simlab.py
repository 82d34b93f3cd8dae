"""Simulation studies of transform-then-test goodness of fit.

Study 1 uses the Rayleigh test on S^2, study 2 Gine's F_n test and study 3
Mardia's test on the shape space of pentagons. Each study runs three
scenarios: fit to the true model, fit to the model estimated from the same
sample, and fit of an alternative law to the study's model.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import DomainError, ManifoldPitError
from .geometry import landmarks_to_shape
from .gof import bootstrap_statistics, fitted_images
from .models import (
    FisherModel,
    MardiaDrydenModel,
    regular_polygon,
    sample_fisher,
    sample_md_anisotropic,
    sample_md_isotropic,
    sample_projected_normal,
)
from .seeding import derive_seed
from .transforms import build_transform
from .uniformity import STATISTICS, gine_asymptotic_sf, packaged_table

SCENARIOS = ("true", "fitted", "alternative")
LEVELS = (0.10, 0.05, 0.01)
STUDY_TESTS = {1: "rayleigh", 2: "gine", 3: "mardia_shape"}

FISHER_KAPPA = 10.0
# Norm of the projected-normal mean, chosen so the Gine study rejects about
# a third of samples at the 5 percent level (see README).
PN_NORM = 2.6
MD_KAPPA = 0.125
MD_K = 5
MD_SIGMA = np.diag([1.0, 25.0])
# Centred size of the pentagon template; the isotropic law is the same for
# any size at noise sd = size / sqrt(2 kappa), the alternative is not.
MD_TEMPLATE_SIZE = 5.0
MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class StudyConfig:
    study: int
    n: int = 50
    reps: int = 1000
    seed: int = 7
    out: str | None = None
    B: int = 0
    pn_norm: float = PN_NORM
    workers: int = 1
    scenarios: tuple = SCENARIOS

    def __post_init__(self):
        if self.study not in STUDY_TESTS:
            raise DomainError("study must be 1, 2 or 3")
        if self.reps < 1 or self.n < 2:
            raise DomainError("need reps >= 1 and n >= 2")
        if self.B < 0:
            raise DomainError("B must be >= 0")
        bad = set(self.scenarios) - set(SCENARIOS)
        if bad:
            raise DomainError(f"unknown scenarios {sorted(bad)}")


@dataclass(frozen=True)
class Record:
    scenario: str
    index: int
    statistic: float
    p_value: float
    status: str = "ok"


@dataclass
class StudyResult:
    config: StudyConfig
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def p_values(self, scenario: str) -> np.ndarray:
        return np.array([r.p_value for r in self.records if r.scenario == scenario and r.status == "ok"])

    def statistics(self, scenario: str) -> np.ndarray:
        return np.array([r.statistic for r in self.records if r.scenario == scenario and r.status == "ok"])


# ---------------------------------------------------------------------------
# Study models
# ---------------------------------------------------------------------------

NORTH = np.array([0.0, 0.0, 1.0])


def md_mode_landmarks() -> np.ndarray:
    """Pentagon template perturbed by the anisotropic alternative.

    Isotropic noise with sd ``MD_TEMPLATE_SIZE / sqrt(2 * 0.125)`` around it
    gives the MD law with kappa = 0.125.
    """
    return regular_polygon(MD_K, MD_TEMPLATE_SIZE)


def md_mode() -> np.ndarray:
    return landmarks_to_shape(md_mode_landmarks()[None])[0]


def study_model(study: int):
    if study in (1, 2):
        return FisherModel(NORTH, FISHER_KAPPA)
    return MardiaDrydenModel(md_mode(), MD_KAPPA, MD_K)


def _draw(study, scenario, n, seed, pn_norm):
    if study in (1, 2):
        if scenario == "alternative":
            return sample_projected_normal(pn_norm * NORTH, n, seed)
        return sample_fisher(study_model(study), n, seed)
    if scenario == "alternative":
        return sample_md_anisotropic(md_mode_landmarks(), MD_SIGMA, n, seed)
    return sample_md_isotropic(study_model(study), n, seed)


def _sample_seed(cfg, scenario, index):
    # scenarios (a) and (b) assess the same samples
    key = 2 if scenario == "alternative" else 0
    return derive_seed(cfg.seed, cfg.study, key, index)


def _p_values(test, stat, n):
    if test == "rayleigh":
        return stats.chi2.sf(stat, 3)
    if test == "mardia_shape":
        return stats.chi2.sf(stat, (MD_K - 1) ** 2 - 1)
    table = packaged_table("gine", n)
    p = table.p_value(stat) if table is not None else np.full(stat.shape, np.nan)
    missing = ~np.isfinite(p)
    if np.any(missing):
        p[missing] = gine_asymptotic_sf(stat[missing])
    return p


def _run_chunk(args):
    """Statistics and p-values for replicate indices ``lo..hi-1`` of one scenario."""
    cfg, scenario, lo, hi = args
    test = STUDY_TESTS[cfg.study]
    model = study_model(cfg.study)
    records = []
    samples, idx = [], []
    for i in range(lo, hi):
        try:
            samples.append(_draw(cfg.study, scenario, cfg.n, _sample_seed(cfg, scenario, i), cfg.pn_norm))
            idx.append(i)
        except ManifoldPitError as exc:
            records.append(Record(scenario, i, float("nan"), float("nan"), f"error: {exc}"))
    if not samples:
        return records
    x = np.stack(samples)
    family = "fisher" if cfg.study in (1, 2) else "md"
    if scenario == "fitted":
        images, params = fitted_images(family, x)
    else:
        T = build_transform(model)
        images = T.forward(x.reshape(-1, x.shape[-1])).reshape(x.shape)
    stat = np.atleast_1d(np.asarray(STATISTICS[test](images), dtype=float))
    p = _p_values(test, stat, cfg.n)
    if scenario == "fitted" and cfg.B > 0:
        for j, i in enumerate(idx):
            fitted = _refit_model(family, params, j)
            try:
                boot = bootstrap_statistics(family, fitted, cfg.n, test, cfg.B,
                                            derive_seed(cfg.seed, cfg.study, 1, i))
                p[j] = (1 + np.sum(boot >= stat[j])) / (cfg.B + 1)
            except ManifoldPitError as exc:
                records.append(Record(scenario, i, float(stat[j]), float("nan"), f"error: {exc}"))
                p[j] = np.nan
    for j, i in enumerate(idx):
        if np.isfinite(p[j]):
            records.append(Record(scenario, i, float(stat[j]), float(p[j])))
    return records


def _refit_model(family, params, j):
    mu, kappa = params
    if family == "fisher":
        return FisherModel(mu[j], float(kappa[j]))
    return MardiaDrydenModel(mu[j], float(kappa[j]), MD_K)


# ---------------------------------------------------------------------------
# Running and summarising
# ---------------------------------------------------------------------------


def _chunks(cfg, size=50):
    for scenario in cfg.scenarios:
        for lo in range(0, cfg.reps, size):
            yield (cfg, scenario, lo, min(cfg.reps, lo + size))


def run_study(cfg: StudyConfig) -> StudyResult:
    """Run every scenario of a study; outputs depend only on the configuration."""
    jobs = list(_chunks(cfg))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    order = {s: k for k, s in enumerate(SCENARIOS)}
    records = sorted((r for part in parts for r in part), key=lambda r: (order[r.scenario], r.index))
    result = StudyResult(cfg, records)
    for scenario in cfg.scenarios:
        failed = sum(1 for r in records if r.scenario == scenario and r.status != "ok")
        if failed > MAX_FAILURE_RATE * cfg.reps:
            raise ManifoldPitError(f"{failed} of {cfg.reps} replicates failed in scenario {scenario}")
    result.summary = summarise(result)
    if cfg.out:
        write_outputs(result, cfg.out)
    return result


def summarise(result: StudyResult) -> dict:
    cfg = result.config
    out = {"config": {k: v for k, v in asdict(cfg).items() if k not in ("out", "workers")}, "scenarios": {}}
    out["config"]["scenarios"] = list(cfg.scenarios)
    out["test"] = STUDY_TESTS[cfg.study]
    for scenario in cfg.scenarios:
        p = result.p_values(scenario)
        counts, _ = histogram_counts(p)
        out["scenarios"][scenario] = {
            "reps": int(len(p)),
            "failures": int(sum(1 for r in result.records if r.scenario == scenario and r.status != "ok")),
            "rejection": {f"{a:.2f}": float(np.mean(p <= a)) for a in LEVELS},
            "fraction_above_0.9": float(np.mean(p > 0.9)),
            "median_p": float(np.median(p)),
            "ks_uniform": float(stats.kstest(p, "uniform").statistic),
            "histogram": [int(c) for c in counts],
        }
    return out


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def histogram_counts(values, bins: int = 20):
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    if v.size == 0:
        raise DomainError("histogram needs values")
    counts, edges = np.histogram(v, bins=bins, range=(0.0, 1.0))
    return counts, edges


def histogram_csv(counts, edges) -> str:
    lines = ["lo,hi,count"] + [f"{a:.4f},{b:.4f},{int(c)}" for a, b, c in zip(edges[:-1], edges[1:], counts)]
    return "\n".join(lines) + "\n"


def parse_histogram_csv(text: str):
    rows = list(csv.DictReader(io.StringIO(text)))
    edges = np.array([float(rows[0]["lo"])] + [float(r["hi"]) for r in rows])
    counts = np.array([int(r["count"]) for r in rows])
    return counts, edges


def histogram_svg(counts, edges, title: str = "", width: int = 400, height: int = 240) -> str:
    """Bar chart of histogram counts as a standalone SVG document."""
    counts = np.asarray(counts)
    pad = 30
    top = max(int(counts.max()), 1)
    bw = (width - 2 * pad) / len(counts)
    bars = []
    for i, c in enumerate(counts):
        h = (height - 2 * pad) * c / top
        bars.append(f'<rect x="{pad + i * bw:.2f}" y="{height - pad - h:.2f}" width="{bw - 1:.2f}" '
                    f'height="{h:.2f}" fill="#4a6fa5"/>')
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{pad}" y="{pad / 2 + 5}" font-size="12">{title}</text>',
        *bars,
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{pad}" y="{height - 10}" font-size="10">{edges[0]:g}</text>',
        f'<text x="{width - pad - 10}" y="{height - 10}" font-size="10">{edges[-1]:g}</text>',
        f'<text x="2" y="{pad + 5}" font-size="10">{top}</text>',
        "</svg>",
    ]) + "\n"


def emit_histogram(values, bins: int = 20, title: str = ""):
    """SVG plot and CSV bin table of values in [0, 1]."""
    counts, edges = histogram_counts(values, bins)
    return histogram_svg(counts, edges, title), histogram_csv(counts, edges)


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "index", "statistic", "p_value", "status"])
    for r in records:
        w.writerow([r.scenario, r.index, repr(r.statistic), repr(r.p_value), r.status])
    return buf.getvalue()


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=1, sort_keys=True) + "\n"


def write_outputs(result: StudyResult, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    stem = f"study{cfg.study}_n{cfg.n}"
    (out / f"{stem}_records.csv").write_text(records_csv(result.records))
    (out / f"{stem}_summary.json").write_text(summary_json(result.summary))
    for scenario in cfg.scenarios:
        p = result.p_values(scenario)
        if p.size == 0:
            continue
        svg, table = emit_histogram(p, title=f"study {cfg.study}, {scenario}, n = {cfg.n}: p-values")
        (out / f"{stem}_{scenario}_hist.svg").write_text(svg)
        (out / f"{stem}_{scenario}_hist.csv").write_text(table)


# ---------------------------------------------------------------------------
# Threshold checks used by ``simlab simulate --check``
# ---------------------------------------------------------------------------


def check_summary(summary: dict) -> list[str]:
    """Violations of the size and fit thresholds that apply to a summary."""
    problems = []
    sc = summary["scenarios"]
    cfg = summary["config"]
    if "true" in sc and cfg["B"] == 0:
        s = sc["true"]
        for a, tol in zip(LEVELS, (0.02, 0.015, 0.01)):
            rate = s["rejection"][f"{a:.2f}"]
            if abs(rate - a) > tol:
                problems.append(f"true scenario: rejection at {a:.2f} is {rate:.3f}")
        if s["ks_uniform"] > 0.05:
            problems.append(f"true scenario: KS distance {s['ks_uniform']:.3f}")
    if "fitted" in sc:
        s = sc["fitted"]
        if cfg["B"] == 0 and s["fraction_above_0.9"] < 0.5:
            problems.append(f"fitted scenario: fraction above 0.9 is {s['fraction_above_0.9']:.3f}")
        if cfg["B"] > 0 and abs(s["rejection"]["0.05"] - 0.05) > 0.02:
            problems.append(f"fitted scenario: bootstrap size {s['rejection']['0.05']:.3f}")
    if "alternative" in sc and cfg["study"] == 2 and cfg["n"] == 50:
        s = sc["alternative"]
        for a, target in zip(LEVELS, (0.58, 0.34, 0.05)):
            rate = s["rejection"][f"{a:.2f}"]
            if abs(rate - target) > 0.06:
                problems.append(f"alternative scenario: rejection at {a:.2f} is {rate:.3f}, target {target}")
    return problems
