"""Power-law fits, predicted variance decay rates and rigidity verdicts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .domain import INTERVAL, DomainSpec, Growth
from .errors import ConfigurationError, StatisticsError
from .noise import CovarianceModel, d_exponent

__all__ = [
    "ScanResult",
    "ExponentFit",
    "RigidityVerdict",
    "fit_exponent",
    "predicted_exponent",
    "growth_threshold",
    "growth_verdict",
    "rigidity_report",
]

MIN_POINTS = 4
MAX_DROP_FRACTION = 0.2


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    slope_ci_95: tuple[float, float]
    r_squared: float
    n_points: int
    slope_stderr: float = 0.0
    dropped: int = 0
    degenerate: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["slope_ci_95"] = list(self.slope_ci_95)
        return d


@dataclass(frozen=True)
class ScanResult:
    """Series of (t, estimate, stderr, n) with an optional fitted slope."""

    t: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    n: np.ndarray
    label: str = ""
    fit: Optional[ExponentFit] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t", "estimate", "stderr"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "n", np.asarray(self.n, dtype=np.int64))
        if not (self.t.shape == self.estimate.shape == self.stderr.shape == self.n.shape):
            raise StatisticsError("scan arrays must share one shape")

    def with_fit(self) -> "ScanResult":
        return ScanResult(self.t, self.estimate, self.stderr, self.n, self.label, fit_exponent(self), self.meta)

    def rows(self):
        for row in zip(self.t, self.estimate, self.stderr, self.n):
            yield (float(row[0]), float(row[1]), float(row[2]), int(row[3]))


def _wls(x, y, w):
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx <= 0:
        raise StatisticsError("fit needs at least two distinct t values")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ss_res = float((w * resid**2).sum())
    ss_tot = float((w * (y - ym) ** 2).sum())
    return slope, intercept, sxx, ss_res, ss_tot


def fit_exponent(scan: ScanResult) -> ExponentFit:
    """Weighted least squares fit of ``log estimate = intercept + slope * log t``.

    Weights are ``(estimate / stderr)**2``, the inverse variance of the log
    estimate to first order; if any stderr is missing or zero the fit is
    unweighted.  Nonpositive estimates are dropped when they are at most 20%
    of the points, otherwise :class:`StatisticsError` is raised.  An all-zero
    series returns a fit flagged ``degenerate``.
    """
    t, est, se = scan.t, scan.estimate, scan.stderr
    if t.size < MIN_POINTS:
        raise StatisticsError(f"fit needs at least {MIN_POINTS} points, got {t.size}")
    if np.all(est == 0):
        nan = float("nan")
        return ExponentFit(nan, nan, (nan, nan), nan, int(t.size), nan, 0, True)
    ok = (est > 0) & (t > 0) & np.isfinite(est)
    dropped = int(t.size - ok.sum())
    if dropped > MAX_DROP_FRACTION * t.size:
        raise StatisticsError(f"{dropped} of {t.size} estimates are nonpositive; cannot fit a power law")
    if ok.sum() < MIN_POINTS:
        raise StatisticsError("too few positive estimates left to fit")
    x, y = np.log(t[ok]), np.log(est[ok])
    rel = se[ok] / est[ok]
    w = 1.0 / rel**2 if np.all(rel > 0) and np.all(np.isfinite(rel)) else np.ones_like(x)
    w = w / w.max()
    slope, intercept, sxx, ss_res, ss_tot = _wls(x, y, w)
    n = x.size
    s2 = ss_res / (n - 2)
    slope_se = math.sqrt(s2 / sxx)
    half = float(stats.t.ppf(0.975, n - 2)) * slope_se
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    return ExponentFit(float(slope), float(intercept), (float(slope - half), float(slope + half)), float(r2), int(n), slope_se, dropped)


# --------------------------------------------------------------------------
# predicted rates and verdicts
# --------------------------------------------------------------------------


def _compact(model: CovarianceModel) -> bool:
    return model.support_radius is not None


def predicted_exponent(spec: DomainSpec, model: CovarianceModel, growth: Optional[Growth] = None) -> float:
    """Exponent ``e`` in the small-t variance bound ``Var Tr exp(-tH) <= C t^e``."""
    d = d_exponent(model)
    if spec.case == INTERVAL:
        return d - 1.0
    if growth is None:
        raise ConfigurationError("predicted exponent on an unbounded domain needs a growth certificate")
    a = Growth(*growth).a
    return d - 0.5 - 1.0 / a if _compact(model) else d - 1.0 - 2.0 / a


def growth_threshold(model: CovarianceModel) -> float:
    """Potential growth exponent above which the variance bound decays."""
    d = d_exponent(model)
    return 2.0 / (2.0 * d - 1.0) if _compact(model) else 2.0 / (d - 1.0)


@dataclass(frozen=True)
class RigidityVerdict:
    case: str
    condition_holds: bool
    threshold_exponent: float
    reason: str

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.threshold_exponent) or math.isnan(self.threshold_exponent):
            d["threshold_exponent"] = None
        return d


def growth_verdict(spec: DomainSpec, model: CovarianceModel, growth: Optional[Growth] = None) -> RigidityVerdict:
    """Whether the growth condition sufficient for number rigidity holds."""
    if spec.case == INTERVAL:
        return RigidityVerdict(
            spec.case, True, 0.0, "bounded interval: the trace variance always vanishes as t -> 0, rigid for every admissible noise"
        )
    thr = growth_threshold(model)
    kind = "compactly supported" if _compact(model) else "non-compactly supported"
    if growth is None:
        return RigidityVerdict(
            spec.case, False, thr, f"sufficient condition not met: no growth certificate for V ({kind} noise needs a > {thr:.6g})"
        )
    a = Growth(*growth).a
    if a > thr:
        return RigidityVerdict(spec.case, True, thr, f"sufficient condition met: a = {a:.6g} > {thr:.6g} for {kind} {model.name or 'noise'}")
    reason = f"sufficient condition not met: a = {a:.6g} <= {thr:.6g} for {kind} {model.name or 'noise'}; not a non-rigidity proof"
    if model.name == "white" and a >= 1.0:
        reason += " (the condition is not necessary: with white noise and linear growth the spectrum is still known to be rigid)"
    return RigidityVerdict(spec.case, False, thr, reason)


def rigidity_report(
    spec: DomainSpec,
    model: CovarianceModel,
    growth: Optional[Growth],
    scans: Sequence[ScanResult],
    slope_tolerance: float = 0.1,
) -> tuple[dict, str]:
    """Assemble verdict, fitted vs predicted exponents and pass/fail lines.

    Returns a JSON-ready dict and a plain-text rendering.
    """
    if not scans:
        raise StatisticsError("rigidity_report needs at least one scan")
    verdict = growth_verdict(spec, model, growth)
    try:
        predicted = predicted_exponent(spec, model, growth)
    except ConfigurationError:
        predicted = None
    entries = []
    for scan in scans:
        fit = scan.fit or fit_exponent(scan)
        entry = {"label": scan.label, "fit": fit.to_dict(), "degenerate": fit.degenerate}
        if fit.degenerate:
            entry["status"] = "degenerate"
            entry["note"] = "all variance estimates are zero: deterministic operator (no noise)"
        elif predicted is None:
            entry["status"] = "no prediction"
        else:
            entry["status"] = "pass" if fit.slope >= predicted - slope_tolerance else "fail"
        entries.append(entry)
    doc = {
        "domain": spec.to_dict(),
        "noise": model.name,
        "d_exponent": d_exponent(model),
        "predicted_exponent": predicted,
        "verdict": verdict.to_dict(),
        "scans": entries,
        "logic": (
            "if Var[sum_k exp(-t_n L_k)] -> 0 along a sequence t_n -> 0, the eigenvalue point process is number rigid; "
            "a positive fitted slope is empirical evidence for that vanishing"
        ),
    }
    lines = [
        f"domain: {spec.case}  noise: {model.name}  d = {d_exponent(model):g}",
        f"verdict: {verdict.reason}",
        f"predicted variance exponent: {'n/a' if predicted is None else format(predicted, '.4g')}",
    ]
    for e in entries:
        f = e["fit"]
        if e["degenerate"]:
            lines.append(f"  {e['label'] or 'scan'}: degenerate (zero variance)")
        else:
            lo, hi = f["slope_ci_95"]
            lines.append(f"  {e['label'] or 'scan'}: slope {f['slope']:.4f} [{lo:.4f}, {hi:.4f}] -> {e['status']}")
    lines.append("note: " + doc["logic"])
    return doc, "\n".join(lines) + "\n"
