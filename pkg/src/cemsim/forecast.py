"""Context-aware load forecasting.

Predicts electrical load from context records (announced compute jobs and
similar events) using ordinary least squares over four feature families:

* ``none``      - intercept plus an hour-of-day encoding; ignores context.
* ``numeric``   - adds summed numeric payload fields (with presence flags).
* ``effort``    - adds the summed effort score of the active records.
* ``combined``  - numeric and effort together.

Effort is a scalar proxy for how heavy a described job is.  The default
estimator is a documented keyword table so results stay deterministic and
offline; :func:`estimate_effort_remote` can delegate to any HTTP endpoint
speaking the simple ``{"text": ...} -> {"effort": ...}`` schema instead.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import ConfigurationError, ContextRecord, SimulationError, _require
from .models.synthetic import hour_of_day

FAMILIES = ("none", "numeric", "effort", "combined")

#: Numeric payload fields the ``numeric`` family looks for, in order.
NUMERIC_FIELD_CATALOG = ("cores", "files")

# score contribution per occurrence, matched case-insensitively
_KEYWORD_WEIGHTS = (
    ("cpu-intensive", 2.0),
    ("gpu", 3.0),
    ("multi-core", 1.0),
    ("compile", 1.0),
    ("build", 1.0),
)

_DURATION_RE = re.compile(r"\b(\d+(?:\.\d+)?)h\b")


def estimate_effort_heuristic(text: str) -> float:
    """Keyword-table effort score for a job description.

    Base 1.0, plus 2.0 per "cpu-intensive", 3.0 per "gpu", 1.0 per
    "multi-core", 1.0 per "compile"/"build" occurrence; if a duration
    token like "48h" appears, the score is scaled by hours/24.  Empty or
    keyword-free text scores the base 1.0.
    """
    if not text:
        return 1.0
    lowered = text.lower()
    score = 1.0
    for keyword, weight in _KEYWORD_WEIGHTS:
        score += weight * lowered.count(keyword)
    match = _DURATION_RE.search(lowered)
    if match is not None:
        score *= float(match.group(1)) / 24.0
    return score


class RemoteEstimatorError(SimulationError):
    """The HTTP effort estimator failed (network, status, or payload)."""


def estimate_effort_remote(text: str, url: str, timeout_s: float = 10.0) -> float:
    """Ask an HTTP endpoint to score a job description.

    Sends ``{"text": ...}`` as JSON via POST and expects ``{"effort": x}``
    with a finite x >= 0 back.  Any transport or schema problem raises
    :class:`RemoteEstimatorError`; there is no silent fallback.
    """
    import requests

    try:
        response = requests.post(url, json={"text": text}, timeout=timeout_s)
        response.raise_for_status()
    except requests.RequestException as exc:
        raise RemoteEstimatorError(f"effort estimator request to {url!r} failed: {exc}") from exc
    try:
        payload = response.json()
    except ValueError as exc:
        raise RemoteEstimatorError(f"effort estimator at {url!r} returned non-JSON body") from exc
    if not isinstance(payload, Mapping) or "effort" not in payload:
        raise RemoteEstimatorError(f"effort estimator response missing 'effort' key: {payload!r}")
    effort = payload["effort"]
    if not isinstance(effort, (int, float)) or isinstance(effort, bool) or not math.isfinite(effort):
        raise RemoteEstimatorError(f"effort estimator returned non-numeric effort: {effort!r}")
    if effort < 0:
        raise RemoteEstimatorError(f"effort estimator returned negative effort: {effort!r}")
    return float(effort)


EffortEstimator = Callable[[str], float]


def feature_names(mode: str, numeric_fields: Sequence[str] = NUMERIC_FIELD_CATALOG) -> tuple[str, ...]:
    """Documented feature ordering for a family."""
    _require(mode in FAMILIES, f"unknown feature family {mode!r}")
    names = ["intercept", "hour_sin", "hour_cos"]
    if mode in ("numeric", "combined"):
        for field in numeric_fields:
            names.append(f"{field}_sum")
            names.append(f"{field}_present")
    if mode in ("effort", "combined"):
        names.append("effort")
    return tuple(names)


def build_features(
    records: Iterable[ContextRecord],
    mode: str,
    t_ns: int,
    numeric_fields: Sequence[str] = NUMERIC_FIELD_CATALOG,
    effort_fn: EffortEstimator = estimate_effort_heuristic,
) -> np.ndarray:
    """Feature vector describing time ``t_ns`` given known context records.

    Records not active at ``t_ns`` (begins_at <= t < ends_at) contribute
    nothing; callers pass the output of ``context_query`` at the knowledge
    time, so future-recorded records never leak in.  Non-numeric payload
    values under a cataloged field are ignored.
    """
    _require(mode in FAMILIES, f"unknown feature family {mode!r}")
    hour = hour_of_day(t_ns)
    angle = 2.0 * math.pi * hour / 24.0
    features = [1.0, math.sin(angle), math.cos(angle)]
    if mode == "none":
        return np.asarray(features)
    active = [r for r in records if r.begins_at_ns <= t_ns < r.ends_at_ns]
    if mode in ("numeric", "combined"):
        for field in numeric_fields:
            total = 0.0
            present = 0.0
            for record in active:
                value = record.payload.get(field)
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    total += float(value)
                    present = 1.0
            features.append(total)
            features.append(present)
    if mode in ("effort", "combined"):
        features.append(sum(effort_fn(record.text()) for record in active))
    return np.asarray(features)


def fit_least_squares(
    design: np.ndarray, observed: np.ndarray, allow_ridge: bool = False
) -> np.ndarray:
    """Least-squares coefficients for ``design @ beta ~ observed``.

    Requires at least as many samples as features and a full-rank design;
    with ``allow_ridge`` a rank-deficient fit falls back to ridge
    regression with a trace-scaled penalty (1e-8) instead of failing.
    """
    design = np.asarray(design, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    _require(design.ndim == 2, "design matrix must be 2-D")
    _require(observed.ndim == 1, "observations must be 1-D")
    samples, width = design.shape
    _require(samples == observed.shape[0], "design and observations disagree on sample count")
    _require(samples >= width, f"need >= {width} samples, got {samples}")
    rank = np.linalg.matrix_rank(design)
    if rank < width:
        if not allow_ridge:
            raise ConfigurationError(
                f"design matrix is rank-deficient ({rank} < {width}); enable the ridge fallback"
            )
        gram = design.T @ design
        penalty = 1e-8 * (np.trace(gram) / width)
        if penalty <= 0.0:
            penalty = 1e-12
        return np.linalg.solve(gram + penalty * np.eye(width), design.T @ observed)
    coefficients, _, _, _ = np.linalg.lstsq(design, observed, rcond=None)
    return coefficients


def rmse(predicted: Sequence[float], observed: Sequence[float]) -> float:
    """Root-mean-square error in the observations' unit (here Watts)."""
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    _require(predicted.shape == observed.shape, "predicted and observed lengths differ")
    _require(predicted.size >= 1, "rmse needs at least one sample")
    return float(np.sqrt(np.mean((predicted - observed) ** 2)))


@dataclass(frozen=True)
class Predictor:
    """A fitted load model for one feature family."""

    mode: str
    coefficients: tuple[float, ...]
    numeric_fields: tuple[str, ...] = NUMERIC_FIELD_CATALOG

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "numeric_fields", tuple(self.numeric_fields))
        expected = len(feature_names(self.mode, self.numeric_fields))
        _require(
            len(self.coefficients) == expected,
            f"{self.mode!r} predictor needs {expected} coefficients, got {len(self.coefficients)}",
        )

    def predict_features(self, features: np.ndarray) -> float:
        return float(np.dot(np.asarray(features, dtype=np.float64), self.coefficients))

    def predict(
        self,
        records: Iterable[ContextRecord],
        t_ns: int,
        effort_fn: EffortEstimator = estimate_effort_heuristic,
    ) -> float:
        return self.predict_features(
            build_features(records, self.mode, t_ns, self.numeric_fields, effort_fn)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "mode": self.mode,
                "numeric_fields": list(self.numeric_fields),
                "coefficients": list(self.coefficients),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Predictor":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"predictor JSON is malformed: {exc}") from exc
        _require(isinstance(payload, dict), "predictor JSON must be an object")
        _require(payload.get("schema_version") == 1, "unsupported predictor schema_version")
        return cls(
            mode=payload["mode"],
            coefficients=tuple(payload["coefficients"]),
            numeric_fields=tuple(payload.get("numeric_fields", NUMERIC_FIELD_CATALOG)),
        )


def train_predictor(
    records: Sequence[ContextRecord],
    times_ns: Sequence[int],
    observed_w: Sequence[float],
    mode: str,
    numeric_fields: Sequence[str] = NUMERIC_FIELD_CATALOG,
    effort_fn: EffortEstimator = estimate_effort_heuristic,
    allow_ridge: bool = False,
) -> Predictor:
    """Fit one family on (time, load) samples.

    Features at each sample time use only records already recorded by
    then, matching what a live forecaster could have known.
    """
    from .core import context_query

    _require(len(times_ns) == len(observed_w), "times and observations disagree on length")
    design = np.vstack(
        [
            build_features(context_query(records, t), mode, t, numeric_fields, effort_fn)
            for t in times_ns
        ]
    )
    coefficients = fit_least_squares(design, np.asarray(observed_w, dtype=np.float64), allow_ridge)
    return Predictor(mode=mode, coefficients=tuple(coefficients), numeric_fields=tuple(numeric_fields))


def evaluate_families(
    records: Sequence[ContextRecord],
    times_ns: Sequence[int],
    observed_w: Sequence[float],
    train_fraction: float = 0.7,
    families: Sequence[str] = FAMILIES,
    numeric_fields: Sequence[str] = NUMERIC_FIELD_CATALOG,
    effort_fn: EffortEstimator = estimate_effort_heuristic,
) -> dict[str, float]:
    """Train each family on the leading time window, report test RMSE.

    The split is by sample order (time-ordered input expected), so the
    test window is strictly after the training window.  Rank-deficient
    families (a payload field never occurring, say) fall back to ridge.
    """
    _require(len(times_ns) == len(observed_w), "times and observations disagree on length")
    _require(0.0 < train_fraction < 1.0, "train_fraction must be in (0, 1)")
    for family in families:
        _require(family in FAMILIES, f"unknown feature family {family!r}")
    count = len(times_ns)
    split = int(count * train_fraction)
    width = max(len(feature_names(f, numeric_fields)) for f in families)
    _require(split >= width, f"training window too small: {split} samples for {width} features")
    _require(split < count, "test window is empty")

    from .core import context_query

    report: dict[str, float] = {}
    for family in families:
        predictor = train_predictor(
            records, times_ns[:split], observed_w[:split], family, numeric_fields, effort_fn,
            allow_ridge=True,
        )
        predicted = [
            predictor.predict_features(
                build_features(context_query(records, t), family, t, numeric_fields, effort_fn)
            )
            for t in times_ns[split:]
        ]
        report[family] = rmse(predicted, list(observed_w[split:]))
    return report
