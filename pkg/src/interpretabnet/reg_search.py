"""Adaptive search for the mask-diversity regularizer weight.

Candidates sweep multiplicatively (0, 10, 100, ...) across a range; each
candidate trains a model, scores it, and checks every step mask against two
interpretability criteria (count of features inside an importance band, and
a minimum number of salient features).  The search stops once enough
candidates pass in full, and narrows to a linear sweep of one decade around
the single passing candidate when the coarse sweep finds exactly one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .encoder import MaskTensor
from .errors import ConfigError, EmptyInputError, NoFeasibleRegError


@dataclass(frozen=True)
class CriteriaConfig:
    """Interpretability gate for step masks plus the search range.

    ``importance_band`` is the per-feature aggregated-importance interval a
    "salient" feature should occupy; ``band_count`` bounds how many features
    per mask must fall inside it; ``required_passes`` is how many fully
    passing candidates end the search.
    """

    importance_band: tuple[float, float] = (0.20, 0.25)
    band_count: tuple[int, int] = (2, 3)
    required_passes: int = 3
    range_start: float = 0.0
    range_end: float = 1e7
    salience_floor: float = 0.05
    linear_subdivisions: int = 8

    def __post_init__(self):
        lo, hi = self.importance_band
        if not (0.0 < lo < hi < 1.0):
            raise ConfigError("importance_band must satisfy 0 < lo < hi < 1")
        clo, chi = self.band_count
        if clo < 1 or chi < clo:
            raise ConfigError("band_count lower bound must be >= 1 and <= upper")
        if self.required_passes < 1:
            raise ConfigError("required_passes must be >= 1")
        if self.range_start < 0:
            raise ConfigError("range_start must be >= 0")
        if self.range_end <= self.range_start:
            raise ConfigError("range_end must exceed range_start")
        if not (0.0 < self.salience_floor < 1.0):
            raise ConfigError("salience_floor must lie in (0, 1)")
        if self.linear_subdivisions < 1:
            raise ConfigError("linear_subdivisions must be >= 1")


@dataclass
class StepVerdict:
    step: int
    in_band: int
    salient: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "in_band": self.in_band,
            "salient": self.salient,
            "passed": self.passed,
        }


@dataclass
class CriteriaResult:
    steps: list[StepVerdict]
    passed: bool


def aggregated_step_importance(masks: MaskTensor | np.ndarray) -> np.ndarray:
    """(K, D) per-step feature importance: mean over samples, renormalized."""
    values = masks.numpy() if isinstance(masks, MaskTensor) else np.asarray(masks)
    if values.ndim != 3 or values.shape[1] == 0:
        raise EmptyInputError("mask tensor has no samples")
    agg = values.mean(axis=1)
    return agg / agg.sum(axis=1, keepdims=True)


def criteria_check(masks: MaskTensor | np.ndarray, cfg: CriteriaConfig) -> CriteriaResult:
    """Check every step mask against the interpretability criteria.

    A step passes iff (a) the number of features whose aggregated importance
    lies inside the band is within ``band_count``, and (b) at least as many
    features clear ``salience_floor`` as the band-count lower bound.
    """
    agg = aggregated_step_importance(masks)
    lo, hi = cfg.importance_band
    clo, chi = cfg.band_count
    verdicts = []
    for k, imp in enumerate(agg):
        in_band = int(((imp >= lo) & (imp <= hi)).sum())
        salient = int((imp > cfg.salience_floor).sum())
        ok = (clo <= in_band <= chi) and (salient >= clo)
        verdicts.append(StepVerdict(step=k, in_band=in_band, salient=salient, passed=ok))
    return CriteriaResult(steps=verdicts, passed=all(v.passed for v in verdicts))


@dataclass
class LedgerEntry:
    r_m: float
    accuracy: float
    criteria: CriteriaResult

    @property
    def passed(self) -> bool:
        return self.criteria.passed

    def to_dict(self) -> dict:
        return {
            "r_m": self.r_m,
            "accuracy": self.accuracy,
            "passed": self.passed,
            "steps": [v.to_dict() for v in self.criteria.steps],
        }


@dataclass
class RegSearchLedger:
    """Every evaluated candidate in evaluation order, plus the pass counter."""

    entries: dict[float, LedgerEntry] = field(default_factory=dict)
    trainer_calls: int = 0

    @property
    def pass_count(self) -> int:
        return sum(1 for e in self.entries.values() if e.passed)

    def passing(self) -> list[LedgerEntry]:
        return [e for e in self.entries.values() if e.passed]

    def add(self, entry: LedgerEntry):
        self.entries[entry.r_m] = entry

    def best(self) -> LedgerEntry | None:
        passing = self.passing()
        if not passing:
            return None
        return max(passing, key=lambda e: (e.accuracy, -e.r_m))

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries.values()],
            "pass_count": self.pass_count,
            "trainer_calls": self.trainer_calls,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class SearchResult:
    r_m_star: float
    ledger: RegSearchLedger


def _candidate_stream(cfg: CriteriaConfig, linear: bool):
    """Candidates for one sweep; multiplicative unless ``linear``."""
    alpha = cfg.range_start
    step = (cfg.range_end - cfg.range_start) / cfg.linear_subdivisions
    while alpha <= cfg.range_end:
        yield alpha
        if linear:
            alpha += step
        elif alpha == 0:
            alpha = 10.0
        else:
            alpha *= 10.0


def search_rm(
    trainer_handle,
    cfg: CriteriaConfig,
    recursion: bool = False,
    seed: int = 0,
    _ledger: RegSearchLedger | None = None,
) -> SearchResult:
    """Find the regularizer weight that best trades accuracy for mask quality.

    ``trainer_handle(r_m, seed) -> (accuracy, MaskTensor)`` must be pure per
    argument pair.  Candidates already in the ledger are not re-trained.
    Returns the accuracy-argmax among criteria-passing candidates; raises
    :class:`NoFeasibleRegError` (carrying the ledger) when none passes.
    """
    ledger = _ledger if _ledger is not None else RegSearchLedger()
    for cand in _candidate_stream(cfg, linear=recursion):
        if ledger.pass_count >= cfg.required_passes:
            break
        if cand in ledger.entries:
            continue
        accuracy, masks = trainer_handle(cand, seed)
        ledger.trainer_calls += 1
        ledger.add(LedgerEntry(r_m=cand, accuracy=accuracy, criteria=criteria_check(masks, cfg)))

    exhausted = ledger.pass_count < cfg.required_passes
    if not recursion and exhausted and len(ledger.passing()) == 1:
        best = ledger.passing()[0]
        if best.r_m > 0:  # a zero decade cannot be narrowed
            narrowed = replace(
                cfg,
                range_start=best.r_m / 10.0,
                range_end=best.r_m * 10.0,
            )
            return search_rm(
                trainer_handle, narrowed, recursion=True, seed=seed, _ledger=ledger
            )

    best = ledger.best()
    if best is None:
        raise NoFeasibleRegError(
            "no candidate passed the interpretability criteria", ledger=ledger
        )
    return SearchResult(r_m_star=best.r_m, ledger=ledger)


def max_trainer_calls(cfg: CriteriaConfig) -> int:
    """Upper bound on trainer invocations for one full search."""
    mult = 0
    alpha = cfg.range_start
    while alpha <= cfg.range_end:
        mult += 1
        alpha = 10.0 if alpha == 0 else alpha * 10.0
    return mult + cfg.linear_subdivisions + 1
