"""Distortion metrics on waveform pairs.

The headline metric is the stabilized global SDR,

    10 * log10((sum_n ||s(n)||^2 + eps) / (sum_n ||s(n) - s_hat(n)||^2 + eps)),

where the per-frame norm runs across channels and eps keeps the ratio defined
for silent inputs. The rest of the family (MAE, MSE, SI-SDR, the classic
BSS Eval style SDR without the stabilizer, and framewise variants with mean or
median aggregation) exists for cross-metric comparisons. All accumulation is
in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from .audio_io import StemKind, Waveform
from .errors import InvalidInputError, UndefinedMetricError

DB_CLAMP = 120.0  # stand-in for +-infinity; far outside any realistic score

DEFAULT_EPSILON = 1e-7
DEFAULT_ENERGY_FLOOR = 1e-12


class Aggregation(Enum):
    MEAN = "mean"
    MEDIAN = "median"


@dataclass(frozen=True)
class MetricConfig:
    """Parameters shared by the metric family.

    frame_length and hop_length are in seconds and only consulted by
    framewise evaluation. silent_frame_energy_floor is the reference energy
    below which a frame (or a whole signal, for SI-SDR) counts as silent.
    """

    epsilon: float = DEFAULT_EPSILON
    frame_length: Optional[float] = None
    hop_length: Optional[float] = None
    aggregation: Aggregation = Aggregation.MEAN
    silent_frame_energy_floor: float = DEFAULT_ENERGY_FLOOR

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise InvalidInputError("epsilon must be > 0")
        if self.frame_length is not None and self.frame_length <= 0:
            raise InvalidInputError("frame_length must be > 0 when given")
        if self.hop_length is not None and self.hop_length <= 0:
            raise InvalidInputError("hop_length must be > 0 when given")
        if (
            self.frame_length is not None
            and self.hop_length is not None
            and self.hop_length > self.frame_length
        ):
            raise InvalidInputError("hop_length must not exceed frame_length")
        if self.silent_frame_energy_floor < 0:
            raise InvalidInputError("silent_frame_energy_floor must be >= 0")


class MetricId(Enum):
    """Every metric in the comparison family.

    Framewise variants aggregate per-frame values with mean or median. The
    BSS Eval style entries drop the stabilizing constant; v3 framewise uses
    30 s frames with a 15 s hop, v4 framewise uses 1 s frames with a 1 s hop.
    """

    GLOBAL_SDR = "global_sdr"
    FRAMEWISE_SDR_MEAN = "framewise_sdr_mean"
    FRAMEWISE_SDR_MEDIAN = "framewise_sdr_median"
    GLOBAL_MAE = "global_mae"
    FRAMEWISE_MAE_MEAN = "framewise_mae_mean"
    FRAMEWISE_MAE_MEDIAN = "framewise_mae_median"
    GLOBAL_MSE = "global_mse"
    FRAMEWISE_MSE_MEAN = "framewise_mse_mean"
    FRAMEWISE_MSE_MEDIAN = "framewise_mse_median"
    GLOBAL_SI_SDR = "global_si_sdr"
    FRAMEWISE_SI_SDR_MEAN = "framewise_si_sdr_mean"
    FRAMEWISE_SI_SDR_MEDIAN = "framewise_si_sdr_median"
    BSSEVAL_V3_SDR = "bsseval_v3_sdr"
    BSSEVAL_V3_FRAMEWISE_SDR_MEAN = "bsseval_v3_framewise_sdr_mean"
    BSSEVAL_V3_FRAMEWISE_SDR_MEDIAN = "bsseval_v3_framewise_sdr_median"
    BSSEVAL_V4_FRAMEWISE_SDR_MEAN = "bsseval_v4_framewise_sdr_mean"
    BSSEVAL_V4_FRAMEWISE_SDR_MEDIAN = "bsseval_v4_framewise_sdr_median"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SuiteEntry:
    """How one MetricId is evaluated inside metric_suite."""

    base: "MetricId"  # underlying global metric
    frame_length: Optional[float] = None  # seconds; None means global
    hop_length: Optional[float] = None
    aggregation: Optional[Aggregation] = None
    unit: str = "dB"


SUITE_DEFINITIONS: Mapping[MetricId, SuiteEntry] = {
    MetricId.GLOBAL_SDR: SuiteEntry(MetricId.GLOBAL_SDR),
    MetricId.FRAMEWISE_SDR_MEAN: SuiteEntry(MetricId.GLOBAL_SDR, 1.0, 1.0, Aggregation.MEAN),
    MetricId.FRAMEWISE_SDR_MEDIAN: SuiteEntry(MetricId.GLOBAL_SDR, 1.0, 1.0, Aggregation.MEDIAN),
    MetricId.GLOBAL_MAE: SuiteEntry(MetricId.GLOBAL_MAE, unit="amplitude"),
    MetricId.FRAMEWISE_MAE_MEAN: SuiteEntry(
        MetricId.GLOBAL_MAE, 1.0, 1.0, Aggregation.MEAN, unit="amplitude"
    ),
    MetricId.FRAMEWISE_MAE_MEDIAN: SuiteEntry(
        MetricId.GLOBAL_MAE, 1.0, 1.0, Aggregation.MEDIAN, unit="amplitude"
    ),
    MetricId.GLOBAL_MSE: SuiteEntry(MetricId.GLOBAL_MSE, unit="power"),
    MetricId.FRAMEWISE_MSE_MEAN: SuiteEntry(
        MetricId.GLOBAL_MSE, 1.0, 1.0, Aggregation.MEAN, unit="power"
    ),
    MetricId.FRAMEWISE_MSE_MEDIAN: SuiteEntry(
        MetricId.GLOBAL_MSE, 1.0, 1.0, Aggregation.MEDIAN, unit="power"
    ),
    MetricId.GLOBAL_SI_SDR: SuiteEntry(MetricId.GLOBAL_SI_SDR),
    MetricId.FRAMEWISE_SI_SDR_MEAN: SuiteEntry(MetricId.GLOBAL_SI_SDR, 1.0, 1.0, Aggregation.MEAN),
    MetricId.FRAMEWISE_SI_SDR_MEDIAN: SuiteEntry(
        MetricId.GLOBAL_SI_SDR, 1.0, 1.0, Aggregation.MEDIAN
    ),
    MetricId.BSSEVAL_V3_SDR: SuiteEntry(MetricId.BSSEVAL_V3_SDR),
    MetricId.BSSEVAL_V3_FRAMEWISE_SDR_MEAN: SuiteEntry(
        MetricId.BSSEVAL_V3_SDR, 30.0, 15.0, Aggregation.MEAN
    ),
    MetricId.BSSEVAL_V3_FRAMEWISE_SDR_MEDIAN: SuiteEntry(
        MetricId.BSSEVAL_V3_SDR, 30.0, 15.0, Aggregation.MEDIAN
    ),
    MetricId.BSSEVAL_V4_FRAMEWISE_SDR_MEAN: SuiteEntry(
        MetricId.BSSEVAL_V3_SDR, 1.0, 1.0, Aggregation.MEAN
    ),
    MetricId.BSSEVAL_V4_FRAMEWISE_SDR_MEDIAN: SuiteEntry(
        MetricId.BSSEVAL_V3_SDR, 1.0, 1.0, Aggregation.MEDIAN
    ),
}


def _check_pair(reference: Waveform, estimate: Waveform) -> None:
    if reference.samples.shape != estimate.samples.shape:
        raise InvalidInputError(
            f"shape mismatch: reference {reference.samples.shape} vs "
            f"estimate {estimate.samples.shape}"
        )
    if reference.sample_rate != estimate.sample_rate:
        raise InvalidInputError(
            f"sample rate mismatch: {reference.sample_rate} vs {estimate.sample_rate}"
        )
    if reference.num_frames == 0:
        raise InvalidInputError("empty waveforms cannot be scored")


def _clamp_db(value: float) -> float:
    return max(-DB_CLAMP, min(DB_CLAMP, value))


# array-level evaluators, shared by the global operations and framewise slicing


def _sdr_arrays(ref: np.ndarray, est: np.ndarray, cfg: MetricConfig) -> float:
    signal = float(np.sum(ref * ref))
    diff = ref - est
    noise = float(np.sum(diff * diff))
    return 10.0 * math.log10((signal + cfg.epsilon) / (noise + cfg.epsilon))


def _mae_arrays(ref: np.ndarray, est: np.ndarray, cfg: MetricConfig) -> float:
    return float(np.mean(np.abs(ref - est)))


def _mse_arrays(ref: np.ndarray, est: np.ndarray, cfg: MetricConfig) -> float:
    diff = ref - est
    return float(np.mean(diff * diff))


def _si_sdr_arrays(ref: np.ndarray, est: np.ndarray, cfg: MetricConfig) -> float:
    s = ref.ravel()
    y = est.ravel()
    reference_energy = float(np.dot(s, s))
    if reference_energy <= cfg.silent_frame_energy_floor:
        raise UndefinedMetricError("SI-SDR is undefined for a silent reference")
    scale = float(np.dot(y, s)) / reference_energy
    target = scale * s
    residual = y - target
    target_energy = float(np.dot(target, target))
    residual_energy = float(np.dot(residual, residual))
    if residual_energy == 0.0:
        return DB_CLAMP
    if target_energy == 0.0:
        return -DB_CLAMP
    return _clamp_db(10.0 * math.log10(target_energy / residual_energy))


def _bsseval_v3_arrays(ref: np.ndarray, est: np.ndarray, cfg: MetricConfig) -> float:
    signal = float(np.sum(ref * ref))
    if signal == 0.0:
        raise UndefinedMetricError("BSS Eval style SDR is undefined for a silent reference")
    diff = ref - est
    noise = float(np.sum(diff * diff))
    if noise == 0.0:
        return DB_CLAMP
    return _clamp_db(10.0 * math.log10(signal / noise))


_ARRAY_EVALUATORS = {
    MetricId.GLOBAL_SDR: _sdr_arrays,
    MetricId.GLOBAL_MAE: _mae_arrays,
    MetricId.GLOBAL_MSE: _mse_arrays,
    MetricId.GLOBAL_SI_SDR: _si_sdr_arrays,
    MetricId.BSSEVAL_V3_SDR: _bsseval_v3_arrays,
}


def global_sdr(reference: Waveform, estimate: Waveform, cfg: MetricConfig = MetricConfig()) -> float:
    """Stabilized global SDR in dB. Defined for every input, including silence.

    A silent estimate against a reference of energy E scores
    10*log10((E + eps)/(E + eps)) = 0 dB, and silent/silent scores exactly 0 dB.
    """
    _check_pair(reference, estimate)
    return _sdr_arrays(reference.samples, estimate.samples, cfg)


def global_mae(reference: Waveform, estimate: Waveform) -> float:
    """Mean absolute error over all channels and frames. Lower is better."""
    _check_pair(reference, estimate)
    return _mae_arrays(reference.samples, estimate.samples, MetricConfig())


def global_mse(reference: Waveform, estimate: Waveform) -> float:
    """Mean squared error over all channels and frames. Lower is better."""
    _check_pair(reference, estimate)
    return _mse_arrays(reference.samples, estimate.samples, MetricConfig())


def si_sdr(reference: Waveform, estimate: Waveform, cfg: MetricConfig = MetricConfig()) -> float:
    """Scale-invariant SDR in dB over channel-concatenated signals.

    The estimate is projected onto the reference (target = <y, s>/||s||^2 * s)
    so pure gain errors do not count. Clamped to +-120 dB; a silent reference
    raises UndefinedMetricError.
    """
    _check_pair(reference, estimate)
    return _si_sdr_arrays(reference.samples, estimate.samples, cfg)


def bsseval_v3_sdr(reference: Waveform, estimate: Waveform, cfg: MetricConfig = MetricConfig()) -> float:
    """Energy-ratio SDR with no stabilizing constant, BSS Eval v3 style.

    Equals global_sdr up to the epsilon terms. Returns the +120 dB sentinel
    for an exactly-zero error and raises UndefinedMetricError for an
    exactly-silent reference.
    """
    _check_pair(reference, estimate)
    return _bsseval_v3_arrays(reference.samples, estimate.samples, cfg)


def framewise(
    metric: MetricId,
    reference: Waveform,
    estimate: Waveform,
    cfg: MetricConfig,
) -> float:
    """Evaluate a global metric on fixed-length frames and aggregate.

    `metric` must be one of the global ids (GLOBAL_SDR, GLOBAL_MAE,
    GLOBAL_MSE, GLOBAL_SI_SDR, BSSEVAL_V3_SDR). Both signals are cut into
    frames of cfg.frame_length seconds at a stride of cfg.hop_length seconds;
    only frames fully contained in the signal are used. Frames whose
    reference energy is at or below cfg.silent_frame_energy_floor are
    skipped, as are frames where the underlying metric is undefined.
    Survivors are combined with cfg.aggregation.
    """
    _check_pair(reference, estimate)
    if metric not in _ARRAY_EVALUATORS:
        raise InvalidInputError(f"{metric} is not a global metric id")
    if cfg.frame_length is None or cfg.hop_length is None:
        raise InvalidInputError("framewise evaluation needs frame_length and hop_length")
    rate = reference.sample_rate
    frame = int(round(cfg.frame_length * rate))
    hop = int(round(cfg.hop_length * rate))
    if frame <= 0 or hop <= 0:
        raise InvalidInputError("frame and hop must be at least one sample")
    total = reference.num_frames
    if total < frame:
        raise InvalidInputError(
            f"signal of {total} frames is shorter than one {frame}-frame window"
        )

    evaluate = _ARRAY_EVALUATORS[metric]
    ref = reference.samples
    est = estimate.samples
    values = []
    for start in range(0, total - frame + 1, hop):
        ref_slice = ref[:, start : start + frame]
        if float(np.sum(ref_slice * ref_slice)) <= cfg.silent_frame_energy_floor:
            continue
        try:
            values.append(evaluate(ref_slice, est[:, start : start + frame], cfg))
        except UndefinedMetricError:
            continue
    if not values:
        raise UndefinedMetricError("no frame produced a defined value")
    if cfg.aggregation is Aggregation.MEAN:
        return sum(values) / len(values)
    return float(np.median(values))


def metric_suite(
    reference: Waveform, estimate: Waveform, cfg: MetricConfig = MetricConfig()
) -> dict:
    """Evaluate the whole comparison family on one pair.

    Returns {MetricId: value}. Metrics that are undefined for this pair, or
    whose frame is longer than the signal, are absent from the result rather
    than reported as numbers.
    """
    _check_pair(reference, estimate)
    results = {}
    for metric_id in MetricId:
        entry = SUITE_DEFINITIONS[metric_id]
        if entry.frame_length is None:
            try:
                results[metric_id] = _ARRAY_EVALUATORS[entry.base](
                    reference.samples, estimate.samples, cfg
                )
            except UndefinedMetricError:
                continue
        else:
            frame_cfg = replace(
                cfg,
                frame_length=entry.frame_length,
                hop_length=entry.hop_length,
                aggregation=entry.aggregation,
            )
            try:
                results[metric_id] = framewise(entry.base, reference, estimate, frame_cfg)
            except (UndefinedMetricError, InvalidInputError):
                continue
    return results


@dataclass(frozen=True)
class StemScores:
    """Per-stem metric values plus the subset that enters aggregation.

    evaluated_stems defaults to every stem that has a value. Stems excluded
    from aggregation (silent references) must be dropped from both the map
    and evaluated_stems by the caller.
    """

    values: Mapping[StemKind, float]
    evaluated_stems: frozenset = None

    def __post_init__(self) -> None:
        values = {k: float(v) for k, v in dict(self.values).items()}
        if any(not isinstance(k, StemKind) for k in values):
            raise InvalidInputError("StemScores keys must be StemKind members")
        evaluated = self.evaluated_stems
        evaluated = frozenset(values) if evaluated is None else frozenset(evaluated)
        if not evaluated:
            raise InvalidInputError("evaluated_stems must be non-empty")
        if any(not isinstance(k, StemKind) for k in evaluated):
            raise InvalidInputError("evaluated_stems members must be StemKind members")
        if not set(values) <= evaluated:
            raise InvalidInputError("every scored stem must be in evaluated_stems")
        ordered = {k: values[k] for k in StemKind if k in values}
        object.__setattr__(self, "values", ordered)
        object.__setattr__(self, "evaluated_stems", evaluated)


def sdr_song(scores: StemScores) -> float:
    """Arithmetic mean of the per-stem values over evaluated_stems.

    With a silent stem removed by the harness this is the three-stem mean;
    normally it is the four-stem mean.
    """
    stems = [k for k in StemKind if k in scores.evaluated_stems]
    try:
        values = [scores.values[k] for k in stems]
    except KeyError as exc:
        raise InvalidInputError(f"no score for evaluated stem {exc.args[0]}") from None
    return sum(values) / len(values)
