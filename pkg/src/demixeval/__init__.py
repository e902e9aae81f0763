"""Evaluation engine and challenge harness for four-stem music demixing."""

from .audio_io import (
    DatasetManifest,
    SongEntry,
    StemKind,
    ValidationReport,
    Waveform,
    load_manifest,
    read_wav,
    validate_song_audio,
    write_wav,
)
from .metrics import (
    Aggregation,
    MetricConfig,
    MetricId,
    StemScores,
    bsseval_v3_sdr,
    framewise,
    global_mae,
    global_mse,
    global_sdr,
    metric_suite,
    sdr_song,
    si_sdr,
)
from .oracle import (
    OracleConfig,
    Spectrogram,
    ideal_mwf,
    ideal_swf,
    istft,
    mixture_baseline,
    stft,
    swf_masks,
)
from .harness import (
    Leaderboard,
    LeaderboardEntry,
    RoundPlan,
    SongScore,
    SubmissionDescriptor,
    evaluate_submission,
    plan_rounds,
    rank,
    score_song,
)
from .analysis import (
    CorrelationKind,
    CorrelationMatrix,
    MetricTable,
    correlation_matrix,
    pearson,
    spearman,
)

__version__ = "0.1.0"
