"""Stem audio I/O: WAVE files, waveform containers, dataset manifests.

Waveforms are float64 arrays shaped (channels, frames) at full scale +-1.0.
PCM samples are normalized by 2**(bits - 1), so PCM 16-bit +32767 maps to
32767/32768. Files are always written as IEEE float 32-bit, which makes the
write/read round trip bit-exact for float32-valued data.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    AudioFormatError,
    CorruptFileError,
    InvalidInputError,
    ManifestError,
    UnsupportedCodecError,
)

_WAVE_PCM = 1
_WAVE_IEEE_FLOAT = 3


class StemKind(Enum):
    """The four stems of the demixing task. Definition order is the output order."""

    BASS = "bass"
    DRUMS = "drums"
    OTHER = "other"
    VOCALS = "vocals"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "StemKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ManifestError(f"unknown stem kind {name!r}") from None


@dataclass(frozen=True)
class Waveform:
    """Multichannel time-domain audio.

    samples: 2-D float array, shape (channels, frames), full scale +-1.0.
    sample_rate: Hz, positive integer.

    The sample array is adopted and marked read-only; waveforms are safe to
    share across workers.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise InvalidInputError(
                "samples must be 2-D (channels, frames) with at least one channel"
            )
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("samples must be finite (no NaN or Inf)")
        rate = self.sample_rate
        if not isinstance(rate, (int, np.integer)) or int(rate) <= 0:
            raise InvalidInputError("sample_rate must be a positive integer")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(rate))

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_seconds(self) -> float:
        return self.num_frames / self.sample_rate


def read_wav(path) -> Waveform:
    """Read a RIFF/WAVE file into a Waveform.

    Supports PCM 16-bit, PCM 24-bit, and IEEE float 32-bit, any channel
    count >= 1. PCM data is scaled by 2**(bits - 1).

    Raises AudioFormatError for malformed headers, UnsupportedCodecError for
    other encodings, CorruptFileError for truncated data.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data_span = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = pos + 8
        if chunk_id == b"fmt ":
            if chunk_size < 16 or body + 16 > len(raw):
                raise AudioFormatError(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", raw, body)
        elif chunk_id == b"data":
            data_span = (body, chunk_size)
        # chunks are word aligned
        pos = body + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise AudioFormatError(f"{path}: missing fmt chunk")
    if data_span is None:
        raise AudioFormatError(f"{path}: missing data chunk")

    format_tag, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if channels < 1:
        raise AudioFormatError(f"{path}: channel count {channels} is invalid")
    if sample_rate < 1:
        raise AudioFormatError(f"{path}: sample rate {sample_rate} is invalid")

    start, size = data_span
    if start + size > len(raw):
        raise CorruptFileError(
            f"{path}: data chunk declares {size} bytes but the file ends early"
        )
    body = raw[start : start + size]

    if format_tag == _WAVE_PCM and bits == 16:
        bytes_per_sample = 2
    elif format_tag == _WAVE_PCM and bits == 24:
        bytes_per_sample = 3
    elif format_tag == _WAVE_IEEE_FLOAT and bits == 32:
        bytes_per_sample = 4
    else:
        raise UnsupportedCodecError(
            f"{path}: format tag {format_tag} at {bits} bits is not supported "
            "(expected PCM16, PCM24, or IEEE float32)"
        )

    frame_size = bytes_per_sample * channels
    if size % frame_size != 0:
        raise CorruptFileError(f"{path}: data chunk holds a partial frame")
    num_frames = size // frame_size

    if format_tag == _WAVE_PCM and bits == 16:
        flat = np.frombuffer(body, dtype="<i2").astype(np.float64) / 32768.0
    elif format_tag == _WAVE_PCM and bits == 24:
        triples = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        values = triples[:, 0] | (triples[:, 1] << 8) | (triples[:, 2] << 16)
        values = (values ^ 0x800000) - 0x800000  # sign-extend 24 bits
        flat = values.astype(np.float64) / 8388608.0
    else:
        floats = np.frombuffer(body, dtype="<f4")
        if not np.all(np.isfinite(floats)):
            raise CorruptFileError(f"{path}: float data contains NaN or Inf")
        flat = floats.astype(np.float64)

    samples = np.ascontiguousarray(flat.reshape(num_frames, channels).T)
    return Waveform(samples, int(sample_rate))


def write_wav(waveform: Waveform, path) -> None:
    """Write a Waveform as an IEEE float 32-bit WAVE file.

    read_wav(write_wav(w)) reproduces w exactly when its samples are
    float32-representable. Zero-frame waveforms are rejected.
    """
    if waveform.num_frames == 0:
        raise InvalidInputError("refusing to write a waveform with zero frames")
    path = Path(path)
    interleaved = np.ascontiguousarray(waveform.samples.T, dtype=np.float32)
    data = interleaved.tobytes()
    channels = waveform.num_channels
    rate = waveform.sample_rate
    fmt_body = struct.pack(
        "<HHIIHH", _WAVE_IEEE_FLOAT, channels, rate, rate * channels * 4, channels * 4, 32
    )
    fact_body = struct.pack("<I", waveform.num_frames)
    payload = b"".join(
        [
            b"fmt ", struct.pack("<I", len(fmt_body)), fmt_body,
            b"fact", struct.pack("<I", len(fact_body)), fact_body,
            b"data", struct.pack("<I", len(data)), data,
        ]
    )
    path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(payload)) + b"WAVE" + payload)


@dataclass(frozen=True)
class SongEntry:
    """Per-song manifest record: stem locations plus scoring annotations."""

    song_id: str
    stem_paths: Mapping[StemKind, Path]
    mixture_path: Path
    genre: str = ""
    language: str = ""
    title: str = ""
    other_instruments: tuple = ()
    is_demo: bool = False
    silent_stems: frozenset = frozenset()

    def __post_init__(self) -> None:
        if not self.song_id:
            raise ManifestError("song_id must be non-empty")
        paths = {k: Path(v) for k, v in dict(self.stem_paths).items()}
        missing = [k.value for k in StemKind if k not in paths]
        if missing:
            raise ManifestError(
                f"song {self.song_id}: missing stem paths for {', '.join(missing)}"
            )
        unknown = [k for k in paths if not isinstance(k, StemKind)]
        if unknown:
            raise ManifestError(f"song {self.song_id}: unknown stem keys {unknown}")
        silent = frozenset(self.silent_stems)
        if not silent <= set(StemKind):
            raise ManifestError(f"song {self.song_id}: silent_stems has unknown members")
        if silent == set(StemKind):
            raise ManifestError(f"song {self.song_id}: all four stems declared silent")
        object.__setattr__(self, "stem_paths", paths)
        object.__setattr__(self, "mixture_path", Path(self.mixture_path))
        object.__setattr__(self, "other_instruments", tuple(self.other_instruments))
        object.__setattr__(self, "silent_stems", silent)


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered song list plus dataset-level metadata."""

    songs: tuple
    name: str
    sample_rate: int

    def __post_init__(self) -> None:
        songs = tuple(self.songs)
        if not songs:
            raise ManifestError("manifest must list at least one song")
        seen = set()
        for song in songs:
            if song.song_id in seen:
                raise ManifestError(f"duplicate song_id {song.song_id!r}")
            seen.add(song.song_id)
        if int(self.sample_rate) <= 0:
            raise ManifestError("manifest sample_rate must be positive")
        object.__setattr__(self, "songs", songs)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def eligible_songs(self) -> list:
        """Songs that count for scoring (demo songs removed)."""
        return [s for s in self.songs if not s.is_demo]

    def song(self, song_id: str) -> SongEntry:
        for entry in self.songs:
            if entry.song_id == song_id:
                return entry
        raise ManifestError(f"no song with id {song_id!r}")


def load_manifest(path) -> DatasetManifest:
    """Load and validate a JSON dataset manifest.

    File paths inside the manifest are resolved relative to the manifest's
    directory. Songs keep file order. See the README for the full format.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: top level must be an object")
    for key in ("name", "sample_rate", "songs"):
        if key not in doc:
            raise ManifestError(f"{path}: missing top-level key {key!r}")
    base = path.parent

    songs = []
    for index, record in enumerate(doc["songs"]):
        if not isinstance(record, dict):
            raise ManifestError(f"{path}: song record {index} must be an object")
        song_id = record.get("song_id")
        if not song_id:
            raise ManifestError(f"{path}: song record {index} has no song_id")
        stems_doc = record.get("stems")
        if not isinstance(stems_doc, dict):
            raise ManifestError(f"song {song_id}: missing stems object")
        stem_paths = {}
        for key, value in stems_doc.items():
            stem_paths[StemKind.from_name(key)] = base / value
        if "mixture" not in record:
            raise ManifestError(f"song {song_id}: missing mixture path")
        silent = frozenset(
            StemKind.from_name(name) for name in record.get("silent_stems", [])
        )
        try:
            entry = SongEntry(
                song_id=str(song_id),
                stem_paths=stem_paths,
                mixture_path=base / record["mixture"],
                genre=str(record.get("genre", "")),
                language=str(record.get("language", "")),
                title=str(record.get("title", "")),
                other_instruments=tuple(record.get("other_instruments", [])),
                is_demo=bool(record.get("is_demo", False)),
                silent_stems=silent,
            )
        except ManifestError as exc:
            raise ManifestError(f"{path}: {exc}") from None
        songs.append(entry)

    return DatasetManifest(tuple(songs), str(doc["name"]), int(doc["sample_rate"]))


# mean-power threshold below which a stem counts as silent for warnings
SILENCE_WARNING_FLOOR = 1e-12

DEFAULT_MIX_TOLERANCE = 1e-3  # absorbs PCM quantization of independently quantized stems


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking one song's audio against the mixture convention."""

    song_id: str
    length_errors: tuple
    rate_errors: tuple
    max_deviation: float
    tolerance: float
    warnings: tuple = ()

    @property
    def passed(self) -> bool:
        if self.length_errors or self.rate_errors:
            return False
        return self.max_deviation <= self.tolerance  # NaN compares False

    def issues(self) -> list:
        found = list(self.length_errors) + list(self.rate_errors)
        if not found and not self.max_deviation <= self.tolerance:
            found.append(
                f"mixture deviates from stem sum by {self.max_deviation:.6g} "
                f"(tolerance {self.tolerance:.6g})"
            )
        return found


def validate_song_audio(entry: SongEntry, tolerance: float = DEFAULT_MIX_TOLERANCE) -> ValidationReport:
    """Check stem/mixture consistency for one song.

    Verifies that every stem matches the mixture's length, channel count and
    sample rate, and that the mixture equals the sample-wise sum of the four
    stems within `tolerance`. Silence mismatches against the manifest's
    silent_stems annotations are reported as warnings only.
    """
    mixture = read_wav(entry.mixture_path)
    stems = {kind: read_wav(entry.stem_paths[kind]) for kind in StemKind}

    length_errors = []
    rate_errors = []
    warnings = []
    for kind in StemKind:
        stem = stems[kind]
        if stem.num_frames != mixture.num_frames:
            length_errors.append(
                f"stem {kind} has {stem.num_frames} frames, mixture has {mixture.num_frames}"
            )
        if stem.num_channels != mixture.num_channels:
            length_errors.append(
                f"stem {kind} has {stem.num_channels} channels, mixture has {mixture.num_channels}"
            )
        if stem.sample_rate != mixture.sample_rate:
            rate_errors.append(
                f"stem {kind} is at {stem.sample_rate} Hz, mixture at {mixture.sample_rate} Hz"
            )
        if stem.num_frames:
            mean_power = float(np.mean(stem.samples**2))
            declared = kind in entry.silent_stems
            if declared and mean_power > SILENCE_WARNING_FLOOR:
                warnings.append(
                    f"stem {kind} declared silent but has mean power {mean_power:.3g}"
                )
            elif not declared and mean_power <= SILENCE_WARNING_FLOOR:
                warnings.append(f"stem {kind} appears silent but is not declared silent")

    if length_errors or rate_errors:
        max_deviation = float("nan")
    else:
        total = np.zeros_like(mixture.samples)
        for kind in StemKind:
            total = total + stems[kind].samples
        max_deviation = float(np.max(np.abs(mixture.samples - total))) if mixture.num_frames else 0.0

    return ValidationReport(
        song_id=entry.song_id,
        length_errors=tuple(length_errors),
        rate_errors=tuple(rate_errors),
        max_deviation=max_deviation,
        tolerance=float(tolerance),
        warnings=tuple(warnings),
    )
