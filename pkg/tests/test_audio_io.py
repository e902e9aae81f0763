import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from demixeval.audio_io import (
    DatasetManifest,
    SongEntry,
    StemKind,
    Waveform,
    load_manifest,
    read_wav,
    validate_song_audio,
    write_wav,
)
from demixeval.errors import (
    AudioFormatError,
    CorruptFileError,
    InvalidInputError,
    ManifestError,
    UnsupportedCodecError,
)

from helpers import write_float32_wav, write_pcm_wav


class TestWaveform:
    def test_basic_properties(self):
        w = Waveform(np.zeros((2, 100)), 44100)
        assert w.num_channels == 2
        assert w.num_frames == 100
        assert w.duration_seconds == pytest.approx(100 / 44100)

    def test_rejects_nan(self):
        samples = np.zeros((1, 10))
        samples[0, 3] = np.nan
        with pytest.raises(InvalidInputError):
            Waveform(samples, 8000)

    def test_rejects_wrong_rank(self):
        with pytest.raises(InvalidInputError):
            Waveform(np.zeros(10), 8000)

    def test_rejects_bad_rate(self):
        with pytest.raises(InvalidInputError):
            Waveform(np.zeros((1, 10)), 0)
        with pytest.raises(InvalidInputError):
            Waveform(np.zeros((1, 10)), 44100.0)

    def test_samples_are_read_only(self):
        w = Waveform(np.zeros((1, 10)), 8000)
        with pytest.raises(ValueError):
            w.samples[0, 0] = 1.0


class TestReadWav:
    def test_zero_float32_file(self, tmp_path):
        path = tmp_path / "zeros.wav"
        write_float32_wav(path, np.zeros((44100, 2), dtype=np.float32), 44100)
        w = read_wav(path)
        assert w.num_channels == 2
        assert w.num_frames == 44100
        assert w.sample_rate == 44100
        assert np.all(w.samples == 0.0)

    def test_pcm16_full_scale_convention(self, tmp_path):
        path = tmp_path / "one.wav"
        write_pcm_wav(path, np.array([[32767]], dtype=np.int64), 16, 44100)
        w = read_wav(path)
        assert w.samples[0, 0] == 32767 / 32768
        write_pcm_wav(path, np.array([[-32768]], dtype=np.int64), 16, 44100)
        assert read_wav(path).samples[0, 0] == -1.0

    def test_pcm24_scaling(self, tmp_path):
        path = tmp_path / "p24.wav"
        values = np.array([[8388607], [-8388608], [0], [-1]], dtype=np.int64)
        write_pcm_wav(path, values, 24, 48000)
        w = read_wav(path)
        expected = values[:, 0] / 8388608.0
        assert np.array_equal(w.samples[0], expected)

    def test_pcm16_stereo_interleaving(self, tmp_path, rng):
        path = tmp_path / "st.wav"
        ints = rng.integers(-32768, 32768, size=(50, 2))
        write_pcm_wav(path, ints, 16, 22050)
        w = read_wav(path)
        assert w.num_channels == 2
        assert np.array_equal(w.samples, ints.T / 32768.0)

    def test_not_riff(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"OggS" + b"\x00" * 40)
        with pytest.raises(AudioFormatError):
            read_wav(path)

    def test_missing_fmt(self, tmp_path):
        path = tmp_path / "nofmt.wav"
        payload = b"data" + struct.pack("<I", 4) + b"\x00" * 4
        path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(payload)) + b"WAVE" + payload)
        with pytest.raises(AudioFormatError):
            read_wav(path)

    def test_unsupported_codec(self, tmp_path):
        path = tmp_path / "ulaw.wav"
        fmt = struct.pack("<HHIIHH", 7, 1, 8000, 8000, 1, 8)
        payload = (
            b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", 2) + b"\x00\x00"
        )
        path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(payload)) + b"WAVE" + payload)
        with pytest.raises(UnsupportedCodecError):
            read_wav(path)

    def test_truncated_data_chunk(self, tmp_path):
        path = tmp_path / "trunc.wav"
        write_float32_wav(path, np.ones((100, 1), dtype=np.float32), 8000)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 37])
        with pytest.raises(CorruptFileError):
            read_wav(path)

    def test_partial_frame(self, tmp_path):
        path = tmp_path / "partial.wav"
        fmt = struct.pack("<HHIIHH", 3, 2, 8000, 8000 * 8, 8, 32)
        body = b"\x00" * 12  # 1.5 stereo float frames
        payload = (
            b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(body)) + body
        )
        path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(payload)) + b"WAVE" + payload)
        with pytest.raises(CorruptFileError):
            read_wav(path)

    def test_float_nan_payload(self, tmp_path):
        path = tmp_path / "nan.wav"
        data = np.full((4, 1), np.nan, dtype=np.float32)
        write_float32_wav(path, data, 8000)
        with pytest.raises(CorruptFileError):
            read_wav(path)


class TestWriteWav:
    def test_single_value(self, tmp_path):
        path = tmp_path / "half.wav"
        write_wav(Waveform(np.full((2, 1), 0.5), 44100), path)
        raw = path.read_bytes()
        data_at = raw.index(b"data") + 8
        values = np.frombuffer(raw[data_at : data_at + 8], dtype="<f4")
        assert np.array_equal(values, np.array([0.5, 0.5], dtype=np.float32))

    def test_rejects_empty(self, tmp_path):
        with pytest.raises(InvalidInputError):
            write_wav(Waveform(np.zeros((2, 0)), 8000), tmp_path / "empty.wav")

    def test_unwritable_path(self, tmp_path):
        w = Waveform(np.zeros((1, 4)), 8000)
        with pytest.raises(OSError):
            write_wav(w, tmp_path / "no" / "such" / "dir.wav")

    @settings(max_examples=40, deadline=None)
    @given(
        data=hnp.arrays(
            np.float32,
            st.tuples(st.integers(1, 3), st.integers(1, 400)),
            elements=st.floats(-1.0, 1.0, width=32),
        ),
        rate=st.sampled_from([8000, 22050, 44100]),
    )
    def test_round_trip_exact(self, wav_dir, data, rate):
        path = wav_dir / "rt.wav"
        original = Waveform(data.astype(np.float64), rate)
        write_wav(original, path)
        loaded = read_wav(path)
        assert loaded.sample_rate == rate
        assert np.array_equal(loaded.samples, original.samples)

    def test_file_level_round_trip(self, tmp_path, rng):
        first = tmp_path / "a.wav"
        second = tmp_path / "b.wav"
        data = rng.standard_normal((880, 2)).astype(np.float32) * 0.5
        write_float32_wav(first, data, 44100)
        write_wav(read_wav(first), second)
        first_data = first.read_bytes()
        second_data = second.read_bytes()
        chunk = data.tobytes()
        assert chunk in first_data and chunk in second_data


def _write_manifest(tmp_path, songs, name="testset", rate=44100):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"name": name, "sample_rate": rate, "songs": songs}))
    return path


def _song_record(song_id, **overrides):
    record = {
        "song_id": song_id,
        "genre": "Pop",
        "language": "English",
        "title": song_id,
        "other_instruments": ["pf", "syn"],
        "mixture": f"{song_id}/mixture.wav",
        "stems": {k.value: f"{song_id}/{k.value}.wav" for k in StemKind},
        "is_demo": False,
        "silent_stems": [],
    }
    record.update(overrides)
    return record


class TestManifest:
    def test_thirty_songs_three_demos(self, tmp_path):
        songs = [
            _song_record(f"SS_{i:03d}", is_demo=(i in (8, 15, 18))) for i in range(1, 31)
        ]
        manifest = load_manifest(_write_manifest(tmp_path, songs))
        assert len(manifest.songs) == 30
        assert len(manifest.eligible_songs()) == 27
        assert [s.song_id for s in manifest.songs] == [f"SS_{i:03d}" for i in range(1, 31)]

    def test_silent_stem_annotation(self, tmp_path):
        songs = [_song_record("SS_015", silent_stems=["bass"])]
        manifest = load_manifest(_write_manifest(tmp_path, songs))
        assert manifest.songs[0].silent_stems == frozenset({StemKind.BASS})

    def test_duplicate_song_id(self, tmp_path):
        songs = [_song_record("dup"), _song_record("dup")]
        with pytest.raises(ManifestError, match="dup"):
            load_manifest(_write_manifest(tmp_path, songs))

    def test_missing_stem_names_song(self, tmp_path):
        record = _song_record("incomplete")
        del record["stems"]["drums"]
        with pytest.raises(ManifestError, match="incomplete"):
            load_manifest(_write_manifest(tmp_path, [record]))

    def test_unknown_stem_kind(self, tmp_path):
        record = _song_record("weird")
        record["stems"]["guitar"] = "weird/guitar.wav"
        with pytest.raises(ManifestError, match="guitar"):
            load_manifest(_write_manifest(tmp_path, [record]))

    def test_relative_paths_resolve_against_manifest_dir(self, tmp_path):
        manifest = load_manifest(_write_manifest(tmp_path, [_song_record("SS_001")]))
        entry = manifest.songs[0]
        assert entry.mixture_path == tmp_path / "SS_001/mixture.wav"
        assert entry.stem_paths[StemKind.VOCALS] == tmp_path / "SS_001/vocals.wav"

    def test_all_silent_rejected(self):
        with pytest.raises(ManifestError):
            SongEntry(
                song_id="bad",
                stem_paths={k: f"{k.value}.wav" for k in StemKind},
                mixture_path="mix.wav",
                silent_stems=frozenset(StemKind),
            )

    def test_empty_manifest_rejected(self):
        with pytest.raises(ManifestError):
            DatasetManifest((), "empty", 44100)

    def test_not_json(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("name: not json")
        with pytest.raises(ManifestError):
            load_manifest(path)


def _write_song_files(tmp_path, song_id, stems, mixture, rate=8000):
    song_dir = tmp_path / song_id
    song_dir.mkdir()
    for kind in StemKind:
        write_wav(Waveform(stems[kind], rate), song_dir / f"{kind.value}.wav")
    write_wav(Waveform(mixture, rate), song_dir / "mixture.wav")
    return SongEntry(
        song_id=song_id,
        stem_paths={k: song_dir / f"{k.value}.wav" for k in StemKind},
        mixture_path=song_dir / "mixture.wav",
    )


def _grid_stems(rng, frames=400):
    # amplitudes on a 2**-10 grid so four-way sums are exact in float32
    return {
        kind: rng.integers(-256, 257, size=(2, frames)) / 1024.0 for kind in StemKind
    }


class TestValidateSongAudio:
    def test_exact_sum_passes_with_zero_deviation(self, tmp_path, rng):
        stems = _grid_stems(rng)
        mixture = sum(stems.values())
        entry = _write_song_files(tmp_path, "exact", stems, mixture)
        report = validate_song_audio(entry)
        assert report.passed
        assert report.max_deviation == 0.0

    def test_length_mismatch_names_stem(self, tmp_path, rng):
        stems = _grid_stems(rng)
        mixture = sum(stems.values())
        stems[StemKind.DRUMS] = stems[StemKind.DRUMS][:, :-1]
        entry = _write_song_files(tmp_path, "short", stems, mixture)
        report = validate_song_audio(entry)
        assert not report.passed
        assert any("drums" in message for message in report.length_errors)

    def test_rate_mismatch_fails(self, tmp_path, rng):
        stems = _grid_stems(rng)
        mixture = sum(stems.values())
        entry = _write_song_files(tmp_path, "rates", stems, mixture)
        write_wav(
            Waveform(stems[StemKind.BASS], 16000),
            entry.stem_paths[StemKind.BASS],
        )
        report = validate_song_audio(entry)
        assert not report.passed
        assert any("bass" in message for message in report.rate_errors)

    def test_pcm16_quantization_bound(self, tmp_path, rng):
        frames = 500
        stems_float = {
            kind: rng.uniform(-0.2, 0.2, size=(frames, 2)) for kind in StemKind
        }
        song_dir = tmp_path / "pcm"
        song_dir.mkdir()
        for kind in StemKind:
            ints = np.round(stems_float[kind] * 32768.0).clip(-32768, 32767)
            write_pcm_wav(song_dir / f"{kind.value}.wav", ints.astype(np.int64), 16, 8000)
        mixture = sum(stems_float.values()).T
        write_wav(Waveform(mixture, 8000), song_dir / "mixture.wav")
        entry = SongEntry(
            song_id="pcm",
            stem_paths={k: song_dir / f"{k.value}.wav" for k in StemKind},
            mixture_path=song_dir / "mixture.wav",
        )
        report = validate_song_audio(entry, tolerance=1e-3)
        assert report.max_deviation <= 2 * 2**-15
        assert report.passed

    def test_monotone_in_tolerance(self, tmp_path, rng):
        stems = _grid_stems(rng)
        mixture = sum(stems.values()) + rng.uniform(-1e-4, 1e-4, size=(2, 400))
        entry = _write_song_files(tmp_path, "noisy", stems, mixture)
        tolerances = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
        outcomes = [validate_song_audio(entry, t).passed for t in tolerances]
        # once passing, stays passing at looser tolerances
        assert outcomes == sorted(outcomes)

    def test_silence_warnings(self, tmp_path, rng):
        stems = _grid_stems(rng)
        stems[StemKind.BASS] = np.zeros((2, 400))
        mixture = sum(stems.values())
        entry = _write_song_files(tmp_path, "quiet", stems, mixture)
        report = validate_song_audio(entry)
        assert any("appears silent" in message for message in report.warnings)

    def test_missing_file_raises_io_error(self, tmp_path, rng):
        stems = _grid_stems(rng)
        entry = _write_song_files(tmp_path, "gone", stems, sum(stems.values()))
        entry.stem_paths[StemKind.OTHER].unlink()
        with pytest.raises(OSError):
            validate_song_audio(entry)
