"""Shared test helpers, including independent WAV writers used as oracles."""

import struct

import numpy as np

from demixeval.audio_io import Waveform


def noise_waveform(rng, channels=2, frames=4000, rate=8000, scale=0.1):
    return Waveform(scale * rng.standard_normal((channels, frames)), rate)


def write_pcm_wav(path, samples, bits, rate):
    """Write integer PCM WAV bytes by hand, independent of the package writer.

    samples: int array shaped (frames, channels), already in PCM range.
    """
    frames, channels = samples.shape
    if bits == 16:
        body = samples.astype("<i2").tobytes()
    elif bits == 24:
        flat = samples.astype(np.int64).ravel()
        unsigned = np.where(flat < 0, flat + (1 << 24), flat)
        raw = bytearray()
        for value in unsigned:
            raw += struct.pack("<I", int(value))[:3]
        body = bytes(raw)
    else:
        raise ValueError(bits)
    bytes_per = bits // 8
    fmt = struct.pack(
        "<HHIIHH", 1, channels, rate, rate * channels * bytes_per, channels * bytes_per, bits
    )
    payload = b"".join(
        [
            b"fmt ", struct.pack("<I", len(fmt)), fmt,
            b"data", struct.pack("<I", len(body)), body,
        ]
    )
    if len(body) % 2:
        payload += b"\x00"
    path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(payload)) + b"WAVE" + payload)


def write_float32_wav(path, samples, rate):
    """Hand-built IEEE float32 WAV; samples shaped (frames, channels)."""
    frames, channels = samples.shape
    body = samples.astype("<f4").tobytes()
    fmt = struct.pack("<HHIIHH", 3, channels, rate, rate * channels * 4, channels * 4, 32)
    payload = b"".join(
        [
            b"fmt ", struct.pack("<I", len(fmt)), fmt,
            b"data", struct.pack("<I", len(body)), body,
        ]
    )
    path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(payload)) + b"WAVE" + payload)


def energy(waveform):
    return float(np.sum(waveform.samples * waveform.samples))
