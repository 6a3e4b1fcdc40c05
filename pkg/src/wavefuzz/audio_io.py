"""WAV (PCM16) reading/writing and the normalized waveform container."""

from __future__ import annotations

import os
import tempfile
import wave
from dataclasses import dataclass

import numpy as np

# Same factor both ways; +1.0 clamps to 32767. Scaling by 32767 on write would
# make the round trip drift by up to 1.5/32768 near full scale.
PCM_SCALE = 32768.0


class WavFormatError(ValueError):
    """Raised for RIFF/WAVE files this module does not decode."""


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        if np.any(np.abs(s) > 1.0):
            raise ValueError("samples must lie in [-1, 1]")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @classmethod
    def clipped(cls, samples, sample_rate: int) -> "AudioClip":
        """Build a clip after clamping ``samples`` into [-1, 1]."""
        return cls(np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0), sample_rate)


def read_wav(path) -> AudioClip:
    """Decode a PCM16 mono or stereo WAV; stereo is averaged to mono."""
    try:
        with wave.open(os.fspath(path), "rb") as w:
            n_channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            n_frames = w.getnframes()
            raw = w.readframes(n_frames)
    except wave.Error as exc:
        # the stdlib reports e.g. "unknown format: 3" for IEEE float
        raise WavFormatError(f"{path}: unsupported WAV (audio_format field): {exc}") from exc
    except EOFError as exc:
        raise WavFormatError(f"{path}: truncated RIFF/WAVE header") from exc

    if width != 2:
        raise WavFormatError(
            f"{path}: unsupported bits_per_sample={8 * width}, only 16-bit PCM is decoded"
        )
    if n_channels not in (1, 2):
        raise WavFormatError(f"{path}: unsupported num_channels={n_channels}")
    expected = n_frames * n_channels * width
    if len(raw) != expected:
        raise WavFormatError(
            f"{path}: truncated data chunk ({len(raw)} of {expected} bytes)"
        )
    if n_frames == 0:
        raise WavFormatError(f"{path}: data chunk holds no samples")

    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    pcm = pcm.reshape(n_frames, n_channels).mean(axis=1)
    return AudioClip(pcm / PCM_SCALE, rate)


def to_pcm16(samples) -> np.ndarray:
    s = np.asarray(samples, dtype=np.float64)
    return np.clip(np.round(s * PCM_SCALE), -32768, 32767).astype("<i2")


def write_wav(path, clip: AudioClip) -> None:
    """Write ``clip`` as 16-bit mono PCM. The file appears atomically."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".wav.tmp")
    try:
        with os.fdopen(fd, "wb") as fh, wave.open(fh, "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(clip.sample_rate)
            w.writeframes(to_pcm16(clip.samples).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
