"""Short-time Fourier analysis/synthesis and time-frequency mask application.

Conventions used throughout the toolkit:

* frames start at sample 0 with no centering or padding, so a signal of
  ``n`` samples yields ``T = (n - frame_size) // hop + 1`` frames and any
  trailing partial frame is dropped;
* analysis and synthesis share one periodic Hann window scaled to unit L2
  norm (the scaling keeps spectrogram magnitudes near 1, which the
  recurrent networks consume directly, and cancels exactly in the inverse);
* the inverse is a weighted overlap-add normalised per sample by the summed
  squared window.  Edge samples where that sum falls below 1% of its peak
  are attenuated rather than amplified, so masked spectrograms cannot blow
  up the first/last partially-overlapped samples.  The fully-overlapped
  interior reconstructs exactly.

float32 input produces complex64/float32 output (the toolkit's working
precision); float64 stays float64.  FFTs and overlap-add accumulation run
in 64-bit regardless.  All functions are pure and safe to call
concurrently.
"""

import functools

import numpy as np
import scipy.fft

DEFAULT_FRAME_SIZE = 1024
DEFAULT_HOP = 256

# Window-power floor, as a fraction of the interior overlap-add weight.
_OLA_FLOOR_FRAC = 1e-2


def hann_periodic(frame_size):
    """Periodic Hann window of the given length."""
    n = np.arange(frame_size)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / frame_size))


@functools.lru_cache(maxsize=8)
def analysis_window(frame_size):
    """Periodic Hann scaled to unit L2 norm (shared by analysis and synthesis)."""
    w = hann_periodic(frame_size)
    return w / np.sqrt(np.sum(w * w))


def num_frames(n_samples, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP):
    """Frame count for a signal of ``n_samples``; negative-free by contract."""
    return (n_samples - frame_size) // hop + 1


def coverage_length(n_frames_, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP):
    """Number of output samples spanned by ``n_frames_`` frames."""
    return (n_frames_ - 1) * hop + frame_size


def _check_frame_args(frame_size, hop):
    if frame_size < 2 or frame_size % 2 != 0:
        raise ValueError(f"frame_size must be a positive even count, got {frame_size}")
    if hop < 1 or hop > frame_size:
        raise ValueError(f"hop must be in [1, frame_size], got {hop}")


@functools.lru_cache(maxsize=32)
def _ola_denominator(frame_size, hop, n_frames_):
    """Per-sample sum of squared synthesis windows, floored near the edges."""
    win = analysis_window(frame_size)
    den = np.zeros(coverage_length(n_frames_, frame_size, hop))
    w2 = win * win
    for t in range(n_frames_):
        den[t * hop : t * hop + frame_size] += w2
    return np.maximum(den, _OLA_FLOOR_FRAC * den.max())


def stft(w, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP):
    """Short-time Fourier transform of a mono waveform.

    Args:
        w: 1-D real signal.
        frame_size: analysis frame length in samples (even).
        hop: frame advance in samples, at most ``frame_size``.

    Returns:
        Complex spectrogram of shape (frame_size // 2 + 1, T), nonnegative
        frequencies only.
    """
    w = np.asarray(w)
    _check_frame_args(frame_size, hop)
    if w.ndim != 1:
        raise ValueError(f"expected a 1-D waveform, got shape {w.shape}")
    if w.shape[0] < frame_size:
        raise ValueError(
            f"input too short: {w.shape[0]} samples < one frame of {frame_size}"
        )
    single = w.dtype == np.float32
    x = w.astype(np.float64, copy=False)
    t_frames = num_frames(x.shape[0], frame_size, hop)
    idx = hop * np.arange(t_frames)[:, None] + np.arange(frame_size)[None, :]
    frames = x[idx] * analysis_window(frame_size)
    spec = np.ascontiguousarray(scipy.fft.rfft(frames, axis=1).T)
    return spec.astype(np.complex64) if single else spec


def istft(spec, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP, out_len=None):
    """Inverse STFT via weighted overlap-add with the matched window.

    Args:
        spec: complex spectrogram (frame_size // 2 + 1, T) from :func:`stft`.
        frame_size: frame length the spectrogram was produced with.
        hop: hop the spectrogram was produced with.
        out_len: output length in samples; defaults to the full span of the
            frames and may not exceed it.

    Returns:
        Real waveform of ``out_len`` samples.
    """
    spec = np.asarray(spec)
    _check_frame_args(frame_size, hop)
    if spec.ndim != 2 or spec.shape[0] != frame_size // 2 + 1:
        raise ValueError(
            f"expected spectrogram of shape ({frame_size // 2 + 1}, T), got {spec.shape}"
        )
    t_frames = spec.shape[1]
    span = coverage_length(t_frames, frame_size, hop)
    if out_len is None:
        out_len = span
    if not 0 < out_len <= span:
        raise ValueError(f"inconsistent out_len {out_len} for {t_frames} frames (span {span})")
    single = spec.dtype == np.complex64
    frames = scipy.fft.irfft(spec.T.astype(np.complex128), n=frame_size, axis=1)
    win = analysis_window(frame_size)
    frames *= win
    acc = np.zeros(span)
    for t in range(t_frames):
        acc[t * hop : t * hop + frame_size] += frames[t]
    y = (acc / _ola_denominator(frame_size, hop, t_frames))[:out_len]
    return y.astype(np.float32) if single else y


def istft_adjoint(grad_out, n_frames_, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP):
    """Adjoint of :func:`istft` as a real-linear map.

    Propagates a gradient w.r.t. the time-domain output back to a gradient
    w.r.t. the complex spectrogram, in the convention
    ``G = dL/dRe(S) + 1j * dL/dIm(S)``.  The imaginary parts of the DC and
    Nyquist bins are fixed at zero, matching what ``irfft`` consumes.
    """
    g = np.asarray(grad_out, dtype=np.float64)
    _check_frame_args(frame_size, hop)
    span = coverage_length(n_frames_, frame_size, hop)
    if g.ndim != 1 or g.shape[0] > span:
        raise ValueError(f"gradient length {g.shape} inconsistent with {n_frames_} frames")
    full = np.zeros(span)
    full[: g.shape[0]] = g
    full /= _ola_denominator(frame_size, hop, n_frames_)
    win = analysis_window(frame_size)
    fr = np.empty((n_frames_, frame_size))
    for t in range(n_frames_):
        fr[t] = full[t * hop : t * hop + frame_size]
    fr *= win
    r = scipy.fft.rfft(fr, axis=1)
    grad = (2.0 / frame_size) * r
    grad[:, 0] = r[:, 0].real / frame_size
    grad[:, -1] = r[:, -1].real / frame_size
    return np.ascontiguousarray(grad.T)


# ----------------------------------------------------------------------
# batched variants for equal-length waveforms (training hot path).
# Time-major layout (B, T, F) avoids per-item transposes.  Unlike the
# single-signal functions, these follow the input dtype end to end, so the
# float32 training path stays in single precision while float64 callers
# (e.g. gradient checks) get full precision.
# ----------------------------------------------------------------------


def _frame_view(x, frame_size, hop):
    """Strided (B, T, frame_size) view of (B, L) signals, no copy."""
    return np.lib.stride_tricks.sliding_window_view(x, frame_size, axis=1)[:, ::hop]


def stft_batch(waves, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP):
    """STFT of a (B, L) batch; returns time-major spectrograms (B, T, F)."""
    waves = np.asarray(waves)
    _check_frame_args(frame_size, hop)
    if waves.ndim != 2:
        raise ValueError(f"expected a (B, L) batch, got shape {waves.shape}")
    if waves.shape[1] < frame_size:
        raise ValueError(
            f"input too short: {waves.shape[1]} samples < one frame of {frame_size}"
        )
    win = analysis_window(frame_size).astype(waves.dtype, copy=False)
    frames = _frame_view(waves, frame_size, hop) * win
    return scipy.fft.rfft(frames, axis=2)


def istft_batch(specs_tm, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP, out_len=None):
    """Inverse of :func:`stft_batch` for time-major (B, T, F) spectrograms."""
    specs_tm = np.asarray(specs_tm)
    _check_frame_args(frame_size, hop)
    if specs_tm.ndim != 3 or specs_tm.shape[2] != frame_size // 2 + 1:
        raise ValueError(f"expected (B, T, {frame_size // 2 + 1}), got {specs_tm.shape}")
    t_frames = specs_tm.shape[1]
    span = coverage_length(t_frames, frame_size, hop)
    if out_len is None:
        out_len = span
    if not 0 < out_len <= span:
        raise ValueError(f"inconsistent out_len {out_len} for {t_frames} frames (span {span})")
    frames = scipy.fft.irfft(specs_tm, n=frame_size, axis=2)
    win = analysis_window(frame_size).astype(frames.dtype, copy=False)
    frames *= win
    acc = np.zeros((specs_tm.shape[0], span), dtype=frames.dtype)
    for t in range(t_frames):
        acc[:, t * hop : t * hop + frame_size] += frames[:, t]
    den = _ola_denominator(frame_size, hop, t_frames).astype(frames.dtype, copy=False)
    return (acc / den)[:, :out_len]


def istft_adjoint_batch(grad_out, n_frames_, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP):
    """Batched :func:`istft_adjoint`; (B, L) gradients -> (B, T, F) complex."""
    g = np.asarray(grad_out)
    _check_frame_args(frame_size, hop)
    span = coverage_length(n_frames_, frame_size, hop)
    if g.ndim != 2 or g.shape[1] > span:
        raise ValueError(f"gradient shape {g.shape} inconsistent with {n_frames_} frames")
    den = _ola_denominator(frame_size, hop, n_frames_).astype(g.dtype, copy=False)
    full = np.zeros((g.shape[0], span), dtype=g.dtype)
    full[:, : g.shape[1]] = g
    full /= den
    win = analysis_window(frame_size).astype(g.dtype, copy=False)
    fr = _frame_view(full, frame_size, hop) * win
    r = scipy.fft.rfft(fr, axis=2)
    grad = (2.0 / frame_size) * r
    grad[:, :, 0] = r[:, :, 0].real / frame_size
    grad[:, :, -1] = r[:, :, -1].real / frame_size
    return grad


def apply_mask(mask, spec):
    """Apply a real [0, 1] ratio mask to a complex spectrogram elementwise.

    The mixture phase passes through unchanged; only bin magnitudes scale.
    """
    mask = np.asarray(mask)
    spec = np.asarray(spec)
    if mask.shape != spec.shape:
        raise ValueError(f"mask shape {mask.shape} != spectrogram shape {spec.shape}")
    return mask * spec
