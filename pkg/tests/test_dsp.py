import numpy as np
import pytest

from smle import dsp

SR = 16000


# ---------------------------------------------------------------------------
# stft
# ---------------------------------------------------------------------------


def test_one_second_shape():
    w = np.random.default_rng(0).standard_normal(SR).astype(np.float32)
    spec = dsp.stft(w, 1024, 256)
    assert spec.shape == (513, 59)  # T = (16000 - 1024) // 256 + 1


def test_zero_waveform_gives_zero_spectrogram():
    spec = dsp.stft(np.zeros(4096, dtype=np.float32))
    assert spec.shape == (513, 13)
    assert np.all(spec == 0)


def test_bin_centered_cosine_concentrates_at_its_bin():
    k = 40
    freq = k * SR / 1024
    t = np.arange(4 * 1024) / SR
    w = np.cos(2 * np.pi * freq * t)
    spec = dsp.stft(w, 1024, 256)
    mags = np.abs(spec)
    assert np.all(np.argmax(mags, axis=0) == k)


def test_matches_direct_dft_of_windowed_frame():
    # independent oracle: evaluate the windowed DFT sum directly
    rng = np.random.default_rng(1)
    w = rng.standard_normal(2048)
    frame_size, hop = 256, 64
    spec = dsp.stft(w, frame_size, hop)
    win = dsp.analysis_window(frame_size)
    t_idx = 3
    frame = w[t_idx * hop : t_idx * hop + frame_size] * win
    n = np.arange(frame_size)
    for k in (0, 5, 97, 128):
        direct = np.sum(frame * np.exp(-2j * np.pi * k * n / frame_size))
        assert abs(spec[k, t_idx] - direct) < 1e-9


def test_stft_rejects_short_input():
    with pytest.raises(ValueError, match="too short"):
        dsp.stft(np.zeros(1023, dtype=np.float32), 1024, 256)


def test_stft_rejects_bad_frame_args():
    w = np.zeros(4096, dtype=np.float32)
    with pytest.raises(ValueError):
        dsp.stft(w, 1023, 256)  # odd frame
    with pytest.raises(ValueError):
        dsp.stft(w, 1024, 2048)  # hop > frame


# ---------------------------------------------------------------------------
# istft round trip
# ---------------------------------------------------------------------------


def _interior(frame_size, hop, n):
    lead = frame_size - hop
    return slice(lead, n - lead)


def test_round_trip_interior_error_below_1e6():
    rng = np.random.default_rng(2)
    for _ in range(5):
        w = rng.uniform(-1, 1, 2 * SR).astype(np.float32)
        spec = dsp.stft(w)
        cov = dsp.coverage_length(spec.shape[1])
        y = dsp.istft(spec)
        sl = _interior(1024, 256, cov)
        assert np.abs(y[sl] - w[:cov][sl]).max() < 1e-6


def test_round_trip_holds_for_any_length_above_four_frames():
    rng = np.random.default_rng(3)
    for n in (4096, 5000, 12345):
        w = rng.uniform(-1, 1, n).astype(np.float32)
        spec = dsp.stft(w)
        cov = dsp.coverage_length(spec.shape[1])
        y = dsp.istft(spec)
        sl = _interior(1024, 256, cov)
        assert np.abs(y[sl] - w[:cov][sl]).max() < 1e-6


def test_zero_spectrogram_gives_zero_waveform():
    y = dsp.istft(np.zeros((513, 10), dtype=np.complex64))
    assert np.all(y == 0)


def test_istft_linearity():
    rng = np.random.default_rng(4)
    s = rng.standard_normal(SR).astype(np.float32)
    n = rng.standard_normal(SR).astype(np.float32)
    lhs = dsp.istft(dsp.stft(s + n))
    rhs = dsp.istft(dsp.stft(s)) + dsp.istft(dsp.stft(n))
    assert np.abs(lhs - rhs).max() < 1e-6


def test_stft_scalar_scaling_linearity():
    rng = np.random.default_rng(5)
    w = rng.standard_normal(8000).astype(np.float64)
    spec = dsp.stft(w)
    spec3 = dsp.stft(3.0 * w)
    assert np.allclose(spec3, 3.0 * spec, rtol=1e-6, atol=1e-9)


def test_istft_rejects_inconsistent_out_len():
    spec = dsp.stft(np.zeros(4096, dtype=np.float32))
    cov = dsp.coverage_length(spec.shape[1])
    with pytest.raises(ValueError, match="out_len"):
        dsp.istft(spec, out_len=cov + 1)


def test_istft_rejects_bad_bin_count():
    with pytest.raises(ValueError):
        dsp.istft(np.zeros((512, 10), dtype=np.complex64))


# ---------------------------------------------------------------------------
# apply_mask
# ---------------------------------------------------------------------------


def test_ones_mask_is_identity():
    spec = dsp.stft(np.random.default_rng(6).standard_normal(SR).astype(np.float32))
    out = dsp.apply_mask(np.ones(spec.shape, dtype=np.float32), spec)
    assert np.array_equal(out, spec)


def test_zeros_mask_silences():
    spec = dsp.stft(np.random.default_rng(7).standard_normal(SR).astype(np.float32))
    out = dsp.apply_mask(np.zeros(spec.shape, dtype=np.float32), spec)
    assert np.all(out == 0)


def test_half_mask_halves_magnitude_preserves_phase():
    spec = dsp.stft(np.random.default_rng(8).standard_normal(SR).astype(np.float32))
    out = dsp.apply_mask(np.full(spec.shape, 0.5, dtype=np.float32), spec)
    assert np.allclose(np.abs(out), 0.5 * np.abs(spec), rtol=1e-6)
    nz = np.abs(spec) > 1e-6
    assert np.allclose(np.angle(out[nz]), np.angle(spec[nz]), atol=1e-6)


def test_random_mask_never_changes_phase():
    rng = np.random.default_rng(9)
    spec = dsp.stft(rng.standard_normal(SR).astype(np.float32))
    mask = rng.uniform(0.01, 1.0, spec.shape).astype(np.float32)
    out = dsp.apply_mask(mask, spec)
    nz = np.abs(spec) > 1e-6
    assert np.allclose(np.angle(out[nz]), np.angle(spec[nz]), atol=1e-6)


def test_identity_mask_denoise_is_noop_on_interior():
    rng = np.random.default_rng(10)
    x = rng.uniform(-0.5, 0.5, SR).astype(np.float32)
    spec = dsp.stft(x)
    y = dsp.istft(dsp.apply_mask(np.ones(spec.shape, dtype=np.float32), spec))
    cov = y.shape[0]
    sl = _interior(1024, 256, cov)
    assert np.abs(y[sl] - x[:cov][sl]).max() < 1e-6


def test_apply_mask_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        dsp.apply_mask(np.ones((513, 10)), np.zeros((513, 11), dtype=np.complex64))


# ---------------------------------------------------------------------------
# adjoint and batched variants
# ---------------------------------------------------------------------------


def test_istft_adjoint_inner_product_identity():
    rng = np.random.default_rng(11)
    spec = rng.standard_normal((129, 17)) + 1j * rng.standard_normal((129, 17))
    spec[0] = spec[0].real
    spec[-1] = spec[-1].real
    y = dsp.istft(spec, 256, 64)
    g = rng.standard_normal(y.shape[0])
    lhs = float(np.dot(y, g))
    grad = dsp.istft_adjoint(g, 17, 256, 64)
    rhs = float(np.sum(spec * np.conj(grad)).real)
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_batched_variants_match_single():
    # batched helpers run in the input precision; the single-signal functions
    # keep float64 internals, so float32 batches may differ by ~1e-6
    rng = np.random.default_rng(12)
    waves = rng.standard_normal((3, 5000)).astype(np.float32)
    specs = dsp.stft_batch(waves, 256, 64)
    for i in range(3):
        single = dsp.stft(waves[i], 256, 64)
        assert np.allclose(specs[i].T, single, rtol=1e-4, atol=2e-6)
    ys = dsp.istft_batch(specs, 256, 64)
    for i in range(3):
        single = dsp.istft(np.ascontiguousarray(specs[i].T), 256, 64)
        assert np.abs(ys[i] - single).max() < 2e-6
    g = rng.standard_normal((3, ys.shape[1]))
    grads = dsp.istft_adjoint_batch(g, specs.shape[1], 256, 64)
    for i in range(3):
        single = dsp.istft_adjoint(g[i], specs.shape[1], 256, 64)
        assert np.allclose(grads[i].T, single, rtol=1e-10, atol=1e-12)


def test_batched_float64_matches_single_exactly():
    rng = np.random.default_rng(13)
    waves = rng.standard_normal((2, 5000))
    specs = dsp.stft_batch(waves, 256, 64)
    for i in range(2):
        assert np.allclose(specs[i].T, dsp.stft(waves[i], 256, 64), rtol=0, atol=1e-12)
