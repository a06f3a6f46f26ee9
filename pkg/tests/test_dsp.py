"""Front-end contracts: spectrogram arithmetic, band limiting, median noise
reduction (against a brute-force oracle), differencing, and patch geometry."""

import numpy as np
import pytest

from odocount import dsp, kernels
from odocount.dsp import AudioClip


def make_clip(samples, fs=96000):
    return AudioClip(samples=np.asarray(samples, dtype=np.float64), sample_rate=fs)


class TestComputeSpectrogram:
    def test_frame_and_bin_counts(self):
        clip = make_clip(np.zeros(96000))
        spec = dsp.compute_spectrogram(clip, frame_len=2048, hop=1024)
        assert spec.n_frames == 92
        assert spec.n_bins == 1025
        assert spec.hop_seconds == 1024 / 96000

    def test_all_zero_clip(self):
        spec = dsp.compute_spectrogram(make_clip(np.zeros(8192)), frame_len=2048, hop=1024)
        assert np.all(spec.magnitudes == 0)

    def test_sine_at_bin_center_matches_direct_dft(self):
        # Oracle: evaluate the windowed DFT of the sinusoid directly.
        fs, N, hop, k = 96000, 2048, 1024, 100
        f = k * fs / N
        n = np.arange(5 * N)
        x = np.sin(2 * np.pi * f * n / fs)
        spec = dsp.compute_spectrogram(make_clip(x, fs), frame_len=N, hop=hop)
        win = np.hanning(N + 1)[:-1]  # periodic Hann
        for t in range(spec.n_frames):
            frame = x[t * hop:t * hop + N] * win
            bins = np.arange(N)
            oracle = np.abs(np.sum(frame[None, :] * np.exp(-2j * np.pi * np.outer(
                np.arange(N // 2 + 1), bins) / N), axis=1))
            assert np.allclose(spec.magnitudes[t], oracle, atol=1e-8)
            assert np.argmax(spec.magnitudes[t]) == k

    def test_insufficient_samples(self):
        with pytest.raises(ValueError, match="insufficient samples"):
            dsp.compute_spectrogram(make_clip(np.zeros(100)), frame_len=2048)

    def test_hop_must_divide_frame_len(self):
        with pytest.raises(ValueError, match="divide"):
            dsp.compute_spectrogram(make_clip(np.zeros(8192)), frame_len=2048, hop=1000)

    def test_concatenation_frame_alignment(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(16384)
        full = dsp.compute_spectrogram(make_clip(x), frame_len=2048, hop=1024)
        k = 3
        part = dsp.compute_spectrogram(make_clip(x[k * 1024:]), frame_len=2048, hop=1024)
        assert np.array_equal(full.magnitudes[k:], part.magnitudes)


class TestBandLimit:
    def freqs_spec(self, fs=96000, frame_len=2048, n_frames=4):
        rng = np.random.default_rng(1)
        return dsp.Spectrogram(
            magnitudes=rng.random((n_frames, frame_len // 2 + 1)),
            hop_seconds=1024 / fs,
            bin_freqs=np.arange(frame_len // 2 + 1) * fs / frame_len,
        )

    def test_paper_band_indices(self):
        spec = self.freqs_spec()
        banded = dsp.band_limit(spec, 500.0, 20000.0)
        # Oracle: exhaustive scan over bins.
        keep = [i for i, f in enumerate(spec.bin_freqs) if 500.0 <= f <= 20000.0]
        assert keep[0] == 11 and keep[-1] == 426
        assert banded.n_bins == 416
        assert np.array_equal(banded.magnitudes, spec.magnitudes[:, keep])

    def test_identity_band(self):
        spec = self.freqs_spec()
        banded = dsp.band_limit(spec, 0.0, 48000.0)
        assert np.array_equal(banded.magnitudes, spec.magnitudes)

    def test_degenerate_band(self):
        spec = self.freqs_spec()
        with pytest.raises(ValueError):
            dsp.band_limit(spec, 1000.0, 1000.0)

    def test_nested_band_composition(self):
        spec = self.freqs_spec()
        a = dsp.band_limit(dsp.band_limit(spec, 400.0, 30000.0), 500.0, 20000.0)
        b = dsp.band_limit(spec, 500.0, 20000.0)
        assert np.array_equal(a.magnitudes, b.magnitudes)
        assert np.array_equal(a.bin_freqs, b.bin_freqs)


def brute_force_median_subtract(mags, radius, clamp=True):
    n = len(mags)
    out = np.empty_like(mags)
    for t in range(n):
        window = mags[max(0, t - radius):min(n, t + radius + 1)]
        med = np.median(np.sort(window, axis=0), axis=0)
        out[t] = mags[t] - med
    return np.maximum(out, 0.0) if clamp else out


class TestReduceNoiseMedian:
    def spec_of(self, mags, hop_seconds=0.01):
        mags = np.asarray(mags, dtype=np.float64)
        return dsp.Spectrogram(magnitudes=mags, hop_seconds=hop_seconds,
                               bin_freqs=np.arange(mags.shape[1], dtype=np.float64))

    def test_constant_goes_to_zero(self):
        spec = self.spec_of(np.full((40, 3), 7.5))
        out = dsp.reduce_noise_median(spec, window_seconds=0.1)
        assert np.all(out.magnitudes == 0)

    def test_impulse_preserved(self):
        mags = np.zeros((21, 2))
        mags[10, 0] = 3.0
        out = dsp.reduce_noise_median(self.spec_of(mags), window_seconds=0.05)
        assert out.magnitudes[10, 0] == 3.0
        assert np.count_nonzero(out.magnitudes) == 1

    @pytest.mark.parametrize("backend", kernels.available_backends())
    def test_matches_brute_force(self, backend):
        prev = kernels.get_backend()
        try:
            kernels.set_backend(backend)
            rng = np.random.default_rng(42)
            mags = rng.random((50, 4))
            spec = self.spec_of(mags, hop_seconds=1.0)
            out = dsp.reduce_noise_median(spec, window_seconds=11.0)  # radius 5 -> 11 frames
            assert np.array_equal(out.magnitudes, brute_force_median_subtract(mags, 5))
        finally:
            kernels.set_backend(prev)

    def test_unclamped_variant(self):
        rng = np.random.default_rng(3)
        mags = rng.random((30, 3))
        spec = self.spec_of(mags, hop_seconds=1.0)
        out = dsp.reduce_noise_median(spec, window_seconds=7.0, clamp=False)
        assert np.array_equal(out.magnitudes, brute_force_median_subtract(mags, 3, clamp=False))
        assert np.any(out.magnitudes < 0)

    def test_bounds(self):
        rng = np.random.default_rng(4)
        mags = rng.random((60, 5))
        out = dsp.reduce_noise_median(self.spec_of(mags, 1.0), window_seconds=9.0)
        assert np.all(out.magnitudes >= 0)
        assert np.all(out.magnitudes <= mags)


class TestTimeDifference:
    def test_constant_and_ramp(self):
        const = dsp.Spectrogram(magnitudes=np.full((5, 2), 3.0), hop_seconds=0.01,
                                bin_freqs=np.array([0.0, 1.0]))
        assert np.all(dsp.time_difference(const).magnitudes == 0)
        ramp = dsp.Spectrogram(magnitudes=np.outer(np.arange(6.0), np.ones(2)),
                               hop_seconds=0.01, bin_freqs=np.array([0.0, 1.0]))
        assert np.all(dsp.time_difference(ramp).magnitudes == 1.0)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(5)
        mags = rng.random((5, 3))
        spec = dsp.Spectrogram(magnitudes=mags, hop_seconds=0.01,
                               bin_freqs=np.arange(3.0))
        diff = dsp.time_difference(spec)
        for t in range(4):
            for b in range(3):
                assert diff.magnitudes[t, b] == mags[t + 1, b] - mags[t, b]
        assert diff.n_frames == 4

    def test_single_frame_errors(self):
        spec = dsp.Spectrogram(magnitudes=np.ones((1, 2)), hop_seconds=0.01,
                               bin_freqs=np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            dsp.time_difference(spec)

    def test_cumsum_reconstruction(self):
        rng = np.random.default_rng(6)
        mags = rng.random((10, 4))
        spec = dsp.Spectrogram(magnitudes=mags, hop_seconds=0.01, bin_freqs=np.arange(4.0))
        diff = dsp.time_difference(spec)
        rebuilt = np.vstack([mags[:1], mags[:1] + np.cumsum(diff.magnitudes, axis=0)])
        assert np.allclose(rebuilt, mags, atol=1e-12)


class TestExtractPatch:
    def spec(self, n_frames=20, n_bins=416, seed=7):
        rng = np.random.default_rng(seed)
        return dsp.Spectrogram(magnitudes=rng.random((n_frames, n_bins)),
                               hop_seconds=0.01, bin_freqs=np.arange(n_bins, dtype=float))

    def test_dimensionality(self):
        vec = dsp.extract_patch(self.spec(), center=10, before=5, after=5)
        assert vec.values.shape == (11 * 416,) == (4576,)

    def test_zero_padding_at_start(self):
        spec = self.spec(n_bins=3)
        vec = dsp.extract_patch(spec, center=0, before=5, after=0)
        assert np.all(vec.values[: 5 * 3] == 0)
        assert np.array_equal(vec.values[5 * 3:], spec.magnitudes[0])

    def test_single_frame_patch(self):
        spec = self.spec(n_bins=4)
        vec = dsp.extract_patch(spec, center=7, before=0, after=0)
        assert np.array_equal(vec.values, spec.magnitudes[7])

    def test_constant_dimension_across_frames(self):
        spec = self.spec(n_frames=9, n_bins=5)
        dims = {dsp.extract_patch(spec, c, before=3, after=2).values.shape
                for c in range(-2, 12)}
        assert dims == {(6 * 5,)}

    def test_matrix_matches_per_frame_extraction(self):
        spec = self.spec(n_frames=9, n_bins=5)
        X = dsp.extract_patch_matrix(spec, before=3, after=2, dtype=np.float64)
        for c in range(9):
            assert np.allclose(X[c], dsp.extract_patch(spec, c, 3, 2).values)


class TestPoolFrequencies:
    def test_group_means(self):
        mags = np.arange(12.0).reshape(2, 6)
        spec = dsp.Spectrogram(magnitudes=mags, hop_seconds=0.01, bin_freqs=np.arange(6.0))
        pooled = dsp.pool_frequencies(spec, 3)
        assert np.array_equal(pooled.magnitudes, np.array([[1.0, 4.0], [7.0, 10.0]]))
        assert np.array_equal(pooled.bin_freqs, np.array([1.0, 4.0]))

    def test_partial_final_group(self):
        mags = np.ones((1, 5))
        spec = dsp.Spectrogram(magnitudes=mags, hop_seconds=0.01, bin_freqs=np.arange(5.0))
        pooled = dsp.pool_frequencies(spec, 3)
        assert pooled.n_bins == 2
        assert np.allclose(pooled.magnitudes, 1.0)

    def test_identity(self):
        spec = dsp.Spectrogram(magnitudes=np.ones((2, 4)), hop_seconds=0.01,
                               bin_freqs=np.arange(4.0))
        assert dsp.pool_frequencies(spec, 1) is spec


class TestWavIO:
    def test_float_roundtrip(self, tmp_path):
        clip = AudioClip(samples=np.linspace(-0.5, 0.5, 1000), sample_rate=48000)
        path = tmp_path / "x.wav"
        dsp.write_wav(path, clip)
        back = dsp.read_wav(path)
        assert back.sample_rate == 48000
        assert np.allclose(back.samples, clip.samples, atol=1e-7)

    def test_pcm16_read(self, tmp_path):
        from scipy.io import wavfile

        path = tmp_path / "pcm.wav"
        data = (np.linspace(-0.5, 0.5, 100) * 32767).astype(np.int16)
        wavfile.write(path, 8000, data)
        clip = dsp.read_wav(path)
        assert np.allclose(clip.samples, data / 32768.0)

    def test_multichannel_rejected(self, tmp_path):
        from scipy.io import wavfile

        path = tmp_path / "stereo.wav"
        wavfile.write(path, 8000, np.zeros((100, 2), dtype=np.float32))
        with pytest.raises(ValueError, match="downmix"):
            dsp.read_wav(path)


def test_export_csv_header(tmp_path):
    spec = dsp.Spectrogram(magnitudes=np.ones((2, 3)), hop_seconds=0.25,
                           bin_freqs=np.array([10.0, 20.0, 30.0]))
    path = tmp_path / "spec.csv"
    dsp.export_csv(spec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "0.25,10.0,20.0,30.0"
    assert len(lines) == 3
