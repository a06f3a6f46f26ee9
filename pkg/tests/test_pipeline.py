"""Pipeline glue: front-end geometry, decoder caching, gain invariance."""

import numpy as np
import pytest

from odocount import pipeline
from odocount.config import PipelineConfig
from odocount.dsp import AudioClip
from odocount.scene import LabeledScene, SceneConfig, generate_scene

TINY = dict(frame_len=256, hop=128, band_lo_hz=500.0, band_hi_hz=7000.0,
            median_window_seconds=2.0, pool_bins=4, detector_patch_before=3,
            detector_patch_after=3, hmm_patch_after=3, n_trees=5,
            tree_max_features=0.4, negative_subsample=10.0,
            duration_prior_components=2, hmm_gmm_components=3, obs_gmm_max_iter=10)


@pytest.fixture(scope="module")
def tiny_scene():
    return generate_scene(SceneConfig(duration_seconds=20.0, rate_per_minute=80.0,
                                      call_band_hz=(2000.0, 6000.0),
                                      sample_rate=16000, seed=31))


class TestFrontEnd:
    def test_shapes_line_up(self, tiny_scene):
        cfg = PipelineConfig(**TINY)
        fe = pipeline.compute_front_end(tiny_scene.audio, cfg)
        assert fe.det_X.shape[0] == fe.n_frames
        assert fe.hmm_X.shape[0] == fe.n_frames
        width = TINY["detector_patch_before"] + TINY["detector_patch_after"] + 1
        assert fe.det_X.shape[1] == width * fe.base.n_bins
        assert fe.hmm_X.shape[1] == (TINY["hmm_patch_after"] + 1) * fe.base.n_bins

    def test_gain_normalization_makes_features_scale_invariant(self, tiny_scene):
        cfg = PipelineConfig(gain_normalize=True, **TINY)
        fe1 = pipeline.compute_front_end(tiny_scene.audio, cfg)
        scaled = AudioClip(samples=tiny_scene.audio.samples * 0.31,
                           sample_rate=tiny_scene.audio.sample_rate)
        fe2 = pipeline.compute_front_end(scaled, cfg)
        assert np.allclose(fe1.base.magnitudes, fe2.base.magnitudes, rtol=1e-9, atol=1e-12)

    def test_without_normalization_features_scale(self, tiny_scene):
        cfg = PipelineConfig(**TINY)
        fe1 = pipeline.compute_front_end(tiny_scene.audio, cfg)
        scaled = AudioClip(samples=tiny_scene.audio.samples * 0.31,
                           sample_rate=tiny_scene.audio.sample_rate)
        fe2 = pipeline.compute_front_end(scaled, cfg)
        assert np.allclose(fe1.base.magnitudes * 0.31, fe2.base.magnitudes,
                           rtol=1e-9, atol=1e-12)


class TestTrainBundle:
    @pytest.fixture(scope="class")
    def bundle(self, tiny_scene):
        cfg = PipelineConfig(seed=3, **TINY)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return pipeline.train_bundle([tiny_scene], cfg)

    def test_all_systems_calibrated(self, bundle):
        assert set(bundle.calibration) == {"odo", "odo_flat", "hmm", "odo_hmm", "onset_count"}
        assert all(v > 0 for v in bundle.calibration.values())

    def test_priors_share_tau_range(self, bundle):
        assert bundle.gmm_prior.tau_min == bundle.flat_prior.tau_min
        assert bundle.gmm_prior.tau_max == bundle.flat_prior.tau_max

    def test_hmm_models_present(self, bundle):
        assert bundle.hmm_plain is not None and not bundle.hmm_plain.expanded
        assert bundle.hmm_expanded is not None and bundle.hmm_expanded.expanded
        assert bundle.hmm_expanded.obs_dim == bundle.hmm_plain.obs_dim + 2

    def test_decoder_caches_front_end(self, bundle, tiny_scene):
        decoder = pipeline.Decoder(bundle, tiny_scene)
        fe1 = decoder.front_end
        assert decoder.front_end is fe1
        t1 = decoder.transcript("odo")
        assert decoder.transcript("odo") is t1

    def test_mixed_sample_rates_rejected(self, tiny_scene):
        other = generate_scene(SceneConfig(duration_seconds=10.0, rate_per_minute=80.0,
                                           call_band_hz=(1000.0, 3500.0),
                                           sample_rate=8000, seed=5))
        cfg = PipelineConfig(**TINY)
        with pytest.raises(ValueError, match="sample rate"):
            pipeline.train_bundle([tiny_scene, other], cfg)

    def test_empty_training_rejected(self):
        with pytest.raises(ValueError):
            pipeline.train_bundle([], PipelineConfig(**TINY))
