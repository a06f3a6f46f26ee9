"""odocount: detect and count overlapping acoustic events of a single class.

Pipeline: spectrogram front end -> onset/offset random-forest detectors with
an OLS sharpener -> a 2-D [onset x duration] event posterior combined with a
duration prior -> transcript extraction under a dominance rule and calibrated
expected counts. A cardinality HMM (plain and detector-augmented) serves as
the comparison system, and a synthetic scene generator provides exact ground
truth.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config
from .detectors import DetectionCurve, ForestModel, SharpenerModel
from .dsp import AudioClip, DiffSpectrogram, Spectrogram
from .duration_prior import DurationPrior, eval_prior, fit_duration_gmm, flat_prior
from .evaluation import EvalReport, MatchConfig, crossvalidate, f_measure, match_events, rms_count_error
from .hmm import HmmModel, StatePath, derive_cardinality, hmm_count, states_to_transcript, train_hmm, viterbi
from .odo import (CalibrationFactor, Event, EventPosterior, Transcript, build_posterior,
                  expected_count, extract_transcript, fit_calibration, select_threshold)
from .pipeline import Decoder, ModelBundle, train_bundle
from .scene import LabeledScene, SceneConfig, fold_scene, generate_scene, synth_call

__all__ = [name for name in dir() if not name.startswith("_")]
