"""EEG artifact detection from independent-component scalp topographies."""
from .eeg_io import Recording, load_recording, notch_filter, save_recording, window_subtrials
from .errors import IcascopeError
from .framework import Registry, classify, evaluate, run_pipeline
from .ica import component_weights, decompose
from .topomap import render_topoplot

__version__ = "0.1.0"
