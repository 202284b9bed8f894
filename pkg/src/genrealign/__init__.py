"""Genre-informed lyrics alignment and transcription for polyphonic music.

GMM-HMM acoustic models with genre-tagged phone and silence variants,
back-off N-gram language models, forced alignment, beam decoding, and
AE/WER evaluation, sized to run on a desk.
"""

__version__ = "0.1.0"
