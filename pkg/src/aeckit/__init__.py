"""aeckit: a desk-scale ASR error-correction (AEC) pipeline toolkit.

Modules
-------
textcore   normalization, Burmese syllable segmentation, corpus I/O
g2ipa      linear-chain CRF grapheme-to-IPA tagger
aligner    log-linear IBM Model 2 word aligner (fast_align style)
seq2seq    alignment-supervised Transformer corrector with IPA fusion
metrics    exact WER and chrF++ scoring
errorsim   synthetic ASR-error channel
toygrammar small generated corpus with gold phonetic labels
config     INI run configuration
reporting  comparison tables and figures
pipeline   end-to-end run orchestration
cli        command-line entry points
"""

__version__ = "0.1.0"
