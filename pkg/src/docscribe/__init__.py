"""Toolkit for ASR-assisted language documentation.

Covers the text side of a documentation workflow: grapheme handling for a
configurable orthography, corpus manifests and splits, backoff n-gram
language models, CTC decoding with shallow fusion, n-best rescoring,
WER/CER evaluation with seen/unseen breakdowns, TTS-augmentation
bookkeeping, and an HTTP transcription/review service.
"""

__version__ = "0.1.0"
