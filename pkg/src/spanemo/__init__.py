"""Multi-label emotion classification as label-span scoring.

The public surface mirrors the toolkit's stages: ``labels`` and ``data``
(label space + TSV pipeline), ``inputs``/``model`` (two-segment assembly,
encoders, scoring heads), ``objectives`` (BCE + pairwise loss), ``trainer``
(fine-tuning loop and checkpoints), ``metrics`` (miF1/maF1/jacS), and
``analysis`` (similarity and correlation introspection).
"""

__version__ = "0.1.0"
