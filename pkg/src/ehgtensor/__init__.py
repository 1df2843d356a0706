"""Separation of localized and distributed uterine activity in multichannel EHG tensors.

The main entry point is :func:`ehgtensor.vb.run`, a variational Bayes
low-rank Tucker + sparse + Gaussian-noise decomposition with automatic rank
pruning.  Comparison methods live in :mod:`ehgtensor.baselines` and scoring
in :mod:`ehgtensor.evaluation`.
"""

__version__ = "0.1.0"
