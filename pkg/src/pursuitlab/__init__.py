"""Desk-scale multi-agent pursuit lab.

Subpackages: a seeded occluded-grid simulator (`env`), a small reverse-mode
autodiff core with Adam and gradient verification (`autodiff`), transformer
and recurrent agent networks (`policy`), additive and monotonic value mixers
(`mixer`), the CTDE training loop (`trainer`), and the run configuration /
command-line layer (`config`, `cli`).
"""

__version__ = "0.1.0"
