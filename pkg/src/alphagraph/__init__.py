"""Equity return forecasting from heterogeneous signals.

The pipeline: stock embeddings factorized from news co-mention counts, a
kNN digraph with neighbor attention, technical factor embeddings, averaged
news vectors, a BiLSTM with temporal attention, and a linear forecasting
head - plus the evaluation stack (metrics, two trading simulators, quantile
portfolios) and interpretation tools. See the CLI in
:mod:`alphagraph.cli` for the command pipeline.
"""

__version__ = "0.1.0"
