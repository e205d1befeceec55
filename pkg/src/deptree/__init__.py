"""Dependency-aware fault-tree and event-tree quantification.

Fault trees are converted to binary decision diagrams; dependency groups
enter path probabilities through joint probability tables obtained from
Markov models, stochastic Petri nets or data.
"""

__version__ = "0.1.0"
