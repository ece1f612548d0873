"""Sentence-level claim identification benchmark.

Core pieces: a unified annotated-corpus model, five hand-crafted feature
groups, an L2-regularized logistic regression learner with a downsampling
majority-vote ensemble, in-domain / cross-domain / leave-one-domain-out
evaluation protocols, and statistical analysis of cross-domain results
(rank correlation, OLS regression, Wilcoxon signed-rank tests).

The package is wrapped by a FastAPI service (``claimbench.service``); the
``claimbench`` command line talks to that service, mounting it in-process
when no server URL is given.
"""

__version__ = "0.1.0"
