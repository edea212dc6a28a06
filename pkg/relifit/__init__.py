"""
relifit: failure-rate software reliability models

Fits Jelinski-Moranda style failure-rate models, including imperfect
debugging and iteration-modulated variants, to inter-failure times by
maximum likelihood with a hybrid particle-swarm / gravitational-search
optimizer, and compares them by SSE and MSE across releases.
"""

__version__ = '0.1.0'
