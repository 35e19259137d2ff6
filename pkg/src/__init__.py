"""
co-BPM: Bayesian estimation of f-divergences between two samples
"""
__version__ = "0.1.0"
