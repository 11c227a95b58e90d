"""
riskquant: learning conditional Value-at-Risk and Expected Shortfall with
neural networks, with twin-simulation validation, Gaussian ground truth and a
nested Monte Carlo benchmark.
"""

__version__ = "0.3.0"
