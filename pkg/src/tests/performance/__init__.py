"""
Acceptance-scale tests for riskquant.
"""
