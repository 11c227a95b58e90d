"""
Integration tests for riskquant.
"""
