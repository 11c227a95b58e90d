"""
Unit tests for riskquant.
"""
