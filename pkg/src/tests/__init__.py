"""
Tests for riskquant.
"""
