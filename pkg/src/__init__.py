"""
Source root: the riskquant package and its command line entry point.
"""
