"""
MTS Domain Adaptation Utilities
Helper functions shared across layers
"""
