"""
MTS Domain Adaptation Routes
Command line registration
"""
