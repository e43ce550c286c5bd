"""
MTS Domain Adaptation Repositories
File persistence for datasets, checkpoints and run artifacts
"""
