"""
Random Streams Utility for the MTS Domain Adaptation toolkit
Named, independent generators derived from one seed
"""

import numpy as np


def spawn_generators(seed, names):
    """
    Create one independent generator per name

    Args:
        seed (int): Root seed
        names (list): Stream names, order matters

    Returns:
        dict: name -> np.random.Generator
    """
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}
