"""
MTS Domain Adaptation Engine
Autograd, network components and loss functions
"""
