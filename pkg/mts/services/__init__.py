"""
MTS Domain Adaptation Services
Data generation, training, evaluation and reporting logic
"""
