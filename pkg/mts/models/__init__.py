"""
MTS Domain Adaptation Models
Plain data types shared by services, repositories and controllers
"""
