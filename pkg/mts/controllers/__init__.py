"""
MTS Domain Adaptation Controllers
Handle CLI commands and map failures to exit codes
"""
