"""
Core numerics for uRNN Lab
"""
