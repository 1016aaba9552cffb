"""
Models module for uRNN Lab
"""
