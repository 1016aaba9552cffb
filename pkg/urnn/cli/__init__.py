"""
CLI module for uRNN Lab
"""
