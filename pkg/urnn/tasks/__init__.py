"""
Benchmark tasks for uRNN Lab
"""
