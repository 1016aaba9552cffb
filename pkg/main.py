#!/usr/bin/env python3

"""
uRNN Lab - Unitary-evolution recurrent networks
Train, evaluate and probe uRNNs and their baselines on long-memory benchmarks.
"""

# This is a simplified entry point that delegates to the CLI module
if __name__ == "__main__":
    from urnn.cli.cli import main
    main()
