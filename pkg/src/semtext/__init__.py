"""Predictive text transmission: cost vs. semantic similarity simulator.

The package simulates sending natural-language text from a source to a
destination over noiseless and character-erasure channels.  The destination
tries to predict whole words (neural sequence model or Markov chain) or to
complete words from short prefixes (character-level recurrent model), so the
source can skip or truncate transmissions.  The harness measures the average
cost c̄ against the average semantic similarity s̄ under threshold-based and
periodic transmission policies, with optional character-level Huffman coding.
"""

__version__ = "0.1.0"
