"""
LT-coded single-pixel imaging simulator.
Encodes a binary scene with LT-code illumination patterns, decodes noisy bucket
readings by belief propagation, and benchmarks against uncoded ghost imaging.
"""
