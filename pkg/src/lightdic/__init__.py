"""Decoupled digraph learning: magnetic propagation offline, linear softmax on top."""
