"""Coarse geometry of subsets of Cayley graphs, computed on finite balls."""
