"""Approximation algorithms for tensor forms over unitary and orthogonal matrices."""
