"""Inductive construction: rotations, shears, conjugacy stack and stage search."""
