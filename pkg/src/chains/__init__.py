"""Circular chains and crooked circle maps."""
