"""Machine checks of the inductive properties."""
