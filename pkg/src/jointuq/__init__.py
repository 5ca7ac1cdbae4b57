"""Joint-loss uncertainty quantification for neural-network regression."""
