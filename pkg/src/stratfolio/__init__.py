"""Opponent-strategy portfolios for two-player zero-sum matrix games."""
