"""Reinforcement-learning exploration of protocol state spaces."""
