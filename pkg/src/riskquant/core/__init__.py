"""Feedforward networks, losses and the optimizer."""
