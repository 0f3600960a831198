"""Minimal sequential inference engine with reverse-mode gradients."""
