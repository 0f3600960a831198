"""Run-time detection and repair of backdoor-poisoned classifier inputs."""

__version__ = "0.1.0"
