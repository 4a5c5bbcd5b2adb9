"""Gym-style reset/step/layout bindings over the gridarena engine."""

from .env import EnvHandle, VectorEnv, make_env

__all__ = ["EnvHandle", "VectorEnv", "make_env"]
