"""Hidden-rule environment arena, explore/verify/plan agents and scoring tools."""

__version__ = "0.1.0"
