class SimulationError(Exception):
    """Internal inconsistency or contract violation while simulating."""


class MemoryFault(SimulationError):
    """Access outside any declared region or across a partition boundary."""
