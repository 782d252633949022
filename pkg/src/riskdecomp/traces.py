"""Container for excess-risk trajectories shared by every problem family."""

from dataclasses import dataclass, field

import numpy as np

SPACES = ("parameter", "function")


@dataclass(eq=False)
class DecompositionTrace:
    """Per-time excess risks and distances of the three trainings.

    ``param_dist``, ``var_dist`` and ``bias_dist`` are distances of the
    standard, variance and bias iterates to their respective targets, either
    in parameter space or (for networks) in L2 of the input law. The ``*_se``
    arrays carry Monte Carlo standard errors and are zero for analytic
    families.
    """

    family: str
    space: str
    times: np.ndarray
    er: np.ndarray
    ver: np.ndarray
    ber: np.ndarray
    param_dist: np.ndarray
    var_dist: np.ndarray
    bias_dist: np.ndarray
    n: int
    param_dist_se: np.ndarray | None = None
    var_dist_se: np.ndarray | None = None
    bias_dist_se: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    internals: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"unknown space {self.space!r}")
        self.times = np.asarray(self.times, dtype=float)
        for name in ("er", "ver", "ber", "param_dist", "var_dist", "bias_dist"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.times.shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {self.times.shape}")
            if np.any(arr < 0):
                raise ValueError(f"{name} has negative entries")
            setattr(self, name, arr)
        for name in ("param_dist_se", "var_dist_se", "bias_dist_se"):
            val = getattr(self, name)
            setattr(self, name, np.zeros_like(self.times) if val is None
                    else np.asarray(val, dtype=float))
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")

    def __len__(self):
        return self.times.size
