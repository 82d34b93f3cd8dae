"""Common interface of the probability integral transforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPACES = ("sphere", "projective", "rotation", "shape", "simplex", "halfplane")


class Transform:
    """A bijection (off a null set) pushing a model onto a reference law.

    Subclasses implement :meth:`forward` and :meth:`inverse` on batches of
    points laid out as in :mod:`manifold_pit.geometry`.
    """

    space: str = "sphere"

    def forward(self, x) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, y) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)


@dataclass(frozen=True)
class IdentityTransform(Transform):
    space: str = "sphere"

    def forward(self, x):
        return np.array(x, dtype=complex if self.space == "shape" else float)

    def inverse(self, y):
        return self.forward(y)
