"""Hard-label, query-metered access to a target network."""
from __future__ import annotations

import numpy as np

from .errors import BudgetExhausted, InputError
from .nn import Network


class HardLabelOracle:
    """Exposes only the predicted class of ``target`` and counts every evaluation.

    One instance belongs to one attack session; it is not thread-safe.
    ``bounds`` (the valid pixel interval) and ``input_shape`` are public
    knowledge about the input domain, never about the model's outputs.
    """

    def __init__(self, target: Network, true_class: int, query_budget: int):
        if query_budget < 0:
            raise InputError("query budget must be non-negative")
        self.__target = target
        self.true_class = int(true_class)
        self.query_budget = int(query_budget)
        self._used = 0

    @property
    def bounds(self):
        return self.__target.data_range

    @property
    def input_shape(self):
        return self.__target.input_shape

    @property
    def queries_used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int:
        return self.query_budget - self._used

    def query_class(self, x) -> int:
        if self._used >= self.query_budget:
            raise BudgetExhausted(f"query budget of {self.query_budget} spent")
        self._used += 1
        return int(self.__target.predict(x))

    def indicator(self, x) -> int:
        """+1 if ``x`` is classified as anything but the true class, else -1."""
        return 1 if self.query_class(x) != self.true_class else -1

    def indicators(self, xs) -> np.ndarray:
        """Batched :meth:`indicator`, one query per row.

        Evaluates at most ``remaining`` rows, so the result may be shorter than
        ``xs``. Raises :class:`BudgetExhausted` only when nothing can be
        evaluated.
        """
        xs = np.asarray(xs, dtype=np.float64)
        if self.remaining <= 0:
            raise BudgetExhausted(f"query budget of {self.query_budget} spent")
        n = min(len(xs), self.remaining)
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        self._used += n
        pred = np.atleast_1d(self.__target.predict(xs[:n]))
        return np.where(pred != self.true_class, 1, -1)
