"""Independent reference implementations used as test oracles.

Deliberately naive: plain recursion with memoization over State objects,
sharing none of the vectorized sweep code they are checking.
"""

from functools import lru_cache

import numpy as np

from dmdsolve.logit import EULER_GAMMA, log_sum_exp
from dmdsolve.model import is_terminal, reward, transition


def memoized_exact_values(model, theta) -> np.ndarray:
    """Exact value table by memoized recursion on the Bellman equation."""
    theta = np.asarray(theta, dtype=float)

    @lru_cache(maxsize=None)
    def value(packed: int) -> float:
        from dmdsolve.model import unpack_state

        s = unpack_state(model, packed)
        if is_terminal(model, s):
            return 0.0
        v = [
            reward(model, s, a, theta)
            + model.beta * value(transition(model, s, a).index)
            for a in (1, 2, 3)
        ]
        return EULER_GAMMA + log_sum_exp(np.array(v))

    return np.array([value(i) for i in range(model.n_states)])
