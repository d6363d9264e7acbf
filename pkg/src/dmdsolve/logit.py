"""Closed-form type-I extreme-value choice kernels.

With additive i.i.d. Gumbel taste shocks the choice probabilities are
multinomial logit over the action values v_a = flow reward + discounted
continuation value, the conditional mean of the shock given a choice has a
closed form, and the expected maximum ("Emax") is ``gamma + logsumexp(v)``.
All exponentials are shifted by the max entry: reward scales in the career
family push raw exponents past the overflow threshold.
"""

from __future__ import annotations

from typing import Callable, Union

import numpy as np

from .model import ACTIONS, CareerModel, State, is_terminal, reward, transition

EULER_GAMMA = 0.5772156649015329

ValueLike = Union[np.ndarray, Callable[[State], float]]


def log_sum_exp(values: np.ndarray) -> float:
    """Shift-stable log of the summed exponentials of a 1-D vector."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty vector")
    m = float(np.max(v))
    return m + float(np.log(np.sum(np.exp(v - m))))


def choice_probabilities(values: np.ndarray) -> np.ndarray:
    """Multinomial-logit probabilities (softmax) of the action values."""
    v = np.asarray(values, dtype=float)
    e = np.exp(v - np.max(v))
    return e / e.sum()


def conditional_eps_mean(values: np.ndarray, a: int) -> float:
    """Mean of the Gumbel shock of action a conditional on a being chosen."""
    v = np.asarray(values, dtype=float)
    return log_sum_exp(v) - float(v[a - 1]) + EULER_GAMMA


def _value_at(model: CareerModel, value_fn: ValueLike, s: State) -> float:
    if callable(value_fn):
        return float(value_fn(s))
    return float(value_fn[s.index])


def action_values(
    model: CareerModel, value_fn: ValueLike, s: State, theta: np.ndarray
) -> np.ndarray:
    """v_a = flow reward + beta * V(successor) for each action at s."""
    if is_terminal(model, s):
        raise ValueError("action values are undefined at terminal states")
    out = np.empty(len(ACTIONS), dtype=float)
    for i, a in enumerate(ACTIONS):
        s_next = transition(model, s, a)
        out[i] = reward(model, s, a, theta) + model.beta * _value_at(
            model, value_fn, s_next
        )
    return out


def bellman_operator(
    model: CareerModel,
    value_fn: ValueLike,
    s: State,
    a: int,
    theta: np.ndarray,
) -> float:
    """Flow payoff (including the conditional shock mean) plus discounted
    continuation value for action a.

    Under logit shocks the conditional mean exactly offsets the action's
    deterministic advantage, so this equals the Emax for every action; the
    explicit decomposition is kept because tests exercise both routes.
    """
    v = action_values(model, value_fn, s, theta)
    u_bar = reward(model, s, a, theta)
    eps = conditional_eps_mean(v, a)
    s_next = transition(model, s, a)
    return u_bar + eps + model.beta * _value_at(model, value_fn, s_next)


def bellman_rhs(
    model: CareerModel, value_fn: ValueLike, s: State, theta: np.ndarray
) -> float:
    """Choice-probability-weighted operator values; equals
    ``gamma + logsumexp(action_values)`` by the logit identity."""
    v = action_values(model, value_fn, s, theta)
    return EULER_GAMMA + log_sum_exp(v)


def bellman_residual(
    model: CareerModel, value_fn: ValueLike, s: State, theta: np.ndarray
) -> float:
    """One-state fixed-point defect: RHS minus V(s); terminal states compare
    V(s) against the zero terminal value."""
    if is_terminal(model, s):
        return 0.0 - _value_at(model, value_fn, s)
    return bellman_rhs(model, value_fn, s, theta) - _value_at(model, value_fn, s)


# ---------------------------------------------------------------------------
# Vectorized forms shared by the sweep-style solvers and error reports.
# ---------------------------------------------------------------------------


def logsumexp_rows(v: np.ndarray) -> np.ndarray:
    """Row-wise shift-stable logsumexp of a 2-D array."""
    m = np.max(v, axis=1)
    return m + np.log(np.sum(np.exp(v - m[:, None]), axis=1))


def softmax_rows(v: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 2-D array."""
    e = np.exp(v - np.max(v, axis=1)[:, None])
    return e / e.sum(axis=1)[:, None]
