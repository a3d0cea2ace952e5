"""
Adam optimizer over tensor parameters.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractViolation, InvalidConfigurationError
from .tensor import Array, Tensor


@dataclass
class AdamState:
    """Per-parameter moment estimates and the shared step counter.

    Moments are created lazily on the first step so that one state can be
    built before the parameter list is final.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moments: list[Array] = field(default_factory=list)
    second_moments: list[Array] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise InvalidConfigurationError(f"Learning rate must be non-negative, got {self.lr}", field="lr")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InvalidConfigurationError("Adam betas must lie in [0, 1)", field="beta1/beta2")


def adam_step(state: AdamState, params: Sequence[Tensor]) -> None:
    """Apply one bias-corrected Adam update in place and zero the gradients.

    Raises:
        ContractViolation: a parameter has no gradient, or the parameter list
            does not match the one the state was built for
    """
    missing = [i for i, p in enumerate(params) if p.grad is None]
    if missing:
        raise ContractViolation(
            "adam_step called before gradients were populated",
            details=f"parameters without grad: {missing}",
        )

    if not state.first_moments:
        state.first_moments = [np.zeros_like(p.values) for p in params]
        state.second_moments = [np.zeros_like(p.values) for p in params]
    elif len(state.first_moments) != len(params) or any(
        m.shape != p.values.shape for m, p in zip(state.first_moments, params, strict=True)
    ):
        raise ContractViolation("adam_step parameter list does not match the optimizer state")

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t

    for param, m, v in zip(params, state.first_moments, state.second_moments, strict=True):
        grad = param.grad
        assert grad is not None
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param.values -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        param.grad = np.zeros_like(param.values)
