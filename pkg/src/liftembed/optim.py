"""AdamW with a step-decay learning-rate schedule."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, TrainingError


@dataclass
class OptimState:
    """Moments and hyper-parameters for one trainable vector.

    ``decay_mask`` selects coordinates that receive decoupled weight decay
    (network weights); biases and shock speeds are left undecayed.
    """

    size: int
    lr: float = 0.01
    milestones: tuple = ()
    gamma: float = 0.1
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-2
    decay_mask: np.ndarray = None
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)
    step_count: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.lr}")
        b1, b2 = self.betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ConfigurationError(f"betas must lie in [0, 1), got {self.betas}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight decay must be >= 0, got {self.weight_decay}")
        self.milestones = tuple(sorted(int(k) for k in self.milestones))
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)
        if self.decay_mask is None:
            self.decay_mask = np.ones(self.size, dtype=bool)
        self.decay_mask = np.asarray(self.decay_mask, dtype=bool)
        if self.m.shape != (self.size,) or self.v.shape != (self.size,) or self.decay_mask.shape != (self.size,):
            raise ConfigurationError("moment vectors and decay mask must match the trainable size")


def lr_at(state, epoch):
    """Base rate times ``gamma`` per milestone already reached."""
    passed = sum(1 for k in state.milestones if k <= epoch)
    return state.lr * state.gamma ** passed


def default_milestones(epochs):
    """Decay points at 40% and 70% of the epoch budget."""
    return tuple(sorted({int(0.4 * epochs), int(0.7 * epochs)} - {0}))


def step(state, params, grads, lr=None):
    """One AdamW update; returns the new parameter vector.

    ``lr`` overrides the base rate (the trainer passes ``lr_at(state, epoch)``).
    Moments in ``state`` are updated in place.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != (state.size,) or grads.shape != (state.size,):
        raise ConfigurationError(
            f"params {params.shape} / grads {grads.shape} do not match optimizer size {state.size}"
        )
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise TrainingError(f"non-finite gradient at index {int(bad[0])}", term="gradient")

    eta = state.lr if lr is None else lr
    b1, b2 = state.betas
    state.step_count += 1
    k = state.step_count

    out = params.copy()
    if state.weight_decay:
        out[state.decay_mask] *= 1.0 - eta * state.weight_decay

    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1 ** k)
    v_hat = state.v / (1.0 - b2 ** k)
    out -= eta * m_hat / (np.sqrt(v_hat) + state.eps)
    return out
