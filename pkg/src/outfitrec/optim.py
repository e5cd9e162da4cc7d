"""Adam optimizer and a finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConsistencyError
from .tensor import Tensor, no_grad


class Adam:
    """Standard Adam with bias correction, operating on parameter tensors.

    Update: m <- b1*m + (1-b1)*g ; v <- b2*v + (1-b2)*g^2 ;
    p <- p - lr * m_hat / (sqrt(v_hat) + eps).
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 5e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, strict: bool = True) -> None:
        """Apply one update. With strict=False, parameters without a
        gradient (absent from this step's loss) are left untouched."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                if strict:
                    raise ConsistencyError(
                        f"parameter {p.name or i} has no gradient; "
                        "run backward() first")
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g ** 2
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


@dataclass
class GradCheckReport:
    """Max relative error per parameter block, plus the overall verdict."""
    per_block: dict = field(default_factory=dict)
    rel_tol: float = 1e-4

    @property
    def max_rel_error(self) -> float:
        return max(self.per_block.values()) if self.per_block else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.rel_tol

    def __str__(self) -> str:
        lines = [f"{name}: max rel err {err:.3e}" for name, err in self.per_block.items()]
        lines.append(f"overall: {self.max_rel_error:.3e} "
                     f"({'PASS' if self.passed else 'FAIL'} at {self.rel_tol:g})")
        return "\n".join(lines)


def grad_check(loss_fn: Callable[[], Tensor],
               params: Sequence[tuple[str, Tensor]],
               h_scale: float = 1e-3,
               rel_tol: float = 1e-4) -> GradCheckReport:
    """Compare tape gradients of `loss_fn` against central finite differences.

    `loss_fn` must rebuild the loss from the parameters' current values on
    every call. Per entry the step is h = h_scale * max(1, |value|) and the
    relative error is |fd - g| / max(1, |fd|, |g|).
    """
    for _, p in params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params}

    report = GradCheckReport(rel_tol=rel_tol)
    for name, p in params:
        flat = p.data.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            h = h_scale * max(1.0, abs(orig))
            with no_grad():
                flat[i] = orig + h
                up = loss_fn().item()
                flat[i] = orig - h
                down = loss_fn().item()
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            g = analytic[name].reshape(-1)[i]
            err = abs(fd - g) / max(1.0, abs(fd), abs(g))
            if err > worst:
                worst = err
        report.per_block[name] = worst
    return report
