import numpy as np
import pytest

from contextvad import autograd as ag
from contextvad.autograd import Var


def numeric_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of scalar f wrt array x."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f())
        flat[i] = orig - eps
        lo = float(f())
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * eps)
    return g


def assert_grads_close(build, inputs: dict[str, np.ndarray],
                       eps: float = 1e-6, rtol: float = 1e-4,
                       floor: float = 1e-8) -> None:
    """Check analytic gradients of scalar build(vars) against central FD.

    ``inputs`` maps names to arrays; ``build`` receives a dict of Vars with
    requires_grad set and must return a scalar Var.
    """
    vars_ = {k: Var(v.copy(), requires_grad=True) for k, v in inputs.items()}
    out = build(vars_)
    out.backward()
    for name, v in vars_.items():
        def f(name=name, v=v):
            fresh = {k: Var(vv.data, requires_grad=False) for k, vv in vars_.items()}
            return build(fresh).data
        num = numeric_grad(f, v.data, eps)
        an = v.grad if v.grad is not None else np.zeros_like(v.data)
        denom = np.maximum(np.maximum(np.abs(num), np.abs(an)), floor)
        rel = np.abs(num - an) / denom
        assert rel.max() < rtol, (
            f"gradient mismatch for {name}: max rel err {rel.max():.3g}")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
