"""Central finite-difference gradient check.

The scalar probed is ``sum(output * G)`` for a fixed random ``G``, so the
analytic side is a single ``backward(G)``. Relative error per element is
``|a - n| / max(|a|, |n|, 1e-8)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonDeterministicLayer
from .layers import Layer


@dataclass
class GradCheckResult:
    max_rel_error: float
    location: str
    n_checked: int
    n_skipped: int = 0
    analytic: float = 0.0
    numeric: float = 0.0

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def relative_error(a, n) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)


def grad_check(layer: Layer, x: np.ndarray, eps: float = 1e-3, seed: int = 0,
               train: bool = True, check_input: bool = True,
               reference_dtype=np.float64) -> GradCheckResult:
    """Compare analytic gradients of every parameter (and the input) against central differences.

    The analytic side runs at the layer's own precision. The finite differences
    run on a replica cast to ``reference_dtype`` (pass ``None`` to difference the
    layer itself); at float32, rounding noise of order 1e-7 / eps otherwise
    swamps small gradient entries. With a float64 replica a step of 1e-4 is
    tighter still; at 1e-3 the truncation error can dominate gradient
    entries that happen to sit near zero (batchnorm inputs, mostly).

    Dropout must be frozen, i.e. masks must depend only on a fixed key; two
    identical forward passes are compared first. Elements whose +/- eps
    probes fall on different sides of a relu or max-pool kink are skipped and
    counted in ``n_skipped``.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x, copy=True)
    out = layer.forward(x, train)
    again = layer.forward(x, train)
    if not np.array_equal(out, again):
        raise NonDeterministicLayer(f"{layer!r}: two identical forward passes differ")
    # round G to the layer's dtype so both sides probe the same objective
    G = rng.standard_normal(out.shape).astype(out.dtype).astype(np.float64)

    dx = layer.backward(G.astype(out.dtype))
    analytic = {name: np.array(g, dtype=np.float64, copy=True) for name, g, _ in _param_slots(layer)}
    if check_input:
        analytic["<input>"] = np.array(dx, dtype=np.float64, copy=True)

    ref = layer if reference_dtype is None else layer.astype(reference_dtype)
    x_ref = x if reference_dtype is None else x.astype(reference_dtype)

    def objective() -> tuple[float, list]:
        value = float(np.sum(ref.forward(x_ref, train).astype(np.float64) * G))
        return value, _patterns(ref)

    targets = [(name, params) for name, _, params in _param_slots(ref)]
    if check_input:
        targets.append(("<input>", x_ref))
    worst = GradCheckResult(0.0, "", 0)
    for pname, arr in targets:
        flat = arr.reshape(-1)
        a_flat = analytic[pname].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + arr.dtype.type(eps)
            up_val = flat[i]
            f_up, branch_up = objective()
            flat[i] = orig - arr.dtype.type(eps)
            down_val = flat[i]
            f_down, branch_down = objective()
            flat[i] = orig
            if not _same(branch_up, branch_down):
                # the step straddles a relu/max-pool kink; no finite difference is valid here
                worst.n_skipped += 1
                continue
            numeric = (f_up - f_down) / (float(up_val) - float(down_val))
            err = float(relative_error(a_flat[i], numeric))
            worst.n_checked += 1
            if err > worst.max_rel_error or not worst.location:
                worst.max_rel_error = err
                worst.location = f"{pname}{list(np.unravel_index(i, arr.shape))}"
                worst.analytic = float(a_flat[i])
                worst.numeric = numeric
    return worst


def _patterns(layer: Layer) -> list:
    pattern = layer.branch_pattern()
    if pattern is None:
        return []
    if isinstance(pattern, list):
        return [p.copy() for p in pattern]
    return [pattern.copy()]


def _same(a: list, b: list) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def _param_slots(layer: Layer):
    if hasattr(layer, "named_params"):
        grads = dict(layer.named_grads())
        for name, value in layer.named_params():
            yield name, grads[name], value
    else:
        for name, value in layer.params.items():
            yield name, layer.grads[name], value
