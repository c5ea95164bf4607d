"""Shared oracles and checking utilities for the test suite.

Oracles here are deliberately naive (loops, O(N^2) transforms, per-element
finite differences) so they stay independent of the library code paths
they check.
"""

import numpy as np


def rel_err(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(floor, abs(a) + abs(b))


def naive_dft_power(frame, nfft: int) -> np.ndarray:
    """Direct O(N^2) DFT power spectrum, one-sided, matching P = |X|^2/nfft."""
    x = np.zeros(nfft)
    x[: len(frame)] = frame
    n = np.arange(nfft)
    out = np.empty(nfft // 2 + 1)
    for k in range(nfft // 2 + 1):
        re = np.sum(x * np.cos(-2.0 * np.pi * k * n / nfft))
        im = np.sum(x * np.sin(-2.0 * np.pi * k * n / nfft))
        out[k] = (re * re + im * im) / nfft
    return out


def loss_for_gradcheck(net, inputs, R, at=None):
    ctx = net.forward(inputs, training=True)
    target = ctx.values[at or net.output_name]
    return float((target * R).sum())


def gradcheck(net, inputs, at=None, h=1e-5, max_param_samples=6, seed=0):
    """Central finite differences against the engine's backward pass.

    Checks every input element and a deterministic sample of elements from
    every parameter tensor. Returns the worst relative error.
    """
    rng = np.random.default_rng(seed)
    at = at or net.output_name
    ctx = net.forward(inputs, training=True)
    R = rng.normal(size=ctx.values[at].shape)
    pgrads, igrads = net.backward(ctx, R, at=at)

    worst = 0.0
    for name, x in inputs.items():
        x = np.asarray(x, dtype=np.float64)
        inputs[name] = x
        for idx in np.ndindex(*x.shape):
            orig = x[idx]
            x[idx] = orig + h
            fp = loss_for_gradcheck(net, inputs, R, at)
            x[idx] = orig - h
            fm = loss_for_gradcheck(net, inputs, R, at)
            x[idx] = orig
            worst = max(worst, rel_err((fp - fm) / (2 * h), igrads[name][idx]))

    for node, d in net.params.items():
        for pname, arr in d.items():
            flat = arr.ravel()
            k = min(max_param_samples, flat.size)
            picks = rng.choice(flat.size, size=k, replace=False)
            for i in picks:
                orig = flat[i]
                flat[i] = orig + h
                fp = loss_for_gradcheck(net, inputs, R, at)
                flat[i] = orig - h
                fm = loss_for_gradcheck(net, inputs, R, at)
                flat[i] = orig
                num = (fp - fm) / (2 * h)
                worst = max(worst, rel_err(num, pgrads[node][pname].ravel()[i]))
    return worst


def fd_input_jacobian(net, inputs: dict, h=1e-5) -> np.ndarray:
    """Rows d(sum of logits over batch)/dx_n by central differences."""

    def total():
        ctx = net.forward(inputs, training=True)
        return float(net.logits(ctx).sum())

    parts = []
    for name in sorted(inputs):
        x = np.asarray(inputs[name], dtype=np.float64)
        inputs[name] = x
        J = np.empty(x.shape)
        for idx in np.ndindex(*x.shape):
            orig = x[idx]
            x[idx] = orig + h
            fp = total()
            x[idx] = orig - h
            fm = total()
            x[idx] = orig
            J[idx] = (fp - fm) / (2 * h)
        parts.append(J.reshape(x.shape[0], -1))
    return np.concatenate(parts, axis=1)
