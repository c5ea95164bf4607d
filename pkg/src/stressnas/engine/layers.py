"""Layer implementations.

Each layer is stateless apart from its parameter dict (created by
init_params) and, for BatchNorm, a running-statistics dict owned by the
Network. forward returns (output, cache); backward consumes the cache and
returns gradients for every input and every parameter.

Per-sample shapes (without the batch axis) are validated at graph-build
time through out_shape.
"""

import numpy as np

from ..errors import ConfigError


def _pad_amounts(size: int, k: int, stride: int, padding: str):
    """(pad_before, pad_after, out_size) along one spatial axis."""
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + k - size, 0)
        return total // 2, total - total // 2, out
    if padding == "valid":
        if size < k:
            raise ConfigError(f"spatial size {size} smaller than kernel {k}")
        return 0, 0, (size - k) // stride + 1
    raise ConfigError(f"unknown padding {padding!r}")


def _pad2d(x: np.ndarray, pads) -> np.ndarray:
    """Zero-pad the two trailing axes (faster than np.pad for this case)."""
    (ph0, ph1), (pw0, pw1) = pads
    if ph0 == ph1 == pw0 == pw1 == 0:
        return x
    B, C, H, W = x.shape
    xp = np.zeros((B, C, H + ph0 + ph1, W + pw0 + pw1))
    xp[:, :, ph0 : ph0 + H, pw0 : pw0 + W] = x
    return xp


def _window_view(xp: np.ndarray, kh: int, kw: int, stride: int):
    """Read-only sliding windows (B, C, oh, ow, kh, kw) over padded input."""
    B, C, Hp, Wp = xp.shape
    oh = (Hp - kh) // stride + 1
    ow = (Wp - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp,
        shape=(B, C, oh, ow, kh, kw),
        strides=(s0, s1, s2 * stride, s3 * stride, s2, s3),
        writeable=False,
    )


def _scatter_windows(g, B, C, Hp, Wp, kh, kw, stride, pads):
    """Adjoint of _window_view: accumulate (B, C, oh, ow, kh, kw) grads."""
    oh, ow = g.shape[2], g.shape[3]
    dxp = np.zeros((B, C, Hp, Wp))
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + oh * stride : stride,
                j : j + ow * stride : stride] += g[:, :, :, :, i, j]
    (ph0, ph1), (pw0, pw1) = pads
    return dxp[:, :, ph0 : Hp - ph1, pw0 : Wp - pw1]


class Layer:
    def param_shapes(self) -> dict:
        return {}

    def init_params(self, rng) -> dict:
        return {}

    def init_state(self) -> dict:
        return {}

    def out_shape(self, in_shapes: list) -> tuple:
        raise NotImplementedError

    def forward(self, xs, params, training, state):
        raise NotImplementedError

    def backward(self, gy, cache, params):
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int):
        self.in_dim = in_dim
        self.out_dim = out_dim

    def param_shapes(self):
        return {"W": (self.in_dim, self.out_dim), "b": (self.out_dim,)}

    def init_params(self, rng):
        scale = np.sqrt(2.0 / self.in_dim)
        return {
            "W": rng.normal(0.0, scale, (self.in_dim, self.out_dim)),
            "b": np.zeros(self.out_dim),
        }

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        if shape != (self.in_dim,):
            raise ConfigError(f"Dense expects ({self.in_dim},), got {shape}")
        return (self.out_dim,)

    def forward(self, xs, params, training, state):
        (x,) = xs
        return x @ params["W"] + params["b"], x

    def backward(self, gy, cache, params):
        x = cache
        return [gy @ params["W"].T], {"W": x.T @ gy, "b": gy.sum(axis=0)}


class Conv2D(Layer):
    def __init__(self, in_ch, out_ch, kernel, stride=1, padding="same"):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kh, self.kw = (kernel, kernel) if isinstance(kernel, int) else kernel
        self.stride = stride
        if padding not in ("same", "valid"):
            raise ConfigError(f"unknown padding {padding!r}")
        self.padding = padding

    def param_shapes(self):
        return {
            "W": (self.out_ch, self.in_ch, self.kh, self.kw),
            "b": (self.out_ch,),
        }

    def init_params(self, rng):
        fan_in = self.in_ch * self.kh * self.kw
        return {
            "W": rng.normal(0.0, np.sqrt(2.0 / fan_in), self.param_shapes()["W"]),
            "b": np.zeros(self.out_ch),
        }

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        if len(shape) != 3 or shape[0] != self.in_ch:
            raise ConfigError(
                f"Conv2D expects ({self.in_ch}, H, W), got {shape}"
            )
        _, _, oh = _pad_amounts(shape[1], self.kh, self.stride, self.padding)
        _, _, ow = _pad_amounts(shape[2], self.kw, self.stride, self.padding)
        return (self.out_ch, oh, ow)

    def forward(self, xs, params, training, state):
        (x,) = xs
        B, C, H, W = x.shape
        ph0, ph1, oh = _pad_amounts(H, self.kh, self.stride, self.padding)
        pw0, pw1, ow = _pad_amounts(W, self.kw, self.stride, self.padding)
        pads = ((ph0, ph1), (pw0, pw1))
        if self.kh == self.kw == 1 and self.stride == 1:
            # pointwise: plain feature-dim GEMM, no window extraction
            cols = np.ascontiguousarray(np.moveaxis(x, 1, 3)).reshape(-1, C)
            xp_shape = x.shape
        else:
            xp = _pad2d(x, pads)
            win = _window_view(xp, self.kh, self.kw, self.stride)
            # one flat GEMM: (B*oh*ow, C*kh*kw) @ (C*kh*kw, out_ch)
            cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
                B * oh * ow, -1
            )
            xp_shape = xp.shape
        wmat = params["W"].reshape(self.out_ch, -1)
        y = cols @ wmat.T + params["b"]
        # channels-first strided view; downstream ops accept any strides
        y = np.moveaxis(y.reshape(B, oh, ow, self.out_ch), 3, 1)
        return y, (cols, xp_shape, pads, oh, ow)

    def backward(self, gy, cache, params):
        cols, xp_shape, pads, oh, ow = cache
        B = gy.shape[0]
        gy_mat = np.ascontiguousarray(np.moveaxis(gy, 1, 3)).reshape(
            B * oh * ow, self.out_ch
        )
        wmat = params["W"].reshape(self.out_ch, -1)
        gW = (gy_mat.T @ cols).reshape(params["W"].shape)
        gb = gy.sum(axis=(0, 2, 3))
        _, _, Hp, Wp = xp_shape
        if self.kh == self.kw == 1 and self.stride == 1:
            gx = (gy_mat @ wmat).reshape(gy.shape[0], oh, ow, self.in_ch)
            gx = np.moveaxis(gx, 3, 1)
        elif self.stride == 1:
            # dx as full correlation with the flipped kernel: one GEMM
            # instead of a k*k scatter loop
            gyp = _pad2d(
                np.asarray(gy), ((self.kh - 1, self.kh - 1),
                                 (self.kw - 1, self.kw - 1))
            )
            win = _window_view(gyp, self.kh, self.kw, 1)
            gcols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
                B * Hp * Wp, -1
            )
            wflip = params["W"][:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
            gxp = (gcols @ wflip.reshape(self.in_ch, -1).T).reshape(
                B, Hp, Wp, self.in_ch
            )
            gxp = np.moveaxis(gxp, 3, 1)
            (ph0, ph1), (pw0, pw1) = pads
            gx = gxp[:, :, ph0 : Hp - ph1, pw0 : Wp - pw1]
        else:
            gcols = gy_mat @ wmat
            g = gcols.reshape(B, oh, ow, self.in_ch, self.kh, self.kw)
            g = g.transpose(0, 3, 1, 2, 4, 5)
            gx = _scatter_windows(
                g, B, self.in_ch, Hp, Wp, self.kh, self.kw, self.stride, pads
            )
        return [gx], {"W": gW, "b": gb}


class AvgPool(Layer):
    """Average pooling; padded cells are excluded from the divisor."""

    def __init__(self, kernel, stride=None, padding="valid"):
        self.kh, self.kw = (kernel, kernel) if isinstance(kernel, int) else kernel
        self.stride = stride if stride is not None else self.kh
        if padding not in ("same", "valid"):
            raise ConfigError(f"unknown padding {padding!r}")
        self.padding = padding

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        if len(shape) != 3:
            raise ConfigError(f"AvgPool expects (C, H, W), got {shape}")
        _, _, oh = _pad_amounts(shape[1], self.kh, self.stride, self.padding)
        _, _, ow = _pad_amounts(shape[2], self.kw, self.stride, self.padding)
        return (shape[0], oh, ow)

    def _divisor(self, H, W, pads, oh, ow):
        ones = _pad2d(np.ones((1, 1, H, W)), pads)
        div = np.zeros((oh, ow))
        for i in range(self.kh):
            for j in range(self.kw):
                div += ones[0, 0, i : i + oh * self.stride : self.stride,
                            j : j + ow * self.stride : self.stride]
        return div

    def forward(self, xs, params, training, state):
        (x,) = xs
        B, C, H, W = x.shape
        ph0, ph1, oh = _pad_amounts(H, self.kh, self.stride, self.padding)
        pw0, pw1, ow = _pad_amounts(W, self.kw, self.stride, self.padding)
        pads = ((ph0, ph1), (pw0, pw1))
        xp = _pad2d(x, pads)
        acc = np.zeros((B, C, oh, ow))
        for i in range(self.kh):
            for j in range(self.kw):
                acc += xp[:, :, i : i + oh * self.stride : self.stride,
                          j : j + ow * self.stride : self.stride]
        div = self._divisor(H, W, pads, oh, ow)
        y = acc / div
        return y, (xp.shape, pads, div)

    def backward(self, gy, cache, params):
        xp_shape, pads, div = cache
        B, C, Hp, Wp = xp_shape
        g = gy / div
        oh, ow = g.shape[2], g.shape[3]
        dxp = np.zeros((B, C, Hp, Wp))
        for i in range(self.kh):
            for j in range(self.kw):
                dxp[:, :, i : i + oh * self.stride : self.stride,
                    j : j + ow * self.stride : self.stride] += g
        (ph0, ph1), (pw0, pw1) = pads
        return [dxp[:, :, ph0 : Hp - ph1, pw0 : Wp - pw1]], {}


class GlobalAvgPool(Layer):
    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        if len(shape) != 3:
            raise ConfigError(f"GlobalAvgPool expects (C, H, W), got {shape}")
        return (shape[0],)

    def forward(self, xs, params, training, state):
        (x,) = xs
        return x.mean(axis=(2, 3)), x.shape

    def backward(self, gy, cache, params):
        B, C, H, W = cache
        gx = np.broadcast_to(gy[:, :, None, None] / (H * W), (B, C, H, W)).copy()
        return [gx], {}


class BatchNorm(Layer):
    """Per-channel normalization; batch statistics while training, running
    statistics otherwise. Running stats use
    new = momentum * old + (1 - momentum) * batch."""

    def __init__(self, ch, eps=1e-5, momentum=0.9):
        self.ch = ch
        self.eps = eps
        self.momentum = momentum

    def param_shapes(self):
        return {"gamma": (self.ch,), "beta": (self.ch,)}

    def init_params(self, rng):
        return {"gamma": np.ones(self.ch), "beta": np.zeros(self.ch)}

    def init_state(self):
        return {"mean": np.zeros(self.ch), "var": np.ones(self.ch)}

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        if shape[0] != self.ch:
            raise ConfigError(f"BatchNorm({self.ch}) got channels {shape[0]}")
        return shape

    def _axes_and_view(self, x):
        if x.ndim == 4:
            return (0, 2, 3), (1, self.ch, 1, 1)
        if x.ndim == 2:
            return (0,), (1, self.ch)
        raise ConfigError("BatchNorm expects 2D or 4D input")

    def forward(self, xs, params, training, state):
        (x,) = xs
        axes, view = self._axes_and_view(x)
        gamma = params["gamma"].reshape(view)
        beta = params["beta"].reshape(view)
        if training:
            mu = x.mean(axis=axes)
            # E[x^2] - mu^2 instead of np.var: one fewer pass over x
            var = (x * x).mean(axis=axes) - mu * mu
            state["mean"] = self.momentum * state["mean"] + (1 - self.momentum) * mu
            state["var"] = self.momentum * state["var"] + (1 - self.momentum) * var
        else:
            mu, var = state["mean"], state["var"]
        inv_std = 1.0 / np.sqrt(var.reshape(view) + self.eps)
        xhat = (x - mu.reshape(view)) * inv_std
        y = gamma * xhat + beta
        return y, (xhat, inv_std, axes, view, training)

    def backward(self, gy, cache, params):
        xhat, inv_std, axes, view, training = cache
        gamma = params["gamma"].reshape(view)
        ggamma = (gy * xhat).sum(axis=axes)
        gbeta = gy.sum(axis=axes)
        if training:
            m = np.prod([gy.shape[a] for a in axes])
            gx = (gamma * inv_std) * (
                gy
                - gbeta.reshape(view) / m
                - xhat * ggamma.reshape(view) / m
            )
        else:
            gx = gy * gamma * inv_std
        return [gx], {"gamma": ggamma, "beta": gbeta}


class ReLU(Layer):
    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        return shape

    def forward(self, xs, params, training, state):
        (x,) = xs
        y = np.maximum(x, 0.0)
        return y, y

    def backward(self, gy, cache, params):
        return [gy * (cache > 0)], {}


class Softmax(Layer):
    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        if len(shape) != 1:
            raise ConfigError(f"Softmax expects a vector, got {shape}")
        return shape

    def forward(self, xs, params, training, state):
        (x,) = xs
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=1, keepdims=True)
        return y, y

    def backward(self, gy, cache, params):
        y = cache
        gx = y * (gy - (gy * y).sum(axis=1, keepdims=True))
        return [gx], {}


class Add(Layer):
    """Elementwise sum of any number of equal-shape inputs."""

    def out_shape(self, in_shapes):
        if len(set(in_shapes)) != 1:
            raise ConfigError(f"Add inputs must share a shape, got {in_shapes}")
        return in_shapes[0]

    def forward(self, xs, params, training, state):
        y = xs[0].copy()
        for x in xs[1:]:
            y += x
        return y, len(xs)

    def backward(self, gy, cache, params):
        return [gy] * cache, {}


class Concat(Layer):
    """Feature concatenation of vectors along axis 1."""

    def out_shape(self, in_shapes):
        if any(len(s) != 1 for s in in_shapes):
            raise ConfigError(f"Concat expects vectors, got {in_shapes}")
        return (sum(s[0] for s in in_shapes),)

    def forward(self, xs, params, training, state):
        dims = [x.shape[1] for x in xs]
        return np.concatenate(xs, axis=1), dims

    def backward(self, gy, cache, params):
        splits = np.cumsum(cache[:-1])
        return list(np.split(gy, splits, axis=1)), {}


class Zeroize(Layer):
    """Outputs zeros of the input shape; the cell's 'none' operation."""

    def out_shape(self, in_shapes):
        (shape,) = in_shapes
        return shape

    def forward(self, xs, params, training, state):
        (x,) = xs
        return np.zeros_like(x), x.shape

    def backward(self, gy, cache, params):
        return [np.zeros(cache)], {}
