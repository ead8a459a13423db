"""Neural-net layers on float64 numpy arrays.

Every layer caches what its backward pass needs during forward. Convolutions
are 3x3, stride 1, zero-padded to keep spatial size ("same"); pooling is 2x2
max with stride 2. Gradients accumulate into Param.grad so shared-weight
setups (two siamese towers) can run one stacked pass.
"""

from __future__ import annotations

import numpy as np


class Param:
    """A trainable array with its gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)


def he_uniform(rng: np.random.Generator, shape, fan_in: int,
               dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[Param]:
        return []

    def state(self) -> list[np.ndarray]:
        """Non-trainable arrays that checkpoints must still carry."""
        return []


class Conv3x3(Layer):
    """Same-padded 3x3 convolution, lowered to one matmul per direction.

    The window tensor is flattened into an (N*H*W, C*9) matrix so both the
    forward pass and the two backward contractions run as BLAS matmuls; a
    per-tap slice-add folds the input gradient back out of column space.
    """

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator,
                 dtype=np.float64):
        fan_in = in_ch * 9
        self.w = Param("conv.w", he_uniform(rng, (out_ch, in_ch, 3, 3), fan_in, dtype))
        self.b = Param("conv.b", np.zeros(out_ch, dtype=dtype))
        self._cols = None
        self._shape = None

    @staticmethod
    def _im2col(x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        win = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(2, 3))
        # (N, C, H, W, 3, 3) -> (N, H, W, C, 3, 3) -> (N*H*W, C*9)
        return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
            n * h * w, c * 9
        )

    def forward(self, x, train):
        # Cached in eval mode too: saliency maps backpropagate through an
        # eval-mode forward pass.
        n, c, h, w = x.shape
        cols = self._im2col(x)
        self._cols = cols
        self._shape = x.shape
        out_ch = self.w.value.shape[0]
        wmat = self.w.value.reshape(out_ch, c * 9)
        out = cols @ wmat.T
        out = out.reshape(n, h, w, out_ch).transpose(0, 3, 1, 2)
        return out + self.b.value[None, :, None, None]

    def backward(self, grad):
        n, c, h, w = self._shape
        out_ch = grad.shape[1]
        gmat = np.ascontiguousarray(grad.transpose(0, 2, 3, 1)).reshape(
            n * h * w, out_ch
        )
        self.w.grad += (gmat.T @ self._cols).reshape(self.w.value.shape)
        self.b.grad += grad.sum(axis=(0, 2, 3))
        # The input gradient is the same correlation with channel-transposed,
        # spatially flipped kernels, so it reuses the im2col matmul path.
        gcols = self._im2col(grad)
        wt = np.ascontiguousarray(
            self.w.value[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        ).reshape(c, out_ch * 9)
        dx = (gcols @ wt.T).reshape(n, h, w, c).transpose(0, 3, 1, 2)
        self._cols = None
        return np.ascontiguousarray(dx)

    def params(self):
        return [self.w, self.b]


class ReLU(Layer):
    def forward(self, x, train):
        self._mask = x > 0.0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class BatchNorm(Layer):
    """Per-channel normalization over (N, H, W) with affine parameters."""

    def __init__(self, channels: int, eps: float = 1e-8, momentum: float = 0.9,
                 dtype=np.float64):
        self.gamma = Param("bn.gamma", np.ones(channels, dtype=dtype))
        self.beta = Param("bn.beta", np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.eps = eps
        self.momentum = momentum

    def forward(self, x, train):
        if train:
            axes = (0, 2, 3)
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = (
                self.momentum * self.running_mean + (1 - self.momentum) * mean
            )
            self.running_var = (
                self.momentum * self.running_var + (1 - self.momentum) * var
            )
        else:
            mean, var = self.running_mean, self.running_var
        istd = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * istd[None, :, None, None]
        self._cache = (xhat, istd, train, x.shape)
        return self.gamma.value[None, :, None, None] * xhat + self.beta.value[
            None, :, None, None
        ]

    def backward(self, grad):
        xhat, istd, was_train, shape = self._cache
        axes = (0, 2, 3)
        self.gamma.grad += (grad * xhat).sum(axis=axes)
        self.beta.grad += grad.sum(axis=axes)
        g = self.gamma.value[None, :, None, None] * istd[None, :, None, None]
        if not was_train:
            return grad * g
        m = shape[0] * shape[2] * shape[3]
        sum_g = grad.sum(axis=axes, keepdims=True)
        sum_gx = (grad * xhat).sum(axis=axes, keepdims=True)
        return g * (grad - sum_g / m - xhat * sum_gx / m)

    def params(self):
        return [self.gamma, self.beta]

    def state(self):
        return [self.running_mean, self.running_var]


class MaxPool2(Layer):
    """2x2 max pooling, stride 2; gradient goes to the first maximum."""

    def forward(self, x, train):
        n, c, h, w = x.shape
        ho, wo = h // 2, w // 2
        x = x[:, :, : ho * 2, : wo * 2]
        windows = (
            x.reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
        )
        self._argmax = windows.argmax(axis=-1)
        self._in_shape = (n, c, h, w)
        return np.take_along_axis(windows, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, c, h, w = self._in_shape
        ho, wo = h // 2, w // 2
        flat = np.zeros((n, c, ho, wo, 4))
        np.put_along_axis(flat, self._argmax[..., None], grad[..., None], axis=-1)
        out = np.zeros((n, c, h, w))
        out[:, :, : ho * 2, : wo * 2] = (
            flat.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * 2, wo * 2)
        )
        return out


class Flatten(Layer):
    def forward(self, x, train):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 dtype=np.float64):
        self.w = Param("dense.w",
                       he_uniform(rng, (in_features, out_features), in_features, dtype))
        self.b = Param("dense.b", np.zeros(out_features, dtype=dtype))

    def forward(self, x, train):
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, grad):
        self.w.grad += self._x.T @ grad
        self.b.grad += grad.sum(axis=0)
        return grad @ self.w.value.T

    def params(self):
        return [self.w, self.b]


class Softmax(Layer):
    def forward(self, x, train):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        self._y = e / e.sum(axis=1, keepdims=True)
        return self._y

    def backward(self, grad):
        y = self._y
        return y * (grad - (grad * y).sum(axis=1, keepdims=True))


class GroupSoftmax(Layer):
    """Independent softmax over `groups` equal slices of the feature axis.

    Used by color heads, which predict one distribution per RGB channel from
    a single output layer.
    """

    def __init__(self, groups: int):
        self.groups = groups

    def forward(self, x, train):
        n, f = x.shape
        k = f // self.groups
        z = x.reshape(n, self.groups, k)
        z = z - z.max(axis=2, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=2, keepdims=True)
        self._y = y
        return y.reshape(n, f)

    def backward(self, grad):
        n, f = grad.shape
        k = f // self.groups
        g = grad.reshape(n, self.groups, k)
        y = self._y
        dx = y * (g - (g * y).sum(axis=2, keepdims=True))
        return dx.reshape(n, f)
