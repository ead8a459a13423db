"""Architecture descriptions and runnable models.

An ArchitectureSpec is a declarative layer list that can be shape-checked,
serialized into checkpoints, and built into a NeuralModel. SiameseModel pairs
one shared encoder with a small classifier over the combined embedding
[h_x; h_r; h_x + h_r; h_x - h_r; h_x * h_r].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import (
    BatchNorm,
    Conv3x3,
    Dense,
    Flatten,
    GroupSoftmax,
    Layer,
    MaxPool2,
    Param,
    ReLU,
    Softmax,
)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Input shape plus an ordered list of layer descriptors.

    Descriptors: ("conv", out_ch), ("relu",), ("batchnorm",), ("maxpool",),
    ("flatten",), ("dense", n), ("softmax",), ("group_softmax", groups).
    input_shape is (C, H, W) or (F,) for dense-only stacks.
    """

    input_shape: tuple
    layers: tuple

    def chain_shapes(self) -> list[tuple]:
        """Shapes after each layer; raises if the stack is inconsistent."""
        shape = tuple(self.input_shape)
        shapes = [shape]
        for desc in self.layers:
            kind = desc[0]
            if kind == "conv":
                if len(shape) != 3:
                    raise ValueError(f"conv needs (C,H,W) input, got {shape}")
                shape = (desc[1], shape[1], shape[2])
            elif kind == "maxpool":
                if len(shape) != 3:
                    raise ValueError(f"maxpool needs (C,H,W) input, got {shape}")
                if shape[1] < 2 or shape[2] < 2:
                    raise ValueError(f"maxpool on degenerate spatial dims {shape}")
                shape = (shape[0], shape[1] // 2, shape[2] // 2)
            elif kind in ("relu", "batchnorm", "softmax"):
                if kind == "batchnorm" and len(shape) != 3:
                    raise ValueError("batchnorm expects (C,H,W) input")
                if kind == "softmax" and len(shape) != 1:
                    raise ValueError("softmax expects flat input")
            elif kind == "group_softmax":
                if len(shape) != 1 or shape[0] % desc[1] != 0:
                    raise ValueError(f"group_softmax({desc[1]}) on shape {shape}")
            elif kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif kind == "dense":
                if len(shape) != 1:
                    raise ValueError(f"dense needs flat input, got {shape}")
                shape = (desc[1],)
            else:
                raise ValueError(f"unknown layer kind {kind!r}")
            shapes.append(shape)
        return shapes

    @property
    def output_shape(self) -> tuple:
        return self.chain_shapes()[-1]

    def to_obj(self):
        return {"input_shape": list(self.input_shape), "layers": [list(d) for d in self.layers]}

    @classmethod
    def from_obj(cls, obj) -> "ArchitectureSpec":
        return cls(
            input_shape=tuple(obj["input_shape"]),
            layers=tuple(tuple(d) for d in obj["layers"]),
        )


def _build_layers(spec: ArchitectureSpec, rng: np.random.Generator,
                  dtype=np.float64) -> list[Layer]:
    shapes = spec.chain_shapes()
    out: list[Layer] = []
    for desc, in_shape in zip(spec.layers, shapes[:-1]):
        kind = desc[0]
        if kind == "conv":
            out.append(Conv3x3(in_shape[0], desc[1], rng, dtype=dtype))
        elif kind == "relu":
            out.append(ReLU())
        elif kind == "batchnorm":
            out.append(BatchNorm(in_shape[0], dtype=dtype))
        elif kind == "maxpool":
            out.append(MaxPool2())
        elif kind == "flatten":
            out.append(Flatten())
        elif kind == "dense":
            out.append(Dense(in_shape[0], desc[1], rng, dtype=dtype))
        elif kind == "softmax":
            out.append(Softmax())
        elif kind == "group_softmax":
            out.append(GroupSoftmax(desc[1]))
    return out


def model_dtype(model) -> np.dtype:
    """The floating dtype the model's parameters (and thus inputs) use.

    Stand-in models without parameters (test stubs, oracles) fall back to
    float64 so duck-typed callers never need a params() method.
    """
    params = getattr(model, "params", None)
    if params is None:
        return np.dtype(np.float64)
    arrays = params()
    return arrays[0].value.dtype if arrays else np.dtype(np.float64)


class NeuralModel:
    """A runnable layer stack built from an ArchitectureSpec.

    dtype picks the parameter (and activation) precision; float32 roughly
    halves CPU training time and is the deployment default in the profiles,
    while float64 remains the constructor default for numeric tests.
    """

    def __init__(self, spec: ArchitectureSpec, rng: np.random.Generator,
                 dtype=np.float64):
        self.spec = spec
        self.layers = _build_layers(spec, rng, dtype=dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> list[Param]:
        return [p for layer in self.layers for p in layer.params()]

    def state_arrays(self) -> list[np.ndarray]:
        """Parameter values and auxiliary state in a stable checkpoint order."""
        out = []
        for layer in self.layers:
            out.extend(p.value for p in layer.params())
            out.extend(layer.state())
        return out

    def zero_grads(self) -> None:
        for p in self.params():
            p.grad[...] = 0.0


class SiameseModel:
    """Shared-weight encoder pair with a combiner and classifier head.

    The two towers are literally one encoder run on a stacked batch, so the
    weights cannot drift apart and gradient accumulation over both towers is
    a single backward pass.
    """

    def __init__(
        self,
        encoder_spec: ArchitectureSpec,
        classifier_spec: ArchitectureSpec,
        rng: np.random.Generator,
        dtype=np.float64,
    ):
        emb = encoder_spec.output_shape[0]
        if classifier_spec.input_shape != (5 * emb,):
            raise ValueError(
                f"classifier input {classifier_spec.input_shape} does not match "
                f"5x embedding ({5 * emb},)"
            )
        self.encoder = NeuralModel(encoder_spec, rng, dtype=dtype)
        self.classifier = NeuralModel(classifier_spec, rng, dtype=dtype)

    @staticmethod
    def combine(ha: np.ndarray, hr: np.ndarray) -> np.ndarray:
        return np.concatenate([ha, hr, ha + hr, ha - hr, ha * hr], axis=1)

    def embed(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        return self.encoder.forward(x, train)

    def forward_from_embeddings(
        self, ha: np.ndarray, hr: np.ndarray, train: bool = False
    ) -> np.ndarray:
        return self.classifier.forward(self.combine(ha, hr), train)

    def forward(self, xa: np.ndarray, xb: np.ndarray, train: bool = False) -> np.ndarray:
        if xa.shape != xb.shape:
            raise ValueError(f"image pair shapes differ: {xa.shape} vs {xb.shape}")
        n = xa.shape[0]
        z = self.encoder.forward(np.concatenate([xa, xb], axis=0), train)
        self._ha, self._hr = z[:n], z[n:]
        return self.classifier.forward(self.combine(self._ha, self._hr), train)

    def backward(self, grad: np.ndarray) -> None:
        dh = self.classifier.backward(grad)
        ha, hr = self._ha, self._hr
        e = ha.shape[1]
        d1, d2, d3, d4, d5 = (dh[:, i * e : (i + 1) * e] for i in range(5))
        dha = d1 + d3 + d4 + d5 * hr
        dhr = d2 + d3 - d4 + d5 * ha
        self.encoder.backward(np.concatenate([dha, dhr], axis=0))

    def params(self) -> list[Param]:
        return self.encoder.params() + self.classifier.params()

    def state_arrays(self) -> list[np.ndarray]:
        return self.encoder.state_arrays() + self.classifier.state_arrays()

    def zero_grads(self) -> None:
        for p in self.params():
            p.grad[...] = 0.0


def conv_blocks(channels, pools) -> tuple:
    """The repeated conv / relu / batchnorm / maxpool trunk."""
    layers = []
    for ch, pool in zip(channels, pools):
        layers += [("conv", ch), ("relu",), ("batchnorm",)]
        if pool:
            layers.append(("maxpool",))
    return tuple(layers)


def predictor_spec(
    input_shape, channels, pools, head, hidden: int = 256
) -> ArchitectureSpec:
    """Prediction network: conv trunk, hidden dense, then a task head.

    head is ("classification", k), ("regression", n), or ("grouped", groups, k).
    """
    layers = list(conv_blocks(channels, pools))
    layers += [("flatten",), ("dense", hidden), ("relu",)]
    if head[0] == "classification":
        layers += [("dense", head[1]), ("softmax",)]
    elif head[0] == "regression":
        layers += [("dense", head[1])]
    elif head[0] == "grouped":
        _, groups, k = head
        layers += [("dense", groups * k), ("group_softmax", groups)]
    else:
        raise ValueError(f"unknown head {head!r}")
    return ArchitectureSpec(tuple(input_shape), tuple(layers))


def encoder_spec(input_shape, channels, pools, embedding: int = 256) -> ArchitectureSpec:
    """Siamese tower: the prediction trunk with an embedding layer on top."""
    layers = list(conv_blocks(channels, pools))
    layers += [("flatten",), ("dense", embedding), ("relu",)]
    return ArchitectureSpec(tuple(input_shape), tuple(layers))


def classifier_spec(embedding: int, head, hidden: int = 256) -> ArchitectureSpec:
    layers = [("dense", hidden), ("relu",)]
    if head[0] == "classification":
        layers += [("dense", head[1]), ("softmax",)]
    elif head[0] == "grouped":
        _, groups, k = head
        layers += [("dense", groups * k), ("group_softmax", groups)]
    else:
        raise ValueError(f"unknown head {head!r}")
    return ArchitectureSpec((5 * embedding,), tuple(layers))


def transfer_encoder_weights(siamese: SiameseModel, prediction: NeuralModel) -> int:
    """Copy matching leading-layer weights from a prediction net into the encoder.

    Layers are matched by position; copying stops at the first shape mismatch
    (normally the prediction head). Returns how many arrays were copied.
    """
    copied = 0
    for enc_layer, pred_layer in zip(siamese.encoder.layers, prediction.layers):
        if type(enc_layer) is not type(pred_layer):
            break
        pairs = list(zip(enc_layer.params(), pred_layer.params())) + list(
            zip(enc_layer.state(), pred_layer.state())
        )
        ok = all(
            (a.value.shape == b.value.shape)
            if isinstance(a, Param)
            else (a.shape == b.shape)
            for a, b in pairs
        )
        if not ok:
            break
        for a, b in pairs:
            if isinstance(a, Param):
                a.value[...] = b.value
            else:
                a[...] = b
        copied += len(pairs)
    return copied
