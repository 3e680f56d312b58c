from __future__ import annotations

from dataclasses import dataclass, field

from ..imaging import INK_THRESHOLD, PreprocessMode


@dataclass(frozen=True)
class ConvLayer:
    out_channels: int
    kernel_size: int = 3
    stride: int = 1
    pool: bool = True


@dataclass(frozen=True)
class ModelConfig:
    """Network geometry plus the preprocessing it was trained with."""

    input_channels: int
    input_height: int
    input_width: int
    num_classes: int
    conv_layers: tuple[ConvLayer, ...] = (ConvLayer(8), ConvLayer(16), ConvLayer(16))
    fc_layers: tuple[int, ...] = (32,)
    seed: int = 0
    mode: PreprocessMode = PreprocessMode.GS_MASK
    mask_threshold: int = INK_THRESHOLD
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(self.conv_layers))
        object.__setattr__(self, "fc_layers", tuple(int(w) for w in self.fc_layers))
        object.__setattr__(self, "mode", PreprocessMode(self.mode))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.class_names and len(self.class_names) != self.num_classes:
            raise ValueError("class_names length must equal num_classes")
        if self.input_channels != self.mode.channels:
            raise ValueError(f"mode {self.mode.value} implies {self.mode.channels} input channels")
        self.feature_shapes()  # validates the dimension chain

    def feature_shapes(self) -> list[tuple[int, int, int]]:
        """(C, H, W) after the input and after every conv block."""
        c, h, w = self.input_channels, self.input_height, self.input_width
        shapes = [(c, h, w)]
        for i, layer in enumerate(self.conv_layers):
            k, s = layer.kernel_size, layer.stride
            if k < 1 or s < 1 or layer.out_channels < 1:
                raise ValueError(f"conv layer {i}: sizes must be positive")
            if h < k or w < k:
                raise ValueError(f"conv layer {i}: kernel {k} larger than input {h}x{w}")
            c, h, w = layer.out_channels, (h - k) // s + 1, (w - k) // s + 1
            if layer.pool:
                if h < 2 or w < 2:
                    raise ValueError(f"conv layer {i}: cannot pool a {h}x{w} map")
                h, w = h // 2, w // 2
            shapes.append((c, h, w))
        for width in self.fc_layers:
            if width < 1:
                raise ValueError("fully connected widths must be positive")
        return shapes

    def param_shapes(self) -> list[tuple[int, ...]]:
        """Weight/bias shapes in declaration order."""
        shapes: list[tuple[int, ...]] = []
        cin = self.input_channels
        for layer in self.conv_layers:
            shapes += [(layer.out_channels, cin, layer.kernel_size, layer.kernel_size), (layer.out_channels,)]
            cin = layer.out_channels
        c, h, w = self.feature_shapes()[-1]
        fan_in = c * h * w
        for width in (*self.fc_layers, self.num_classes):
            shapes += [(fan_in, width), (width,)]
            fan_in = width
        return shapes

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.input_channels, self.input_height, self.input_width)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    log_every: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or not self.learning_rate > 0:
            raise ValueError("batch_size and epochs must be >= 1 and learning_rate > 0")
