"""
Structure-preserving closure network

Provides:
- Graph: a reverse-mode tape over numpy arrays (just the ops this pipeline needs)
- MlpModel: fully connected network + "bound" or "distinct" eigenvalue head
- forward: moments -> z -> eigenvalues r -> Vieta coefficients c -> weights N
- loss_batch / backward / adam_step / train / grid_search
- save_model / load_model (JSON) and grad_check
"""

import copy
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .closure import c_to_weights_matrix
from .errors import DimensionError, FormatVersionError, ModelFormatError, UsageError

logger = logging.getLogger(__name__)

HEADS = ("bound", "distinct")
ACTIVATIONS = ("relu", "tanh")
MODEL_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Reverse-mode tape
# ---------------------------------------------------------------------------

class Node:
    """One recorded value on the tape"""
    __slots__ = ("value", "grad", "parents", "vjp", "name")

    def __init__(self, value: np.ndarray, parents: Tuple["Node", ...] = (),
                 vjp: Optional[Callable] = None, name: str = ""):
        self.value = value
        self.grad = None
        self.parents = parents
        self.vjp = vjp
        self.name = name

    @property
    def shape(self):
        return self.value.shape


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Graph:
    """Tape of nodes in creation order; backward sweeps it in reverse"""

    def __init__(self):
        self.nodes: List[Node] = []
        self.params: Dict[str, Node] = {}
        self.values: Dict[str, np.ndarray] = {}
        self.output: Optional[Node] = None

    def _record(self, value, parents=(), vjp=None, name="") -> Node:
        node = Node(np.asarray(value, dtype=float), parents, vjp, name)
        self.nodes.append(node)
        if name:
            self.values[name] = node.value
        return node

    def constant(self, value, name: str = "") -> Node:
        return self._record(value, name=name)

    def param(self, value, name: str) -> Node:
        node = self._record(value, name=name)
        self.params[name] = node
        return node

    def add(self, a: Node, b: Node, name: str = "") -> Node:
        return self._record(a.value + b.value, (a, b), lambda g: (
            _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), name)

    def sub(self, a: Node, b: Node, name: str = "") -> Node:
        return self._record(a.value - b.value, (a, b), lambda g: (
            _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)), name)

    def mul(self, a: Node, b: Node, name: str = "") -> Node:
        return self._record(a.value * b.value, (a, b), lambda g: (
            _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)), name)

    def matmul(self, a: Node, b: Node, name: str = "") -> Node:
        return self._record(a.value @ b.value, (a, b), lambda g: (
            g @ b.value.T, a.value.T @ g), name)

    def tanh(self, a: Node, name: str = "") -> Node:
        y = np.tanh(a.value)
        return self._record(y, (a,), lambda g: (g * (1.0 - y * y),), name)

    def relu(self, a: Node, name: str = "") -> Node:
        mask = a.value > 0
        return self._record(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,), name)

    def softplus(self, a: Node, name: str = "") -> Node:
        x = a.value
        sigmoid = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self._record(np.logaddexp(0.0, x), (a,), lambda g: (g * sigmoid,), name)

    def cumsum(self, a: Node, name: str = "") -> Node:
        return self._record(np.cumsum(a.value, axis=-1), (a,), lambda g: (
            np.cumsum(g[..., ::-1], axis=-1)[..., ::-1],), name)

    def enforce_gaps(self, a: Node, gamma: float, name: str = "") -> Node:
        """Raise each column to at least gamma above its left neighbour.

        Forward-only projection; the gradient passes straight through.
        """
        r = np.array(a.value, dtype=float)
        for i in range(1, r.shape[-1]):
            prev = r[..., i - 1]
            cur = np.maximum(r[..., i], prev + gamma)
            short = cur - prev < gamma
            while np.any(short):
                cur = np.where(short, np.nextafter(cur, np.inf), cur)
                short = cur - prev < gamma
            r[..., i] = cur
        return self._record(r, (a,), lambda g: (g,), name)

    def columns(self, a: Node, start: int, stop: int, name: str = "") -> Node:
        def vjp(g):
            full = np.zeros(a.shape)
            full[..., start:stop] = g
            return (full,)
        return self._record(a.value[..., start:stop], (a,), vjp, name)

    def concat(self, parts: Sequence[Node], name: str = "") -> Node:
        sizes = [p.shape[-1] for p in parts]
        bounds = np.cumsum([0] + sizes)

        def vjp(g):
            return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(parts)))
        return self._record(np.concatenate([p.value for p in parts], axis=-1),
                            tuple(parts), vjp, name)

    def row_sum(self, a: Node, name: str = "") -> Node:
        return self._record(a.value.sum(axis=-1), (a,), lambda g: (
            np.broadcast_to(g[..., None], a.shape),), name)

    def mean_square(self, a: Node, name: str = "") -> Node:
        n = a.value.size
        return self._record(np.mean(a.value ** 2), (a,), lambda g: (
            g * 2.0 * a.value / n,), name)

    def sum_square(self, a: Node, name: str = "") -> Node:
        return self._record(np.sum(a.value ** 2), (a,), lambda g: (g * 2.0 * a.value,), name)

    def scale(self, a: Node, factor: float, name: str = "") -> Node:
        return self._record(a.value * factor, (a,), lambda g: (g * factor,), name)

    def backward(self, output: Optional[Node] = None) -> Dict[str, np.ndarray]:
        """Gradients of a scalar output with respect to every parameter node"""
        output = output or self.output
        if output is None or output.value.size != 1:
            raise UsageError("backward needs a scalar output node")
        for node in self.nodes:
            node.grad = None
        output.grad = np.ones_like(output.value)
        for node in reversed(self.nodes):
            if node.grad is None or node.vjp is None:
                continue
            for parent, g in zip(node.parents, node.vjp(node.grad)):
                parent.grad = g if parent.grad is None else parent.grad + g
        return {name: (node.grad if node.grad is not None else np.zeros_like(node.value))
                for name, node in self.params.items()}


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass
class MlpModel:
    """Fully connected network with a structure-preserving eigenvalue head

    Attributes:
        order: closure order N (input and output width N+1)
        widths: layer widths, input first and output last
        activation: hidden activation, relu or tanh
        head: bound (r = tanh z) or distinct (cumulative softplus gaps)
            The bound head keeps |r| <= 1 but tanh rounds to exactly +-1 for
            |z| above about 19, so two saturated outputs coincide at the boundary.
            The distinct head guarantees r[i] - r[i-1] >= gamma in floating point.
        gamma: minimal eigenvalue gap of the distinct head
        layers: list of (W (in, out), b (out,))
        input_mean, input_std: standardization of the moment inputs
    """
    order: int
    widths: List[int]
    activation: str
    head: str
    gamma: float
    layers: List[Tuple[np.ndarray, np.ndarray]]
    input_mean: np.ndarray = None
    input_std: np.ndarray = None

    def __post_init__(self):
        if self.head not in HEADS:
            raise FormatVersionError(f"unknown head '{self.head}', expected one of {HEADS}")
        if self.activation not in ACTIVATIONS:
            raise FormatVersionError(f"unknown activation '{self.activation}'")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        n = self.order + 1
        if self.widths[0] != n or self.widths[-1] != n:
            raise DimensionError(f"widths {self.widths} must start and end with {n}")
        if len(self.layers) != len(self.widths) - 1:
            raise DimensionError("one (W, b) pair per consecutive width pair expected")
        for k, (W, b) in enumerate(self.layers):
            if W.shape != (self.widths[k], self.widths[k + 1]) or b.shape != (self.widths[k + 1],):
                raise DimensionError(f"layer {k} has shapes {W.shape}, {b.shape}")
        if self.input_mean is None:
            self.input_mean = np.zeros(n)
        if self.input_std is None:
            self.input_std = np.ones(n)

    @classmethod
    def initialize(cls, order: int, hidden: Sequence[int], activation: str = "relu",
                   head: str = "bound", gamma: float = 0.1, seed: int = 0) -> "MlpModel":
        """Fan-in scaled uniform initialization (He-style bound sqrt(6/fan_in))"""
        rng = np.random.default_rng(seed)
        widths = [order + 1] + list(hidden) + [order + 1]
        layers = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = math.sqrt(6.0 / fan_in)
            W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-1.0 / math.sqrt(fan_in), 1.0 / math.sqrt(fan_in), size=fan_out)
            layers.append((W, b))
        return cls(order, widths, activation, head, gamma, layers)

    def parameters(self) -> List[np.ndarray]:
        return [p for W, b in self.layers for p in (W, b)]

    def with_parameters(self, params: Sequence[np.ndarray]) -> "MlpModel":
        layers = [(params[2 * k], params[2 * k + 1]) for k in range(len(self.layers))]
        return MlpModel(self.order, list(self.widths), self.activation, self.head,
                        self.gamma, layers, self.input_mean.copy(), self.input_std.copy())

    def closure_weights(self, m) -> Tuple[np.ndarray, np.ndarray]:
        """(weights, eigenvalues r) for moments m of shape (..., N+1)"""
        m = np.asarray(m, dtype=float)
        flat = m.reshape(-1, self.order + 1)
        weights, graph = forward(self, flat)
        r = graph.values["r"]
        return weights.reshape(m.shape), r.reshape(m.shape)


def _param_name(k: int, kind: str) -> str:
    return f"{kind}{k}"


def _build(model: MlpModel, m: np.ndarray, graph: Graph) -> Node:
    """Record the full pipeline on ``graph``; returns the weights node"""
    N = model.order
    if m.ndim != 2 or m.shape[1] != N + 1:
        raise DimensionError(f"expected moments of shape (batch, {N + 1}), got {m.shape}")
    x = graph.constant((m - model.input_mean) / model.input_std, name="input")
    h = x
    last = len(model.layers) - 1
    for k, (W, b) in enumerate(model.layers):
        Wn = graph.param(W, _param_name(k, "W"))
        bn = graph.param(b, _param_name(k, "b"))
        h = graph.add(graph.matmul(h, Wn), bn)
        if k < last:
            h = graph.relu(h) if model.activation == "relu" else graph.tanh(h)
    z = h
    graph.values["z"] = z.value

    if model.head == "bound":
        # saturates to exactly +-1 once |z| exceeds about 19
        r = graph.tanh(z, name="r")
    else:
        first = graph.columns(z, 0, 1)
        gaps = graph.add(graph.softplus(graph.columns(z, 1, N + 1)),
                         graph.constant(np.full(N, model.gamma)))
        # cumsum rounding can land one ulp short of gamma
        r = graph.enforce_gaps(graph.cumsum(graph.concat([first, gaps])), model.gamma, name="r")

    # Vieta: multiply (x - r_i) one root at a time
    batch = m.shape[0]
    zero = graph.constant(np.zeros((batch, 1)))
    c = graph.constant(np.ones((batch, 1)))
    for i in range(N + 1):
        r_i = graph.columns(r, i, i + 1)
        c = graph.sub(graph.concat([zero, c]), graph.mul(graph.concat([c, zero]), r_i))
    graph.values["c"] = c.value

    weights = graph.matmul(c, graph.constant(c_to_weights_matrix(N)), name="weights")
    return weights


def forward(model: MlpModel, m) -> Tuple[np.ndarray, Graph]:
    """Moments (batch, N+1) -> closure weights (batch, N+1) plus the recorded graph"""
    graph = Graph()
    weights = _build(model, np.asarray(m, dtype=float), graph)
    graph.output = weights
    return weights.value, graph


# ---------------------------------------------------------------------------
# Data containers and loss
# ---------------------------------------------------------------------------

@dataclass
class TrainingSamples:
    """Rows of (moments, moment gradients, target gradient of m_{N+1})"""
    moments: np.ndarray
    gradients: np.ndarray
    target: np.ndarray
    scenario: Optional[np.ndarray] = None

    def __post_init__(self):
        self.moments = np.asarray(self.moments, dtype=float)
        self.gradients = np.asarray(self.gradients, dtype=float)
        self.target = np.asarray(self.target, dtype=float).reshape(-1)
        if self.moments.shape != self.gradients.shape or len(self.target) != len(self.moments):
            raise DimensionError("moments, gradients and target disagree in shape")

    def __len__(self) -> int:
        return len(self.target)

    @property
    def order(self) -> int:
        return self.moments.shape[1] - 1

    def subset(self, index) -> "TrainingSamples":
        return TrainingSamples(self.moments[index], self.gradients[index], self.target[index],
                               None if self.scenario is None else self.scenario[index])


def _loss_graph(model: MlpModel, samples: TrainingSamples, l2: float) -> Graph:
    if len(samples) == 0:
        raise UsageError("loss over an empty batch")
    graph = Graph()
    weights = _build(model, samples.moments, graph)
    pred = graph.row_sum(graph.mul(weights, graph.constant(samples.gradients)), name="prediction")
    residual = graph.sub(pred, graph.constant(samples.target))
    loss = graph.mean_square(residual, name="data_loss")
    if l2 > 0:
        penalty = None
        for node in graph.params.values():
            term = graph.sum_square(node)
            penalty = term if penalty is None else graph.add(penalty, term)
        loss = graph.add(loss, graph.scale(penalty, l2), name="loss")
    graph.output = loss
    return graph


def loss_batch(model: MlpModel, samples: TrainingSamples, l2: float = 0.0) -> Tuple[float, Graph]:
    """Mean squared residual of sum_i N_i dm_i against the true dm_{N+1}

    Args:
        model: network
        samples: nonempty batch
        l2: weight of the L2 penalty on all parameters (training only)

    Returns:
        (loss value, graph for backward)
    """
    graph = _loss_graph(model, samples, l2)
    return float(graph.output.value), graph


def backward(graph: Graph) -> List[np.ndarray]:
    """Parameter gradients in model.parameters() order"""
    grads = graph.backward()
    n_layers = sum(1 for name in grads if name.startswith("W"))
    out = []
    for k in range(n_layers):
        out.append(grads[_param_name(k, "W")])
        out.append(grads[_param_name(k, "b")])
    return out


def predict_target(model: MlpModel, samples: TrainingSamples, chunk: int = 8192) -> np.ndarray:
    """Predicted dm_{N+1} for every row"""
    preds = []
    for start in range(0, len(samples), chunk):
        rows = slice(start, start + chunk)
        weights, _ = forward(model, samples.moments[rows])
        preds.append(np.sum(weights * samples.gradients[rows], axis=1))
    return np.concatenate(preds) if preds else np.zeros(0)


def e2_error(model: MlpModel, samples: TrainingSamples) -> float:
    """Relative L2 error of the predicted highest-moment gradient (no penalty)"""
    pred = predict_target(model, samples)
    denom = np.sum(samples.target ** 2)
    if denom == 0:
        return float(np.sqrt(np.sum(pred ** 2)))
    return float(np.sqrt(np.sum((samples.target - pred) ** 2) / denom))


# ---------------------------------------------------------------------------
# Optimizer and training
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment estimates and step count"""
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameters and state"""
    if len(params) != len(grads):
        raise DimensionError("parameter and gradient lists differ in length")
    step = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** step)
        v_hat = v / (1 - beta2 ** step)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, step)


@dataclass
class TrainConfig:
    """Training protocol: Adam, step decay, L2 penalty, minibatches"""
    epochs: int = 1000
    learning_rate: float = 1e-3
    decay_factor: float = 0.5
    decay_every: int = 100
    l2: float = 1e-7
    batch_size: int = 1024
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        if min(self.epochs, self.learning_rate, self.decay_factor, self.decay_every,
               self.batch_size) <= 0 or self.l2 < 0:
            raise UsageError(f"training configuration values must be positive: {self}")

    def lr_at(self, epoch: int) -> float:
        """Learning rate during 0-based epoch"""
        return self.learning_rate * self.decay_factor ** (epoch // self.decay_every)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    train_E2: float
    val_E2: float


@dataclass
class TrainResult:
    model: MlpModel
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def write_history(self, path: Path) -> Path:
        """CSV: epoch, lr, train_loss, train_E2, val_E2"""
        path = Path(path)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["epoch", "lr", "train_loss", "train_E2", "val_E2"])
            for rec in self.history:
                writer.writerow([rec.epoch, f"{rec.lr:.17g}", f"{rec.train_loss:.17g}",
                                 f"{rec.train_E2:.17g}", f"{rec.val_E2:.17g}"])
        return path


def standardize_inputs(model: MlpModel, samples: TrainingSamples) -> MlpModel:
    """Store the mean/std of the training moments in the model"""
    model = copy.deepcopy(model)
    model.input_mean = samples.moments.mean(axis=0)
    std = samples.moments.std(axis=0)
    model.input_std = np.where(std > 1e-12, std, 1.0)
    return model


def train(train_set: TrainingSamples, config: TrainConfig, model: MlpModel,
          validation: Optional[TrainingSamples] = None) -> TrainResult:
    """Minibatch Adam training with the step-decay schedule

    History holds epoch 0 (before any update) and every finished epoch. The
    returned model is the one with the best validation E2 (training E2 when
    no validation set is given).
    """
    if len(train_set) == 0:
        raise UsageError("training set is empty")
    if train_set.order != model.order:
        raise DimensionError(f"data order {train_set.order} differs from model order {model.order}")
    rng = np.random.default_rng(config.seed)
    params = [p.copy() for p in model.parameters()]
    state = AdamState.zeros_like(params)

    def evaluate(current: MlpModel, epoch: int, lr: float) -> EpochRecord:
        loss, _ = loss_batch(current, train_set.subset(slice(0, min(len(train_set), 8192))))
        train_e2 = e2_error(current, train_set)
        val_e2 = e2_error(current, validation) if validation is not None and len(validation) else math.nan
        return EpochRecord(epoch, lr, loss, train_e2, val_e2)

    has_validation = validation is not None and len(validation) > 0
    history = [evaluate(model, 0, config.lr_at(0))]
    best_score = history[0].val_E2 if has_validation else history[0].train_E2
    best_params, best_epoch = params, 0

    for epoch in range(config.epochs):
        lr = config.lr_at(epoch)
        order = rng.permutation(len(train_set))
        for start in range(0, len(order), config.batch_size):
            batch = train_set.subset(order[start:start + config.batch_size])
            _, graph = loss_batch(model.with_parameters(params), batch, l2=config.l2)
            params, state = adam_step(params, backward(graph), state, lr)
        current = model.with_parameters(params)
        record = evaluate(current, epoch + 1, lr)
        history.append(record)
        score = record.val_E2 if has_validation else record.train_E2
        if np.isfinite(score) and score < best_score:
            best_score, best_params, best_epoch = score, params, epoch + 1
        if (epoch + 1) % config.log_every == 0 or epoch + 1 == config.epochs:
            logger.info(f"epoch {epoch + 1}/{config.epochs}: lr={lr:.2e} "
                        f"loss={record.train_loss:.4e} E2={record.train_E2:.4e} "
                        f"val_E2={record.val_E2:.4e}")

    return TrainResult(model.with_parameters(best_params), history, best_epoch)


@dataclass
class GridCell:
    layers: int
    width: int
    activation: str
    train_E2: float = math.nan
    val_E2: float = math.nan


def grid_search(train_set: TrainingSamples, validation: Optional[TrainingSamples],
                config: TrainConfig, layers: Sequence[int] = range(2, 11),
                widths: Sequence[int] = (16, 32, 64, 128, 256),
                activations: Sequence[str] = ACTIVATIONS, head: str = "bound",
                gamma: float = 0.1) -> List[GridCell]:
    """Train one model per (hidden layers, width, activation) cell"""
    cells = []
    for activation in activations:
        for depth in layers:
            for width in widths:
                model = MlpModel.initialize(train_set.order, [width] * depth, activation,
                                            head, gamma, seed=config.seed)
                model = standardize_inputs(model, train_set)
                result = train(train_set, config, model, validation)
                final = result.history[-1]
                cells.append(GridCell(depth, width, activation, final.train_E2, final.val_E2))
                logger.info(f"grid cell layers={depth} width={width} {activation}: "
                            f"E2={final.train_E2:.3e}")
    return cells


def write_grid(cells: Sequence[GridCell], path: Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["layers", "width", "activation", "train_E2", "val_E2"])
        for cell in cells:
            writer.writerow([cell.layers, cell.width, cell.activation,
                             f"{cell.train_E2:.17g}", f"{cell.val_E2:.17g}"])
    return path


def grid_cell_from_history(history_path, layers: int, width: int, activation: str) -> GridCell:
    """Final-epoch errors of a cell trained elsewhere, read from its history CSV"""
    with open(history_path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise UsageError(f"training history {history_path} is empty")
    last = rows[-1]
    return GridCell(layers, width, activation, float(last["train_E2"]), float(last["val_E2"]))


# ---------------------------------------------------------------------------
# Persistence and checks
# ---------------------------------------------------------------------------

def model_to_dict(model: MlpModel) -> Dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "order": model.order,
        "widths": list(model.widths),
        "activation": model.activation,
        "head": model.head,
        "gamma": model.gamma,
        "input_mean": model.input_mean.tolist(),
        "input_std": model.input_std.tolist(),
        "layers": [{"w": W.tolist(), "b": b.tolist()} for W, b in model.layers],
    }


def save_model(model: MlpModel, path) -> Path:
    """Write the model as JSON (floats in shortest round-trip form)"""
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), indent=1))
    logger.info(f"model written: {path}")
    return path


def model_from_dict(data: Dict) -> MlpModel:
    for key in ("order", "widths", "activation", "head", "gamma", "layers"):
        if key not in data:
            raise ModelFormatError(f"missing key '{key}'", location=f"$.{key}")
    if data.get("version", MODEL_FORMAT_VERSION) != MODEL_FORMAT_VERSION:
        raise FormatVersionError(f"unsupported model format version {data['version']}")
    if data["head"] not in HEADS:
        raise FormatVersionError(f"unknown head '{data['head']}'")
    layers = []
    for k, layer in enumerate(data["layers"]):
        try:
            layers.append((np.array(layer["w"], dtype=float), np.array(layer["b"], dtype=float)))
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"bad layer entry: {e}", location=f"$.layers[{k}]")
    mean = data.get("input_mean")
    std = data.get("input_std")
    return MlpModel(int(data["order"]), [int(w) for w in data["widths"]], data["activation"],
                    data["head"], float(data["gamma"]), layers,
                    None if mean is None else np.array(mean, dtype=float),
                    None if std is None else np.array(std, dtype=float))


def load_model(path) -> MlpModel:
    """Read a model written by save_model

    Raises:
        ModelFormatError: malformed JSON or missing fields (with location)
        FormatVersionError: unknown head tag or version
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"cannot parse {path}: {e.msg}",
                               location=f"line {e.lineno} column {e.colno}")
    except OSError as e:
        raise ModelFormatError(f"cannot read {path}: {e.strerror}", location=str(path))
    if not isinstance(data, dict):
        raise ModelFormatError("top level must be an object", location="$")
    return model_from_dict(data)


def grad_check(model: MlpModel, samples: TrainingSamples, step: float = 1e-6,
               n_params: int = 20, seed: int = 0) -> float:
    """Max relative difference between central differences and autodiff

    |fd - ad| / (|fd| + |ad| + 1e-12) over randomly sampled parameters.
    """
    if step <= 0:
        raise UsageError("finite-difference step must be positive")
    params = [p.copy() for p in model.parameters()]
    _, graph = loss_batch(model, samples)
    grads = backward(graph)
    sizes = [p.size for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_params, total), replace=False)
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = np.unravel_index(flat - offsets[k], params[k].shape)
        original = params[k][idx]
        params[k][idx] = original + step
        up, _ = loss_batch(model.with_parameters(params), samples)
        params[k][idx] = original - step
        down, _ = loss_batch(model.with_parameters(params), samples)
        params[k][idx] = original
        fd = (up - down) / (2 * step)
        ad = grads[k][idx]
        worst = max(worst, abs(fd - ad) / (abs(fd) + abs(ad) + 1e-12))
    return worst
