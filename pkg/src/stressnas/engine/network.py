"""DAG of layer nodes with reverse-mode differentiation.

Nodes are appended in topological order by construction (a node may only
consume already-declared nodes or named inputs). forward returns a
ForwardContext holding every node activation; backward seeds a gradient at
any node (by default the output) and accumulates exact gradients for all
parameters and all named inputs.

Networks whose terminal node is a probability head keep a separate
`logits_name` pointing at the pre-softmax node; training and scoring read
logits there while forward still yields the declared output.
"""

import copy
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericalError
from .layers import Layer, Softmax


@dataclass
class _Node:
    name: str
    layer: Layer
    inputs: list
    shape: tuple


@dataclass
class ForwardContext:
    values: dict
    caches: dict
    batch_inputs: dict
    training: bool
    output_name: str

    @property
    def output(self) -> np.ndarray:
        return self.values[self.output_name]

    def value(self, name: str) -> np.ndarray:
        return self.values[name]


class Network:
    def __init__(self, input_shapes: dict):
        self.input_shapes = {k: tuple(v) for k, v in input_shapes.items()}
        self.nodes: dict = {}
        self.order: list = []
        self.params: dict = {}
        self.state: dict = {}
        self.output_name: str | None = None
        self.logits_name: str | None = None

    # -- construction -----------------------------------------------------

    def add(self, name: str, layer: Layer, inputs) -> str:
        if isinstance(inputs, str):
            inputs = [inputs]
        if name in self.nodes or name in self.input_shapes:
            raise ConfigError(f"duplicate node name {name!r}")
        in_shapes = []
        for src in inputs:
            if src in self.nodes:
                in_shapes.append(self.nodes[src].shape)
            elif src in self.input_shapes:
                in_shapes.append(self.input_shapes[src])
            else:
                raise ConfigError(f"node {name!r} references unknown {src!r}")
        try:
            shape = layer.out_shape(in_shapes)
        except ConfigError as e:
            raise ConfigError(f"node {name!r}: {e}") from e
        self.nodes[name] = _Node(name, layer, list(inputs), tuple(shape))
        self.order.append(name)
        return name

    def set_output(self, name: str, logits: str | None = None) -> None:
        if name not in self.nodes:
            raise ConfigError(f"unknown output node {name!r}")
        self.output_name = name
        if logits is None:
            node = self.nodes[name]
            if isinstance(node.layer, Softmax):
                (logits,) = node.inputs
            else:
                logits = name
        self.logits_name = logits
        self.validate()

    def validate(self) -> None:
        """Every node and every input must lie on a path to the output."""
        if self.output_name is None:
            raise ConfigError("network has no output node")
        reach = set()
        stack = [self.output_name]
        while stack:
            cur = stack.pop()
            if cur in reach or cur in self.input_shapes:
                reach.add(cur)
                continue
            reach.add(cur)
            stack.extend(self.nodes[cur].inputs)
        missing_inputs = set(self.input_shapes) - reach
        if missing_inputs:
            raise ConfigError(f"inputs never reach the output: {sorted(missing_inputs)}")
        dangling = [n for n in self.order if n not in reach]
        if dangling:
            raise ConfigError(f"nodes detached from the output: {dangling}")

    @property
    def out_shape(self) -> tuple:
        return self.nodes[self.output_name].shape

    def shape_of(self, name: str) -> tuple:
        if name in self.input_shapes:
            return self.input_shapes[name]
        return self.nodes[name].shape

    # -- parameters ---------------------------------------------------------

    def init_params(self, seed: int) -> None:
        """He-style initialization, deterministic per seed (fixed node order)."""
        rng = np.random.default_rng(np.random.SeedSequence([seed]))
        self.params = {}
        self.state = {}
        for name in self.order:
            node = self.nodes[name]
            p = node.layer.init_params(rng)
            if p:
                self.params[name] = p
            s = node.layer.init_state()
            if s:
                self.state[name] = s

    def iter_params(self):
        for node in self.order:
            for pname in sorted(self.params.get(node, {})):
                yield f"{node}/{pname}", self.params[node][pname]

    def get_flat(self) -> dict:
        out = {name: arr.copy() for name, arr in self.iter_params()}
        for node in sorted(self.state):
            for sname in sorted(self.state[node]):
                out[f"state:{node}/{sname}"] = self.state[node][sname].copy()
        return out

    def set_flat(self, flat: dict) -> None:
        for key, arr in flat.items():
            if key.startswith("state:"):
                node, sname = key[len("state:"):].rsplit("/", 1)
                self.state[node][sname] = arr.copy()
            else:
                node, pname = key.rsplit("/", 1)
                if self.params[node][pname].shape != arr.shape:
                    raise ConfigError(f"shape mismatch loading {key}")
                self.params[node][pname] = arr.copy()

    def snapshot(self) -> dict:
        return self.get_flat()

    def n_params(self) -> int:
        return sum(
            int(np.prod(shape))
            for name in self.order
            for shape in self.nodes[name].layer.param_shapes().values()
        )

    # -- execution ----------------------------------------------------------

    def forward(self, inputs: dict, training: bool = False) -> ForwardContext:
        if set(inputs) != set(self.input_shapes):
            raise ConfigError(
                f"expected inputs {sorted(self.input_shapes)}, got {sorted(inputs)}"
            )
        batch = None
        values = {}
        for name, shape in self.input_shapes.items():
            x = np.asarray(inputs[name], dtype=np.float64)
            if x.shape[1:] != shape:
                raise ConfigError(
                    f"input {name!r}: expected per-sample shape {shape}, "
                    f"got {x.shape[1:]}"
                )
            if batch is None:
                batch = x.shape[0]
            elif x.shape[0] != batch:
                raise ConfigError("inconsistent batch sizes across inputs")
            values[name] = x
        caches = {}
        for name in self.order:
            node = self.nodes[name]
            xs = [values[src] for src in node.inputs]
            y, cache = node.layer.forward(
                xs, self.params.get(name, {}), training, self.state.get(name, {})
            )
            if not np.all(np.isfinite(y)):
                raise NumericalError(f"non-finite activation at node {name!r}")
            values[name] = y
            caches[name] = cache
        return ForwardContext(
            values=values,
            caches=caches,
            batch_inputs={k: values[k] for k in self.input_shapes},
            training=training,
            output_name=self.output_name,
        )

    def logits(self, ctx: ForwardContext) -> np.ndarray:
        return ctx.values[self.logits_name]

    def backward(
        self, ctx: ForwardContext, grad: np.ndarray, at: str | None = None
    ):
        """Gradients of sum(grad * node_at) w.r.t. parameters and inputs.

        Returns (param_grads, input_grads); param_grads mirrors the params
        dict layout, input_grads maps input name -> array.
        """
        if ctx is None:
            raise ConfigError("backward called without a forward context")
        at = at or self.output_name
        if at not in ctx.values:
            raise ConfigError(f"unknown backward seed node {at!r}")
        grads = {at: np.asarray(grad, dtype=np.float64)}
        pgrads = {
            node: {p: np.zeros_like(a) for p, a in d.items()}
            for node, d in self.params.items()
        }
        igrads = {
            name: np.zeros_like(ctx.values[name]) for name in self.input_shapes
        }
        seed_idx = self.order.index(at) if at in self.nodes else -1
        for name in reversed(self.order[: seed_idx + 1]):
            if name not in grads:
                continue
            node = self.nodes[name]
            gxs, gps = node.layer.backward(
                grads.pop(name), ctx.caches[name], self.params.get(name, {})
            )
            for pname, gp in gps.items():
                pgrads[name][pname] += gp
            for src, gx in zip(node.inputs, gxs):
                if src in self.input_shapes:
                    igrads[src] += gx
                elif src in grads:
                    grads[src] = grads[src] + gx
                else:
                    grads[src] = gx
        # seed placed directly on an input
        if at in self.input_shapes:
            igrads[at] += grads.pop(at)
        return pgrads, igrads

    def clone_structure(self) -> "Network":
        """Same graph, independent parameter/state storage."""
        net = Network(self.input_shapes)
        for name in self.order:
            node = self.nodes[name]
            net.add(name, node.layer, list(node.inputs))
        net.set_output(self.output_name, self.logits_name)
        net.params = copy.deepcopy(self.params)
        net.state = copy.deepcopy(self.state)
        return net
