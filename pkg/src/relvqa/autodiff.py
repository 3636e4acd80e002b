"""Dense float64 tensors with reverse-mode automatic differentiation.

Values are plain C-contiguous ``numpy.float64`` arrays (shape + flat row-major
buffer). ``Node`` wraps a value together with its parents and one local
gradient rule per parent; ``backward`` walks the graph once in reverse
topological order and accumulates gradients into ``Node.grad``.

Only two broadcasting forms are supported by the elementwise ops: scalar
against tensor, and exactly equal shapes. Anything richer is provided as a
dedicated fused op with a hand-derived backward rule, which keeps every rule
auditable and finite-difference checkable.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

Array = np.ndarray


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class ValidationError(ValueError):
    """Input data violates a documented precondition."""


class ConfigError(ValueError):
    """A configuration value violates a documented constraint."""


def as_array(value) -> Array:
    out = np.asarray(value, dtype=np.float64)
    return np.ascontiguousarray(out)


# ---------------------------------------------------------------------------
# Graph nodes
# ---------------------------------------------------------------------------

# Evaluation modes used by gradcheck. In value-only mode nodes carry no
# parents, so finite-difference sweeps skip all closure bookkeeping. The kink
# trace records the sign pattern of every non-smooth op so that gradcheck can
# exclude coordinates whose +/-h evaluations land on different linear pieces.
_VALUE_ONLY = False
_KINK_TRACE: list | None = None
_BACKWARD_PASS = 0


class Node:
    """One vertex of the computation graph."""

    __slots__ = ("value", "parents", "requires_grad", "grad", "name")
    _counter = 0

    def __init__(self, value: Array, parents=(), requires_grad=False, name=None):
        self.value = value
        self.parents = () if _VALUE_ONLY else tuple(parents)
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in self.parents)
        self.grad: Array | None = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        nm = f" {self.name!r}" if self.name else ""
        return f"Node{nm}(shape={self.value.shape}, requires_grad={self.requires_grad})"


def constant(value, name=None) -> Node:
    return Node(as_array(value), name=name)


def parameter(value, name=None) -> Node:
    return Node(as_array(value), requires_grad=True, name=name)


def _make_node(value: Array, parents: Sequence[tuple[Node, Callable]], name=None) -> Node:
    if _VALUE_ONLY or not any(p.requires_grad for p, _ in parents):
        return Node(value, (), name=name)
    return Node(value, tuple(parents), name=name)


def _shared_rules(parents: Sequence[Node], fn: Callable[[Array], Sequence[Array]]):
    """Per-parent rules backed by one shared computation of all parent grads.

    ``fn`` receives the incoming gradient and returns one gradient per parent.
    The result is memoized per backward pass so sibling rules do not recompute.
    """
    cache: dict = {}

    def rule_for(i):
        def rule(g: Array) -> Array:
            key = (_BACKWARD_PASS, id(g))
            if cache.get("key") != key:
                cache["key"] = key
                cache["grads"] = fn(g)
            return cache["grads"][i]

        return rule

    return [(p, rule_for(i)) for i, p in enumerate(parents)]


def fused(value: Array, parents: Sequence[Node], backward_fn, name=None) -> Node:
    """Build a node whose backward computes all parent grads in one call."""
    if _VALUE_ONLY or not any(p.requires_grad for p in parents):
        return Node(value, (), name=name)
    return Node(value, tuple(_shared_rules(parents, backward_fn)), name=name)


def _record_kinks(pattern: Array) -> None:
    if _KINK_TRACE is not None:
        _KINK_TRACE.append(pattern.copy())


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------


def _topo_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Node, params: "ParamStore | None" = None) -> dict[str, Array] | None:
    """Accumulate d(loss)/d(node) into ``grad`` for every reachable node.

    Gradients add onto whatever is already stored, so calling twice without
    zeroing doubles them. When ``params`` is given, returns a name -> gradient
    map for exactly the registered parameters.
    """
    global _BACKWARD_PASS
    if loss.value.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    _BACKWARD_PASS += 1
    loss.grad = np.ones_like(loss.value) if loss.grad is None else loss.grad + np.ones_like(loss.value)
    order = _topo_order(loss)
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        for parent, rule in node.parents:
            contrib = rule(g)
            if parent.grad is None:
                parent.grad = contrib.copy() if contrib.base is not None or contrib is g else contrib
            else:
                parent.grad = parent.grad + contrib
        if node.parents:
            node.grad = None  # interior grads are not kept; leaves accumulate
    if params is not None:
        return {name: p.grad if p.grad is not None else np.zeros_like(p.value) for name, p in params.items()}
    return None


# ---------------------------------------------------------------------------
# Parameter registry
# ---------------------------------------------------------------------------


class ParamStore:
    """Flat registry of named leaf parameters ("enc.head0.U" style paths)."""

    def __init__(self):
        self._params: dict[str, Node] = {}

    def add(self, name: str, value) -> Node:
        if name in self._params:
            raise ValidationError(f"parameter {name!r} already registered")
        node = parameter(value, name=name)
        self._params[name] = node
        return node

    def __getitem__(self, name: str) -> Node:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def gradients(self) -> dict[str, Array]:
        return {n: (p.grad if p.grad is not None else np.zeros_like(p.value)) for n, p in self._params.items()}

    def n_coordinates(self) -> int:
        return sum(p.value.size for p in self._params.values())


def glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in=None, fan_out=None) -> Array:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    if fan_in is None or fan_out is None:
        if len(shape) == 1:
            fan_in, fan_out = shape[0], 1
        else:
            fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


# ---------------------------------------------------------------------------
# Checkpoint format: {name: {"shape": [...], "data": [...]}} with 17
# significant digits per float so values round-trip bit-exactly.
# ---------------------------------------------------------------------------


def save_checkpoint(params: ParamStore, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("{")
        for i, (name, node) in enumerate(params.items()):
            if i:
                fh.write(", ")
            shape = json.dumps(list(node.value.shape))
            data = ", ".join(f"{v:.17g}" for v in node.value.ravel())
            fh.write(f'{json.dumps(name)}: {{"shape": {shape}, "data": [{data}]}}')
        fh.write("}\n")


def load_checkpoint(params: ParamStore, path: str) -> None:
    with open(path) as fh:
        raw = json.load(fh)
    missing = set(params.names()) - set(raw)
    extra = set(raw) - set(params.names())
    if missing or extra:
        raise ValidationError(f"checkpoint does not match registry (missing={sorted(missing)}, extra={sorted(extra)})")
    for name, entry in raw.items():
        node = params[name]
        shape = tuple(entry["shape"])
        if shape != node.value.shape:
            raise ValidationError(f"checkpoint shape {shape} for {name!r} != registered {node.value.shape}")
        node.value = np.asarray(entry["data"], dtype=np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# Elementwise / structural ops
# ---------------------------------------------------------------------------


def _binary_shapes(a: Node, b: Node, op: str):
    if a.value.shape == b.value.shape:
        return "equal"
    if a.value.size == 1 or b.value.size == 1:
        return "scalar"
    raise DimensionError(f"{op}: shapes {a.value.shape} and {b.value.shape} are not scalar- or equal-broadcastable")


def _reduce_to(shape_owner: Array, g: Array) -> Array:
    if shape_owner.size == 1:
        return np.asarray(g.sum()).reshape(shape_owner.shape)
    return g


def add(a: Node, b: Node) -> Node:
    _binary_shapes(a, b, "add")
    value = a.value + b.value
    return _make_node(value, [(a, lambda g: _reduce_to(a.value, g)), (b, lambda g: _reduce_to(b.value, g))])


def sub(a: Node, b: Node) -> Node:
    _binary_shapes(a, b, "sub")
    value = a.value - b.value
    return _make_node(value, [(a, lambda g: _reduce_to(a.value, g)), (b, lambda g: _reduce_to(b.value, -g))])


def mul(a: Node, b: Node) -> Node:
    _binary_shapes(a, b, "mul")
    value = a.value * b.value
    return _make_node(
        value,
        [(a, lambda g: _reduce_to(a.value, g * b.value)), (b, lambda g: _reduce_to(b.value, g * a.value))],
    )


def div(a: Node, b: Node) -> Node:
    _binary_shapes(a, b, "div")
    value = a.value / b.value
    return _make_node(
        value,
        [
            (a, lambda g: _reduce_to(a.value, g / b.value)),
            (b, lambda g: _reduce_to(b.value, -g * a.value / (b.value * b.value))),
        ],
    )


def neg(a: Node) -> Node:
    return _make_node(-a.value, [(a, lambda g: -g)])


def scale(a: Node, s: float) -> Node:
    return _make_node(a.value * s, [(a, lambda g: g * s)])


def relu(a: Node) -> Node:
    """max(0, x); subgradient 0 at the kink."""
    pos = a.value > 0
    _record_kinks(pos)
    return _make_node(np.where(pos, a.value, 0.0), [(a, lambda g: g * pos)])


max0 = relu


def sigmoid(a: Node) -> Node:
    out = _sigmoid_value(a.value)
    return _make_node(out, [(a, lambda g: g * out * (1.0 - out))])


def tanh(a: Node) -> Node:
    out = np.tanh(a.value)
    return _make_node(out, [(a, lambda g: g * (1.0 - out * out))])


def exp(a: Node) -> Node:
    out = np.exp(a.value)
    return _make_node(out, [(a, lambda g: g * out)])


def log(a: Node) -> Node:
    if np.any(a.value <= 0):
        raise ValidationError("log requires strictly positive inputs")
    return _make_node(np.log(a.value), [(a, lambda g: g / a.value)])


def softplus(a: Node) -> Node:
    x = a.value
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _make_node(out, [(a, lambda g: g * _sigmoid_value(x))])


def _sigmoid_value(x: Array) -> Array:
    # exp(-log(1 + exp(-x))), stable on both tails
    return np.exp(-np.logaddexp(0.0, -x))


def matmul(a: Node, b: Node) -> Node:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.value.shape} and {b.value.shape}")
    value = a.value @ b.value
    return _make_node(value, [(a, lambda g: g @ b.value.T), (b, lambda g: a.value.T @ g)])


def matmul_t(a: Node, b: Node) -> Node:
    """a @ b.T without materializing the transpose."""
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[1]:
        raise DimensionError(f"matmul_t: incompatible shapes {a.value.shape} and {b.value.shape}")
    value = a.value @ b.value.T
    return _make_node(value, [(a, lambda g: g @ b.value), (b, lambda g: g.T @ a.value)])


def transpose(a: Node) -> Node:
    if a.value.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {a.value.shape}")
    return _make_node(np.ascontiguousarray(a.value.T), [(a, lambda g: np.ascontiguousarray(g.T))])


def reshape(a: Node, shape) -> Node:
    shape = tuple(shape)
    n = 1
    for s in shape:
        n *= s
    if n != a.value.size:
        raise DimensionError(f"reshape: cannot view {a.value.shape} as {shape}")
    old = a.value.shape
    return _make_node(a.value.reshape(shape), [(a, lambda g: g.reshape(old))])


def stack_rows(nodes: Sequence[Node]) -> Node:
    """Stack equal-length vectors into a matrix, one node per row."""
    value = np.stack([n.value for n in nodes])
    parents = [(n, (lambda g, i=i: g[i])) for i, n in enumerate(nodes)]
    return _make_node(value, parents)


def concat(nodes: Sequence[Node], axis: int = 0) -> Node:
    values = [n.value for n in nodes]
    ndim = values[0].ndim
    for v in values[1:]:
        if v.ndim != ndim:
            raise DimensionError(f"concat: mixed ranks {[v.shape for v in values]}")
    value = np.concatenate(values, axis=axis)
    offsets = np.cumsum([0] + [v.shape[axis] for v in values])
    parents = []
    for i, n in enumerate(nodes):
        lo, hi = offsets[i], offsets[i + 1]

        def rule(g, lo=lo, hi=hi):
            index = [slice(None)] * ndim
            index[axis] = slice(lo, hi)
            return np.ascontiguousarray(g[tuple(index)])

        parents.append((n, rule))
    return _make_node(value, parents)


def slice_axis(a: Node, axis: int, start: int, stop: int) -> Node:
    if not (0 <= start < stop <= a.value.shape[axis]):
        raise DimensionError(f"slice [{start}:{stop}] out of bounds for axis {axis} of {a.value.shape}")
    index = [slice(None)] * a.value.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    shape = a.value.shape

    def rule(g):
        full = np.zeros(shape)
        full[index] = g
        return full

    return _make_node(np.ascontiguousarray(a.value[index]), [(a, rule)])


def take_rows(a: Node, indices) -> Node:
    idx = np.asarray(indices, dtype=np.intp)
    if a.value.ndim != 2:
        raise DimensionError(f"take_rows expects a matrix, got shape {a.value.shape}")
    shape = a.value.shape

    def rule(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return full

    return _make_node(a.value[idx], [(a, rule)])


def reduce_sum(a: Node) -> Node:
    return _make_node(np.asarray(a.value.sum()), [(a, lambda g: np.broadcast_to(g, a.value.shape).copy())])


def reduce_mean(a: Node) -> Node:
    n = a.value.size
    return _make_node(np.asarray(a.value.mean()), [(a, lambda g: np.broadcast_to(g / n, a.value.shape).copy())])


def linear(x: Node, weight: Node, bias: Node | None = None) -> Node:
    """Rows of ``x`` through ``W``: x @ W.T (+ b broadcast over rows)."""
    if x.value.ndim != 2 or weight.value.ndim != 2 or x.value.shape[1] != weight.value.shape[1]:
        raise DimensionError(f"linear: x {x.value.shape} incompatible with weight {weight.value.shape}")
    value = x.value @ weight.value.T
    if bias is None:
        return _make_node(value, [(x, lambda g: g @ weight.value), (weight, lambda g: g.T @ x.value)])
    if bias.value.shape != (weight.value.shape[0],):
        raise DimensionError(f"linear: bias {bias.value.shape} does not match weight rows {weight.value.shape[0]}")
    value = value + bias.value
    return _make_node(
        value,
        [
            (x, lambda g: g @ weight.value),
            (weight, lambda g: g.T @ x.value),
            (bias, lambda g: g.sum(axis=0)),
        ],
    )


def weight_normed(weight: Node, gain: Node) -> Node:
    """Rowwise reparameterization g_r * W_r / ||W_r||_2."""
    norms = np.sqrt((weight.value**2).sum(axis=1, keepdims=True))
    unit = weight.value / norms
    value = gain.value[:, None] * unit

    def backward_fn(g):
        dg = (g * unit).sum(axis=1)
        coef = gain.value[:, None] / norms
        dw = coef * (g - (g * unit).sum(axis=1, keepdims=True) * unit)
        return [dw, dg]

    return fused(value, [weight, gain], backward_fn)


# ---------------------------------------------------------------------------
# Softmax-family ops
# ---------------------------------------------------------------------------


def softmax_masked(logits: Node, mask) -> Node:
    """Softmax over the masked-in entries of a vector; masked-out entries are 0."""
    m = np.asarray(mask, dtype=bool)
    if m.shape != logits.value.shape:
        raise DimensionError(f"softmax_masked: mask {m.shape} != logits {logits.value.shape}")
    if not m.any():
        raise ValidationError("softmax_masked: empty neighborhood (all-false mask)")
    x = logits.value
    shifted = np.where(m, x - x[m].max(), -np.inf)
    e = np.where(m, np.exp(shifted), 0.0)
    out = e / e.sum()

    def rule(g):
        inner = (g * out).sum()
        return out * (g - inner)

    return _make_node(out, [(logits, rule)])


def masked_softmax_rows(logits: Node, mask) -> Node:
    """Row-wise masked softmax of a matrix; every row needs a true entry."""
    m = np.asarray(mask, dtype=bool)
    if m.shape != logits.value.shape:
        raise DimensionError(f"masked_softmax_rows: mask {m.shape} != logits {logits.value.shape}")
    if not m.any(axis=1).all():
        raise ValidationError("masked_softmax_rows: a row has an empty neighborhood")
    x = logits.value
    rowmax = np.where(m, x, -np.inf).max(axis=1, keepdims=True)
    e = np.exp(np.where(m, x - rowmax, -np.inf))
    out = e / e.sum(axis=1, keepdims=True)

    def rule(g):
        inner = (g * out).sum(axis=1, keepdims=True)
        return out * (g - inner)

    return _make_node(out, [(logits, rule)])


def geom_weighted_softmax(av: Node, ab: Node) -> Node:
    """Rows normalized as ab * exp(av) / sum_j ab * exp(av).

    Entries with ab == 0 come out exactly 0. A row whose ab entries are all
    zero falls back to the uniform distribution (logged); such rows carry no
    gradient.
    """
    if av.value.shape != ab.value.shape or av.value.ndim != 2:
        raise DimensionError(f"geom_weighted_softmax: shapes {av.value.shape} vs {ab.value.shape}")
    a, b = av.value, ab.value
    k = a.shape[1]
    support = b > 0
    live = support.any(axis=1)
    _record_kinks(support)
    _record_kinks(live)
    if not live.all():
        logger.warning(
            "geometry scores vanished on %d of %d rows; using uniform attention there",
            int((~live).sum()),
            a.shape[0],
        )
    rowmax = np.where(support, a, -np.inf).max(axis=1, keepdims=True)
    rowmax = np.where(live[:, None], rowmax, a.max(axis=1, keepdims=True))
    e = np.exp(a - rowmax)
    num = np.where(support, b * e, 0.0)
    denom = num.sum(axis=1, keepdims=True)
    out = np.where(live[:, None], num / np.where(live[:, None], denom, 1.0), 1.0 / k)

    def backward_fn(g):
        g_live = np.where(live[:, None], g, 0.0)
        inner = (g_live * out).sum(axis=1, keepdims=True)
        dav = out * (g_live - inner)
        dab = np.where(support, (e / np.where(live[:, None], denom, 1.0)) * (g_live - inner), 0.0)
        dab = np.where(live[:, None], dab, 0.0)
        return [dav, dab]

    return fused(out, [av, ab], backward_fn)


def label_gather(vec: Node, labels: Array) -> Node:
    """Matrix whose (i, j) entry is vec[labels[i, j]]; entries with label < 0 are 0."""
    lab = np.asarray(labels, dtype=np.intp)
    valid = lab >= 0
    safe = np.where(valid, lab, 0)
    value = np.where(valid, vec.value[safe], 0.0)
    n = vec.value.shape[0]

    def rule(g):
        out = np.zeros(n)
        np.add.at(out, lab[valid], g[valid])
        return out

    return _make_node(value, [(vec, rule)])


def label_segment_sum(weights: Node, labels: Array, n_labels: int) -> Node:
    """(K, L) matrix S with S[i, l] = sum over j with labels[i, j] == l of weights[i, j]."""
    lab = np.asarray(labels, dtype=np.intp)
    if lab.shape != weights.value.shape:
        raise DimensionError(f"label_segment_sum: labels {lab.shape} != weights {weights.value.shape}")
    k = lab.shape[0]
    valid = lab >= 0
    value = np.zeros((k, n_labels))
    rows = np.repeat(np.arange(k), lab.shape[1])[valid.ravel()]
    cols = lab[valid]
    np.add.at(value, (rows, cols), weights.value[valid])

    def rule(g):
        out = np.zeros_like(weights.value)
        out[valid] = g[rows, cols]
        return out

    return _make_node(value, [(weights, rule)])


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    """Finite-difference audit of every registered parameter coordinate."""

    max_rel_err: float
    per_param_err: dict[str, float]
    skipped: dict[str, int] = field(default_factory=dict)

    def format_lines(self) -> list[str]:
        lines = []
        for name in self.per_param_err:
            note = f" ({self.skipped[name]} near-kink coords skipped)" if self.skipped.get(name) else ""
            lines.append(f"{name}: rel_err={self.per_param_err[name]:.3e}{note}")
        lines.append(f"max_rel_err={self.max_rel_err:.3e}")
        return lines


class _value_only_mode:
    def __init__(self, record_kinks: bool):
        self.record = record_kinks

    def __enter__(self):
        global _VALUE_ONLY, _KINK_TRACE
        self._prev = (_VALUE_ONLY, _KINK_TRACE)
        _VALUE_ONLY = True
        _KINK_TRACE = [] if self.record else None
        return self

    def trace(self):
        return _KINK_TRACE

    def __exit__(self, *exc):
        global _VALUE_ONLY, _KINK_TRACE
        _VALUE_ONLY, _KINK_TRACE = self._prev
        return False


def rel_err(g_ad: float, g_fd: float) -> float:
    return abs(g_ad - g_fd) / max(1e-8, abs(g_ad) + abs(g_fd))


def gradcheck(f: Callable[[ParamStore], Node], params: ParamStore, step: float = 1e-5) -> GradCheckReport:
    """Compare backward() gradients with central differences per coordinate.

    ``f`` must be deterministic. Coordinates whose +h/-h evaluations cross a
    relu/max0 kink (or flip a uniform-fallback attention row) sit on different
    linear pieces, where the subgradient convention makes the comparison
    meaningless; they are skipped and counted in the report.
    """
    if not (0.0 < step <= 1e-2):
        raise ValidationError(f"gradcheck step must be in (0, 1e-2], got {step}")
    params.zero_grad()
    loss = f(params)
    analytic = backward(loss, params)
    params.zero_grad()

    def eval_traced(pstore):
        with _value_only_mode(record_kinks=True) as mode:
            out = f(pstore)
            return float(out.value), mode.trace()

    per_param: dict[str, float] = {}
    skipped: dict[str, int] = {}
    worst = 0.0
    for name, node in params.items():
        flat = node.value.ravel()
        g_flat = analytic[name].ravel()
        worst_here = 0.0
        n_skipped = 0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus, trace_plus = eval_traced(params)
            flat[i] = orig - step
            f_minus, trace_minus = eval_traced(params)
            flat[i] = orig
            same_piece = len(trace_plus) == len(trace_minus) and all(
                np.array_equal(a, b) for a, b in zip(trace_plus, trace_minus)
            )
            if not same_piece:
                n_skipped += 1
                continue
            g_fd = (f_plus - f_minus) / (2.0 * step)
            worst_here = max(worst_here, rel_err(float(g_flat[i]), g_fd))
        per_param[name] = worst_here
        if n_skipped:
            skipped[name] = n_skipped
        worst = max(worst, worst_here)
    return GradCheckReport(max_rel_err=worst, per_param_err=per_param, skipped=skipped)
