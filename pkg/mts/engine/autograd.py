"""
Autograd Engine for the MTS Domain Adaptation toolkit
Reverse-mode automatic differentiation over dense float64 matrices
"""

import logging
import threading

import numpy as np

from mts.errors import ContractError, DimensionError, DomainError, GradCheckError

logger = logging.getLogger(__name__)

PROB_EPS = 1e-12

_state = threading.local()


class Tensor:
    """
    Dense 2-D float64 matrix that may take part in a recorded graph

    A tensor created outside any active Graph, or from inputs that do not
    require gradients, is a plain constant.
    """

    def __init__(self, values, requires_grad=False, name=None):
        """
        Initialize a tensor

        Args:
            values: Scalar, vector or matrix; vectors become a single row
            requires_grad (bool): Whether backward should propagate into it
            name (str): Optional stable name (parameters are always named)
        """
        array = np.array(values, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim != 2:
            raise DimensionError(f"Tensor must be at most 2-D, got shape {array.shape}")
        self.values = array
        self.requires_grad = bool(requires_grad)
        self.name = name
        self.grad = None

    @property
    def shape(self):
        return self.values.shape

    def item(self):
        """Return the value of a 1x1 tensor as a float"""
        if self.values.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 tensor, got {self.values.shape}")
        return float(self.values[0, 0])

    def __add__(self, other):
        return add(self, _as_tensor(other, self.shape))

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.shape))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scalar_mul(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


class Node:
    """One recorded primitive application"""

    __slots__ = ('op', 'inputs', 'output', 'vjp')

    def __init__(self, op, inputs, output, vjp):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.vjp = vjp


class Graph:
    """
    Tape of primitive applications in creation order

    Used as a context manager; while active, every primitive whose inputs
    require gradients appends a node. Creation order is a topological order.
    """

    def __init__(self):
        self.nodes = []

    def record(self, op, inputs, output, vjp):
        self.nodes.append(Node(op, inputs, output, vjp))

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack().pop()
        return False

    def __len__(self):
        return len(self.nodes)


def _stack():
    if not hasattr(_state, 'graphs'):
        _state.graphs = []
    return _state.graphs


def active_graph():
    """Return the innermost active Graph or None"""
    graphs = _stack()
    return graphs[-1] if graphs else None


class no_grad:
    """Context in which nothing is recorded, even inside an active Graph"""

    def __enter__(self):
        _stack().append(None)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack().pop()
        return False


def _as_tensor(value, shape=None):
    if isinstance(value, Tensor):
        return value
    if shape is not None and np.ndim(value) == 0:
        return Tensor(np.full(shape, float(value)))
    return Tensor(value)


def _emit(op, inputs, values, vjp):
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(values, requires_grad=requires_grad)
    graph = active_graph()
    if requires_grad and graph is not None:
        graph.record(op, tuple(inputs), out, vjp)
    return out


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _reduce_to(grad, shape):
    # sum out broadcast dimensions
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Primitive ops

def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.values, b.values
    return _emit('matmul', (a, b), av @ bv, lambda g: (g @ bv.T, av.T @ g))


def add(a, b):
    _same_shape('add', a, b)
    return _emit('add', (a, b), a.values + b.values, lambda g: (g, g))


def sub(a, b):
    _same_shape('sub', a, b)
    return _emit('sub', (a, b), a.values - b.values, lambda g: (g, -g))


def add_row_broadcast(a, row):
    if row.shape != (1, a.shape[1]):
        raise DimensionError(f"add_row_broadcast: row {row.shape} does not fit {a.shape}")
    return _emit('add_row_broadcast', (a, row), a.values + row.values,
                 lambda g: (g, g.sum(axis=0, keepdims=True)))


def mul(a, b):
    """Elementwise product; b may be a column (n x 1) or row (1 x m) broadcast"""
    try:
        values = a.values * b.values
    except ValueError:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")
    if values.shape != a.shape:
        raise DimensionError(f"mul: result {values.shape} must keep shape {a.shape}")
    av, bv = a.values, b.values
    return _emit('mul', (a, b), values,
                 lambda g: (g * bv, _reduce_to(g * av, bv.shape)))


def scalar_mul(a, c):
    c = float(c)
    return _emit('scalar_mul', (a,), c * a.values, lambda g: (c * g,))


def relu(a):
    mask = a.values > 0
    return _emit('relu', (a,), np.where(mask, a.values, 0.0), lambda g: (g * mask,))


def _sigmoid_values(v):
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a):
    out = _sigmoid_values(a.values)
    return _emit('sigmoid', (a,), out, lambda g: (g * out * (1.0 - out),))


def log_sigmoid(a):
    """log(sigmoid(a)) evaluated without forming the probability"""
    v = a.values
    out = np.minimum(v, 0.0) - np.log1p(np.exp(-np.abs(v)))
    return _emit('log_sigmoid', (a,), out, lambda g: (g * _sigmoid_values(-v),))


def softmax_rows(a):
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return _emit('softmax_rows', (a,), out,
                 lambda g: (out * (g - (g * out).sum(axis=1, keepdims=True)),))


def log_softmax_rows(a):
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    soft = np.exp(out)
    return _emit('log_softmax_rows', (a,), out,
                 lambda g: (g - soft * g.sum(axis=1, keepdims=True),))


def log(a):
    if np.any(a.values <= 0):
        raise DomainError("log: input must be strictly positive")
    av = a.values
    return _emit('log', (a,), np.log(av), lambda g: (g / av,))


def clamp(a, low, high):
    mask = (a.values >= low) & (a.values <= high)
    return _emit('clamp', (a,), np.clip(a.values, low, high), lambda g: (g * mask,))


def mean_all(a):
    size = a.values.size
    if size == 0:
        raise DimensionError("mean_all: empty tensor")
    shape = a.shape
    return _emit('mean_all', (a,), np.array([[a.values.mean()]]),
                 lambda g: (np.full(shape, g[0, 0] / size),))


def sum_all(a):
    shape = a.shape
    return _emit('sum_all', (a,), np.array([[a.values.sum()]]),
                 lambda g: (np.full(shape, g[0, 0]),))


def mean_rows(a):
    """Mean of every row, giving an n x 1 column"""
    n, m = a.shape
    if m == 0:
        raise DimensionError("mean_rows: rows are empty")
    return _emit('mean_rows', (a,), a.values.mean(axis=1, keepdims=True),
                 lambda g: (np.repeat(g / m, m, axis=1),))


def square(a):
    av = a.values
    return _emit('square', (a,), av * av, lambda g: (2.0 * av * g,))


def concat_rows(tensors):
    tensors = tuple(tensors)
    if not tensors:
        raise DimensionError("concat_rows: nothing to concatenate")
    cols = {t.shape[1] for t in tensors}
    if len(cols) != 1:
        raise DimensionError(f"concat_rows: column counts differ {sorted(cols)}")
    bounds = np.cumsum([0] + [t.shape[0] for t in tensors])
    values = np.vstack([t.values for t in tensors])
    return _emit('concat_rows', tensors, values,
                 lambda g: tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(tensors))))


def select_rows(a, indices):
    index = np.asarray(indices, dtype=np.int64).reshape(-1)
    n = a.shape[0]
    if index.size and (index.min() < -n or index.max() >= n):
        raise DimensionError(f"select_rows: index out of range for {n} rows")
    shape = a.shape

    def vjp(g):
        grad = np.zeros(shape)
        np.add.at(grad, index, g)
        return (grad,)

    return _emit('select_rows', (a,), a.values[index], vjp)


def detach(a):
    """Constant copy of a tensor; nothing flows back through it"""
    return Tensor(a.values.copy(), requires_grad=False)


# Reverse pass

def backward(graph, root, wrt):
    """
    Back-propagate a scalar root through a recorded graph

    Args:
        graph (Graph): Tape holding the root's computation
        root (Tensor): 1x1 tensor to differentiate
        wrt: Iterable of parameter tensors

    Returns:
        dict: Parameter name to gradient array; unreachable parameters get zeros

    Only the parameters in wrt have their grad field written.
    """
    if root.shape != (1, 1):
        raise ContractError(f"backward: root must be 1x1, got {root.shape}")
    params = list(wrt)
    grads = {id(root): np.ones((1, 1))}
    for node in reversed(graph.nodes):
        upstream = grads.get(id(node.output))
        if upstream is None:
            continue
        for tensor, grad in zip(node.inputs, node.vjp(upstream)):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
    result = {}
    for param in params:
        grad = grads.get(id(param))
        grad = np.zeros_like(param.values) if grad is None else np.array(grad, dtype=np.float64)
        param.grad = grad
        result[param.name if param.name is not None else id(param)] = grad
    return result


def grad_check(loss_fn, params, epsilon=1e-5):
    """
    Compare analytic gradients with central differences

    Args:
        loss_fn: Zero-argument callable returning a 1x1 Tensor built from params
        params: Parameter tensors to check
        epsilon (float): Perturbation size in (0, 1e-3]

    Returns:
        float: max over coordinates of |analytic - numeric| / max(1, |analytic|)
    """
    if not 0.0 < epsilon <= 1e-3:
        raise ContractError(f"grad_check: epsilon {epsilon} outside (0, 1e-3]")
    params = list(params)
    with Graph() as graph:
        root = loss_fn()
    analytic = backward(graph, root, params)

    worst = 0.0
    for param in params:
        key = param.name if param.name is not None else id(param)
        grad = analytic[key]
        flat = param.values.reshape(-1)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + epsilon
            plus = loss_fn().item()
            flat[index] = original - epsilon
            minus = loss_fn().item()
            flat[index] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise GradCheckError(
                    f"grad_check: non-finite loss perturbing {key}[{index}]",
                    coordinate=(key, index))
            numeric = (plus - minus) / (2.0 * epsilon)
            exact = grad.reshape(-1)[index]
            error = abs(exact - numeric) / max(1.0, abs(exact))
            worst = max(worst, error)
    logger.debug(f"grad_check over {len(params)} parameters: max relative error {worst:.3e}")
    return worst
