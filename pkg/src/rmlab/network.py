"""Small tanh networks with hand-propagated derivative jets and gradients.

A network maps a scalar x to a scalar w(x).  Because the training risks need
w, w' and w'' at interior sample points, the forward pass propagates order-2
jets (value, first, second derivative with respect to x) through every
layer:

* affine layers act linearly on all three jet channels;
* tanh acts as  (v, p, q) -> (t, s p, s q - 2 t s p^2)  with t = tanh(v),
  s = 1 - t^2.

Gradients with respect to the parameters are computed by reverse-mode
differentiation of that jet pass, written out by hand below (no autodiff
framework).  Parameters live in one flat float64 vector; the layout is
layer-major, weights before biases, row-major within each weight matrix,
with the residual-block gates (architecture "resnet") appended at the end.

The "resnet" architecture adds, after every second hidden activation (the
3rd, 5th, ... counting from 1), a gated identity skip a_i = tanh(...) +
g * a_{i-2}; the two hidden widths must match.  Gates start at 1.0 and are
trainable; with all gates set to zero the forward pass coincides with the
plain architecture exactly.
"""

import json

import numpy as np

__all__ = [
    "NetworkParams",
    "init_xavier",
    "param_count",
    "forward_jet",
    "forward_jet_batch",
    "backprop_jet",
    "grad_params",
    "fd_gradient",
    "save_checkpoint",
    "load_checkpoint",
]

PARAM_ORDERING = "layer-major;weights-before-biases;row-major;gates-last;v1"
ARCHITECTURES = ("plain", "resnet")


def _check_widths(widths):
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise ValueError("widths must list at least input and output layer")
    if widths[0] != 1 or widths[-1] != 1:
        raise ValueError("network must be scalar-to-scalar: widths[0] = widths[-1] = 1")
    if any(w < 1 for w in widths):
        raise ValueError("all widths must be >= 1")
    return widths


def _skip_targets(widths, architecture):
    """Hidden activation indices (1-based) receiving a gated skip."""
    if architecture != "resnet":
        return []
    n_hidden = len(widths) - 2
    targets = []
    for i in range(3, n_hidden + 1, 2):
        if widths[i] != widths[i - 2]:
            raise ValueError(
                f"resnet skip onto hidden layer {i} needs equal widths "
                f"({widths[i - 2]} vs {widths[i]})"
            )
        targets.append(i)
    return targets


def param_count(widths, architecture="plain"):
    widths = _check_widths(widths)
    n = sum(widths[l + 1] * widths[l] + widths[l + 1] for l in range(len(widths) - 1))
    return n + len(_skip_targets(widths, architecture))


class NetworkParams:
    """Network shape plus one flat parameter vector with layer views."""

    def __init__(self, widths, flat, architecture="plain", seed=None):
        self.widths = _check_widths(widths)
        if architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {architecture!r}")
        self.architecture = architecture
        self.seed = seed
        self.skip_targets = _skip_targets(self.widths, architecture)
        flat = np.asarray(flat, dtype=float)
        expected = param_count(self.widths, architecture)
        if flat.shape != (expected,):
            raise ValueError(f"flat vector has size {flat.size}, expected {expected}")
        self.flat = flat
        # slices into the flat vector, per layer
        self._slices = []
        off = 0
        for l in range(len(self.widths) - 1):
            m_in, m_out = self.widths[l], self.widths[l + 1]
            wsl = slice(off, off + m_out * m_in)
            off += m_out * m_in
            bsl = slice(off, off + m_out)
            off += m_out
            self._slices.append((wsl, bsl))
        self._gate_slice = slice(off, off + len(self.skip_targets))

    @property
    def n_layers(self):
        return len(self.widths) - 1

    def weight(self, l, flat=None):
        flat = self.flat if flat is None else flat
        m_in, m_out = self.widths[l], self.widths[l + 1]
        return flat[self._slices[l][0]].reshape(m_out, m_in)

    def bias(self, l, flat=None):
        flat = self.flat if flat is None else flat
        return flat[self._slices[l][1]]

    def gates(self, flat=None):
        flat = self.flat if flat is None else flat
        return flat[self._gate_slice]

    def with_flat(self, flat):
        return NetworkParams(self.widths, flat, self.architecture, self.seed)

    def jet_batch(self, xs):
        """(w, w', w'') at the points xs -- the shared function-protocol hook."""
        v, p, q, _ = forward_jet_batch(self, np.asarray(xs, dtype=float))
        return v, p, q

    def evaluate(self, x, order=0):
        jets = self.jet_batch(np.atleast_1d(np.asarray(x, dtype=float)))
        out = jets[order]
        return float(out[0]) if np.ndim(x) == 0 else out

    def __call__(self, x, order=0):
        return self.evaluate(x, order)

    def __repr__(self):
        return (
            f"NetworkParams(widths={list(self.widths)}, "
            f"architecture={self.architecture!r}, n={self.flat.size})"
        )


def init_xavier(widths, seed, architecture="plain"):
    """Xavier/Glorot-normal weights, zero biases, unit skip gates.

    Layer l's weights are drawn N(0, 2 / (widths[l] + widths[l+1])) from a
    fresh np.random.default_rng(seed), layer by layer in order, row-major
    within each matrix, so the draw is reproducible from the seed alone.
    """
    widths = _check_widths(widths)
    rng = np.random.default_rng(seed)
    flat = np.zeros(param_count(widths, architecture))
    params = NetworkParams(widths, flat, architecture, seed=seed)
    for l in range(params.n_layers):
        m_in, m_out = widths[l], widths[l + 1]
        std = np.sqrt(2.0 / (m_in + m_out))
        flat[params._slices[l][0]] = rng.normal(0.0, std, size=m_out * m_in)
    flat[params._gate_slice] = 1.0
    return params


def forward_jet_batch(params, xs, flat=None, keep_tape=False):
    """Propagate (value, d/dx, d2/dx2) jets for a batch of scalar inputs.

    Returns (v, p, q, tape) with 1-d arrays of len(xs); tape is None unless
    keep_tape, in which case it holds everything backprop_jet needs.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1:
        raise ValueError("xs must be a 1-d array of sample points")
    n = xs.size
    v = xs[:, None]
    p = np.ones((n, 1))
    q = np.zeros((n, 1))
    gates = params.gates(flat)
    affine_in = []   # (v, p, q) entering each affine layer
    tanh_data = []   # (t, s, p_hat, q_hat) per hidden layer
    hidden = []      # post-skip activations (v, p, q), 1-based index i-1
    gate_of = {t: k for k, t in enumerate(params.skip_targets)}
    n_layers = params.n_layers
    for l in range(n_layers):
        w = params.weight(l, flat)
        b = params.bias(l, flat)
        if keep_tape:
            affine_in.append((v, p, q))
        z = v @ w.T + b
        p_hat = p @ w.T
        q_hat = q @ w.T
        if l < n_layers - 1:
            t = np.tanh(z)
            s = 1.0 - t * t
            v = t
            p = s * p_hat
            q = s * q_hat - 2.0 * t * s * p_hat * p_hat
            if keep_tape:
                tanh_data.append((t, s, p_hat, q_hat))
            i = l + 1  # hidden activation index, 1-based
            if i in gate_of:
                g = gates[gate_of[i]]
                src = hidden[i - 2 - 1]
                v = v + g * src[0]
                p = p + g * src[1]
                q = q + g * src[2]
            hidden.append((v, p, q))
        else:
            v, p, q = z, p_hat, q_hat
    tape = None
    if keep_tape:
        tape = {"affine_in": affine_in, "tanh": tanh_data, "hidden": hidden}
    return v[:, 0], p[:, 0], q[:, 0], tape


def forward_jet(params, x):
    """Scalar convenience wrapper: jet (w(x), w'(x), w''(x))."""
    v, p, q, _ = forward_jet_batch(params, np.array([float(x)]))
    return float(v[0]), float(p[0]), float(q[0])


def backprop_jet(params, tape, seed_v, seed_p, seed_q, flat=None):
    """Reverse pass of forward_jet_batch; returns the flat gradient.

    seed_v/p/q are the adjoints of the three output channels per sample
    (i.e. the partial derivatives of the scalar loss with respect to w(x_i),
    w'(x_i), w''(x_i)).  The tanh-jet adjoint uses, with t = tanh(z) and
    s = 1 - t^2 (so t' = s, s' = -2ts):

        z_bar  = v_bar s - 2 t s p_hat p_bar'
                 + q_bar (-2 t s q_hat - 2 p_hat^2 s (s - 2 t^2))
        ph_bar = p_bar s - 4 t s p_hat q_bar
        qh_bar = q_bar s
    """
    grad = np.zeros_like(params.flat)
    gates = params.gates(flat)
    gate_of = {t: k for k, t in enumerate(params.skip_targets)}
    gv = np.asarray(seed_v, dtype=float)[:, None]
    gp = np.asarray(seed_p, dtype=float)[:, None]
    gq = np.asarray(seed_q, dtype=float)[:, None]
    pending = {}  # hidden index -> adjoint triple fed back through a skip
    n_layers = params.n_layers
    for l in reversed(range(n_layers)):
        if l < n_layers - 1:
            i = l + 1
            if i in pending:
                av, ap, aq = pending.pop(i)
                gv = gv + av
                gp = gp + ap
                gq = gq + aq
            if i in gate_of:
                k = gate_of[i]
                g = gates[k]
                src = tape["hidden"][i - 2 - 1]
                grad[params._gate_slice][k] += float(
                    np.sum(gv * src[0]) + np.sum(gp * src[1]) + np.sum(gq * src[2])
                )
                prev = pending.get(i - 2, (0.0, 0.0, 0.0))
                pending[i - 2] = (
                    prev[0] + g * gv,
                    prev[1] + g * gp,
                    prev[2] + g * gq,
                )
            t, s, p_hat, q_hat = tape["tanh"][l]
            ts = t * s
            gz = (
                gv * s
                - 2.0 * ts * p_hat * gp
                + gq * (-2.0 * ts * q_hat - 2.0 * p_hat * p_hat * s * (s - 2.0 * t * t))
            )
            gph = gp * s - 4.0 * ts * p_hat * gq
            gqh = gq * s
        else:
            gz, gph, gqh = gv, gp, gq
        v_in, p_in, q_in = tape["affine_in"][l]
        w = params.weight(l, flat)
        gw = gz.T @ v_in + gph.T @ p_in + gqh.T @ q_in
        grad[params._slices[l][0]] += gw.ravel()
        grad[params._slices[l][1]] += gz.sum(axis=0)
        gv = gz @ w
        gp = gph @ w
        gq = gqh @ w
    return grad


def grad_params(params, xs, seed_v, seed_p, seed_q):
    """Forward + reverse in one call; returns (v, p, q, flat_gradient)."""
    v, p, q, tape = forward_jet_batch(params, xs, keep_tape=True)
    grad = backprop_jet(params, tape, seed_v, seed_p, seed_q)
    return v, p, q, grad


def fd_gradient(params, scalar_fn, h=1e-6):
    """Central finite-difference gradient of scalar_fn(flat) at params.flat."""
    flat = params.flat
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = h
        grad[i] = (scalar_fn(flat + bump) - scalar_fn(flat - bump)) / (2.0 * h)
    return grad


CHECKPOINT_VERSION = 1


def save_checkpoint(params, path, extra=None):
    """Write parameters as JSON: a header plus the flat vector at full precision."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "ordering": PARAM_ORDERING,
        "widths": list(params.widths),
        "architecture": params.architecture,
        "seed": params.seed,
        "params": [float(x) for x in params.flat],
    }
    if extra:
        payload["extra"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    if payload.get("ordering") != PARAM_ORDERING:
        raise ValueError(f"checkpoint {path} uses an unknown parameter ordering")
    return NetworkParams(
        payload["widths"],
        np.asarray(payload["params"], dtype=float),
        payload.get("architecture", "plain"),
        seed=payload.get("seed"),
    )
