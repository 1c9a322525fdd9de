"""Composition of an LSTM stack with a dense head.

Two read-out styles share one parameter set:

* per-frame masks: the dense head maps every hidden frame through a sigmoid
  (mask estimation);
* sequence summary: the dense head maps only the final hidden frame to K
  logits, turned into probabilities by the scaled softmax (gating).

A network owns its parameters; training mutates them under a single-writer
contract while read-only forward passes remain safe from any thread.
"""

import copy

import numpy as np

from .functional import scaled_softmax, sigmoid
from .layers import DenseLayer, LstmLayer

ACTIVATIONS = ("sigmoid", "scaled_softmax")


class Network:
    def __init__(
        self,
        input_dim,
        hidden_dims,
        output_dim,
        activation,
        lam=None,
        rng=None,
        dtype=np.float32,
    ):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if activation == "scaled_softmax":
            if lam is None or not lam > 0:
                raise ValueError("scaled_softmax requires a positive lam")
        if rng is None:
            rng = np.random.default_rng(0)
        self.input_dim = input_dim
        self.hidden_dims = list(hidden_dims)
        self.output_dim = output_dim
        self.activation = activation
        self.lam = float(lam) if lam is not None else None
        self.lstm_layers = []
        prev = input_dim
        for h in self.hidden_dims:
            self.lstm_layers.append(LstmLayer(prev, h, rng=rng, dtype=dtype))
            prev = h
        self.head = DenseLayer(prev, output_dim, rng=rng, dtype=dtype)

    @property
    def dtype(self):
        return self.head.W.dtype

    # ------------------------------------------------------------------
    # parameter bookkeeping
    # ------------------------------------------------------------------

    def param_items(self):
        """Ordered (name, array) pairs; the canonical tensor order."""
        items = []
        for idx, layer in enumerate(self.lstm_layers):
            items.append((f"lstm{idx}.Wx", layer.Wx))
            items.append((f"lstm{idx}.Wh", layer.Wh))
            items.append((f"lstm{idx}.b", layer.b))
        items.append(("head.W", self.head.W))
        items.append(("head.b", self.head.b))
        return items

    def set_params(self, named_arrays):
        current = dict(self.param_items())
        for name, arr in named_arrays.items():
            if name not in current:
                raise KeyError(f"unknown parameter {name!r}")
            if current[name].shape != arr.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {current[name].shape} vs {arr.shape}"
                )
            current[name][...] = arr

    def snapshot(self):
        return {name: arr.copy() for name, arr in self.param_items()}

    def param_count(self):
        return sum(arr.size for _, arr in self.param_items())

    def macs_per_frame(self):
        """Weight multiply-accumulates per spectrogram frame."""
        total = sum(layer.macs_per_frame() for layer in self.lstm_layers)
        return total + self.head.macs_per_frame()

    def clone(self):
        return copy.deepcopy(self)

    def astype(self, dtype):
        out = self.clone()
        for layer in out.lstm_layers:
            layer.Wx = layer.Wx.astype(dtype)
            layer.Wh = layer.Wh.astype(dtype)
            layer.b = layer.b.astype(dtype)
        out.head.W = out.head.W.astype(dtype)
        out.head.b = out.head.b.astype(dtype)
        return out

    # ------------------------------------------------------------------
    # LSTM stack
    # ------------------------------------------------------------------

    def stack_forward(self, x, states=None):
        """Run the LSTM stack over (B, T, input_dim).

        Returns the top hidden sequence, the per-layer final states, and the
        per-layer caches.  ``states`` optionally carries per-layer initial
        (h, c) pairs so long sequences can be processed in chunks.
        """
        caches = []
        finals = []
        h_seq = x
        for idx, layer in enumerate(self.lstm_layers):
            state = states[idx] if states is not None else None
            h_seq, final, cache = layer.forward(h_seq, state=state)
            caches.append(cache)
            finals.append(final)
        return h_seq, finals, caches

    def stack_backward(self, dh_top, caches):
        grads = {}
        dh = dh_top
        for idx in range(len(self.lstm_layers) - 1, -1, -1):
            dh, layer_grads, _ = self.lstm_layers[idx].backward(dh, caches[idx])
            for key, val in layer_grads.items():
                grads[f"lstm{idx}.{key}"] = val
        return grads, dh

    # ------------------------------------------------------------------
    # per-frame mask read-out
    # ------------------------------------------------------------------

    def forward_masks(self, x, states=None):
        """Per-frame sigmoid masks for a (B, T, input_dim) batch."""
        if self.activation != "sigmoid":
            raise ValueError("forward_masks requires a sigmoid head")
        h_seq, finals, caches = self.stack_forward(x, states=states)
        pre = self.head.forward(h_seq)
        masks = sigmoid(pre)
        return masks, {"h_seq": h_seq, "caches": caches, "masks": masks, "finals": finals}

    def backward_masks(self, dmasks, ctx):
        masks = ctx["masks"]
        dpre = dmasks * masks * (1.0 - masks)
        dh, head_grads = self.head.backward(dpre, ctx["h_seq"])
        grads, _ = self.stack_backward(dh, ctx["caches"])
        grads["head.W"] = head_grads["W"]
        grads["head.b"] = head_grads["b"]
        return grads

    # ------------------------------------------------------------------
    # sequence-summary read-out
    # ------------------------------------------------------------------

    def forward_gate(self, x):
        """Probabilities and logits from the final frame of a (B, T, F) batch."""
        if self.activation != "scaled_softmax":
            raise ValueError("forward_gate requires a scaled_softmax head")
        h_seq, _, caches = self.stack_forward(x)
        h_last = h_seq[:, -1]
        logits = self.head.forward(h_last)
        probs = scaled_softmax(logits, self.lam)
        return probs, logits, {"h_seq": h_seq, "h_last": h_last, "caches": caches}

    def backward_gate(self, dlogits, ctx):
        dh_last, head_grads = self.head.backward(dlogits, ctx["h_last"])
        dh_seq = np.zeros_like(ctx["h_seq"])
        dh_seq[:, -1] = dh_last
        grads, _ = self.stack_backward(dh_seq, ctx["caches"])
        grads["head.W"] = head_grads["W"]
        grads["head.b"] = head_grads["b"]
        return grads
