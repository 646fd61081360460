"""Encoder architectures built on the autodiff core.

Two stacks at matched parameter budgets: a unidirectional LSTM whose top
hidden state is projected back to the embedding width (so the output layer
can be tied to the embedding), and a post-norm Transformer with sinusoidal
positions. Both produce one vector per input position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DataError
from . import tensor as T
from .tensor import Parameter, Tensor


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture hyperparameters.

    Defaults are the full-scale settings: 3 layers, embeddings of 300,
    LSTM hidden 294 (projected back to 300), Transformer feedforward 600
    with 4 heads, dropout 0.1.
    """

    architecture: str = "transformer"   # "lstm" | "transformer"
    n_layers: int = 3
    embed_dim: int = 300
    lstm_hidden: int = 294
    ff_dim: int = 600
    n_heads: int = 4
    dropout: float = 0.1
    positional: str = "sinusoidal"
    max_len: int = 512

    def __post_init__(self):
        if self.architecture not in ("lstm", "transformer"):
            raise ConfigError(f"unknown architecture: {self.architecture!r}")
        if self.architecture == "transformer" and self.embed_dim % self.n_heads:
            raise ConfigError("attention heads must divide the model size")
        if self.positional != "sinusoidal":
            raise ConfigError(f"unknown positional encoding: {self.positional!r}")

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "n_layers": self.n_layers,
            "embed_dim": self.embed_dim,
            "lstm_hidden": self.lstm_hidden,
            "ff_dim": self.ff_dim,
            "n_heads": self.n_heads,
            "dropout": self.dropout,
            "positional": self.positional,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


# ---------------------------------------------------------------------------
# Module plumbing
# ---------------------------------------------------------------------------

class Module:
    """Minimal parameter container with recursive discovery."""

    def named_parameters(self) -> list[tuple[str, Parameter]]:
        out: list[tuple[str, Parameter]] = []
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                out.append((name, value))
            elif isinstance(value, Module):
                out.extend((f"{name}.{sub}", p) for sub, p in value.named_parameters())
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(
                            (f"{name}.{i}.{sub}", p)
                            for sub, p in item.named_parameters()
                        )
        return out

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        if missing:
            raise DataError(f"state dict missing parameters: {sorted(missing)}")
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.data.shape:
                raise DataError(
                    f"shape mismatch for {name}: checkpoint {value.shape}, "
                    f"model {p.data.shape}"
                )
            p.data = value.astype(p.data.dtype)

    def set_requires_grad(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad = flag


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 bias: bool = True, dtype=np.float32):
        self.weight = Parameter(xavier_uniform(rng, in_dim, out_dim, dtype))
        self.bias = Parameter(np.zeros(out_dim, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = T.matmul(x, self.weight)
        if self.bias is not None:
            out = T.add(out, self.bias)
        return out


class Embedding(Module):
    def __init__(self, num_embeddings: int, dim: int, rng: np.random.Generator,
                 dtype=np.float32):
        self.weight = Parameter(xavier_uniform(rng, num_embeddings, dim, dtype))

    def __call__(self, ids: np.ndarray) -> Tensor:
        return T.embedding(self.weight, ids)


class LayerNorm(Module):
    def __init__(self, dim: int, dtype=np.float32):
        self.gain = Parameter(np.ones(dim, dtype=dtype))
        self.bias = Parameter(np.zeros(dim, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias)


def tied_logits(hidden: Tensor, embedding_weight: Tensor) -> Tensor:
    """Vocabulary logits as hidden . embedding rows; weights stay shared."""
    if hidden.data.shape[-1] != embedding_weight.data.shape[-1]:
        raise ConfigError(
            f"hidden size {hidden.data.shape[-1]} does not match embedding "
            f"size {embedding_weight.data.shape[-1]} for tied output"
        )
    return T.matmul(hidden, T.swapaxes(embedding_weight, 0, 1))


# ---------------------------------------------------------------------------
# LSTM stack
# ---------------------------------------------------------------------------

class LstmLayer(Module):
    """Single left-to-right LSTM layer. Gate order: input, forget, cell,
    output; forget bias starts at +1."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float32):
        self.hidden = hidden
        self.w_ih = Parameter(xavier_uniform(rng, in_dim, 4 * hidden, dtype))
        self.w_hh = Parameter(xavier_uniform(rng, hidden, 4 * hidden, dtype))
        bias = np.zeros(4 * hidden, dtype=dtype)
        bias[hidden:2 * hidden] = 1.0
        self.bias = Parameter(bias)

    def __call__(self, steps: Sequence[Tensor]) -> list[Tensor]:
        batch = steps[0].data.shape[0]
        dtype = steps[0].data.dtype
        h = Tensor(np.zeros((batch, self.hidden), dtype=dtype))
        c = Tensor(np.zeros((batch, self.hidden), dtype=dtype))
        outputs = []
        for x in steps:
            gates = T.add(T.add(T.matmul(x, self.w_ih), T.matmul(h, self.w_hh)),
                          self.bias)
            i = T.sigmoid(T.narrow(gates, 1, 0, self.hidden))
            f = T.sigmoid(T.narrow(gates, 1, self.hidden, self.hidden))
            g = T.tanh(T.narrow(gates, 1, 2 * self.hidden, self.hidden))
            o = T.sigmoid(T.narrow(gates, 1, 3 * self.hidden, self.hidden))
            c = T.add(T.mul(f, c), T.mul(i, g))
            h = T.mul(o, T.tanh(c))
            outputs.append(h)
        return outputs


class LstmStack(Module):
    """Stacked LSTM with a final projection back to the embedding width."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator,
                 dtype=np.float32):
        self.config = config
        dims = [config.embed_dim] + [config.lstm_hidden] * config.n_layers
        self.layers = [
            LstmLayer(dims[i], config.lstm_hidden, rng, dtype)
            for i in range(config.n_layers)
        ]
        self.proj = Linear(config.lstm_hidden, config.embed_dim, rng, dtype=dtype)

    def __call__(self, x: Tensor, causal: bool = True,
                 attn_bias: np.ndarray | None = None,
                 train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        if not causal:
            raise ConfigError("the LSTM encoder is causal only")
        seq_len = x.data.shape[1]
        steps = [
            T.reshape(T.narrow(x, 1, t, 1), (x.data.shape[0], x.data.shape[2]))
            for t in range(seq_len)
        ]
        for idx, layer in enumerate(self.layers):
            steps = layer(steps)
            if train and idx < len(self.layers) - 1 and self.config.dropout > 0:
                steps = [T.dropout(s, self.config.dropout, rng) for s in steps]
        projected = [self.proj(s) for s in steps]
        return T.stack(projected, axis=1)


# ---------------------------------------------------------------------------
# Transformer stack
# ---------------------------------------------------------------------------

def sinusoidal_positions(max_len: int, dim: int, dtype=np.float32) -> np.ndarray:
    positions = np.arange(max_len, dtype=np.float64)[:, None]
    div = np.power(10000.0, np.arange(0, dim, 2, dtype=np.float64) / dim)
    table = np.zeros((max_len, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(positions / div)
    table[:, 1::2] = np.cos(positions / div[: dim // 2])
    return table.astype(dtype)


MASK_VALUE = -1e9


def causal_bias(seq_len: int, dtype=np.float32) -> np.ndarray:
    """Additive (1, 1, T, T) bias hiding future positions."""
    bias = np.triu(np.full((seq_len, seq_len), MASK_VALUE, dtype=dtype), k=1)
    return bias[None, None]


def padding_bias(pad_mask: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Additive (B, 1, 1, T) bias hiding padded key positions."""
    return np.where(pad_mask[:, None, None, :], np.asarray(MASK_VALUE, dtype), 0.0)


class TransformerLayer(Module):
    def __init__(self, config: EncoderConfig, rng: np.random.Generator,
                 dtype=np.float32):
        d = config.embed_dim
        self.config = config
        self.q_proj = Linear(d, d, rng, dtype=dtype)
        self.k_proj = Linear(d, d, rng, dtype=dtype)
        self.v_proj = Linear(d, d, rng, dtype=dtype)
        self.out_proj = Linear(d, d, rng, dtype=dtype)
        self.ff1 = Linear(d, config.ff_dim, rng, dtype=dtype)
        self.ff2 = Linear(config.ff_dim, d, rng, dtype=dtype)
        self.ln_attn = LayerNorm(d, dtype=dtype)
        self.ln_ff = LayerNorm(d, dtype=dtype)

    def _split_heads(self, x: Tensor) -> Tensor:
        b, t, d = x.data.shape
        h = self.config.n_heads
        return T.swapaxes(T.reshape(x, (b, t, h, d // h)), 1, 2)

    def __call__(self, x: Tensor, attn_bias: np.ndarray | None,
                 train: bool, rng: np.random.Generator | None) -> Tensor:
        b, t, d = x.data.shape
        head_dim = d // self.config.n_heads
        q = self._split_heads(self.q_proj(x))
        k = self._split_heads(self.k_proj(x))
        v = self._split_heads(self.v_proj(x))
        scores = T.mul(T.matmul(q, T.swapaxes(k, 2, 3)),
                       np.asarray(1.0 / np.sqrt(head_dim), dtype=x.data.dtype))
        if attn_bias is not None:
            scores = T.add(scores, Tensor(attn_bias.astype(x.data.dtype)))
        attn = T.softmax(scores, axis=-1)
        if train and self.config.dropout > 0:
            attn = T.dropout(attn, self.config.dropout, rng)
        ctx = T.reshape(T.swapaxes(T.matmul(attn, v), 1, 2), (b, t, d))
        attn_out = self.out_proj(ctx)
        if train and self.config.dropout > 0:
            attn_out = T.dropout(attn_out, self.config.dropout, rng)
        x = self.ln_attn(T.add(x, attn_out))
        ff = self.ff2(T.relu(self.ff1(x)))
        if train and self.config.dropout > 0:
            ff = T.dropout(ff, self.config.dropout, rng)
        return self.ln_ff(T.add(x, ff))


class TransformerStack(Module):
    def __init__(self, config: EncoderConfig, rng: np.random.Generator,
                 dtype=np.float32):
        self.config = config
        self.layers = [TransformerLayer(config, rng, dtype)
                       for _ in range(config.n_layers)]
        self._positions = sinusoidal_positions(config.max_len, config.embed_dim,
                                               dtype)

    def __call__(self, x: Tensor, causal: bool,
                 attn_bias: np.ndarray | None = None,
                 train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        b, t, d = x.data.shape
        if t > self.config.max_len:
            raise DataError(
                f"sequence length {t} exceeds positional horizon "
                f"{self.config.max_len}"
            )
        x = T.mul(x, np.asarray(np.sqrt(d), dtype=x.data.dtype))
        x = T.add(x, Tensor(self._positions[None, :t]))
        if train and self.config.dropout > 0:
            x = T.dropout(x, self.config.dropout, rng)
        bias = causal_bias(t, x.data.dtype) if causal else None
        if attn_bias is not None:
            bias = attn_bias if bias is None else bias + attn_bias
        for layer in self.layers:
            x = layer(x, bias, train, rng)
        return x


# ---------------------------------------------------------------------------
# Full encoder model
# ---------------------------------------------------------------------------

class EncoderModel(Module):
    """Embedding plus encoder stack with a tied output projection.

    ``vocab_size`` counts all ids including specials. The output layer has
    no weights of its own: logits are inner products with the embedding
    rows, so embedding gradients arrive from both the input lookup and the
    output projection.
    """

    def __init__(self, config: EncoderConfig, vocab_size: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.config = config
        self.vocab_size = vocab_size
        self.embedding = Embedding(vocab_size, config.embed_dim, rng, dtype)
        if config.architecture == "lstm":
            self.encoder: Module = LstmStack(config, rng, dtype)
        else:
            self.encoder = TransformerStack(config, rng, dtype)

    def encode(self, ids: np.ndarray, causal: bool,
               pad_mask: np.ndarray | None = None,
               train: bool = False,
               rng: np.random.Generator | None = None,
               inputs: Tensor | None = None) -> Tensor:
        """Per-position vectors (B, T, embed_dim).

        ``inputs`` overrides the embedding lookup with externally built
        input vectors (used by downstream heads that feed the frozen
        encoder their own features).
        """
        if train and self.config.dropout > 0 and rng is None:
            raise ConfigError("training-mode encode needs an RNG for dropout")
        x = self.embedding(ids) if inputs is None else inputs
        attn_bias = None
        if pad_mask is not None and self.config.architecture == "transformer":
            attn_bias = padding_bias(np.asarray(pad_mask, dtype=bool),
                                     x.data.dtype)
        return self.encoder(x, causal=causal, attn_bias=attn_bias,
                            train=train, rng=rng)

    def logits(self, hidden: Tensor) -> Tensor:
        return tied_logits(hidden, self.embedding.weight)

    def encoder_parameters(self) -> list[tuple[str, Parameter]]:
        return [(f"encoder.{n}", p) for n, p in self.encoder.named_parameters()]

    def non_embedding_parameter_count(self) -> int:
        return sum(p.data.size for _, p in self.encoder_parameters())

    def freeze_encoder(self) -> None:
        self.encoder.set_requires_grad(False)

    def encoder_fingerprint(self) -> str:
        """SHA-256 over the encoder parameter bytes, for frozen-transfer checks."""
        import hashlib
        digest = hashlib.sha256()
        for name, p in sorted(self.encoder_parameters()):
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(p.data).tobytes())
        return digest.hexdigest()


def transformer_encode(model: EncoderModel, ids: np.ndarray, causal: bool,
                       **kwargs) -> Tensor:
    if model.config.architecture != "transformer":
        raise ConfigError("model is not a transformer")
    return model.encode(ids, causal=causal, **kwargs)


def lstm_encode(model: EncoderModel, ids: np.ndarray, **kwargs) -> Tensor:
    if model.config.architecture != "lstm":
        raise ConfigError("model is not an LSTM")
    return model.encode(ids, causal=True, **kwargs)
