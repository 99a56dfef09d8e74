"""Embedding, gated recurrent cells, the training loop, and sampling.

A model is an embedding table, a stack of identical gated cells, and a
linear projection to vocabulary logits; everything trains jointly by
taping the unrolled sequence and running Adam on the summed cross-entropy.
Weight blocks are stored (input_size + hidden, hidden) and applied as
[x, h] @ W + b, one block per gate.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core import DatasetVariant, Song, TrainingCorpus, Vocabulary, interval_to_song, song_to_interval
from .errors import (
    BadToken,
    CorpusTooSmall,
    MalformedFile,
    ShapeMismatch,
    UnknownSeedToken,
)
from .tensor import NO_TAPE, AdamState, GradientTape, Tensor, adam_step, clip_gradients, softmax

MAX_LAYERS = 5
CHECKPOINT_FORMAT = "melodykit-checkpoint"
CHECKPOINT_VERSION = 1

# Internal per-layer recurrent state: (h, c) Tensors, c is None for
# cells that keep no separate memory lane.
_StatePair = tuple[Tensor, "Tensor | None"]


def _lstm_step(tape: GradientTape, x: Tensor, state: _StatePair, p: "CellParams") -> tuple[Tensor, _StatePair]:
    h, c = state
    xh = tape.concat(x, h)
    f = tape.sigmoid(tape.add_bias(tape.matmul(xh, p.weights[0]), p.biases[0]))
    i = tape.sigmoid(tape.add_bias(tape.matmul(xh, p.weights[1]), p.biases[1]))
    g = tape.tanh(tape.add_bias(tape.matmul(xh, p.weights[2]), p.biases[2]))
    o = tape.sigmoid(tape.add_bias(tape.matmul(xh, p.weights[3]), p.biases[3]))
    c_new = tape.add(tape.mul(f, c), tape.mul(i, g))
    h_new = tape.mul(o, tape.tanh(c_new))
    return h_new, (h_new, c_new)


def _ugrnn_step(tape: GradientTape, x: Tensor, state: _StatePair, p: "CellParams") -> tuple[Tensor, _StatePair]:
    h, _ = state
    xh = tape.concat(x, h)
    g = tape.sigmoid(tape.add_bias(tape.matmul(xh, p.weights[0]), p.biases[0]))
    c = tape.tanh(tape.add_bias(tape.matmul(xh, p.weights[1]), p.biases[1]))
    h_new = tape.add(tape.mul(g, h), tape.mul(tape.one_minus(g), c))
    return h_new, (h_new, None)


@dataclass(frozen=True)
class CellSpec:
    """A registered cell kind: gate blocks in declaration order plus the step."""

    name: str
    gates: tuple[str, ...]
    has_memory: bool
    step: Callable


CELL_TYPES: dict[str, CellSpec] = {}


def register_cell(spec: CellSpec) -> None:
    CELL_TYPES[spec.name] = spec


register_cell(CellSpec("lstm", ("forget", "input", "candidate", "output"), True, _lstm_step))
register_cell(CellSpec("ugrnn", ("update", "candidate"), False, _ugrnn_step))
# "nas" is reserved for a searched cell; register one here to add it.


def cell_spec(kind: str) -> CellSpec:
    try:
        return CELL_TYPES[kind]
    except KeyError:
        raise ValueError(f"unknown cell kind {kind!r}; known: {sorted(CELL_TYPES)}") from None


@dataclass
class CellParams:
    """Per-gate weight and bias blocks for one layer."""

    kind: str
    weights: list[Tensor]
    biases: list[Tensor]

    @property
    def hidden_size(self) -> int:
        return self.weights[0].value.shape[1]

    @property
    def input_size(self) -> int:
        return self.weights[0].value.shape[0] - self.hidden_size


def init_cell_params(
    kind: str,
    input_size: int,
    hidden_size: int,
    rng: np.random.Generator,
    init_scale: float = 0.08,
) -> CellParams:
    """Uniform [-init_scale, init_scale] weights, zero biases.

    The LSTM forget-gate bias starts at 1.0 so early training does not
    flush the memory lane.
    """
    spec = cell_spec(kind)
    rows = input_size + hidden_size
    weights = [Tensor(rng.uniform(-init_scale, init_scale, size=(rows, hidden_size))) for _ in spec.gates]
    biases = [Tensor(np.zeros(hidden_size)) for _ in spec.gates]
    if kind == "lstm":
        biases[0].value[:] = 1.0
    return CellParams(kind=kind, weights=weights, biases=biases)


@dataclass
class CellState:
    """Recurrent state of one layer; c is None for memory-less cells."""

    h: np.ndarray
    c: np.ndarray | None = None


@dataclass
class ModelState:
    """Everything a trained model needs to predict: weights plus token map."""

    cell: str
    embedding: Tensor
    layers: list[CellParams]
    proj_w: Tensor
    proj_b: Tensor
    vocabulary: Vocabulary
    variant: DatasetVariant

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def hidden_size(self) -> int:
        return self.layers[0].hidden_size

    @property
    def embedding_dim(self) -> int:
        return self.embedding.value.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embedding.value.shape[0]

    def parameters(self) -> list[Tensor]:
        """Checkpoint order: embedding, per-layer gate blocks (W then b), projection W, b."""
        out = [self.embedding]
        for layer in self.layers:
            for w, b in zip(layer.weights, layer.biases):
                out.extend([w, b])
        out.extend([self.proj_w, self.proj_b])
        return out


def init_model(
    vocabulary: Vocabulary,
    variant: DatasetVariant,
    cell: str = "lstm",
    num_layers: int = 1,
    hidden_size: int = 128,
    embedding_dim: int = 64,
    rng: np.random.Generator | int | None = None,
    init_scale: float = 0.08,
) -> ModelState:
    if not (1 <= num_layers <= MAX_LAYERS):
        raise ValueError(f"num_layers must be in [1, {MAX_LAYERS}], got {num_layers}")
    cell_spec(cell)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(0 if rng is None else rng)
    vocab_size = vocabulary.size
    embedding = Tensor(rng.uniform(-init_scale, init_scale, size=(vocab_size, embedding_dim)))
    layers = []
    for i in range(num_layers):
        in_size = embedding_dim if i == 0 else hidden_size
        layers.append(init_cell_params(cell, in_size, hidden_size, rng, init_scale))
    proj_w = Tensor(rng.uniform(-init_scale, init_scale, size=(hidden_size, vocab_size)))
    proj_b = Tensor(np.zeros(vocab_size))
    return ModelState(
        cell=cell, embedding=embedding, layers=layers,
        proj_w=proj_w, proj_b=proj_b, vocabulary=vocabulary, variant=variant,
    )


def embed(token_id: int, embedding: Tensor | np.ndarray) -> np.ndarray:
    """Row of the embedding table for one token id."""
    table = embedding.value if isinstance(embedding, Tensor) else np.asarray(embedding)
    if not (0 <= token_id < table.shape[0]):
        raise BadToken(f"token id {token_id} outside [0, {table.shape[0]})")
    return table[token_id]


def _check_step_shapes(x_width: int, h_width: int, p: CellParams) -> None:
    if x_width + h_width != p.weights[0].value.shape[0] or h_width != p.hidden_size:
        raise ShapeMismatch(
            f"cell expects input {p.input_size} + hidden {p.hidden_size}, got {x_width} + {h_width}"
        )


def lstm_step(x: np.ndarray, state: CellState, params: CellParams) -> tuple[np.ndarray, CellState]:
    """One LSTM step on 1-D vectors; returns (new h, new state)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _check_step_shapes(x.shape[0], state.h.shape[0], params)
    pair = (Tensor(state.h[None, :]), Tensor(state.c[None, :]))
    h, (hn, cn) = _lstm_step(NO_TAPE, Tensor(x[None, :]), pair, params)
    return h.value[0], CellState(h=hn.value[0], c=cn.value[0])


def ugrnn_step(x: np.ndarray, state: CellState, params: CellParams) -> tuple[np.ndarray, CellState]:
    """One UGRNN step on 1-D vectors; returns (new h, new state)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _check_step_shapes(x.shape[0], state.h.shape[0], params)
    pair = (Tensor(state.h[None, :]), None)
    h, (hn, _) = _ugrnn_step(NO_TAPE, Tensor(x[None, :]), pair, params)
    return h.value[0], CellState(h=hn.value[0], c=None)


def _zero_state_pairs(model: ModelState, batch: int) -> list[_StatePair]:
    spec = cell_spec(model.cell)
    pairs: list[_StatePair] = []
    for layer in model.layers:
        h = Tensor(np.zeros((batch, layer.hidden_size)))
        c = Tensor(np.zeros((batch, layer.hidden_size))) if spec.has_memory else None
        pairs.append((h, c))
    return pairs


def _step(tape: GradientTape, model: ModelState, ids: np.ndarray, pairs: list[_StatePair]):
    """One time step for a batch of token ids: embed, stack, project."""
    spec = cell_spec(model.cell)
    v = tape.lookup(model.embedding, ids)
    new_pairs: list[_StatePair] = []
    for layer, pair in zip(model.layers, pairs):
        v, pair = spec.step(tape, v, pair, layer)
        new_pairs.append(pair)
    logits = tape.add_bias(tape.matmul(v, model.proj_w), model.proj_b)
    return logits, new_pairs


def initial_states(model: ModelState) -> list[CellState]:
    spec = cell_spec(model.cell)
    return [
        CellState(
            h=np.zeros(layer.hidden_size),
            c=np.zeros(layer.hidden_size) if spec.has_memory else None,
        )
        for layer in model.layers
    ]


def stack_forward(
    token_ids, model: ModelState, states: list[CellState] | None = None
) -> tuple[np.ndarray, list[CellState]]:
    """Run a token sequence through the stack; returns (logits (T, V), final states).

    Feeding one long sequence equals feeding it piecewise with the carried
    states, so samplers can stream token by token.
    """
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ValueError("token_ids must be a non-empty 1-D sequence")
    if (ids < 0).any() or (ids >= model.vocab_size).any():
        bad = ids[(ids < 0) | (ids >= model.vocab_size)][0]
        raise BadToken(f"token id {int(bad)} outside [0, {model.vocab_size})")
    if states is None:
        pairs = _zero_state_pairs(model, 1)
    else:
        if len(states) != model.num_layers:
            raise ShapeMismatch(f"expected {model.num_layers} layer states, got {len(states)}")
        spec = cell_spec(model.cell)
        pairs = [
            (Tensor(s.h[None, :]), Tensor(s.c[None, :]) if spec.has_memory else None)
            for s in states
        ]
    rows = []
    for t in range(ids.size):
        logits, pairs = _step(NO_TAPE, model, ids[t : t + 1], pairs)
        rows.append(logits.value[0])
    out_states = [
        CellState(h=h.value[0].copy(), c=c.value[0].copy() if c is not None else None)
        for h, c in pairs
    ]
    return np.vstack(rows), out_states


@dataclass
class TrainConfig:
    """Model and optimisation settings for one training run."""

    cell: str = "lstm"
    num_layers: int = 1
    hidden_size: int = 128
    embedding_dim: int = 64
    batch_size: int = 50
    seq_len: int = 50
    epochs: int = 300
    learning_rate: float = 0.002
    lr_decay: float = 0.97
    clip_norm: float = 5.0
    init_scale: float = 0.08
    max_iterations: int | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.seq_len < 1:
            raise ValueError("batch_size and seq_len must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


LearningCurve = list[tuple[int, float]]


def train(corpus: TrainingCorpus, config: TrainConfig, seed: int = 0) -> tuple[ModelState, LearningCurve]:
    """Train a fresh model on the corpus; returns (model, per-iteration curve).

    The token stream splits into batch_size contiguous lanes; each
    iteration consumes one seq_len window across all lanes, sums the
    per-step cross-entropies, clips the global gradient norm, and takes
    one Adam step.  States carry across windows within an epoch and reset
    at epoch start.  The curve records the per-token loss, i.e. the
    window sum divided by batch_size * seq_len.
    """
    rng = np.random.default_rng(seed)
    model = init_model(
        corpus.vocabulary, corpus.variant,
        cell=config.cell, num_layers=config.num_layers,
        hidden_size=config.hidden_size, embedding_dim=config.embedding_dim,
        rng=rng, init_scale=config.init_scale,
    )
    B, T = config.batch_size, config.seq_len
    L = int(corpus.x.size)
    if L < B * T:
        raise CorpusTooSmall(
            f"stream of {L + 1} tokens cannot fill one {B}x{T} window; need {B * T + 1}"
        )
    lane_len = L // B
    X = corpus.x[: B * lane_len].reshape(B, lane_len)
    Y = corpus.y[: B * lane_len].reshape(B, lane_len)
    windows = lane_len // T
    params = model.parameters()
    opt = AdamState.for_params([p.value for p in params], lr=config.learning_rate)
    curve: LearningCurve = []
    iteration = 0
    stop = False
    for epoch in range(config.epochs):
        if stop:
            break
        opt.lr = config.learning_rate * (config.lr_decay ** epoch)
        pairs = _zero_state_pairs(model, B)
        for w in range(windows):
            tape = GradientTape()
            total: Tensor | None = None
            for t in range(T):
                col = w * T + t
                logits, pairs = _step(tape, model, X[:, col], pairs)
                step_loss = tape.cross_entropy(logits, Y[:, col])
                total = step_loss if total is None else tape.add(total, step_loss)
            tape.backward(total)
            grads = [p.grad if p.grad is not None else np.zeros_like(p.value) for p in params]
            grads = clip_gradients(grads, config.clip_norm)
            adam_step([p.value for p in params], grads, opt)
            for p in params:
                p.grad = None
            iteration += 1
            curve.append((iteration, float(total.value) / (B * T)))
            # Detach states between windows: values carry, gradients do not.
            pairs = [(Tensor(h.value), Tensor(c.value) if c is not None else None) for h, c in pairs]
            if config.max_iterations is not None and iteration >= config.max_iterations:
                stop = True
                break
    return model, curve


def _pick(logits: np.ndarray, mode: str, temperature: float, rng: np.random.Generator) -> int:
    if mode == "greedy":
        return int(np.argmax(logits))
    probs = softmax(logits / temperature)
    probs = probs / probs.sum()
    return int(rng.choice(probs.shape[0], p=probs))


def sample(
    model: ModelState,
    seed_song: Song,
    n: int,
    mode: str = "greedy",
    temperature: float = 1.0,
    rng: np.random.Generator | int | None = None,
) -> Song:
    """Warm the model on the seed, then generate n tokens feeding back.

    The returned song is the seed with the decoded continuation appended;
    interval models rebuild notes from the seed's last pitch.
    """
    if mode not in ("greedy", "temperature"):
        raise ValueError(f"mode must be 'greedy' or 'temperature', got {mode!r}")
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return list(seed_song)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(0 if rng is None else rng)

    if model.variant is DatasetVariant.INTERVAL:
        seed_tokens = song_to_interval(seed_song)
    else:
        seed_tokens = list(seed_song)
    for tok in seed_tokens:
        if tok not in model.vocabulary:
            raise UnknownSeedToken(f"seed token {tok} not in the model vocabulary")
    ids = model.vocabulary.encode(seed_tokens)

    logits, states = stack_forward(ids, model, None)
    cur = _pick(logits[-1], mode, temperature, rng)
    generated = [cur]
    for _ in range(n - 1):
        logits, states = stack_forward([cur], model, states)
        cur = _pick(logits[-1], mode, temperature, rng)
        generated.append(cur)
    tokens = model.vocabulary.decode(generated)

    if model.variant is DatasetVariant.INTERVAL:
        rebuilt = interval_to_song(seed_song[-1], tokens)
        return list(seed_song) + rebuilt[1:]
    return list(seed_song) + tokens


def save_checkpoint(model: ModelState, path: str | Path) -> None:
    """Write a one-line JSON header, newline, then the little-endian float64 blob.

    Blob order matches ModelState.parameters(): embedding rows, each
    layer's gate blocks in declaration order (W then b per gate), then
    projection W and b.  The header carries a sha256 of the blob.
    """
    blob = b"".join(p.value.astype("<f8").tobytes() for p in model.parameters())
    header = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_VERSION,
        "cell": model.cell,
        "num_layers": model.num_layers,
        "hidden_size": model.hidden_size,
        "embedding_dim": model.embedding_dim,
        "variant": model.variant.value,
        "vocabulary": [int(t) for t in model.vocabulary.tokens],
        "param_count": sum(p.value.size for p in model.parameters()),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(blob)


def load_checkpoint(path: str | Path) -> ModelState:
    """Rebuild a ModelState from a checkpoint file; verifies the checksum."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise MalformedFile(f"{path}: missing header line")
    try:
        header = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"{path}: bad header ({exc})") from exc
    if header.get("format") != CHECKPOINT_FORMAT:
        raise MalformedFile(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise MalformedFile(f"{path}: unsupported format version {header.get('format_version')}")
    blob = data[nl + 1 :]
    if hashlib.sha256(blob).hexdigest() != header["blob_sha256"]:
        raise MalformedFile(f"{path}: checksum mismatch (truncated or corrupted)")
    flat = np.frombuffer(blob, dtype="<f8")
    if flat.size != header["param_count"]:
        raise MalformedFile(f"{path}: expected {header['param_count']} values, found {flat.size}")

    vocabulary = Vocabulary(tokens=tuple(int(t) for t in header["vocabulary"]))
    spec = cell_spec(header["cell"])
    hidden = int(header["hidden_size"])
    emb_dim = int(header["embedding_dim"])
    vocab_size = vocabulary.size

    pos = 0

    def take(shape: tuple[int, ...]) -> Tensor:
        nonlocal pos
        size = int(np.prod(shape))
        arr = flat[pos : pos + size].reshape(shape).astype(np.float64)
        pos += size
        return Tensor(arr)

    embedding = take((vocab_size, emb_dim))
    layers = []
    for i in range(int(header["num_layers"])):
        in_size = emb_dim if i == 0 else hidden
        weights, biases = [], []
        for _ in spec.gates:
            weights.append(take((in_size + hidden, hidden)))
            biases.append(take((hidden,)))
        layers.append(CellParams(kind=header["cell"], weights=weights, biases=biases))
    proj_w = take((hidden, vocab_size))
    proj_b = take((vocab_size,))
    return ModelState(
        cell=header["cell"], embedding=embedding, layers=layers,
        proj_w=proj_w, proj_b=proj_b, vocabulary=vocabulary,
        variant=DatasetVariant(header["variant"]),
    )
