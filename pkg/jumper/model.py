from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from jumper.exceptions import DimensionError, EmptyInput, InvalidAction, SchemaMismatch
from jumper.nn import (
    GRU_PARAM_NAMES,
    GRUCache,
    ParamStore,
    Tensor,
    affine,
    affine_backward,
    concat,
    concat_backward,
    conv1d,
    conv1d_backward,
    dropout,
    dropout_backward,
    embedding_backward,
    embedding_lookup,
    gru_step,
    gru_step_backward,
    max_pool_argmax,
    max_pool_backward,
    relu,
    relu_backward,
    softmax,
)
from jumper.rewards import sample_action
from jumper.text_data import PAD_ID, EmbeddingTable, Paragraph, SlotSchema
from jumper.types import FloatArray, IntArray, Precision

RolloutMode = Literal["greedy", "sample"]

logger = logging.getLogger(__name__)


@dataclass
class EncoderConfig:
    window_sizes: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    maps_per_window: int = 200
    dropout_p: float = 0.5
    embed_dim: int = 300

    def __post_init__(self):
        if not self.window_sizes or any(h < 1 for h in self.window_sizes):
            raise ValueError(f"Window sizes must be >= 1: {self.window_sizes}")
        if self.maps_per_window < 1 or self.embed_dim < 1:
            raise ValueError("maps_per_window and embed_dim must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must lie in [0, 1): {self.dropout_p}")

    @property
    def num_features(self) -> int:
        return len(self.window_sizes) * self.maps_per_window


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    hidden_size: int = 20
    sharing: bool = False
    fallback_non_default: bool = True
    precision: Precision = "float32"


@dataclass
class SentenceEncoding:
    c: Tensor
    """Features fed to the controller (dropout applied at train time)"""
    pooled: Tensor
    """Max-pooled features before dropout"""
    pool_argmax: IntArray
    """Start position of the winning window for every feature"""
    window_of_dim: IntArray
    token_ids: list[int]
    """Token ids after padding"""
    num_tokens: int
    """Real (unpadded) sentence length"""
    embedded: Tensor
    feature_maps: list[Tensor]
    activations: list[Tensor]
    pooled_parts: list[Tensor]
    dropout_mask: FloatArray | None

    def tensors(self) -> list[Tensor]:
        return [
            self.c,
            self.pooled,
            self.embedded,
            *self.feature_maps,
            *self.activations,
            *self.pooled_parts,
        ]


@dataclass(frozen=True)
class SymbolicState:
    """One-hot state of a slot; index 0 is "None"."""

    index: int
    num_actions: int

    @classmethod
    def none(cls, num_actions: int) -> SymbolicState:
        return cls(0, num_actions)

    @property
    def is_none(self) -> bool:
        return self.index == 0

    @property
    def vector(self) -> FloatArray:
        one_hot = np.zeros(self.num_actions)
        one_hot[self.index] = 1.0
        return one_hot


def symbolic_update(s_prev: SymbolicState, action: int) -> SymbolicState:
    """A slot may leave "None" once; after that the action is ignored."""
    if not 0 <= action < s_prev.num_actions:
        raise InvalidAction(action, s_prev.num_actions)
    if not s_prev.is_none:
        return s_prev
    return SymbolicState(int(action), s_prev.num_actions)


@dataclass
class ControllerOutput:
    h: Tensor
    dists: dict[str, FloatArray]
    gru_input: Tensor
    state_inputs: list[Tensor]
    gru_cache: GRUCache
    head_input: Tensor
    logits: dict[str, Tensor]
    probs: dict[str, Tensor]


@dataclass
class StepRecord:
    t: int
    encoding: SentenceEncoding
    controller: ControllerOutput
    actions: dict[str, int]
    states: dict[str, SymbolicState]

    @property
    def h(self) -> Tensor:
        return self.controller.h

    @property
    def dists(self) -> dict[str, FloatArray]:
        return self.controller.dists


@dataclass
class EpisodeTrace:
    slot_names: list[str]
    h0: Tensor
    steps: list[StepRecord] = field(default_factory=list)
    jump_steps: dict[str, int] = field(default_factory=dict)
    """1-based jump step per slot; T when the slot never jumped"""

    @property
    def T(self) -> int:
        return len(self.steps)

    def step(self, t: int) -> StepRecord:
        return self.steps[t - 1]

    def state(self, slot: str, t: int) -> SymbolicState:
        return self.steps[t - 1].states[slot]

    def final_state(self, slot: str) -> SymbolicState:
        return self.steps[-1].states[slot]

    def jumped(self, slot: str) -> bool:
        return not self.final_state(slot).is_none

    def actions(self, slot: str) -> list[int]:
        return [step.actions[slot] for step in self.steps]

    def dists(self, slot: str) -> list[FloatArray]:
        return [step.dists[slot] for step in self.steps]

    def zero_grad(self):
        self.h0.zero_grad()
        for step in self.steps:
            for tensor in step.encoding.tensors():
                tensor.zero_grad()
            out = step.controller
            for tensor in (out.h, out.gru_input, out.head_input, *out.state_inputs):
                tensor.zero_grad()
            for tensor in (*out.logits.values(), *out.probs.values()):
                tensor.zero_grad()


def final_prediction(trace: EpisodeTrace, slot: str, fallback_non_default: bool = False) -> int:
    """Final symbolic state, or the most likely non-"None" class of the last step"""
    index = trace.final_state(slot).index
    if index == 0 and fallback_non_default:
        last_dist = trace.steps[-1].dists[slot]
        index = 1 + int(np.argmax(last_dist[1:]))
    return index


class JumperModel:
    """CNN sentence encoder, GRU controller with per-slot policy heads, one-jump output layer

    Parameters (sorted names): `conv.b{h}`/`conv.w{h}` per window size h, `embedding`,
    `gru.{W,U,b}_{z,r,h}`, `policy.{slot}.W`/`policy.{slot}.b`.
    """

    def __init__(
        self,
        config: ModelConfig,
        schema: SlotSchema,
        vocab_size: int,
        seed: int = 0,
        embeddings: EmbeddingTable | None = None,
        params: ParamStore | None = None,
    ):
        self.config = config
        self.schema = schema
        self.vocab_size = vocab_size
        self.slot_names = schema.names()
        self.dtype = np.dtype(config.precision)

        if params is None:
            params = ParamStore(seed=seed, precision=config.precision)
            for name, shape in self.param_shapes():
                params.add(name, shape)
            params["embedding"].values[PAD_ID] = 0.0
            if embeddings is not None:
                self._load_embeddings(params, embeddings)
        else:
            expected = dict(self.param_shapes())
            if set(params.names()) != set(expected):
                mismatched = sorted(set(params.names()) ^ set(expected))
                raise SchemaMismatch(f"Parameters do not match the model: {mismatched}")
            for name, shape in expected.items():
                if params[name].shape != shape:
                    raise DimensionError(params[name].shape, shape, f"parameter '{name}'")
        self.params = params

    @property
    def encoder_config(self) -> EncoderConfig:
        return self.config.encoder

    @property
    def num_features(self) -> int:
        return self.config.encoder.num_features

    @property
    def shared_state_size(self) -> int:
        return sum(self.schema.num_actions(name) for name in self.slot_names)

    @property
    def gru_input_size(self) -> int:
        size = self.num_features
        if self.config.sharing:
            size += self.shared_state_size
        return size

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Parameter shapes in construction (and initialisation) order"""
        enc = self.config.encoder
        H = self.config.hidden_size
        shapes: list[tuple[str, tuple[int, ...]]] = [
            ("embedding", (self.vocab_size, enc.embed_dim))
        ]
        for h in enc.window_sizes:
            shapes.append((f"conv.w{h}", (enc.maps_per_window, h * enc.embed_dim)))
            shapes.append((f"conv.b{h}", (enc.maps_per_window,)))
        for gate in ("z", "r", "h"):
            shapes.append((f"gru.W_{gate}", (H, self.gru_input_size)))
            shapes.append((f"gru.U_{gate}", (H, H)))
            shapes.append((f"gru.b_{gate}", (H,)))
        for name in self.slot_names:
            num_actions = self.schema.num_actions(name)
            shapes.append((f"policy.{name}.W", (num_actions, self.num_features + H)))
            shapes.append((f"policy.{name}.b", (num_actions,)))
        return shapes

    def _load_embeddings(self, params: ParamStore, embeddings: EmbeddingTable):
        table = params["embedding"]
        if embeddings.matrix.shape != table.shape:
            raise DimensionError(embeddings.matrix.shape, table.shape, "pretrained embeddings")
        table.values[...] = embeddings.matrix
        table.values[PAD_ID] = 0.0

    @property
    def gru_params(self) -> dict[str, Tensor]:
        gru = self.params.slice("gru")
        return {name: gru[name] for name in GRU_PARAM_NAMES}

    def initial_states(self) -> dict[str, SymbolicState]:
        return {
            name: SymbolicState.none(self.schema.num_actions(name)) for name in self.slot_names
        }

    def none_actions(self, num_steps: int) -> list[dict[str, int]]:
        """Per-step actions that keep every slot in "None" (the ungated classifier)"""
        return [{name: 0 for name in self.slot_names} for _ in range(num_steps)]

    def encode_sentence(
        self,
        token_ids: Sequence[int],
        train_mode: bool = False,
        rng: np.random.Generator | None = None,
    ) -> SentenceEncoding:
        if len(token_ids) == 0:
            raise EmptyInput("Cannot encode an empty sentence.")
        enc = self.config.encoder

        num_tokens = len(token_ids)
        padded = list(token_ids) + [PAD_ID] * max(0, max(enc.window_sizes) - num_tokens)
        embedded = embedding_lookup(self.params["embedding"], padded)

        feature_maps, activations, pooled_parts, argmaxes, windows = [], [], [], [], []
        for h in enc.window_sizes:
            features = conv1d(embedded, self.params[f"conv.w{h}"], self.params[f"conv.b{h}"], h)
            activated = relu(features)
            pooled, indices = max_pool_argmax(activated)
            feature_maps.append(features)
            activations.append(activated)
            pooled_parts.append(pooled)
            argmaxes.append(indices)
            windows.append(np.full(enc.maps_per_window, h))

        pooled = concat(pooled_parts)
        c, mask = dropout(pooled, enc.dropout_p, rng, train_mode)

        return SentenceEncoding(
            c=c,
            pooled=pooled,
            pool_argmax=np.concatenate(argmaxes),
            window_of_dim=np.concatenate(windows),
            token_ids=padded,
            num_tokens=num_tokens,
            embedded=embedded,
            feature_maps=feature_maps,
            activations=activations,
            pooled_parts=pooled_parts,
            dropout_mask=mask,
        )

    def encode_paragraph(
        self,
        paragraph: Paragraph,
        train_mode: bool = False,
        rng: np.random.Generator | None = None,
    ) -> list[SentenceEncoding]:
        return [self.encode_sentence(tokens, train_mode, rng) for tokens in paragraph.sentences]

    def controller_step(
        self,
        h_prev: Tensor,
        encoding: SentenceEncoding,
        prev_states: Mapping[str, SymbolicState],
    ) -> ControllerOutput:
        if set(prev_states) != set(self.slot_names):
            raise SchemaMismatch(
                f"Expected states for slots {self.slot_names}, got {sorted(prev_states)}"
            )

        state_inputs = []
        if self.config.sharing:
            for name in self.slot_names:
                state = prev_states[name]
                if state.num_actions != self.schema.num_actions(name):
                    raise SchemaMismatch(
                        f"State of slot '{name}' has {state.num_actions} entries, "
                        f"expected {self.schema.num_actions(name)}"
                    )
                state_inputs.append(Tensor(state.vector, dtype=self.dtype))
            gru_input = concat([encoding.c, *state_inputs])
        else:
            gru_input = encoding.c

        h, gru_cache = gru_step(h_prev, gru_input, self.gru_params)
        head_input = concat([encoding.c, h])

        logits, probs, dists = {}, {}, {}
        for name in self.slot_names:
            logits[name] = affine(
                self.params[f"policy.{name}.W"], head_input, self.params[f"policy.{name}.b"]
            )
            probs[name] = softmax(logits[name])
            dists[name] = probs[name].values

        return ControllerOutput(
            h, dists, gru_input, state_inputs, gru_cache, head_input, logits, probs
        )

    def rollout(
        self,
        encodings: Sequence[SentenceEncoding],
        mode: RolloutMode = "greedy",
        epsilon: float = 0.0,
        rng: np.random.Generator | None = None,
        forced_actions: Sequence[Mapping[str, int]] | None = None,
    ) -> EpisodeTrace:
        """Run the controller over all sentences

        `forced_actions` replays given per-step actions instead of choosing them.
        """
        if not encodings:
            raise EmptyInput("Cannot roll out over zero sentences.")
        if forced_actions is not None and len(forced_actions) != len(encodings):
            raise ValueError("Need one set of forced actions per sentence")
        if mode == "sample" and rng is None and forced_actions is None:
            raise ValueError("Sampling needs a random generator")

        h0 = Tensor(np.zeros(self.config.hidden_size), dtype=self.dtype)
        trace = EpisodeTrace(slot_names=list(self.slot_names), h0=h0)
        states = self.initial_states()
        h = h0

        for t, encoding in enumerate(encodings, start=1):
            out = self.controller_step(h, encoding, states)
            actions, new_states = {}, {}
            for name in self.slot_names:
                dist = out.dists[name]
                if forced_actions is not None:
                    action = int(forced_actions[t - 1][name])
                elif mode == "greedy":
                    action = int(np.argmax(dist))
                else:
                    action = sample_action(dist, epsilon, rng)
                new_state = symbolic_update(states[name], action)
                if states[name].is_none and not new_state.is_none:
                    trace.jump_steps[name] = t
                actions[name] = action
                new_states[name] = new_state

            trace.steps.append(StepRecord(t, encoding, out, actions, new_states))
            states = new_states
            h = out.h

        for name in self.slot_names:
            trace.jump_steps.setdefault(name, trace.T)

        return trace

    def forward_paragraph(
        self,
        paragraph: Paragraph,
        mode: RolloutMode = "greedy",
        epsilon: float = 0.0,
        rng: np.random.Generator | None = None,
        train_mode: bool = False,
        forced_actions: Sequence[Mapping[str, int]] | None = None,
    ) -> EpisodeTrace:
        encodings = self.encode_paragraph(paragraph, train_mode=train_mode, rng=rng)
        return self.rollout(encodings, mode, epsilon, rng, forced_actions)

    def backward(
        self,
        trace: EpisodeTrace,
        logit_grads: Mapping[tuple[int, str], FloatArray],
        through_encoder: bool = True,
    ):
        """Backpropagate gradients given on policy logits, keyed by (step, slot)

        Parameter gradients are accumulated into `self.params`. With
        `through_encoder=False` the pass stops at the sentence features, whose `c.grad`
        then holds the gradient with respect to every step's encoding.
        """
        trace.zero_grad()
        if not logit_grads:
            return
        last_step = max(t for t, _ in logit_grads)

        for step in reversed(trace.steps[:last_step]):
            out = step.controller
            for name in self.slot_names:
                grad = logit_grads.get((step.t, name))
                if grad is None:
                    continue
                logits = out.logits[name]
                logits.grad += grad
                affine_backward(
                    self.params[f"policy.{name}.W"],
                    out.head_input,
                    self.params[f"policy.{name}.b"],
                    logits,
                )
            concat_backward([step.encoding.c, out.h], out.head_input)
            gru_step_backward(out.gru_cache, out.h)
            if self.config.sharing:
                concat_backward([step.encoding.c, *out.state_inputs], out.gru_input)
            if through_encoder:
                self._encoder_backward(step.encoding)

        # PAD stays an inert zero row
        self.params["embedding"].grad[PAD_ID] = 0.0

    def _encoder_backward(self, encoding: SentenceEncoding):
        maps = self.config.encoder.maps_per_window
        dropout_backward(encoding.pooled, encoding.c, encoding.dropout_mask)
        concat_backward(encoding.pooled_parts, encoding.pooled)
        for i, h in enumerate(self.config.encoder.window_sizes):
            indices = encoding.pool_argmax[i * maps : (i + 1) * maps]
            max_pool_backward(encoding.activations[i], encoding.pooled_parts[i], indices)
            relu_backward(encoding.feature_maps[i], encoding.activations[i])
            conv1d_backward(
                encoding.embedded,
                self.params[f"conv.w{h}"],
                self.params[f"conv.b{h}"],
                h,
                encoding.feature_maps[i],
            )
        embedding_backward(self.params["embedding"], encoding.token_ids, encoding.embedded)
