"""Conditional autoregressive vocoder over mu-law codes.

Stacked gated residual blocks of 2x1 dilated causal convolutions predict
the next 8-bit waveform code from strictly past codes plus a frame-level
conditioning vector upsampled to sample rate.  One model class covers the
whole lifecycle: speaker-independent training on pooled speakers,
whole-network fine-tuning on one target's pairs, teacher-forced scoring,
and sequential generation with per-layer ring buffers.

The output head starts at zero, so an untrained model scores exactly
ln(256) nats per sample (a uniform categorical), which doubles as a
calibration check of the loss units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as vrng
from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .features import FeatureTrack
from .mulaw import mu_law_decode, mu_law_encode
from .optim import AdamState, adam_step
from .tensor import Tensor
from .wavio import Waveform

START_CODE = 128   # zero-level code conditioning the first prediction

PROVENANCE_SI = "SI"
PROVENANCE_NATURAL = "finetuned-natural"
PROVENANCE_RECONSTRUCTED = "finetuned-reconstructed"
PROVENANCE_RECONSTRUCTED_GV = "finetuned-reconstructed-GV"
PROVENANCES = (PROVENANCE_SI, PROVENANCE_NATURAL, PROVENANCE_RECONSTRUCTED,
               PROVENANCE_RECONSTRUCTED_GV)


class WaveNetError(RuntimeError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"training loss became non-finite at step {step}")
        self.step = step


@dataclass
class WaveNetConfig:
    n_stacks: int = 2
    dilations: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64)
    residual_channels: int = 32
    skip_channels: int = 64
    conditioning_dim: int = 37
    quantization: int = 256

    def __post_init__(self):
        if self.n_stacks < 1 or not self.dilations:
            raise WaveNetError("need at least one stack of one dilation")
        if any(d < 1 for d in self.dilations):
            raise WaveNetError("dilations must be positive")
        if min(self.residual_channels, self.skip_channels,
               self.conditioning_dim, self.quantization) < 1:
            raise WaveNetError("channel counts must be positive")

    def layer_dilations(self) -> list[int]:
        return list(self.dilations) * self.n_stacks


def receptive_field(config: WaveNetConfig) -> int:
    """r = 1 + sum of all layer dilations (kernel width 2)."""
    return 1 + sum(config.layer_dilations())


@dataclass
class ConditioningPlan:
    """Per-sample auxiliary vectors [dim, length], physical units."""

    features: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise WaveNetError(f"conditioning must be [dim, time], got {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise WaveNetError("conditioning contains non-finite values")

    def __len__(self) -> int:
        return self.features.shape[1]


def upsample_conditioning(track: FeatureTrack, sample_rate: int) -> ConditioningPlan:
    """Nearest-frame duplication of the track to sample rate.

    Per frame: 34 cepstral dims, total log energy (cepstral dim 0 plus the
    log unit-sum factor), continuous log-f0 (interpolated through unvoiced
    stretches), and the voicing flag.  Length is frames * samples-per-frame.
    """
    if track.n_frames == 0:
        raise WaveNetError("cannot upsample an empty track")
    spf = track.samples_per_frame(sample_rate)
    energy = track.mcc[:, 0] + np.log(track.energy_factor)
    per_frame = np.column_stack([
        track.mcc[:, 1:35],
        energy,
        track.continuous_log_f0(),
        track.voiced.astype(np.float64),
    ])
    return ConditioningPlan(np.repeat(per_frame, spf, axis=0).T)


@dataclass
class AdaptationSet:
    """Fine-tuning material: one target speaker, one feature kind."""

    speaker: str
    kind: str                      # feature kind of every track
    gv_filtered: bool
    pairs: list[tuple[FeatureTrack, Waveform]]

    def __post_init__(self):
        if not self.pairs:
            raise WaveNetError("adaptation set is empty")
        kinds = {t.kind for t, _ in self.pairs}
        if kinds != {self.kind}:
            raise WaveNetError(f"mixed feature kinds in adaptation set: {kinds}")

    def provenance(self) -> str:
        if self.kind == "natural":
            return PROVENANCE_NATURAL
        if self.gv_filtered:
            return PROVENANCE_RECONSTRUCTED_GV
        return PROVENANCE_RECONSTRUCTED


class WaveNetModel:
    def __init__(self, config: WaveNetConfig, cond_mean: np.ndarray,
                 cond_std: np.ndarray, params: dict[str, Tensor] | None = None,
                 provenance: str = PROVENANCE_SI, seed: int = 0,
                 zero_output_head: bool = True, init_scale: float = 1.0):
        self.config = config
        self.cond_mean = np.asarray(cond_mean, dtype=np.float64)
        self.cond_std = np.asarray(cond_std, dtype=np.float64)
        if self.cond_mean.shape != (config.conditioning_dim,) or \
                self.cond_std.shape != (config.conditioning_dim,):
            raise WaveNetError("conditioning stats must match conditioning_dim")
        if np.any(self.cond_std <= 0):
            raise WaveNetError("conditioning std must be positive")
        if provenance not in PROVENANCES:
            raise WaveNetError(f"unknown provenance tag {provenance!r}")
        self.provenance = provenance
        self.params = params if params is not None else self._init_params(
            seed, zero_output_head, init_scale)

    def _init_params(self, seed: int, zero_head: bool, scale: float) -> dict[str, Tensor]:
        cfg = self.config
        gen = vrng.stream(seed, vrng.TAG_INIT, 2)
        r, s, c = cfg.residual_channels, cfg.skip_channels, cfg.conditioning_dim

        def mk(name, *shape, fan_in, zero=False):
            if zero:
                w = np.zeros(shape)
            else:
                w = gen.standard_normal(shape) * scale / np.sqrt(fan_in)
            return name, Tensor(w, requires_grad=True, name=name)

        items = [mk("embed", cfg.quantization, r, fan_in=1, zero=False)]
        for i, _ in enumerate(cfg.layer_dilations()):
            items += [
                mk(f"l{i}.conv.w", 2, 2 * r, r, fan_in=2 * r),
                mk(f"l{i}.conv.b", 2 * r, 1, fan_in=1, zero=True),
                mk(f"l{i}.cond.w", 2 * r, c, fan_in=c),
                mk(f"l{i}.res.w", r, r, fan_in=r),
                mk(f"l{i}.res.b", r, 1, fan_in=1, zero=True),
                mk(f"l{i}.skip.w", s, r, fan_in=r),
                mk(f"l{i}.skip.b", s, 1, fan_in=1, zero=True),
            ]
        items += [
            mk("out1.w", s, s, fan_in=s),
            mk("out1.b", s, 1, fan_in=1, zero=True),
            mk("out2.w", cfg.quantization, s, fan_in=s, zero=zero_head),
            mk("out2.b", cfg.quantization, 1, fan_in=1, zero=True),
        ]
        return dict(items)

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def normalize_cond(self, cond: np.ndarray) -> np.ndarray:
        return (cond - self.cond_mean[:, None]) / self.cond_std[:, None]

    def logits(self, input_codes: np.ndarray, cond_norm: np.ndarray) -> Tensor:
        """Teacher-forced forward: codes [b, t] -> logits [b, levels, t].

        `cond_norm` is the normalized conditioning, [b, dim, t].
        """
        cfg = self.config
        p = self.params
        r = cfg.residual_channels
        h = T.embedding(p["embed"], input_codes)
        cond_t = Tensor(cond_norm)
        skip_total = None
        for i, d in enumerate(cfg.layer_dilations()):
            pre = T.conv1d_causal(h, p[f"l{i}.conv.w"], p[f"l{i}.conv.b"], d)
            pre = T.add(pre, T.matmul(p[f"l{i}.cond.w"], cond_t))
            filt = T.tanh(T.narrow(pre, -2, 0, r))
            gate = T.sigmoid(T.narrow(pre, -2, r, r))
            z = T.mul(filt, gate)
            h = T.add(h, T.conv1x1(z, p[f"l{i}.res.w"], p[f"l{i}.res.b"]))
            sk = T.conv1x1(z, p[f"l{i}.skip.w"], p[f"l{i}.skip.b"])
            skip_total = sk if skip_total is None else T.add(skip_total, sk)
        out = T.relu(skip_total)
        out = T.relu(T.conv1x1(out, p["out1.w"], p["out1.b"]))
        return T.conv1x1(out, p["out2.w"], p["out2.b"])

    # -- persistence

    def save(self, path: str | Path) -> None:
        cfg = self.config
        meta = {
            "kind": "wavenet",
            "provenance": self.provenance,
            "n_stacks": str(cfg.n_stacks),
            "dilations": ",".join(str(d) for d in cfg.dilations),
            "residual_channels": str(cfg.residual_channels),
            "skip_channels": str(cfg.skip_channels),
            "conditioning_dim": str(cfg.conditioning_dim),
            "quantization": str(cfg.quantization),
        }
        arrays = {name: p.data for name, p in self.params.items()}
        arrays["cond.mean"] = self.cond_mean
        arrays["cond.std"] = self.cond_std
        save_checkpoint(path, meta, arrays)

    @classmethod
    def load(cls, path: str | Path) -> "WaveNetModel":
        meta, arrays = load_checkpoint(path)
        if meta.get("kind") != "wavenet":
            raise WaveNetError(f"{path} is not a WaveNet checkpoint")
        cfg = WaveNetConfig(
            n_stacks=int(meta["n_stacks"]),
            dilations=tuple(int(d) for d in meta["dilations"].split(",")),
            residual_channels=int(meta["residual_channels"]),
            skip_channels=int(meta["skip_channels"]),
            conditioning_dim=int(meta["conditioning_dim"]),
            quantization=int(meta["quantization"]),
        )
        mean = arrays.pop("cond.mean")
        std = arrays.pop("cond.std")
        params = {name: Tensor(arr, requires_grad=True, name=name)
                  for name, arr in arrays.items()}
        return cls(cfg, mean, std, params=params, provenance=meta["provenance"])

    def clone(self, provenance: str | None = None) -> "WaveNetModel":
        params = {name: Tensor(p.data.copy(), requires_grad=True, name=name)
                  for name, p in self.params.items()}
        return WaveNetModel(self.config, self.cond_mean.copy(),
                            self.cond_std.copy(), params=params,
                            provenance=provenance or self.provenance)


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

def paired_codes_and_cond(track: FeatureTrack, wave: Waveform):
    """Mu-law codes + conditioning for one (track, waveform) pair.

    The waveform is zero-padded to frames * samples-per-frame, the only
    length adjustment ever applied; no time alignment happens anywhere.
    """
    plan = upsample_conditioning(track, wave.sample_rate)
    n = len(plan)
    if len(wave) > n:
        raise WaveNetError(
            f"waveform ({len(wave)}) longer than conditioning ({n}); "
            "track and audio do not belong together")
    samples = np.zeros(n)
    samples[:len(wave)] = wave.samples
    codes = mu_law_encode(samples)
    return codes, plan.features


def teacher_forced_nll(model: WaveNetModel, wave: Waveform,
                       plan: ConditioningPlan) -> float:
    """Mean negative log-likelihood (nats/sample) of a waveform."""
    if len(plan) != len(wave):
        raise WaveNetError(
            f"plan length {len(plan)} != waveform length {len(wave)}")
    codes = mu_law_encode(wave.samples)
    cond = model.normalize_cond(plan.features)
    with T.no_grad():
        return _sequence_nll(model, codes, cond).item()


def _sequence_nll(model: WaveNetModel, codes: np.ndarray,
                  cond_norm: np.ndarray) -> Tensor:
    inputs = np.concatenate([[START_CODE], codes[:-1]])
    logits = model.logits(inputs[None, :], cond_norm[None, :, :])
    return T.softmax_cross_entropy(logits, codes[None, :])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainSpec:
    steps: int = 600
    batch: int = 2
    segment_len: int = 2400
    lr: float = 1e-3
    eval_interval: int = 100
    eval_pairs: int = 3               # utterances scored per eval point
    target_nll: float | None = None   # optional early stop for fine-tuning


def conditioning_stats(pairs) -> tuple[np.ndarray, np.ndarray]:
    """Per-dim mean/std of raw conditioning over a list of (track, wave)."""
    cols = [upsample_conditioning(t, w.sample_rate).features for t, w in pairs]
    allc = np.concatenate(cols, axis=1)
    return allc.mean(axis=1), np.maximum(allc.std(axis=1), 1e-6)


def train_si(pairs_by_speaker: dict[str, list[tuple[FeatureTrack, Waveform]]],
             config: WaveNetConfig | None = None,
             spec: TrainSpec | None = None, seed: int = 0,
             log=None) -> tuple[WaveNetModel, dict]:
    """Speaker-independent training: all speakers pooled, no speaker input."""
    if len(pairs_by_speaker) < 2:
        raise WaveNetError("SI training needs at least 2 speakers")
    cfg = config or WaveNetConfig()
    sp = spec or TrainSpec()
    flat = [pair for spk in sorted(pairs_by_speaker)
            for pair in pairs_by_speaker[spk]]
    mean, std = conditioning_stats(flat)
    model = WaveNetModel(cfg, mean, std, seed=seed, provenance=PROVENANCE_SI)
    history = _fit(model, flat, sp, seed, log)
    return model, history


def finetune(model: WaveNetModel, adapt: AdaptationSet,
             spec: TrainSpec | None = None, seed: int = 0,
             log=None) -> tuple[WaveNetModel, dict]:
    """Whole-network fine-tuning of an SI model on one speaker's pairs.

    Conditioning normalization stays frozen at the SI statistics so scores
    remain comparable across variants.  Zero steps returns an identical
    parameter set under the new provenance tag.
    """
    sp = spec or TrainSpec(steps=300)
    tuned = model.clone(provenance=adapt.provenance())
    history = _fit(tuned, adapt.pairs, sp, seed, log)
    return tuned, history


def _fit(model: WaveNetModel, pairs, sp: TrainSpec, seed: int, log=None) -> dict:
    prepared = [paired_codes_and_cond(t, w) for t, w in pairs]
    prepared = [(codes, model.normalize_cond(cond)) for codes, cond in prepared]
    seg = sp.segment_len
    usable = [i for i, (codes, _) in enumerate(prepared) if len(codes) >= seg]
    if not usable:
        raise WaveNetError(f"no utterance reaches segment_len={seg}")
    picker = vrng.stream(seed, vrng.TAG_SHUFFLE, 7)
    opt = AdamState(list(model.params.values()), lr=sp.lr)
    history = {"step_loss": [], "eval_steps": [], "eval_loss": []}

    eval_set = prepared[:max(1, min(sp.eval_pairs, len(prepared)))]

    def eval_nll() -> float:
        with T.no_grad():
            vals = [_sequence_nll(model, codes, cond).item()
                    for codes, cond in eval_set]
        return float(np.mean(vals))

    for step in range(sp.steps):
        ins, conds, tgts = [], [], []
        for _ in range(sp.batch):
            u = usable[picker.integers(len(usable))]
            codes, cond = prepared[u]
            start = int(picker.integers(0, len(codes) - seg + 1))
            tgt = codes[start:start + seg]
            if start == 0:
                inp = np.concatenate([[START_CODE], tgt[:-1]])
            else:
                inp = codes[start - 1:start + seg - 1]
            ins.append(inp)
            conds.append(cond[:, start:start + seg])
            tgts.append(tgt)
        try:
            with T.recording() as rec:
                logits = model.logits(np.stack(ins), np.stack(conds))
                loss = T.softmax_cross_entropy(logits, np.stack(tgts))
            val = loss.item()
            if not np.isfinite(val):
                raise TrainingDiverged(step)
            history["step_loss"].append(val)
            adam_step(opt, T.backward(rec, loss))
        except T.DiffError as e:
            raise TrainingDiverged(step) from e
        if step % sp.eval_interval == 0 or step == sp.steps - 1:
            nll = eval_nll()
            history["eval_steps"].append(step)
            history["eval_loss"].append(nll)
            if log is not None:
                log(step, nll)
            if sp.target_nll is not None and nll <= sp.target_nll:
                break
    return history


def adaptation_nll(model: WaveNetModel, pairs) -> float:
    """Mean teacher-forced NLL over (track, waveform) pairs."""
    vals = []
    with T.no_grad():
        for track, wave in pairs:
            codes, cond = paired_codes_and_cond(track, wave)
            vals.append(_sequence_nll(model, codes,
                                      model.normalize_cond(cond)).item())
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def sample(model: WaveNetModel, plan: ConditioningPlan, sample_rate: int,
           seed: int = 0) -> Waveform:
    """Sequential generation: one categorical draw per sample at unit
    temperature, decoded from mu-law.  Output length equals plan length."""
    cfg = model.config
    r = cfg.residual_channels
    n = len(plan)
    cond = model.normalize_cond(plan.features)
    p = {name: t.data for name, t in model.params.items()}
    dil = cfg.layer_dilations()
    # precompute conditioning projections for every layer, [2r, n]
    cond_proj = [p[f"l{i}.cond.w"] @ cond for i in range(len(dil))]
    # per-layer ring buffers of layer inputs, [dilation, r]
    rings = [np.zeros((d, r)) for d in dil]
    conv_w = [p[f"l{i}.conv.w"] for i in range(len(dil))]
    conv_b = [p[f"l{i}.conv.b"][:, 0] for i in range(len(dil))]
    res_w = [p[f"l{i}.res.w"] for i in range(len(dil))]
    res_b = [p[f"l{i}.res.b"][:, 0] for i in range(len(dil))]
    skip_w = [p[f"l{i}.skip.w"] for i in range(len(dil))]
    skip_b = [p[f"l{i}.skip.b"][:, 0] for i in range(len(dil))]
    out1_w, out1_b = p["out1.w"], p["out1.b"][:, 0]
    out2_w, out2_b = p["out2.w"], p["out2.b"][:, 0]
    embed = p["embed"]

    gen = vrng.stream(seed, vrng.TAG_SAMPLER)
    uniforms = gen.random(n)
    codes = np.empty(n, dtype=np.int64)
    prev = START_CODE
    for t in range(n):
        h = embed[prev]
        skip = None
        for i, d in enumerate(dil):
            ring = rings[i]
            past = ring[t % d]
            ring[t % d] = h
            pre = conv_w[i][1] @ h + conv_w[i][0] @ past + conv_b[i] + cond_proj[i][:, t]
            z = np.tanh(pre[:r]) * _sigmoid(pre[r:])
            h = h + res_w[i] @ z + res_b[i]
            s = skip_w[i] @ z + skip_b[i]
            skip = s if skip is None else skip + s
        out = np.maximum(skip, 0.0)
        out = np.maximum(out1_w @ out + out1_b, 0.0)
        logits = out2_w @ out + out2_b
        logits -= logits.max()
        probs = np.exp(logits)
        cdf = np.cumsum(probs)
        prev = int(np.searchsorted(cdf, uniforms[t] * cdf[-1], side="right"))
        prev = min(prev, cfg.quantization - 1)
        codes[t] = prev
    return Waveform(mu_law_decode(codes), sample_rate)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
