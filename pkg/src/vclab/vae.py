"""Speaker-conditioned variational autoencoder over cepstral frames.

The encoder strips speaker identity from a normalized 34-dim cepstral
frame (energy dim 0 is excluded and carried around the model by the
pipeline); the decoder rebuilds the frame from the latent code plus a
one-hot speaker code.  Feeding a frame's own code reconstructs it;
feeding another speaker's code converts it.  Both passes are frame-wise,
so the output always keeps the input's temporal structure exactly.

Objective: unit-variance Gaussian reconstruction (0.5 * squared error)
plus the closed-form KL of the diagonal-Gaussian posterior against a
standard-normal prior, averaged per frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as vrng
from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .features import CONVERTED, RECONSTRUCTED, FeatureTrack
from .optim import AdamState, adam_step
from .tensor import Tensor

RECONSTRUCT = "reconstruct"
CONVERT = "convert"


class VaeError(RuntimeError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"training loss became non-finite at step {step}")
        self.step = step


@dataclass
class VaeConfig:
    feature_dim: int = 34
    latent_dim: int = 16
    hidden: int = 128
    lr: float = 1e-3
    batch: int = 64
    steps: int = 2000
    eval_interval: int = 50
    eval_frames: int = 512
    init_scale: float = 1.0
    # open choice: reconstruction for vocoder fine-tuning uses z = mu unless
    # this flag asks for a sampled latent
    sample_reconstruction: bool = False


@dataclass
class LossBreakdown:
    """Mean-per-frame negated lower bound and its two terms (total =
    recon + latent; latent is a KL divergence, hence >= 0)."""

    total: Tensor
    recon: Tensor
    latent: Tensor


def one_hot(index: int, n: int) -> np.ndarray:
    if not 0 <= index < n:
        raise VaeError(f"speaker index {index} out of range for {n} speakers")
    v = np.zeros(n)
    v[index] = 1.0
    return v


class VaeModel:
    """Encoder/decoder parameter set plus normalization and speaker table."""

    def __init__(self, config: VaeConfig, speakers: list[str],
                 norm_mean: np.ndarray, norm_std: np.ndarray,
                 params: dict[str, Tensor] | None = None, seed: int = 0):
        if len(set(speakers)) != len(speakers):
            raise VaeError("duplicate speaker ids")
        self.config = config
        self.speakers = list(speakers)
        self.norm_mean = np.asarray(norm_mean, dtype=np.float64)
        self.norm_std = np.asarray(norm_std, dtype=np.float64)
        if np.any(self.norm_std <= 0):
            raise VaeError("normalization std must be positive")
        self.params = params if params is not None else self._init_params(seed)

    def _init_params(self, seed: int) -> dict[str, Tensor]:
        cfg = self.config
        gen = vrng.stream(seed, vrng.TAG_INIT)
        n_spk = len(self.speakers)

        def mat(name, rows, cols):
            w = gen.standard_normal((rows, cols)) * cfg.init_scale / np.sqrt(rows)
            return name, Tensor(w, requires_grad=True, name=name)

        def vec(name, n):
            return name, Tensor(np.zeros(n), requires_grad=True, name=name)

        d, h, z = cfg.feature_dim, cfg.hidden, cfg.latent_dim
        return dict([
            mat("enc.w1", d, h), vec("enc.b1", h),
            mat("enc.w2", h, h), vec("enc.b2", h),
            mat("enc.wmu", h, z), vec("enc.bmu", z),
            mat("enc.wlv", h, z), vec("enc.blv", z),
            mat("dec.wz", z, h), mat("dec.wy", n_spk, h), vec("dec.b1", h),
            mat("dec.w2", h, h), vec("dec.b2", h),
            mat("dec.w3", h, d), vec("dec.b3", d),
        ])

    @property
    def n_speakers(self) -> int:
        return len(self.speakers)

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def speaker_index(self, speaker: str) -> int:
        try:
            return self.speakers.index(speaker)
        except ValueError:
            raise VaeError(f"unknown speaker {speaker!r} "
                           f"(model knows {self.speakers})") from None

    # -- forward pieces (Tensor in, Tensor out; record under an active tape)

    def encode(self, h: Tensor) -> tuple[Tensor, Tensor]:
        """Posterior (mean, log-variance) for normalized frames [b, dim]."""
        if not np.all(np.isfinite(h.data)):
            raise VaeError("encoder input must be finite")
        p = self.params
        a1 = T.tanh(T.dense(h, p["enc.w1"], p["enc.b1"]))
        a2 = T.tanh(T.dense(a1, p["enc.w2"], p["enc.b2"]))
        return (T.dense(a2, p["enc.wmu"], p["enc.bmu"]),
                T.dense(a2, p["enc.wlv"], p["enc.blv"]))

    def decode(self, z: Tensor, y: Tensor) -> Tensor:
        """Normalized frame from latent [b, latent] and speaker code [b, n]."""
        codes = y.data
        if codes.shape[-1] != self.n_speakers or np.any(
                np.abs(codes.sum(axis=-1) - 1.0) > 1e-12) or np.any(
                (codes != 0.0) & (codes != 1.0)):
            raise VaeError("speaker code must be one-hot over the speaker table")
        p = self.params
        pre = T.add(T.add(T.matmul(z, p["dec.wz"]), T.matmul(y, p["dec.wy"])),
                    p["dec.b1"])
        a1 = T.tanh(pre)
        a2 = T.tanh(T.dense(a1, p["dec.w2"], p["dec.b2"]))
        return T.dense(a2, p["dec.w3"], p["dec.b3"])

    def elbo_loss(self, h: Tensor, y: Tensor, noise: np.ndarray) -> LossBreakdown:
        """Mean per-frame loss over a batch with supplied posterior noise."""
        n_frames = h.data.shape[0]
        mu, log_var = self.encode(h)
        z = T.reparameterize(mu, log_var, noise)
        recon = T.scale(T.half_sse(self.decode(z, y), h), 1.0 / n_frames)
        latent = T.scale(T.gaussian_kl(mu, log_var), 1.0 / n_frames)
        return LossBreakdown(total=T.add(recon, latent), recon=recon, latent=latent)

    # -- track-level passes

    def normalize(self, mcc_sub: np.ndarray) -> np.ndarray:
        return (mcc_sub - self.norm_mean) / self.norm_std

    def denormalize(self, h: np.ndarray) -> np.ndarray:
        return h * self.norm_std + self.norm_mean

    def forward(self, track: FeatureTrack, speaker: str, mode: str,
                deterministic: bool = True, seed: int = 0) -> FeatureTrack:
        """Frame-wise encode/decode of a whole track.

        `speaker` is the code fed to the decoder: the track's own speaker
        for `reconstruct`, the conversion target for `convert`.  Frame
        count, log-f0, voicing, energy factor, and the energy cepstral
        dim 0 all pass through untouched.
        """
        if mode not in (RECONSTRUCT, CONVERT):
            raise VaeError(f"unknown forward mode {mode!r}")
        idx = self.speaker_index(speaker)
        h = self.normalize(track.mcc[:, 1:1 + self.config.feature_dim])
        with T.no_grad():
            mu, log_var = self.encode(Tensor(h))
            if deterministic:
                z = mu
            else:
                gen = vrng.stream(seed, vrng.TAG_NOISE, idx)
                z = T.reparameterize(mu, log_var,
                                     gen.standard_normal(mu.data.shape))
            codes = np.tile(one_hot(idx, self.n_speakers), (track.n_frames, 1))
            out = self.decode(z, Tensor(codes)).data
        mcc = track.mcc.copy()
        mcc[:, 1:1 + self.config.feature_dim] = self.denormalize(out)
        result = FeatureTrack(
            mcc=mcc, log_f0=track.log_f0.copy(), voiced=track.voiced.copy(),
            energy_factor=track.energy_factor.copy(),
            frame_shift_ms=track.frame_shift_ms,
            kind=RECONSTRUCTED if mode == RECONSTRUCT else CONVERTED)
        assert result.n_frames == track.n_frames
        return result

    # -- persistence

    def save(self, path: str | Path) -> None:
        cfg = self.config
        meta = {
            "kind": "vae",
            "speakers": ",".join(self.speakers),
            "feature_dim": str(cfg.feature_dim),
            "latent_dim": str(cfg.latent_dim),
            "hidden": str(cfg.hidden),
            "sample_reconstruction": str(int(cfg.sample_reconstruction)),
        }
        arrays = {name: p.data for name, p in self.params.items()}
        arrays["norm.mean"] = self.norm_mean
        arrays["norm.std"] = self.norm_std
        save_checkpoint(path, meta, arrays)

    @classmethod
    def load(cls, path: str | Path) -> "VaeModel":
        meta, arrays = load_checkpoint(path)
        if meta.get("kind") != "vae":
            raise VaeError(f"{path} is not a VAE checkpoint")
        cfg = VaeConfig(feature_dim=int(meta["feature_dim"]),
                        latent_dim=int(meta["latent_dim"]),
                        hidden=int(meta["hidden"]),
                        sample_reconstruction=bool(int(meta["sample_reconstruction"])))
        mean = arrays.pop("norm.mean")
        std = arrays.pop("norm.std")
        params = {name: Tensor(arr, requires_grad=True, name=name)
                  for name, arr in arrays.items()}
        return cls(cfg, meta["speakers"].split(","), mean, std, params=params)


def train_vae(corpus: list[tuple[FeatureTrack, str]], speakers: list[str],
              config: VaeConfig | None = None, seed: int = 0,
              log=None) -> tuple[VaeModel, dict]:
    """Train on pooled frames from every speaker (no parallel data needed).

    Returns the model plus a history dict with per-step batch losses and a
    periodic fixed-batch eval series.
    """
    cfg = config or VaeConfig()
    if len(speakers) < 1:
        raise VaeError("need at least one speaker")
    h_all, idx_all = _pool_frames(corpus, speakers, cfg.feature_dim)
    mean = h_all.mean(axis=0)
    std = np.maximum(h_all.std(axis=0), 1e-6)
    model = VaeModel(cfg, speakers, mean, std, seed=seed)
    hn = (h_all - mean) / std
    onehots = np.eye(len(speakers))[idx_all]

    opt = AdamState(list(model.params.values()), lr=cfg.lr)
    shuffle = vrng.stream(seed, vrng.TAG_SHUFFLE)
    noise_gen = vrng.stream(seed, vrng.TAG_NOISE)
    eval_pick = vrng.stream(seed, vrng.TAG_SAMPLER).choice(
        len(hn), size=min(cfg.eval_frames, len(hn)), replace=False)
    eval_h, eval_y = hn[eval_pick], onehots[eval_pick]
    eval_noise = vrng.stream(seed, vrng.TAG_NOISE, 999).standard_normal(
        (len(eval_pick), cfg.latent_dim))

    history = {"step_loss": [], "eval_steps": [], "eval_loss": [],
               "recon": [], "latent": []}
    for step in range(cfg.steps):
        pick = shuffle.integers(0, len(hn), size=cfg.batch)
        noise = noise_gen.standard_normal((cfg.batch, cfg.latent_dim))
        try:
            with T.recording() as rec:
                loss = model.elbo_loss(Tensor(hn[pick]), Tensor(onehots[pick]),
                                       noise)
            val = loss.total.item()
            if not np.isfinite(val):
                raise TrainingDiverged(step)
            history["step_loss"].append(val)
            adam_step(opt, T.backward(rec, loss.total))
            if step % cfg.eval_interval == 0 or step == cfg.steps - 1:
                with T.no_grad():
                    ev = model.elbo_loss(Tensor(eval_h), Tensor(eval_y),
                                         eval_noise)
                history["eval_steps"].append(step)
                history["eval_loss"].append(ev.total.item())
                history["recon"].append(ev.recon.item())
                history["latent"].append(ev.latent.item())
                if log is not None:
                    log(step, ev.total.item())
        except T.DiffError as e:
            raise TrainingDiverged(step) from e
    return model, history


def _pool_frames(corpus, speakers, feature_dim):
    hs, idxs = [], []
    lookup = {s: i for i, s in enumerate(speakers)}
    for track, spk in corpus:
        if spk not in lookup:
            raise VaeError(f"track speaker {spk!r} not in speaker list")
        hs.append(track.mcc[:, 1:1 + feature_dim])
        idxs.append(np.full(track.n_frames, lookup[spk], dtype=np.int64))
    if not hs:
        raise VaeError("empty training corpus")
    return np.concatenate(hs), np.concatenate(idxs)
