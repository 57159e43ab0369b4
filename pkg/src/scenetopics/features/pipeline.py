"""Frames directory -> word stream: pixel, texton and optional motion words,
thinned on background pixels when the background model is enabled."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import RunConfig
from ..stream import VocabularyLayout, WordObservation
from .background import BackgroundModel, mask_subsample
from .imageio import Frame, read_pnm
from .pixels import grid_points, pixel_word_ids, quantize_unit
from .textons import Codebook, FeatureError, filter_responses, train_codebook

FRAME_SUFFIXES = (".ppm", ".pgm", ".pnm")


@dataclass
class Extraction:
    observations: list[WordObservation]
    layout: VocabularyLayout
    codebook: Codebook
    words_per_frame: list[int]


def list_frames(frames_dir: str | Path) -> list[Path]:
    d = Path(frames_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"frames directory {d} does not exist")
    files = [p for p in d.iterdir() if p.suffix.lower() in FRAME_SUFFIXES]
    if not files:
        raise FeatureError(f"no PPM/PGM frames in {d}")

    def key(p: Path):
        nums = re.findall(r"\d+", p.stem)
        return (int(nums[-1]) if nums else -1, p.name)

    return sorted(files, key=key)


def layout_for(cfg: RunConfig) -> VocabularyLayout:
    channels = [("hue", cfg.hue_bins), ("intensity", cfg.intensity_bins), ("texton", cfg.texton_codewords)]
    if cfg.motion_bins:
        channels.append(("motion", cfg.motion_bins))
    return VocabularyLayout(tuple(channels))


def extract_frames(frames: list[Frame], cfg: RunConfig) -> Extraction:
    if not frames:
        raise FeatureError("no frames to extract")
    h, w = frames[0].height, frames[0].width
    if any((f.height, f.width) != (h, w) for f in frames):
        raise FeatureError("all frames must share one size")
    layout = layout_for(cfg)
    off = layout.offsets
    xs, ys = grid_points(w, h, cfg.grid_step)
    codebook_seq, mask_seq = np.random.SeedSequence(cfg.seed).spawn(2)

    responses = [filter_responses(f.luma(), xs, ys) for f in frames]
    pool = np.concatenate(responses)
    if len(pool) > cfg.codebook_samples:
        pick = np.random.default_rng(codebook_seq).choice(len(pool), cfg.codebook_samples, replace=False)
        pool = pool[np.sort(pick)]
    codebook = train_codebook(pool, cfg.texton_codewords, seed=cfg.seed, max_iter=cfg.codebook_iters)

    bg = None
    if cfg.background:
        bg = BackgroundModel(w, h, cfg.bg_components, cfg.bg_threshold, cfg.bg_fraction,
                             cfg.bg_learning_rate, cfg.bg_variance_floor, cfg.bg_initial_variance)
    mask_rng = np.random.default_rng(mask_seq)

    observations: list[WordObservation] = []
    counts = []
    prev_luma = None
    for t, (frame, resp) in enumerate(zip(frames, responses)):
        _, _, hue_w, int_w = pixel_word_ids(frame, cfg.grid_step, cfg.hue_bins, cfg.intensity_bins)
        tex_w = codebook.quantize(resp)
        luma = frame.luma()
        per_point = [off["hue"] + hue_w, off["intensity"] + int_w, off["texton"] + tex_w]
        if cfg.motion_bins and prev_luma is not None:
            diff = np.abs(luma - prev_luma)[ys, xs]
            per_point.append(off["motion"] + quantize_unit(diff / 256.0, cfg.motion_bins))
        words = [WordObservation(t, int(x), int(y), int(chan[j]))
                 for j, (x, y) in enumerate(zip(xs, ys)) for chan in per_point]
        if bg is not None:
            mask = bg.update(luma)
            words = mask_subsample(words, mask, cfg.bg_density_ratio, mask_rng)
        observations.extend(words)
        counts.append(len(words))
        prev_luma = luma
    return Extraction(observations, layout, codebook, counts)


def extract_directory(frames_dir: str | Path, cfg: RunConfig) -> Extraction:
    return extract_frames([read_pnm(p) for p in list_frames(frames_dir)], cfg)
