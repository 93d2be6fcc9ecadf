"""End-to-end orchestration: corpus loading, feature extraction, training,
prediction and validation, plus the persisted model container."""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import chrono, ink
from .balance import BalanceWeights, load_plan, reweight
from .config import PipelineConfig
from .container import load_container, save_container
from .errors import ConfigError, DataError, EmptyFeatureError
from .evaluate import LooReport, gaussian_of_gaussian, loo_run
from .morph import MorphParams, elastic_morph
from .regression import (
    BinPosterior,
    DateModel,
    PcaModel,
    PredictionCurve,
    ScalarDateModel,
    Timeline,
    fit_date_model,
    fit_pca,
    fit_scalar_date_model,
)
from .stylefeat import Codebook, adjoin, allograph_histogram, hinge_block, train_codebook

MODEL_KIND = "date-model"


@dataclass(frozen=True)
class CorpusEntry:
    manuscript_id: str
    image: Path | None
    curve: Path | None
    accept: tuple[tuple[float, float], ...] | None
    true_year: float | None


def load_corpus_manifest(path: str | Path) -> list[CorpusEntry]:
    """JSON manifest {"manuscripts": [{id, image, curve, accept?, true_year?}]}.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    if "manuscripts" not in raw:
        raise DataError(f"{path}: missing 'manuscripts' key")
    entries = []
    seen = set()
    for item in raw["manuscripts"]:
        mid = item.get("id")
        if not mid:
            raise DataError(f"{path}: manifest entry without id")
        if mid in seen:
            raise DataError(f"{path}: duplicate manuscript id {mid!r}")
        seen.add(mid)
        image = item.get("image")
        curve = item.get("curve")
        accept = item.get("accept")
        entries.append(
            CorpusEntry(
                manuscript_id=mid,
                image=(path.parent / image).resolve() if image else None,
                curve=(path.parent / curve).resolve() if curve else None,
                accept=tuple((float(s), float(e)) for s, e in accept) if accept else None,
                true_year=float(item["true_year"]) if "true_year" in item else None,
            )
        )
    return entries


def load_reference(entry: CorpusEntry) -> chrono.DateDistribution:
    """Parse an entry's calibration curve and apply its acceptance intervals."""
    if entry.curve is None:
        raise DataError(f"{entry.manuscript_id}: no calibration curve in manifest")
    if not entry.curve.exists():
        raise DataError(f"{entry.manuscript_id}: curve file not found: {entry.curve}")
    dist = chrono.parse_oxcal_raw(entry.curve)
    if entry.accept:
        dist = chrono.apply_intervals(dist, list(entry.accept))
    return dist.normalized()


def derive_seed(root: int, *key: int) -> int:
    """Deterministic per-task seed from the root seed and a stable key."""
    return int(np.random.SeedSequence((root,) + key).generate_state(1)[0])


def _fraglet_descriptors(args) -> np.ndarray:
    pixels, samples, encoding, smooth = args
    fraglets = ink.extract_fraglets(
        ink.BitonalImage(pixels), samples=samples, encoding=encoding, smooth_radius=smooth
    )
    if not fraglets:
        return np.zeros((0, 2 * samples))
    return np.array([f.descriptor for f in fraglets])


def extract_descriptor_sets(
    images: list[ink.BitonalImage], cfg: PipelineConfig
) -> list[np.ndarray]:
    """Per-image fraglet descriptor matrices; parallel when workers > 1."""
    jobs = [
        (img.pixels, cfg.contour_samples, cfg.contour_encoding, cfg.fragment_smooth)
        for img in images
    ]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_fraglet_descriptors, jobs))
    return [_fraglet_descriptors(job) for job in jobs]


def style_vector_from_parts(
    descriptors: np.ndarray, img: ink.BitonalImage, cb: Codebook, cfg: PipelineConfig
) -> np.ndarray:
    if len(descriptors) == 0:
        raise EmptyFeatureError("image yields no usable fraglets")
    allograph = allograph_histogram(descriptors, cb)
    hinge = hinge_block(img, list(cfg.hinge_legs), cfg.hinge_q)
    return adjoin(
        allograph,
        hinge,
        cfg.weight_allograph,
        cfg.weight_hinge,
        expected_allograph=cfg.codebook_grid[0] * cfg.codebook_grid[1],
        expected_hinge=len(cfg.hinge_legs) * cfg.hinge_q * (cfg.hinge_q + 1) // 2,
    ).vector


@dataclass(frozen=True)
class TrainedModel:
    codebook: Codebook
    pca: PcaModel
    vector_model: DateModel
    scalar_model: ScalarDateModel
    timeline: Timeline
    balance_cum: np.ndarray
    balance_counts: np.ndarray
    meta: dict

    def predict_from_style(self, style: np.ndarray) -> tuple[PredictionCurve, float, float]:
        x = self.pca.project(style)[0]
        curve = self.vector_model.predict(x)
        year, sigma = self.scalar_model.predict(x)
        return curve, year, sigma


def timeline_from_config(cfg: PipelineConfig) -> Timeline:
    return Timeline(cfg.timeline_start, cfg.timeline_end, cfg.bin_width)


def _training_rows(
    entries: list[CorpusEntry],
    images: list[ink.BitonalImage],
    descriptor_sets: list[np.ndarray],
    cb: Codebook,
    cfg: PipelineConfig,
    seed: int,
) -> tuple[list[str], np.ndarray]:
    """Original rows first (one per manuscript), then morphed copies.

    Copy counts come from the balance plan (factor - 1) plus the uniform
    augment_copies settings; each copy gets a fresh derived seed.
    """
    plan = load_plan(cfg.balance_plan) if cfg.balance_plan else {}
    ids = []
    rows = []
    for entry, img, descs in zip(entries, images, descriptor_sets):
        ids.append(entry.manuscript_id)
        rows.append(style_vector_from_parts(descs, img, cb, cfg))
    copy_jobs = []
    for i, entry in enumerate(entries):
        n_copies = plan.get(entry.manuscript_id, 1) - 1 + cfg.augment_copies
        for c in range(n_copies):
            copy_jobs.append((i, c))
    for i, c in copy_jobs:
        entry = entries[i]
        params = MorphParams(
            amplitude=cfg.morph_amplitude,
            sigma=cfg.morph_sigma,
            seed=derive_seed(seed, 1, i, c),
        )
        morphed = elastic_morph(images[i], params)
        descs = _fraglet_descriptors(
            (morphed.pixels, cfg.contour_samples, cfg.contour_encoding, cfg.fragment_smooth)
        )
        ids.append(entry.manuscript_id)
        rows.append(style_vector_from_parts(descs, morphed, cb, cfg))
    return ids, np.vstack(rows)


def _prepare_corpus(cfg: PipelineConfig, need_curves: bool = True):
    entries = load_corpus_manifest(cfg.require_manifest())
    dated = [e for e in entries if e.curve is not None] if need_curves else entries
    if need_curves and len(dated) < 2:
        raise DataError(f"manifest holds {len(dated)} dated entries; at least 2 required")
    images = []
    for entry in dated:
        if entry.image is None:
            raise DataError(f"{entry.manuscript_id}: no image in manifest")
        images.append(ink.load_bitonal(entry.image, cfg.binarize_threshold, cfg.crop))
    descriptor_sets = extract_descriptor_sets(images, cfg)
    return dated, images, descriptor_sets


def train(cfg: PipelineConfig) -> tuple[TrainedModel, dict]:
    """Full training pass: ink -> style features -> augmentation -> PCA ->
    per-bin regression; returns the model and a summary."""
    seed = cfg.require_seed()
    timeline = timeline_from_config(cfg)
    entries, images, descriptor_sets = _prepare_corpus(cfg)
    all_desc = np.vstack([d for d in descriptor_sets if len(d)])
    if len(all_desc) == 0:
        raise EmptyFeatureError("no fraglets extracted from the corpus")
    cb = train_codebook(
        all_desc,
        grid=cfg.codebook_grid,
        epochs=cfg.codebook_epochs,
        seed=derive_seed(seed, 0),
    )
    ids, rows = _training_rows(entries, images, descriptor_sets, cb, cfg, seed)
    references = {e.manuscript_id: load_reference(e) for e in entries}
    k = min(cfg.pca_dims, len(rows) - 1, rows.shape[1])
    pca = fit_pca(rows, k)
    projected = pca.project(rows)
    targets = np.vstack(
        [chrono.bin_masses(references[i], timeline.bin_starts, timeline.bin_width) for i in ids]
    )
    years = np.array([chrono.weighted_mean_year(references[i]) for i in ids])
    vector_model = fit_date_model(
        projected, targets, timeline, mode=cfg.regression_mode, alpha=cfg.alpha, beta=cfg.beta
    )
    scalar_model = fit_scalar_date_model(
        projected, years, mode=cfg.regression_mode, alpha=cfg.alpha, beta=cfg.beta
    )
    balance_cum = targets.sum(axis=0)
    balance_counts = (targets > 0).sum(axis=0)
    meta = {
        "kind": MODEL_KIND,
        "seed": seed,
        "timeline": [timeline.start, timeline.end, timeline.bin_width],
        "contour_samples": cfg.contour_samples,
        "contour_encoding": cfg.contour_encoding,
        "codebook_grid": list(cfg.codebook_grid),
        "codebook_epochs": cfg.codebook_epochs,
        "hinge_legs": list(cfg.hinge_legs),
        "hinge_q": cfg.hinge_q,
        "weight_allograph": cfg.weight_allograph,
        "weight_hinge": cfg.weight_hinge,
        "regression_mode": cfg.regression_mode,
        "pca_dims": k,
        "n_manuscripts": len(entries),
        "n_training_rows": len(rows),
    }
    model = TrainedModel(
        codebook=cb,
        pca=pca,
        vector_model=vector_model,
        scalar_model=scalar_model,
        timeline=timeline,
        balance_cum=balance_cum,
        balance_counts=balance_counts,
        meta=meta,
    )
    summary = {
        "manuscripts": len(entries),
        "training_rows": len(rows),
        "fraglets": int(len(all_desc)),
        "bins": timeline.n_bins,
        "pca_dims": k,
        "explained_variance_share": float(pca.explained_shares.sum()),
    }
    return model, summary


def save_model(model: TrainedModel, path: str | Path) -> None:
    arrays = {
        "codebook_units": model.codebook.units,
        "pca_mean": model.pca.mean,
        "pca_components": model.pca.components,
        "pca_variance": model.pca.explained_variance,
        "pca_shares": model.pca.explained_shares,
        "vec_means": np.stack([p.mean for p in model.vector_model.posteriors]),
        "vec_covs": np.stack([p.cov for p in model.vector_model.posteriors]),
        "vec_alpha": np.array([p.alpha for p in model.vector_model.posteriors]),
        "vec_beta": np.array([p.beta for p in model.vector_model.posteriors]),
        "vec_target_offsets": model.vector_model.target_offsets,
        "vec_feature_offset": model.vector_model.feature_offset,
        "scalar_mean": model.scalar_model.posterior.mean,
        "scalar_cov": model.scalar_model.posterior.cov,
        "scalar_ab": np.array(
            [
                model.scalar_model.posterior.alpha,
                model.scalar_model.posterior.beta,
                model.scalar_model.target_offset,
            ]
        ),
        "scalar_feature_offset": model.scalar_model.feature_offset,
        "balance_cum": model.balance_cum,
        "balance_counts": model.balance_counts.astype(np.int64),
    }
    meta = dict(model.meta)
    meta["codebook"] = {
        "grid": list(model.codebook.grid),
        "samples": model.codebook.samples,
        "seed": model.codebook.seed,
        "epochs": model.codebook.epochs,
    }
    save_container(path, MODEL_KIND, meta, arrays)


def load_model(path: str | Path) -> TrainedModel:
    meta, arrays = load_container(path, expect_kind=MODEL_KIND)
    cb_meta = meta["codebook"]
    cb = Codebook(
        units=arrays["codebook_units"],
        grid=tuple(cb_meta["grid"]),
        samples=int(cb_meta["samples"]),
        seed=int(cb_meta["seed"]),
        epochs=int(cb_meta["epochs"]),
    )
    pca = PcaModel(
        mean=arrays["pca_mean"],
        components=arrays["pca_components"],
        explained_variance=arrays["pca_variance"],
        explained_shares=arrays["pca_shares"],
    )
    timeline = Timeline(*meta["timeline"])
    posteriors = tuple(
        BinPosterior(
            mean=arrays["vec_means"][b],
            cov=arrays["vec_covs"][b],
            alpha=float(arrays["vec_alpha"][b]),
            beta=float(arrays["vec_beta"][b]),
        )
        for b in range(timeline.n_bins)
    )
    vector_model = DateModel(
        posteriors=posteriors,
        target_offsets=arrays["vec_target_offsets"],
        feature_offset=arrays["vec_feature_offset"],
        timeline=timeline,
    )
    scalar_model = ScalarDateModel(
        posterior=BinPosterior(
            mean=arrays["scalar_mean"],
            cov=arrays["scalar_cov"],
            alpha=float(arrays["scalar_ab"][0]),
            beta=float(arrays["scalar_ab"][1]),
        ),
        target_offset=float(arrays["scalar_ab"][2]),
        feature_offset=arrays["scalar_feature_offset"],
    )
    return TrainedModel(
        codebook=cb,
        pca=pca,
        vector_model=vector_model,
        scalar_model=scalar_model,
        timeline=timeline,
        balance_cum=arrays["balance_cum"],
        balance_counts=arrays["balance_counts"],
        meta=meta,
    )


def model_config_for_prediction(cfg: PipelineConfig, model: TrainedModel) -> PipelineConfig:
    """Feature parameters must come from the model, not the live config."""
    from dataclasses import replace

    meta = model.meta
    return replace(
        cfg,
        contour_samples=int(meta["contour_samples"]),
        contour_encoding=str(meta["contour_encoding"]),
        codebook_grid=tuple(meta["codebook_grid"]),
        hinge_legs=tuple(meta["hinge_legs"]),
        hinge_q=int(meta["hinge_q"]),
        weight_allograph=float(meta["weight_allograph"]),
        weight_hinge=float(meta["weight_hinge"]),
    )


@dataclass(frozen=True)
class PredictionOutput:
    image: Path
    curve: PredictionCurve
    scalar_year: float
    scalar_sigma: float
    peak_year: float
    peak_spread: float
    reweighted: dict[float, np.ndarray]


def predict_images(
    cfg: PipelineConfig,
    model: TrainedModel,
    image_paths: list[Path],
    thresholds: tuple[float, ...] = (),
) -> tuple[list[PredictionOutput], list[tuple[Path, str]]]:
    """Predict curves for a batch of images; unreadable or blank images are
    skipped with a warning and reported back to the caller."""
    cfg = model_config_for_prediction(cfg, model)
    seed = cfg.require_seed()
    outputs = []
    failures = []
    for idx, path in enumerate(sorted(image_paths)):
        try:
            img = ink.load_bitonal(path, cfg.binarize_threshold, cfg.crop)
            descs = _fraglet_descriptors(
                (img.pixels, cfg.contour_samples, cfg.contour_encoding, cfg.fragment_smooth)
            )
            style = style_vector_from_parts(descs, img, model.codebook, cfg)
            curve, year, sigma = model.predict_from_style(style)
            peak = gaussian_of_gaussian(
                curve, draws=cfg.gog_draws, seed=derive_seed(seed, 2, idx)
            )
            reweighted = {}
            for t in thresholds:
                weights = BalanceWeights(t, model.balance_cum, model.balance_counts)
                reweighted[t] = reweight(curve.means, weights)
            outputs.append(
                PredictionOutput(
                    image=Path(path),
                    curve=curve,
                    scalar_year=year,
                    scalar_sigma=sigma,
                    peak_year=peak.peak_year,
                    peak_spread=peak.spread,
                    reweighted=reweighted,
                )
            )
        except Exception as exc:  # noqa: BLE001 - batch must continue
            warnings.warn(f"skipping {path}: {exc}", stacklevel=2)
            failures.append((Path(path), f"{type(exc).__name__}: {exc}"))
    return outputs, failures


def validate(cfg: PipelineConfig) -> tuple[LooReport, dict]:
    """Leave-one-out over the manifest corpus (codebook trained once)."""
    from .evaluate import summarize

    seed = cfg.require_seed()
    timeline = timeline_from_config(cfg)
    entries, images, descriptor_sets = _prepare_corpus(cfg)
    if len(entries) < 3:
        raise DataError("validation needs at least 3 dated manuscripts")
    all_desc = np.vstack([d for d in descriptor_sets if len(d)])
    cb = train_codebook(
        all_desc,
        grid=cfg.codebook_grid,
        epochs=cfg.codebook_epochs,
        seed=derive_seed(seed, 0),
    )
    ids, rows = _training_rows(entries, images, descriptor_sets, cb, cfg, seed)
    references = {e.manuscript_id: load_reference(e) for e in entries}
    report = loo_run(
        ids,
        rows,
        references,
        timeline,
        pca_dims=cfg.pca_dims,
        mode=cfg.regression_mode,
        alpha=cfg.alpha,
        beta=cfg.beta,
        draws=cfg.gog_draws,
        seed=seed,
    )
    return report, summarize(report)
