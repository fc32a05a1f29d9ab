"""Synthetic cohorts with known ground truth.

Imaging phantoms: two ellipsoidal lungs split into five lobes, parenchyma in
the normal-lung HU band, and planted opacity blobs whose HU is drawn strictly
inside the GGO or consolidation band. Every voxel's band is recorded at
construction time, so HLQ ground truth follows by counting rather than by
thresholding intensities.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import ndimage
from scipy.special import expit

from .._io import atomic_write_text
from ..clinical import CANONICAL_COLUMNS, ClinicalTable, write_clinical_csv
from ..errors import InvalidSpec
from ..hlq import ROI_LABELS, ROI_NAMES, hlq_feature_names
from ..texture.vector import FeatureVector
from ..volume import LabelMask, MaskSemantics, VoxelVolume, default_frame_id, save_volume

# HU draws per band, each strictly inside its half-open range
_BAND_HU = {
    1: (-900.0, -800.0),
    2: (-675.0, -375.0),
    3: (-250.0, 0.0),
    4: (150.0, 300.0),
}
_BODY_HU = (20.0, 60.0)
_AIR_HU = -1000.0

LATENT_FEATURES = ("opacity_fraction", "spo2", "lym_ratio", "age", "wbc", "temperature")


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 40
    dims: tuple[int, int, int] = (40, 40, 24)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    blobs_mean: float = 2.5  # expected blob count at zero severity
    blob_radius_mm: tuple[float, float] = (2.0, 5.0)
    severity_blob_gain: float = 1.2  # extra blobs per unit severity
    ggo_probability: float = 0.6
    calcification_probability: float = 0.3
    effect_sizes: Mapping[str, float] = field(
        default_factory=lambda: {"opacity_fraction": 3.0, "spo2": -2.0, "lym_ratio": -2.0}
    )
    intercept: float = -0.5
    missing_rate: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.n_subjects < 1:
            raise InvalidSpec("n_subjects must be >= 1")
        if len(self.dims) != 3 or min(self.dims) < 12:
            raise InvalidSpec(f"dims must be three sizes >= 12, got {self.dims}")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise InvalidSpec(f"spacing must be three positive values, got {self.spacing}")
        lo, hi = self.blob_radius_mm
        if not 0 < lo <= hi:
            raise InvalidSpec("blob_radius_mm must satisfy 0 < lo <= hi")
        if not 0.0 <= self.ggo_probability <= 1.0 or not 0.0 <= self.calcification_probability <= 1.0:
            raise InvalidSpec("probabilities must lie in [0, 1]")
        if not 0.0 <= self.missing_rate < 1.0:
            raise InvalidSpec("missing_rate must lie in [0, 1)")
        unknown = set(self.effect_sizes) - set(LATENT_FEATURES)
        if unknown:
            raise InvalidSpec(f"unknown effect-size features {sorted(unknown)}; allowed {LATENT_FEATURES}")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["effect_sizes"] = dict(self.effect_sizes)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthSpec":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InvalidSpec(f"unknown synth spec keys {sorted(extra)}")
        for key in ("dims", "spacing", "blob_radius_mm"):
            if key in d:
                d[key] = tuple(d[key])
        spec = cls(**d)
        spec.validate()
        return spec


@dataclass(frozen=True, eq=False)
class SyntheticSubject:
    subject_id: str
    volume: VoxelVolume
    lobe_mask: LabelMask
    opacity_mask: LabelMask
    band_map: np.ndarray  # 0 outside the lungs, 1..4 = HU band assigned at construction
    severity: float


@dataclass(frozen=True, eq=False)
class SyntheticCohort:
    spec: SynthSpec
    subjects: tuple[SyntheticSubject, ...]
    clinical: ClinicalTable  # with missing cells
    clinical_complete: ClinicalTable  # before masking
    latent: dict[str, np.ndarray]
    labels: np.ndarray

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.subject_id for s in self.subjects)


def lobe_phantom(dims, spacing=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Five-lobe label map: right lung (low x) lobes 1-3, left lung lobes 4-5."""
    X, Y, Z = dims
    x, y, z = np.meshgrid(np.arange(X) + 0.5, np.arange(Y) + 0.5, np.arange(Z) + 0.5, indexing="ij")
    labels = np.zeros(dims, dtype=np.uint8)
    for cx, side in ((0.29 * X, "right"), (0.71 * X, "left")):
        inside = ((x - cx) / (0.19 * X)) ** 2 + ((y - 0.5 * Y) / (0.36 * Y)) ** 2 + ((z - 0.5 * Z) / (0.44 * Z)) ** 2 <= 1.0
        # oblique fissures: height along z tilted by y
        h = (z / Z) + 0.15 * (y / Y - 0.5)
        if side == "right":
            labels[inside & (h >= 0.62)] = 1
            labels[inside & (h >= 0.40) & (h < 0.62)] = 2
            labels[inside & (h < 0.40)] = 3
        else:
            labels[inside & (h >= 0.50)] = 4
            labels[inside & (h < 0.50)] = 5
    return labels


def _body_mask(dims) -> np.ndarray:
    X, Y, Z = dims
    x, y = np.meshgrid(np.arange(X) + 0.5, np.arange(Y) + 0.5, indexing="ij")
    body2d = ((x - 0.5 * X) / (0.48 * X)) ** 2 + ((y - 0.5 * Y) / (0.46 * Y)) ** 2 <= 1.0
    return np.repeat(body2d[:, :, None], Z, axis=2)


def _ball(shape, center, radius_mm, spacing) -> np.ndarray:
    grids = np.meshgrid(*(np.arange(n) for n in shape), indexing="ij")
    d2 = sum(((g - c) * s) ** 2 for g, c, s in zip(grids, center, spacing))
    return d2 <= radius_mm**2


def _draw_band(rng, band: int, size: int) -> np.ndarray:
    lo, hi = _BAND_HU[band]
    return rng.uniform(lo, hi, size)


def make_subject(subject_id: str, severity: float, spec: SynthSpec, rng: np.random.Generator) -> SyntheticSubject:
    dims = tuple(spec.dims)
    lobes = lobe_phantom(dims, spec.spacing)
    lung = lobes > 0
    body = _body_mask(dims)
    values = np.full(dims, _AIR_HU)
    values[body] = rng.uniform(*_BODY_HU, int(body.sum()))
    band = np.zeros(dims, dtype=np.int8)
    band[lung] = 1
    values[lung] = _draw_band(rng, 1, int(lung.sum()))

    # at least one blob: every subject has a non-empty opacity segmentation
    n_blobs = 1 + int(rng.poisson(max(spec.blobs_mean - 1.0 + spec.severity_blob_gain * severity, 0.2)))
    cores = np.zeros(dims, dtype=bool)
    lung_idx = np.argwhere(lung)
    lo, hi = spec.blob_radius_mm
    for _ in range(n_blobs):
        center = lung_idx[rng.integers(lung_idx.shape[0])]
        radius = float(np.clip(rng.uniform(lo, hi) * math.exp(0.2 * severity), lo, 1.5 * hi))
        ball = _ball(dims, center, radius, spec.spacing) & lung & ~cores
        k = 2 if rng.random() < spec.ggo_probability else 3
        band[ball] = k
        values[ball] = _draw_band(rng, k, int(ball.sum()))
        cores |= ball

    # segmentations include a one-voxel rim of normal-appearing lung around each blob
    rim = ndimage.binary_dilation(cores, structure=np.ones((3, 3, 3), bool)) & lung & ~cores
    opacity = cores | rim

    if rng.random() < spec.calcification_probability:
        free = np.argwhere(lung & ~opacity)
        if free.size:
            c = free[rng.integers(free.shape[0])]
            speck = _ball(dims, c, 1.0 * min(spec.spacing) + 1e-9, spec.spacing) & lung & ~opacity
            band[speck] = 4
            values[speck] = _draw_band(rng, 4, int(speck.sum()))

    frame = default_frame_id(dims, (0.0, 0.0, 0.0))
    vol = VoxelVolume(values, spec.spacing, frame)
    lobe_mask = LabelMask(lobes, spec.spacing, frame, MaskSemantics.LOBE_MAP)
    opac_mask = LabelMask(opacity.astype(np.uint8), spec.spacing, frame, MaskSemantics.BINARY_OPACITY)
    band.flags.writeable = False
    return SyntheticSubject(subject_id, vol, lobe_mask, opac_mask, band, float(severity))


def ground_truth_hlq(lobes: np.ndarray, band_map: np.ndarray, opacity: np.ndarray, spacing) -> FeatureVector:
    """HLQ values by counting construction-time band labels."""
    voxel = float(spacing[0]) * float(spacing[1]) * float(spacing[2])
    opacity = np.asarray(opacity, dtype=bool)
    values = []
    for roi in ROI_NAMES:
        in_roi = np.isin(lobes, ROI_LABELS[roi])
        for k in range(1, 5):
            comp = in_roi & (band_map == k)
            n_comp = int(comp.sum())
            n_opac = int((comp & opacity).sum())
            values.append(n_opac * voxel)
            values.append(n_opac / n_comp if n_comp else 0.0)
    return FeatureVector(hlq_feature_names(), values)


def subject_ground_truth(s: SyntheticSubject) -> FeatureVector:
    return ground_truth_hlq(s.lobe_mask.labels, s.band_map, s.opacity_mask.binary(), s.volume.spacing)


def _clinical(rng: np.random.Generator, severity: np.ndarray) -> np.ndarray:
    n = severity.size
    z = severity
    age = np.clip(55.0 + 8.0 * z + 10.0 * rng.normal(size=n), 18.0, 95.0)
    sex = (rng.random(n) < 0.5 + 0.1 * np.tanh(z)).astype(np.float64)
    wbc = np.clip(6000.0 + 900.0 * z + 1500.0 * rng.normal(size=n), 1500.0, None)
    lym = np.clip(1500.0 - 350.0 * z + 300.0 * rng.normal(size=n), 150.0, None)
    lym = np.minimum(lym, 0.9 * wbc)
    lym_ratio = 100.0 * lym / wbc
    temperature = np.clip(37.0 + 0.4 * z + 0.4 * rng.normal(size=n), 35.0, 41.5)
    spo2 = np.clip(96.0 - 2.5 * z + 1.5 * rng.normal(size=n), 70.0, 100.0)
    cols = {"age": age, "sex": sex, "wbc": wbc, "lym": lym, "lym_ratio": lym_ratio, "temperature": temperature, "spo2": spo2}
    return np.column_stack([np.round(cols[c], 1) if c != "sex" else cols[c] for c in CANONICAL_COLUMNS])


def _standardize(v: np.ndarray) -> np.ndarray:
    sd = v.std()
    return (v - v.mean()) / sd if sd > 0 else np.zeros_like(v)


def synth_cohort(spec: SynthSpec = SynthSpec()) -> SyntheticCohort:
    spec.validate()
    root = np.random.SeedSequence([int(spec.seed), 0x5EED])
    cohort_rng = np.random.default_rng(root.spawn(1)[0])
    severity = cohort_rng.normal(size=spec.n_subjects)
    subject_seeds = np.random.SeedSequence([int(spec.seed), 0xB10B]).spawn(spec.n_subjects)
    ids = tuple(f"S{i:04d}" for i in range(spec.n_subjects))
    subjects = tuple(
        make_subject(sid, float(z), spec, np.random.default_rng(ss)) for sid, z, ss in zip(ids, severity, subject_seeds)
    )

    complete = _clinical(cohort_rng, severity)
    opacity_fraction = np.array(
        [s.opacity_mask.binary().sum() / max(int((s.lobe_mask.labels > 0).sum()), 1) for s in subjects]
    )
    latent = {"opacity_fraction": opacity_fraction, "severity": severity}
    for j, c in enumerate(CANONICAL_COLUMNS):
        latent[c] = complete[:, j]

    logit = np.full(spec.n_subjects, float(spec.intercept))
    for name in sorted(spec.effect_sizes):
        logit += float(spec.effect_sizes[name]) * _standardize(latent[name])
    labels = (cohort_rng.random(spec.n_subjects) < expit(logit)).astype(np.int64)

    masked = complete.copy()
    for c in ("spo2", "lym_ratio", "temperature", "wbc"):
        j = CANONICAL_COLUMNS.index(c)
        masked[cohort_rng.random(spec.n_subjects) < spec.missing_rate, j] = np.nan
    clinical = ClinicalTable(ids, CANONICAL_COLUMNS, masked, labels)
    clinical_complete = ClinicalTable(ids, CANONICAL_COLUMNS, complete, labels)
    return SyntheticCohort(spec, subjects, clinical, clinical_complete, latent, labels)


def write_cohort(cohort: SyntheticCohort, outdir: str | Path) -> Path:
    """Write NIfTI volumes/masks, clinical CSV, ground truth and a manifest; return the manifest path."""
    out = Path(outdir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    entries = []
    truth = {}
    for s in cohort.subjects:
        vol_p = f"images/{s.subject_id}_ct.nii.gz"
        lobe_p = f"images/{s.subject_id}_lobes.nii.gz"
        opac_p = f"images/{s.subject_id}_opacity.nii.gz"
        save_volume(out / vol_p, s.volume, dtype=np.float32)
        save_volume(out / lobe_p, s.lobe_mask)
        save_volume(out / opac_p, s.opacity_mask)
        entries.append(
            {"subject_id": s.subject_id, "volume": vol_p, "lobe_mask": lobe_p, "opacity_mask": opac_p, "clinical_id": s.subject_id}
        )
        truth[s.subject_id] = subject_ground_truth(s).as_dict()
    write_clinical_csv(out / "clinical.csv", cohort.clinical)
    atomic_write_text(out / "ground_truth_hlq.json", json.dumps(truth, indent=1, sort_keys=True))
    manifest = {
        "subjects": entries,
        "clinical": "clinical.csv",
        "clinical_schema": {"id": "subject_id", "label": "icu", "columns": {c: c for c in CANONICAL_COLUMNS}},
        "synth_spec": cohort.spec.as_dict(),
    }
    path = out / "manifest.json"
    atomic_write_text(path, json.dumps(manifest, indent=1, sort_keys=True))
    return path


def synth_tabular(n: int = 200, d: int = 300, n_informative: int = 3, effect: float = 1.0, seed: int = 0):
    """Gaussian features where ``n_informative`` randomly placed columns shift by ``effect`` SD between classes.

    Returns (X, y, informative column indices sorted ascending).
    """
    if not 0 <= n_informative <= d:
        raise InvalidSpec("n_informative must lie in [0, d]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), n, d, n_informative]))
    y = np.zeros(n, dtype=np.int64)
    y[rng.permutation(n)[: n // 2]] = 1
    X = rng.normal(size=(n, d))
    informative = np.sort(rng.choice(d, n_informative, replace=False))
    X[:, informative] += effect * (y[:, None] - 0.5)
    return X, y, informative


def synth_site_a_table(seed: int = 0, n: int = 113, n_icu: int = 42, n_missing_spo2: int = 9, spo2_mean: float = 91.9) -> ClinicalTable:
    """Site-A-shaped DVB table whose observed SpO2 values average exactly ``spo2_mean``.

    SpO2 values lie on a 0.1 % grid; the observed cells are adjusted so their
    exact mean, rounded once to double, equals ``spo2_mean``.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA]))
    labels = np.zeros(n, dtype=np.int64)
    labels[rng.permutation(n)[:n_icu]] = 1
    severity = rng.normal(size=n) + 1.0 * labels
    values = _clinical(rng, severity)
    m = n - n_missing_spo2
    target_tenths = round(spo2_mean * 10)
    tenths = np.clip(np.round(target_tenths + 25 * rng.normal(size=m)).astype(np.int64), 750, 1000)
    diff = target_tenths * m - int(tenths.sum())
    i = 0
    while diff != 0:  # spread the correction one tenth at a time, staying in range
        step = 1 if diff > 0 else -1
        j = i % m
        if 750 <= tenths[j] + step <= 1000:
            tenths[j] += step
            diff -= step
        i += 1
    observed = tenths / 10.0
    if float(sum(map(Fraction, observed.tolist()), Fraction(0)) / m) != spo2_mean:
        raise InvalidSpec("could not engineer the requested SpO2 mean")
    spo2 = np.full(n, np.nan)
    missing = np.sort(rng.choice(n, n_missing_spo2, replace=False))
    spo2[np.setdiff1d(np.arange(n), missing)] = observed
    values[:, CANONICAL_COLUMNS.index("spo2")] = spo2
    ids = tuple(f"P{i + 1:03d}" for i in range(n))
    return ClinicalTable(ids, CANONICAL_COLUMNS, values, labels)
