import hashlib
import json

import numpy as np
import pytest

from icu_radiomics.errors import InvalidSpec
from icu_radiomics.evalharness import SynthSpec, roc_auc, synth_cohort, synth_tabular, write_cohort
from icu_radiomics.evalharness.synth import ground_truth_hlq, lobe_phantom
from icu_radiomics.hlq import extract_hlq
from icu_radiomics.volume import LabelMask, MaskSemantics, VoxelVolume, load_mask, load_volume

TINY = dict(n_subjects=8, dims=(24, 24, 14))


def _digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_spec_validation():
    with pytest.raises(InvalidSpec):
        SynthSpec(dims=(4, 4, 4)).validate()
    with pytest.raises(InvalidSpec):
        SynthSpec(effect_sizes={"shoe_size": 1.0}).validate()
    with pytest.raises(InvalidSpec):
        SynthSpec.from_dict({"n_subjects": 3, "colour": "red"})
    spec = SynthSpec(**TINY, seed=4)
    assert SynthSpec.from_dict(json.loads(json.dumps(spec.as_dict()))) == spec


def test_lobe_phantom_layout():
    lab = lobe_phantom((40, 40, 24))
    assert set(np.unique(lab).tolist()) == {0, 1, 2, 3, 4, 5}
    xs = {k: np.argwhere(lab == k)[:, 0].mean() for k in range(1, 6)}
    assert max(xs[k] for k in (1, 2, 3)) < min(xs[k] for k in (4, 5))  # right lung sits at low x


def test_planted_blob_in_lobe2():
    dims = (40, 40, 24)
    lobes = lobe_phantom(dims)
    lung = lobes > 0
    values = np.where(lung, -850.0, 40.0)
    blob = np.zeros(dims, bool)
    blob.flat[np.flatnonzero(lobes == 2)[:1000]] = True
    values[blob] = -500.0
    band = np.where(lung, 1, 0).astype(np.int8)
    band[blob] = 2
    vol = VoxelVolume(values, (1, 1, 1))
    lm = LabelMask(lobes, (1, 1, 1), vol.frame_id, MaskSemantics.LOBE_MAP)
    om = LabelMask(blob.astype(np.uint8), (1, 1, 1), vol.frame_id)
    truth = ground_truth_hlq(lobes, band, blob, (1, 1, 1))
    assert truth["Lobe#2 VPO HU2"] == 1000.0 and truth["Lobe#2 RPO HU2"] == 1.0
    got = extract_hlq(vol, lm, om)
    assert np.array_equal(got.values, truth.values)


def test_cohort_is_deterministic(tmp_path):
    spec = SynthSpec(**TINY, seed=2)
    a = write_cohort(synth_cohort(spec), tmp_path / "a").parent
    b = write_cohort(synth_cohort(spec), tmp_path / "b").parent
    assert _digest(a) == _digest(b)
    other = write_cohort(synth_cohort(SynthSpec(**TINY, seed=3)), tmp_path / "c").parent
    assert _digest(other) != _digest(a)


def test_written_cohort_matches_ground_truth(tmp_path):
    cohort = synth_cohort(SynthSpec(**TINY, seed=5))
    manifest = json.loads(write_cohort(cohort, tmp_path).read_text())
    truth = json.loads((tmp_path / "ground_truth_hlq.json").read_text())
    for entry in manifest["subjects"]:
        vol = load_volume(tmp_path / entry["volume"])
        lobes = load_mask(tmp_path / entry["lobe_mask"], MaskSemantics.LOBE_MAP)
        opac = load_mask(tmp_path / entry["opacity_mask"])
        got = extract_hlq(vol, lobes, opac).as_dict()
        assert got == truth[entry["subject_id"]]


def test_every_subject_has_opacity():
    cohort = synth_cohort(SynthSpec(**TINY, seed=7))
    assert all(s.opacity_mask.binary().any() for s in cohort.subjects)
    miss = np.isnan(cohort.clinical.values)
    assert miss.any() and not np.isnan(cohort.clinical_complete.values).any()
    assert np.array_equal(cohort.clinical.values[~miss], cohort.clinical_complete.values[~miss])


def test_zero_effect_labels_are_noise():
    spec = SynthSpec(n_subjects=400, dims=(16, 16, 12), effect_sizes={}, intercept=0.0, seed=1)
    c = synth_cohort(spec)
    for key in ("opacity_fraction", "spo2", "lym_ratio"):
        assert abs(roc_auc(c.latent[key], c.labels) - 0.5) < 0.1


def test_effects_make_latent_predictive():
    c = synth_cohort(SynthSpec(n_subjects=200, dims=(16, 16, 12), seed=1))
    assert roc_auc(c.latent["opacity_fraction"], c.labels) > 0.7
    assert roc_auc(-c.latent["spo2"], c.labels) > 0.6


def test_synth_tabular():
    X, y, inf = synth_tabular(n=100, d=50, n_informative=4, seed=3)
    assert X.shape == (100, 50) and y.sum() == 50 and len(inf) == 4 and list(inf) == sorted(inf)
    X2, y2, inf2 = synth_tabular(n=100, d=50, n_informative=4, seed=3)
    assert np.array_equal(X, X2) and np.array_equal(inf, inf2)
    with pytest.raises(InvalidSpec):
        synth_tabular(d=3, n_informative=4)
