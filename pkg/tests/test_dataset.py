import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from patchview.dataset import (ViewpointSampler, bytes_to_lab, lab_to_bytes,
                               lab_to_rgb, load_dataset, perturb_keypoints,
                               rgb_to_lab, sample_viewpoint)
from patchview.errors import ManifestError
from patchview.geometry import SphericalPose, Viewpoint

from oracles import reference_lab


# ---------------------------------------------------------------------------
# loading


def test_toy_dataset_loads(toy_data):
    catalog, samples = toy_data
    assert len(catalog) == 2
    assert len(samples) == 6
    assert [s.id for s in samples] == sorted(s.id for s in samples)
    assert catalog.class_name == "car"
    assert len(catalog.keypoint_names()) == 12


def test_loading_is_idempotent(toy_root):
    _, first = load_dataset(toy_root)
    _, second = load_dataset(toy_root)
    assert [s.id for s in first] == [s.id for s in second]
    for a, b in zip(first, second):
        assert np.array_equal(a.image, b.image)
        assert a.cad_id == b.cad_id


def test_loaded_keypoints_match_manifest(toy_root, toy_data):
    manifest = json.loads((toy_root / "manifest.json").read_text())
    _, samples = toy_data
    by_id = {s["id"]: s for s in manifest["samples"]}
    for sample in samples:
        entry = by_id[sample.id]
        for name, uv in entry["keypoints2d"].items():
            assert np.allclose(sample.keypoints_2d[name], uv)
        assert isinstance(sample.view, SphericalPose)
        assert sample.view.azimuth_deg == pytest.approx(entry["view"]["azimuth_deg"])


def test_missing_manifest_raises(tmp_path):
    with pytest.raises(ManifestError, match="manifest"):
        load_dataset(tmp_path)


def test_bad_cad_id_sample_skipped(toy_root, tmp_path, caplog):
    manifest = json.loads((toy_root / "manifest.json").read_text())
    manifest["samples"][0]["cad_id"] = 99
    clone = tmp_path / "clone"
    clone.mkdir()
    (clone / "manifest.json").write_text(json.dumps(manifest))
    for sub in ("meshes", "images"):
        (clone / sub).mkdir()
        for f in (toy_root / sub).iterdir():
            (clone / sub / f.name).write_bytes(f.read_bytes())
    catalog, samples = load_dataset(clone)
    assert len(samples) == 5
    assert "s000" not in [s.id for s in samples]


def test_bad_keypoints_sample_skipped(toy_root, tmp_path):
    manifest = json.loads((toy_root / "manifest.json").read_text())
    del manifest["samples"][1]["keypoints2d"]["left_front_wheel"]
    clone = tmp_path / "clone"
    clone.mkdir()
    (clone / "manifest.json").write_text(json.dumps(manifest))
    for sub in ("meshes", "images"):
        (clone / sub).mkdir()
        for f in (toy_root / sub).iterdir():
            (clone / sub / f.name).write_bytes(f.read_bytes())
    _, samples = load_dataset(clone)
    assert len(samples) == 5


def test_empty_sample_list_is_fine(toy_root, tmp_path):
    manifest = json.loads((toy_root / "manifest.json").read_text())
    manifest["samples"] = []
    clone = tmp_path / "clone"
    clone.mkdir()
    (clone / "manifest.json").write_text(json.dumps(manifest))
    (clone / "meshes").mkdir()
    for f in (toy_root / "meshes").iterdir():
        (clone / "meshes" / f.name).write_bytes(f.read_bytes())
    catalog, samples = load_dataset(clone)
    assert len(samples) == 0
    assert len(catalog) == 2


def test_matrix_view_parses(toy_root, tmp_path):
    manifest = json.loads((toy_root / "manifest.json").read_text())
    manifest["samples"] = manifest["samples"][:1]
    manifest["samples"][0]["view"] = {"matrix": list(np.eye(4).ravel())}
    clone = tmp_path / "clone"
    clone.mkdir()
    (clone / "manifest.json").write_text(json.dumps(manifest))
    for sub in ("meshes", "images"):
        (clone / sub).mkdir()
        for f in (toy_root / sub).iterdir():
            (clone / sub / f.name).write_bytes(f.read_bytes())
    _, samples = load_dataset(clone)
    assert isinstance(samples[0].view, Viewpoint)


# ---------------------------------------------------------------------------
# viewpoint sampling


def test_azimuth_ring_sequence():
    sampler = ViewpointSampler(mode="azimuth-ring", elevation_deg=10, radius=5)
    azimuths = [sample_viewpoint(sampler).azimuth_deg for _ in range(24)]
    expected = [float(a) for a in range(0, 360, 30)]
    assert azimuths == expected + expected


def test_fixed_seed_reproducible_sequence():
    a = ViewpointSampler(mode="uniform-hemisphere", seed=42)
    b = ViewpointSampler(mode="uniform-hemisphere", seed=42)
    for _ in range(20):
        pa, pb = sample_viewpoint(a), sample_viewpoint(b)
        assert pa == pb


def test_empirical_draws_from_pose_list():
    poses = [SphericalPose(a, 10, 5) for a in (0, 90, 180)]
    sampler = ViewpointSampler(mode="empirical", seed=1, poses=poses)
    seen = {sample_viewpoint(sampler).azimuth_deg for _ in range(200)}
    assert seen == {0.0, 90.0, 180.0}


def test_uniform_hemisphere_statistics():
    sampler = ViewpointSampler(mode="uniform-hemisphere", seed=3)
    n = 100_000
    azimuths = np.empty(n)
    elevations = np.empty(n)
    for i in range(n):
        pose = sample_viewpoint(sampler)
        azimuths[i] = pose.azimuth_deg
        elevations[i] = pose.elevation_deg
    # azimuth uniform by chi-square
    counts, _ = np.histogram(azimuths, bins=24, range=(0, 360))
    assert scipy_stats.chisquare(counts).pvalue > 0.01
    # elevation density proportional to cos(el): P(el <= e) = sin(e)
    edges = np.radians(np.linspace(0, 90, 10))
    observed, _ = np.histogram(np.radians(elevations), bins=edges)
    expected = np.diff(np.sin(edges)) * n
    assert scipy_stats.chisquare(observed, expected).pvalue > 0.01
    assert elevations.min() >= 0.0  # upper hemisphere only


def test_spherical_cap_fraction():
    # fraction of draws at or below pi/8 elevation equals sin(pi/8)
    sampler = ViewpointSampler(mode="uniform-hemisphere", seed=9)
    n = 100_000
    below = sum(sample_viewpoint(sampler).elevation_deg <= math.degrees(math.pi / 8)
                for _ in range(n))
    expected = math.sin(math.pi / 8)
    sigma = math.sqrt(expected * (1 - expected) / n)
    assert abs(below / n - expected) < 3 * sigma


# ---------------------------------------------------------------------------
# keypoint perturbation


def test_zero_sigma_is_identity():
    kps = {"a": np.array([0.3, 0.7]), "b": np.array([0.9, 0.1])}
    out = perturb_keypoints(kps, sigma=0.0, seed=1)
    for name in kps:
        assert np.array_equal(out[name], kps[name])


def test_noise_standard_deviation():
    kps = {"center": np.array([0.5, 0.5])}
    draws = np.array([perturb_keypoints(kps, 0.05, seed=i)["center"]
                      for i in range(10_000)])
    std = draws.std(axis=0)
    assert np.abs(std - 0.05).max() < 0.05 * 0.03


@given(st.floats(0, 0.5), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_perturbed_keypoints_stay_clamped(sigma, seed):
    kps = {"edge": np.array([0.01, 0.5]), "corner": np.array([0.99, 0.99])}
    out = perturb_keypoints(kps, sigma, seed)
    for v in out.values():
        assert np.all(v >= 0.0) and np.all(v <= 1.0)


# ---------------------------------------------------------------------------
# color space


def test_white_point():
    lab = rgb_to_lab(np.array([[[255, 255, 255]]], dtype=np.uint8))[0, 0]
    assert lab[0] == pytest.approx(100.0, abs=1e-3)
    assert abs(lab[1]) < 0.01 and abs(lab[2]) < 0.01


def test_black_point():
    lab = rgb_to_lab(np.array([[[0, 0, 0]]], dtype=np.uint8))[0, 0]
    assert np.abs(lab).max() < 1e-6


def test_pure_red_matches_reference_formula():
    lab = rgb_to_lab(np.array([[[255, 0, 0]]], dtype=np.uint8))[0, 0]
    expected = reference_lab(255, 0, 0)
    assert lab[0] == pytest.approx(expected[0], abs=1e-3)
    assert lab[1] == pytest.approx(expected[1], abs=1e-3)
    assert lab[2] == pytest.approx(expected[2], abs=1e-3)
    # the well-known approximate coordinates of sRGB red
    assert lab[0] == pytest.approx(53.2, abs=0.1)
    assert lab[1] == pytest.approx(80.1, abs=0.1)
    assert lab[2] == pytest.approx(67.2, abs=0.1)


def test_roundtrip_within_one_lsb():
    rng = np.random.default_rng(13)
    img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
    back = lab_to_rgb(rgb_to_lab(img))
    assert np.abs(back.astype(int) - img.astype(int)).max() <= 1


def test_lab_byte_encoding_roundtrip():
    rng = np.random.default_rng(14)
    img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    lab = rgb_to_lab(img)
    decoded = bytes_to_lab(lab_to_bytes(lab))
    assert np.abs(decoded[..., 0] - lab[..., 0]).max() <= 100.0 / 255.0
    assert np.abs(decoded[..., 1:] - lab[..., 1:]).max() <= 0.5 + 1e-6
