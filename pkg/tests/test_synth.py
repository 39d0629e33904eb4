import math

import numpy as np
import pytest

from polyfuse.errors import EmptyScene
from polyfuse.fusion import detect_water
from polyfuse.polarization import (
    brewster_angle,
    demosaic,
    polarization_frame,
    reflection_dolp,
)
from polyfuse.synth import (
    SceneSpec,
    default_rig,
    oblique_specular_scene,
    plane_scene,
    render_mosaic,
    render_stereo,
    water_hazard_scene,
)


class TestRenderStereo:
    def test_plane_disparity_is_constant(self):
        rig = default_rig(160, 120, baseline=0.063)
        spec = plane_scene(2.0, rig=rig)
        _, _, gt = render_stereo(spec)
        d_true = rig.K_left.fx * rig.baseline / 2.0
        assert np.isfinite(gt.disparity).all()
        assert np.allclose(gt.disparity, d_true, atol=1e-9)
        assert np.allclose(gt.depth.z, 2.0, atol=1e-9)

    def test_two_plane_depth_ratio(self):
        rig = default_rig(160, 120)
        near = plane_scene(1.0, rig=rig)
        far = plane_scene(4.0, rig=rig)
        _, _, gt_near = render_stereo(near)
        _, _, gt_far = render_stereo(far)
        ratio = gt_near.disparity / gt_far.disparity
        assert np.allclose(ratio, 4.0, atol=1e-9)

    def test_right_image_is_shifted_left_image(self):
        rig = default_rig(160, 120, baseline=0.0625)  # fx=128 -> d=4 at z=2
        z = 2.0
        spec = plane_scene(z, rig=rig)
        left, right, gt = render_stereo(spec)
        d = int(round(float(gt.disparity[0, 0])))
        assert abs(gt.disparity[0, 0] - d) < 1e-9
        # where both views see the plane, right[u] == left[u + d]
        err = np.abs(right[:, : -d] - left[:, d:])
        assert err.max() < 1e-6

    def test_determinism(self):
        spec = plane_scene(2.0, rig=default_rig(80, 60), noise_sigma=0.01, seed=7)
        a = render_stereo(spec)
        b = render_stereo(spec)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_seed_changes_noise(self):
        rig = default_rig(80, 60)
        a, _, _ = render_stereo(plane_scene(2.0, rig=rig, noise_sigma=0.02, seed=1))
        b, _, _ = render_stereo(plane_scene(2.0, rig=rig, noise_sigma=0.02, seed=2))
        assert not np.array_equal(a, b)

    def test_empty_scene(self):
        with pytest.raises(EmptyScene):
            render_stereo(SceneSpec(patches=(), rig=default_rig(32, 24)))


def _pixel_incidence(rig, theta_i, u=31, v=24):
    """Exact incidence angle of the (u, v) viewing ray on the tilted plane."""
    K = rig.K_polar
    d = np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])
    d /= np.linalg.norm(d)
    n = np.array([math.sin(theta_i), 0.0, -math.cos(theta_i)])
    return math.acos(abs(float(d @ n)))


class TestRenderMosaic:
    def test_diffuse_scene_has_zero_dolp(self):
        spec = plane_scene(2.0, rig=default_rig(64, 48))
        mosaic, p_gt = render_mosaic(spec)
        assert np.allclose(p_gt, 0.0)
        frame = polarization_frame(mosaic)
        assert np.nanmax(np.abs(np.nan_to_num(frame.dolp))) < 1e-12

    def test_brewster_center_dolp_is_one(self):
        n2 = 1.33
        rig = default_rig(64, 48)
        theta_b = brewster_angle(1.0, n2)
        spec = oblique_specular_scene(theta_b, n2=n2, rig=rig)
        mosaic, p_gt = render_mosaic(spec)
        # the near-center pixel views the plane a fraction of a degree off
        # Brewster; DoLP is flat (quadratic) there, so still ~1
        assert p_gt[24, 31] == pytest.approx(1.0, abs=1e-3)
        assert p_gt.max() == pytest.approx(1.0, abs=1e-6)
        frame = polarization_frame(mosaic)
        assert frame.dolp[24, 31] == pytest.approx(p_gt[24, 31], abs=1e-9)

    def test_center_dolp_tracks_fresnel_sweep(self):
        rig = default_rig(64, 48)
        for n2 in (1.33, 1.5):
            for deg in (20, 40, 53, 70):
                theta = math.radians(deg)
                spec = oblique_specular_scene(theta, n2=n2, rig=rig)
                mosaic, _ = render_mosaic(spec)
                frame = polarization_frame(mosaic)
                expected = reflection_dolp(1.0, n2, _pixel_incidence(rig, theta))
                assert frame.dolp[24, 31] == pytest.approx(expected, abs=1e-3)

    def test_demosaic_inverts_render_exactly(self):
        spec = oblique_specular_scene(math.radians(50), rig=default_rig(64, 48))
        mosaic, p_gt = render_mosaic(spec)
        frame = polarization_frame(mosaic)
        dolp = np.nan_to_num(frame.dolp)
        assert np.abs(dolp - p_gt).max() < 1e-9
        assert np.nanmax(frame.residual) < 1e-12

    def test_determinism(self):
        spec = plane_scene(1.5, rig=default_rig(64, 48), noise_sigma=0.01, seed=3)
        a, _ = render_mosaic(spec)
        b, _ = render_mosaic(spec)
        assert np.array_equal(a.intensity, b.intensity)


class TestWaterHazardScene:
    def test_hazard_mask_nonempty_and_on_road(self):
        scene = water_hazard_scene()
        assert scene.hazard_mask.sum() > 50
        road = scene.labels.class_id == 0
        assert np.all(road[scene.hazard_mask])

    def test_noiseless_detection_is_perfect(self):
        scene = water_hazard_scene()
        frame = polarization_frame(scene.mosaic)
        dolp = np.nan_to_num(frame.dolp)
        out = detect_water(scene.labels, scene.depth, dolp, scene.rig)
        detected = out.class_id == 7
        assert np.array_equal(detected, scene.hazard_mask)

    def test_noisy_detection_f1(self):
        scene = water_hazard_scene(noise_sigma=0.01, seed=11)
        frame = polarization_frame(scene.mosaic)
        dolp = np.nan_to_num(frame.dolp)
        out = detect_water(scene.labels, scene.depth, dolp, scene.rig)
        detected = out.class_id == 7
        tp = np.sum(detected & scene.hazard_mask)
        fp = np.sum(detected & ~scene.hazard_mask)
        fn = np.sum(~detected & scene.hazard_mask)
        f1 = 2 * tp / (2 * tp + fp + fn)
        assert f1 >= 0.95
