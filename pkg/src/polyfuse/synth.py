"""Synthetic multimodal scene oracle.

Renders mutually consistent stereo pairs, polarizer-mosaic frames, annular
panoramas, depth, DoLP and label ground truth from scenes made of textured
planar patches, so every pipeline stage can be checked against an
independent source of truth. The world frame coincides with the left color
camera frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyScene
from .fusion import ClassTable, LabelMap, RegistrationRig, VOID_ID
from .geometry import CameraIntrinsics, RigidTransform, inverse
from .panoramic import PalModel
from .polarization import MosaicFrame, DEFAULT_LAYOUT, fresnel
from .stereo import DepthMap


@dataclass(frozen=True)
class Texture:
    """Band-limited albedo texture: base + sum of seeded random sinusoids."""

    base: float = 0.5
    amplitude: float = 0.0
    frequency: float = 2.0  # cycles per meter, upper bound
    components: int = 6
    seed: int = 0

    def sample(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.amplitude == 0.0:
            return np.full_like(np.asarray(a, dtype=float), self.base)
        rng = np.random.default_rng(self.seed)
        value = np.zeros_like(np.asarray(a, dtype=float))
        for _ in range(self.components):
            fa, fb = rng.uniform(0.2, 1.0, size=2) * self.frequency
            phase = rng.uniform(0, 2 * np.pi)
            value = value + np.sin(2 * np.pi * (fa * a + fb * b) + phase)
        return self.base + self.amplitude * value / self.components


@dataclass(frozen=True)
class Patch:
    """Finite textured plane: center, two unit in-plane axes, half-extents."""

    center: tuple
    axis_a: tuple
    axis_b: tuple
    extent_a: float
    extent_b: float
    material: str = "diffuse"      # "diffuse" | "specular"
    n2: float = 1.33               # refractive index below the surface (specular)
    texture: Texture = field(default_factory=Texture)
    label: str = "void"

    def __post_init__(self):
        if self.extent_a <= 0 or self.extent_b <= 0:
            raise ValueError("patch extents must be positive")
        if self.material == "specular" and self.n2 <= 1:
            raise ValueError("specular n2 must exceed 1")
        a = np.asarray(self.axis_a, dtype=float)
        b = np.asarray(self.axis_b, dtype=float)
        object.__setattr__(self, "axis_a", tuple(a / np.linalg.norm(a)))
        object.__setattr__(self, "axis_b", tuple(b / np.linalg.norm(b)))

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.axis_a, self.axis_b)
        return n / np.linalg.norm(n)


@dataclass(frozen=True)
class CameraRig:
    """Stereo pair + polarization camera (+ optional PAL) in the world frame."""

    K_left: CameraIntrinsics
    K_right: CameraIntrinsics
    T_left_to_right: RigidTransform
    K_polar: CameraIntrinsics
    T_color_to_polar: RigidTransform
    pal: PalModel | None = None

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.T_left_to_right.t))


@dataclass(frozen=True)
class SceneSpec:
    patches: tuple
    rig: CameraRig
    sky_intensity: float = 0.2
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))


@dataclass(frozen=True)
class GroundTruth:
    depth: DepthMap
    disparity: np.ndarray
    dolp: np.ndarray | None = None
    labels: LabelMap | None = None


def _raycast(patches, origins, directions):
    """Nearest patch intersection along each ray.

    Returns (t, patch_index, a, b): ray parameter, hit patch (-1 for miss)
    and in-plane coordinates. Near-ties (< 1e-6) go to the later-listed
    patch, so decals layered on a base plane win.
    """
    shape = directions.shape[:-1]
    best_t = np.full(shape, np.inf)
    best_i = np.full(shape, -1)
    best_a = np.zeros(shape)
    best_b = np.zeros(shape)
    for i, patch in enumerate(patches):
        n = patch.normal
        p0 = np.asarray(patch.center, dtype=float)
        denom = directions @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((p0 - origins) @ n) / denom
        hit = (np.abs(denom) > 1e-12) & (t > 1e-9)
        point = origins + t[..., None] * directions
        rel = point - p0
        a = rel @ np.asarray(patch.axis_a)
        b = rel @ np.asarray(patch.axis_b)
        hit &= (np.abs(a) <= patch.extent_a) & (np.abs(b) <= patch.extent_b)
        take = hit & (t < best_t + 1e-6)
        # strictly nearer hits always win; ties prefer the later patch
        take &= (t < best_t + 1e-6)
        best_t = np.where(take, t, best_t)
        best_i = np.where(take, i, best_i)
        best_a = np.where(take, a, best_a)
        best_b = np.where(take, b, best_b)
    return best_t, best_i, best_a, best_b


def _camera_rays(K: CameraIntrinsics, T_world_to_cam: RigidTransform):
    """World-frame ray origin (camera center) and per-pixel directions."""
    uu, vv = np.meshgrid(
        np.arange(K.width, dtype=float), np.arange(K.height, dtype=float)
    )
    d_cam = np.stack(
        [(uu - K.cx) / K.fx, (vv - K.cy) / K.fy, np.ones_like(uu)], axis=-1
    )
    T_cam_to_world = inverse(T_world_to_cam)
    directions = d_cam @ T_cam_to_world.R.T
    origin = T_cam_to_world.t
    return origin, directions


def _shade(patches, idx, a, b, sky):
    """Scalar intensity for each hit (texture) or the sky value for misses."""
    out = np.full(idx.shape, float(sky))
    for i, patch in enumerate(patches):
        mask = idx == i
        if mask.any():
            out[mask] = patch.texture.sample(a[mask], b[mask])
    return out


def render_stereo(spec: SceneSpec, scale: float = 255.0):
    """Left/right images plus ground-truth depth and disparity.

    True disparity is f * baseline / z, valid for rigs whose cameras are
    already rectified (identity relative rotation); for rotated rigs it is
    still reported from left-camera depth.
    """
    if not spec.patches:
        raise EmptyScene("no patches to render")
    rig = spec.rig
    rng = np.random.default_rng(spec.seed)

    images = []
    for K, T in (
        (rig.K_left, RigidTransform.identity()),
        (rig.K_right, rig.T_left_to_right),
    ):
        origin, dirs = _camera_rays(K, T)
        t, idx, a, b = _raycast(spec.patches, origin, dirs)
        img = _shade(spec.patches, idx, a, b, spec.sky_intensity) * scale
        if spec.noise_sigma > 0:
            img = img + rng.normal(0, spec.noise_sigma * scale, img.shape)
        images.append(np.clip(img, 0, scale))

    origin, dirs = _camera_rays(rig.K_left, RigidTransform.identity())
    t, idx, a, b = _raycast(spec.patches, origin, dirs)
    z = np.where(idx >= 0, t * dirs[..., 2], np.nan)
    disparity = np.where(
        np.isfinite(z), rig.K_left.fx * rig.baseline / z, np.nan
    )
    gt = GroundTruth(depth=DepthMap(z=z), disparity=disparity)
    return images[0], images[1], gt


def _reflected_stokes(patch: Patch, directions, R_world_to_cam):
    """Stokes state (relative intensity) of light reaching the camera.

    Specular patches reflect unpolarized illumination; the Fresnel split
    between s and p sets the DoLP and the s-axis sets the polarization
    angle in the sensor frame. Diffuse patches emit unpolarized light.
    """
    n = patch.normal
    d = directions / np.linalg.norm(directions, axis=-1, keepdims=True)
    cos_i = np.clip(np.abs(d @ n), 0.0, 1.0 - 1e-12)
    theta_i = np.arccos(cos_i)

    flat = theta_i.ravel()
    R_s = np.empty_like(flat)
    R_p = np.empty_like(flat)
    for k, th in enumerate(flat):
        c = fresnel(1.0, patch.n2, min(th, math.pi / 2 - 1e-9))
        R_s[k] = c.r_s**2
        R_p[k] = c.r_p**2
    R_s = R_s.reshape(theta_i.shape)
    R_p = R_p.reshape(theta_i.shape)
    total = R_s + R_p
    p = np.where(total > 1e-15, np.abs(R_s - R_p) / np.maximum(total, 1e-15), 0.0)

    # s-polarization axis: perpendicular to the plane of incidence
    s_world = np.cross(d, np.broadcast_to(n, d.shape))
    norm = np.linalg.norm(s_world, axis=-1, keepdims=True)
    s_world = np.where(norm > 1e-12, s_world / np.maximum(norm, 1e-12), [1.0, 0.0, 0.0])
    s_cam = s_world @ R_world_to_cam.T
    psi = np.arctan2(s_cam[..., 1], s_cam[..., 0])
    return p, psi, theta_i


def render_mosaic(spec: SceneSpec, layout=None):
    """Polarizer-mosaic frame plus ground-truth DoLP at superpixel resolution.

    The polarization camera's intrinsics describe the superpixel grid; each
    2x2 mosaic block shares one scene sample taken at the superpixel center,
    so superpixel demosaicing inverts the render exactly (noise-free).
    """
    if not spec.patches:
        raise EmptyScene("no patches to render")
    layout = DEFAULT_LAYOUT if layout is None else layout
    rig = spec.rig
    K = rig.K_polar
    T = rig.T_color_to_polar
    origin, dirs = _camera_rays(K, T)
    t, idx, a, b = _raycast(spec.patches, origin, dirs)

    S0 = np.full(idx.shape, spec.sky_intensity)
    p = np.zeros(idx.shape)
    psi = np.zeros(idx.shape)
    for i, patch in enumerate(spec.patches):
        mask = idx == i
        if not mask.any():
            continue
        S0[mask] = patch.texture.sample(a[mask], b[mask])
        if patch.material == "specular":
            pp, ps, _ = _reflected_stokes(patch, dirs[mask], T.R)
            p[mask] = pp
            psi[mask] = ps

    S1 = S0 * p * np.cos(2 * psi)
    S2 = S0 * p * np.sin(2 * psi)

    h, w = idx.shape
    mosaic = np.zeros((2 * h, 2 * w))
    for ang, (r, c) in layout.items():
        phi = math.radians(ang)
        mosaic[r::2, c::2] = 0.5 * (
            S0 + S1 * math.cos(2 * phi) + S2 * math.sin(2 * phi)
        )
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed + 1)
        mosaic = mosaic + rng.normal(0, spec.noise_sigma, mosaic.shape)
    mosaic = np.clip(mosaic, 0.0, 1.0)
    return MosaicFrame(intensity=mosaic), p


def render_annulus(
    model: PalModel,
    shading="azimuth",
    size: int | None = None,
    fill=0.0,
    margin_px: float = 2.0,
):
    """Annular image shaded by an analytic function of (theta, azimuth).

    shading: "azimuth" (gray ramp over azimuth), "constant", "spokes"
    (bright ridge every 10 degrees of azimuth) or a callable(theta, az).
    The shaded region extends `margin_px` beyond the rim so resampling at
    the exact annulus boundary never touches fill pixels.
    """
    cu, cv = model.center
    if size is None:
        size = int(math.ceil(max(cu, cv) + model.r_outer + 3))
    uu, vv = np.meshgrid(np.arange(size, dtype=float), np.arange(size, dtype=float))
    du = uu - cu
    dv = vv - cv
    radius = np.hypot(du, dv)
    theta = radius * model.pixel_pitch / model.f
    azimuth = np.mod(np.arctan2(dv, du), 2 * np.pi)
    d_theta = margin_px * model.pixel_pitch / model.f
    inside = (theta >= model.theta_min - d_theta) & (theta <= model.theta_max + d_theta)

    if callable(shading):
        value = shading(theta, azimuth)
    elif shading == "azimuth":
        value = azimuth / (2 * np.pi)
    elif shading == "constant":
        value = np.full_like(theta, 0.5)
    elif shading == "spokes":
        step = math.radians(10.0)
        frac = np.abs(np.mod(azimuth + step / 2, step) - step / 2) / step
        value = np.where(frac < 0.1, 1.0, 0.0)
    else:
        raise ValueError(f"unknown shading {shading!r}")
    return np.where(inside, value, fill)


def default_rig(width: int = 320, height: int = 240, baseline: float = 0.05) -> CameraRig:
    """Identity-rotation rig with matched intrinsics, for synthetic scenes."""
    K = CameraIntrinsics(
        fx=0.8 * width, fy=0.8 * width, cx=(width - 1) / 2, cy=(height - 1) / 2,
        width=width, height=height,
    )
    return CameraRig(
        K_left=K,
        K_right=K,
        T_left_to_right=RigidTransform(np.eye(3), np.array([-baseline, 0.0, 0.0])),
        K_polar=K,
        T_color_to_polar=RigidTransform.identity(),
        pal=PalModel(
            # pitch chosen so the full annulus (r_outer = 290 px) fits a
            # compact synthetic frame around center (292, 292)
            f=2.13,
            pixel_pitch=2.13 * math.radians(95) / 290,
            center=(292.0, 292.0),
            theta_min=math.radians(30),
            theta_max=math.radians(95),
        ),
    )


def plane_scene(
    z: float,
    rig: CameraRig | None = None,
    texture: Texture | None = None,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> SceneSpec:
    """Single fronto-parallel textured plane at depth z, filling the FOV."""
    rig = rig or default_rig()
    half_w = 1.2 * z * rig.K_left.width / (2 * rig.K_left.fx) + rig.baseline
    half_h = 1.2 * z * rig.K_left.height / (2 * rig.K_left.fy)
    patch = Patch(
        center=(0.0, 0.0, z),
        axis_a=(1.0, 0.0, 0.0),
        axis_b=(0.0, 1.0, 0.0),
        extent_a=half_w,
        extent_b=half_h,
        texture=texture or Texture(base=0.5, amplitude=0.45, frequency=40.0 / z, seed=seed),
    )
    return SceneSpec(patches=(patch,), rig=rig, noise_sigma=noise_sigma, seed=seed)


def oblique_specular_scene(
    theta_i: float, n2: float = 1.33, rig: CameraRig | None = None,
    noise_sigma: float = 0.0, seed: int = 0,
) -> SceneSpec:
    """Specular plane whose incidence angle at the image center is theta_i.

    The plane sits 2 m down the optical axis, tilted so the central viewing
    ray strikes it at exactly theta_i.
    """
    rig = rig or default_rig()
    # normal in the x-z plane, at angle theta_i from the -z viewing direction
    normal = np.array([math.sin(theta_i), 0.0, -math.cos(theta_i)])
    axis_a = np.array([math.cos(theta_i), 0.0, math.sin(theta_i)])
    axis_b = np.cross(normal, axis_a)
    patch = Patch(
        center=(0.0, 0.0, 2.0),
        axis_a=tuple(axis_a),
        axis_b=tuple(axis_b),
        extent_a=50.0,
        extent_b=50.0,
        material="specular",
        n2=n2,
        texture=Texture(base=0.6),
        label="road",
    )
    return SceneSpec(patches=(patch,), rig=rig, noise_sigma=noise_sigma, seed=seed)


@dataclass(frozen=True)
class FusionScene:
    """Water-hazard test scene: all modalities plus ground truth."""

    labels: LabelMap
    depth: DepthMap
    mosaic: MosaicFrame
    rig: RegistrationRig
    hazard_mask: np.ndarray
    spec: SceneSpec


def water_hazard_scene(
    width: int = 128,
    height: int = 96,
    n2: float = 1.33,
    camera_height: float = 1.5,
    noise_sigma: float = 0.0,
    seed: int = 0,
    classes: ClassTable | None = None,
) -> FusionScene:
    """Road scene with a specular water patch straddling the Brewster zone.

    Semantic labels and depth are aligned to the color camera; the
    registration rig is the identity (polarization superpixel grid matches
    the color grid one-to-one). The water rectangle is placed where ground
    incidence stays close to Brewster's angle, so its DoLP clears the 0.6
    detection threshold with margin.
    """
    classes = classes or ClassTable()
    rig = default_rig(width, height)
    K = rig.K_left

    brewster = math.atan2(n2, 1.0)
    # camera pitched down so the central ray meets the ground at Brewster
    # incidence; ground incidence along the slope is atan(b / h) where b is
    # the in-plane distance from the foot of the camera normal
    pitch = math.pi / 2 - brewster
    h = camera_height
    normal = np.array([0.0, math.cos(pitch), math.sin(pitch)])
    axis_a = np.array([1.0, 0.0, 0.0])
    axis_b = np.array([0.0, -math.sin(pitch), math.cos(pitch)])
    foot = h * normal

    # water band: incidence within [-8, +8] deg of Brewster (DoLP >= ~0.85)
    b_lo = h * math.tan(brewster - math.radians(8))
    b_hi = h * math.tan(brewster + math.radians(8))
    b_ground = 30.0

    ground = Patch(
        center=tuple(foot + b_ground / 2 * axis_b),
        axis_a=tuple(axis_a),
        axis_b=tuple(axis_b),
        extent_a=40.0,
        extent_b=b_ground / 2,
        texture=Texture(base=0.45, amplitude=0.3, frequency=1.5, seed=seed + 2),
        label="road",
    )
    water = Patch(
        center=tuple(foot + (b_lo + b_hi) / 2 * axis_b),
        axis_a=tuple(axis_a),
        axis_b=tuple(axis_b),
        extent_a=0.5,
        extent_b=(b_hi - b_lo) / 2,
        material="specular",
        n2=n2,
        texture=Texture(base=0.6, amplitude=0.25, frequency=3.0, seed=seed + 5),
        label="water",
    )
    spec = SceneSpec(
        patches=(ground, water), rig=rig, noise_sigma=noise_sigma, seed=seed
    )

    origin, dirs = _camera_rays(K, RigidTransform.identity())
    t, idx, a, b = _raycast(spec.patches, origin, dirs)
    z = np.where(idx >= 0, t * dirs[..., 2], np.nan)

    labels = np.full((height, width), classes.id_of("sky"), dtype=np.uint8)
    labels[idx >= 0] = classes.id_of("road")  # water is unlabeled road, per the premise
    hazard_mask = idx == 1

    mosaic, _ = render_mosaic(spec)
    reg = RegistrationRig(
        K_color=K, K_polar=rig.K_polar, T_color_to_polar=rig.T_color_to_polar
    )
    return FusionScene(
        labels=LabelMap(class_id=labels),
        depth=DepthMap(z=z),
        mosaic=mosaic,
        rig=reg,
        hazard_mask=hazard_mask,
        spec=spec,
    )
