"""Multimodal vision-fusion toolkit.

Stereo depth, division-of-focal-plane polarimetry (Stokes/DoLP), panoramic
annular lens unwrapping, cross-modal registration and water-hazard fusion,
with a synthetic-scene oracle for end-to-end verification.
"""

from .geometry import (
    CameraIntrinsics,
    RigidTransform,
    backproject,
    compose,
    inverse,
    project,
    rotation_sqrt,
    transform_point,
)
from .polarization import (
    FresnelCoefficients,
    MosaicFrame,
    PolarizationFrame,
    demosaic,
    dolp,
    fresnel,
    polarization_frame,
    reflection_dolp,
    stokes_from_planes,
)
from .stereo import (
    DepthMap,
    DisparityMap,
    RectificationResult,
    build_rectification,
    disparity_to_depth,
    match_disparity,
    rectify_image,
)
from .panoramic import (
    PalModel,
    UnwrapMapping,
    build_unwrap,
    pal_radius,
    pal_ray,
    unwrap_image,
)
from .fusion import (
    ClassTable,
    LabelMap,
    RegistrationRig,
    detect_water,
    dolp_lookup,
    overlay_visualization,
    reproject_pixel,
)

__version__ = "0.1.0"
