from __future__ import annotations

import numpy as np
import pytest

from camera_model import CameraIntrinsics, Point2D, back_project
from pose_decoder import AssocConfig
from repr_encoder import EncoderConfig
from skeleton import AbsolutePose3D, default_bone_stats, default_skeleton, half_body_skeleton


@pytest.fixture
def spec():
    return default_skeleton()


@pytest.fixture
def half_spec():
    return half_body_skeleton()


@pytest.fixture
def stats(spec):
    return default_bone_stats(spec)


@pytest.fixture
def cam():
    return CameraIntrinsics.default(832, 512)


@pytest.fixture
def enc():
    return EncoderConfig()


@pytest.fixture
def assoc():
    return AssocConfig()


def pose_at(spec, cam, u: float, v: float, depth: float, offsets: np.ndarray | None = None) -> AbsolutePose3D:
    """Pose com raiz projetada em (u, v); `offsets` (J, 3) relativos à raiz."""
    root = np.array(back_project(Point2D(u, v), depth, cam))
    if offsets is None:
        offsets = np.zeros((spec.num_joints, 3))
    return AbsolutePose3D(root + offsets, np.ones(spec.num_joints, dtype=bool))
