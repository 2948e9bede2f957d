"""Shared numeric constants for the simulation kernel.

Everything here is part of the kernel's behavioural contract: changing a
value changes simulation results and therefore replay digests.
"""

from __future__ import annotations

import math

# Contact tolerance: AABB pairs closer than this count as touching, and
# penetration up to this depth is ignored everywhere (settling, hand motion,
# sampling rejection).
EPS_CONTACT = 1e-4

# Simulation clocks. One action step runs four kinematic substeps.
ACTION_DT = 1.0 / 30.0
PHYSICS_DT = 1.0 / 120.0
SUBSTEPS = 4

ROOM_TEMP_C = 23.0
AMBIENT_RATE = 0.02  # 1/s drift toward ROOM_TEMP_C when no source applies

GRAVITY = 9.81
DROPLET_RADIUS = 0.01
POUR_TILT_COS = 0.5  # cos(60 deg): receptacles tipped past this release content

CLEANING_RADIUS = 0.03  # particle removed when a cleaning link is this close

# Assistive grasping.
GRASP_TRIGGER = 0.5
GRASP_GAP = 0.10          # depth of the grasp volume under the palm
GRASP_BREAK_DIST = 0.10   # palm-to-COM distance that snaps a grasp
HAND_FORCE_BUDGET = 300.0  # N of static weight one hand can hold
HAND_LIN_SPEED_MAX = 1.0   # m/s
HAND_ANG_SPEED_MAX = math.pi  # rad/s

# Default ability thresholds used when a category does not override them.
DEFAULT_T_FROZEN = 0.0
DEFAULT_W_SOAKED = 1
DEFAULT_DUSTY_LEVEL = 0.5
DEFAULT_STAINED_LEVEL = 0.5
DEFAULT_SLICE_FORCE = 10.0
DEFAULT_NEXTTO_FACTOR = 0.5
OPEN_JOINT_FRACTION = 0.05  # joint must clear 5% of its range to count as open

N_HORIZONTAL_RAYS = 16
FOV_SAMPLE_POINTS = 9  # 8 AABB corners plus the center

SAMPLE_MAX_ATTEMPTS = 100
SAMPLE_PARTICLE_COUNT = 20
FLAT_NORMAL_COS = math.cos(math.radians(5.0))  # support patches must be this flat

REACH_RADIUS = 2.0  # m from agent base for in-reach queries

PROTOCOL_VERSION = "oikos/1"
LOG_FORMAT_VERSION = 1
SNAPSHOT_INTERVAL = 120  # full resync snapshot broadcast every N steps
MAX_UNACKED_ACTIONS = 8
