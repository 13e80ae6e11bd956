"""Trajectory geolocalization by fusing cross-view retrieval in a particle filter."""

from .aerial_db import AerialDatabase, GeoDescriptor, nearest_by_position, top_k_by_descriptor
from .descriptor import Descriptor, DescriptorSet, l2_distance
from .filter import FilterConfig, ParticleSet, Strategy
from .geo import GeoCoordinate, LocalFrame, Position2, TimedPose, Velocity2
from .retrieval import Measurement, mean_shift, measurement_from_retrievals, recall_at_fraction
from .sim import GroundRun, WorldConfig, dead_reckon, generate_ground_run, generate_world

__all__ = [
    "AerialDatabase",
    "Descriptor",
    "DescriptorSet",
    "FilterConfig",
    "GeoCoordinate",
    "GeoDescriptor",
    "GroundRun",
    "LocalFrame",
    "Measurement",
    "ParticleSet",
    "Position2",
    "Strategy",
    "TimedPose",
    "Velocity2",
    "WorldConfig",
    "dead_reckon",
    "generate_ground_run",
    "generate_world",
    "l2_distance",
    "mean_shift",
    "measurement_from_retrievals",
    "nearest_by_position",
    "recall_at_fraction",
    "top_k_by_descriptor",
]

__version__ = "0.1.0"
