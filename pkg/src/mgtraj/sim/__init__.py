from .dataset import (
    OBS_LEN,
    PRED_LEN,
    SEQ_LEN,
    Dataset,
    SocialForceParams,
    junction_keys,
    load_dataset,
    near_junction,
    observation_key,
    save_dataset,
    simulate_dataset,
    split_keys,
    split_obs_future,
)
from .grid import OccupancyGrid, crop_patch, read_pgm, write_pgm
from .scenes import Route, Scene, build_junction_scene
from .social_force import Agent, social_force_step
from .toy import make_circle_toy

__all__ = [
    "OBS_LEN", "PRED_LEN", "SEQ_LEN", "Agent", "Dataset", "OccupancyGrid", "Route", "Scene",
    "SocialForceParams", "build_junction_scene", "crop_patch", "junction_keys", "load_dataset",
    "make_circle_toy", "near_junction", "observation_key", "read_pgm", "save_dataset",
    "simulate_dataset", "social_force_step", "split_keys", "split_obs_future", "write_pgm",
]
