"""Loader and diagnostic renderers for depth-aware turbulence datasets.

Read-only consumer of the dataset layout: PNG image tuples, D2FL binary
flow fields, and canonical JSON metadata/manifests. Shares no code with
the generator; the file formats are the contract.
"""

from .errors import ConsistencyError, DatasetFormatError, IntegrityError, InvalidDatasetError
from .formats import content_digest, flow_payload_floats, read_flow, read_image, read_json
from .loading import (
    CATEGORIES,
    SampleView,
    categorize_strength,
    iterate_dataset,
    load_sample,
)
from .render import flow_to_color, make_colorwheel, render_flow, render_panel

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES",
    "ConsistencyError",
    "DatasetFormatError",
    "IntegrityError",
    "InvalidDatasetError",
    "SampleView",
    "categorize_strength",
    "content_digest",
    "flow_payload_floats",
    "flow_to_color",
    "iterate_dataset",
    "load_sample",
    "make_colorwheel",
    "read_flow",
    "read_image",
    "read_json",
    "render_flow",
    "render_panel",
]
