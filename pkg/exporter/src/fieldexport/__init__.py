"""fieldexport: torch checkpoint to exactmesh interchange conversion."""

from .export import ExportError, build_interchange, export, load_checkpoint, reference_forward
from .manifest import ExportManifest, ManifestError, load_manifest, manifest_from_dict

__all__ = [
    "ExportError",
    "ExportManifest",
    "ManifestError",
    "build_interchange",
    "export",
    "load_checkpoint",
    "load_manifest",
    "manifest_from_dict",
    "reference_forward",
]

__version__ = "0.1.0"
