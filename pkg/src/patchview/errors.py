"""Exception types shared across the package."""


class PatchviewError(Exception):
    """Base class for all package errors."""

    kind = "error"


class GeometryError(PatchviewError):
    kind = "geometry"


class ProjectionError(GeometryError):
    """Raised when points cannot be projected (non-positive depth).

    ``names`` lists the offending keypoint names.
    """

    kind = "projection"

    def __init__(self, message, names=()):
        super().__init__(message)
        self.names = list(names)


class DegenerateHomographyError(PatchviewError):
    kind = "degenerate_homography"


class MeshFormatError(PatchviewError):
    kind = "mesh_format"


class PatchSpecError(PatchviewError):
    kind = "patch_spec"


class DatasetError(PatchviewError):
    kind = "dataset"


class ManifestError(DatasetError):
    kind = "manifest"


class CadResolutionError(DatasetError):
    kind = "cad_resolution"


class KeypointError(DatasetError):
    kind = "keypoints"


class SampleNotFoundError(DatasetError):
    kind = "sample_not_found"


class DegenerateSampleError(PatchviewError):
    kind = "degenerate_sample"
