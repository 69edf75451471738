"""miconvert: public MI-EEG archives -> canonical-raw MIRW layout."""

from .archives import ArchiveDescriptor, DATASETS
from .convert import Report, convert, verify
from .errors import ConversionError, IntegrityError, MalformedFileError
from .gdf import GdfFile, read_gdf
from .mirw import Recording, read_manifest, read_mirw, write_layout, write_mirw

__version__ = "1.0.0"

__all__ = [
    "ArchiveDescriptor", "DATASETS", "Report", "convert", "verify",
    "ConversionError", "IntegrityError", "MalformedFileError",
    "GdfFile", "read_gdf",
    "Recording", "read_manifest", "read_mirw", "write_layout", "write_mirw",
]
