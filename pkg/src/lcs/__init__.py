"""Line-based compressive sensing of grayscale images with TV reconstruction."""

from .codec import deserialize, serialize
from .errors import LcsError
from .imaging import Image, LineSet, from_lines, load_image, save_image, to_lines
from .metrics import compare_report, psnr, rd_sweep
from .sampling import (
    EncodedSample,
    SamplingMatrix,
    coherence,
    encode_image,
    encode_lines,
    encode_whole,
    generate_matrix,
)
from .tvsolver import SolverConfig, SolverState, reconstruct

__version__ = "0.1.0"
