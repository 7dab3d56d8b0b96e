"""Static figures from interface-run frame streams and kernel estimates."""

from .render import KERNEL_FIGURE, RUN_FIGURES, render_kernel, render_run
from .stream import Frame, FrameStream, StreamFormatError, load_stream

__all__ = [
    "Frame",
    "FrameStream",
    "KERNEL_FIGURE",
    "RUN_FIGURES",
    "StreamFormatError",
    "load_stream",
    "render_kernel",
    "render_run",
]
