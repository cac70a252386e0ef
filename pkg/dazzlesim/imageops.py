from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from PIL import Image

if TYPE_CHECKING:
    from numpy.typing import NDArray

__all__ = ("downsample_half", "resize_bicubic")


def resize_bicubic(img: NDArray[np.float64], size: tuple[int, int]) -> NDArray[np.float64]:
    """Antialiased bicubic resize of a ``(H, W)`` or ``(H, W, C)`` float image to ``size = (rows, cols)``.

    Each channel goes through Pillow in 32-bit float mode, so no quantization happens.
    """

    rows, cols = size
    arr = np.asarray(img, dtype=np.float64)
    if arr.shape[:2] == (rows, cols):
        return arr.copy()

    def one(channel: NDArray[np.float64]) -> NDArray[np.float64]:
        im = Image.fromarray(np.ascontiguousarray(channel, dtype=np.float32))
        out = im.resize((cols, rows), resample=Image.Resampling.BICUBIC)
        return np.asarray(out, dtype=np.float64)

    if arr.ndim == 2:
        return one(arr)
    return np.stack([one(arr[:, :, c]) for c in range(arr.shape[2])], axis=2)


def downsample_half(img: NDArray[np.float64]) -> NDArray[np.float64]:
    rows, cols = img.shape[:2]
    return resize_bicubic(img, (max(rows // 2, 1), max(cols // 2, 1)))
