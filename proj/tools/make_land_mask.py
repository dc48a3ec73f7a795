"""Build data/land_mask_720x360.msk from the GLOBE 1 km land/ocean raster.

The raster comes from the `global-land-mask` package (pip install
global-land-mask). A 0.5 degree cell is land when at least half of its
1 km samples are land.
"""

import argparse
import struct

import numpy as np
from global_land_mask import globe


def build(width, height):
    ocean = globe._mask
    rows, cols = ocean.shape
    if rows % height or cols % width:
        raise SystemExit(f"raster {cols}x{rows} does not divide into {width}x{height}")
    land = ~ocean.reshape(height, rows // height, width, cols // width)
    fraction = land.mean(axis=(1, 3))
    return fraction >= 0.5


def encode(mask):
    height, width = mask.shape
    bits = np.packbits(mask.reshape(-1).astype(np.uint8), bitorder="big")
    return b"MSK1" + struct.pack("<HH", width, height) + bits.tobytes()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--width", type=int, default=720)
    parser.add_argument("--height", type=int, default=360)
    parser.add_argument("--out", default="data/land_mask_720x360.msk")
    args = parser.parse_args()
    mask = build(args.width, args.height)
    with open(args.out, "wb") as f:
        f.write(encode(mask))
    print(f"wrote {args.out}: {mask.mean():.3f} land fraction by cell")


if __name__ == "__main__":
    main()
