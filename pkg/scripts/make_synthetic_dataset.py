#!/usr/bin/env python3
"""Generate a synthetic four-stem dataset with a manifest.

Example:
    python scripts/make_synthetic_dataset.py --out /tmp/synth --songs 6 \
        --duration 4 --sample-rate 16000 --seed 0 --demo 1 --silent-bass 2
"""

import argparse

from demixeval.synth import make_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="dataset root directory")
    parser.add_argument("--songs", type=int, default=6)
    parser.add_argument("--duration", type=float, default=4.0, help="seconds per song")
    parser.add_argument("--sample-rate", type=int, default=16000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--demo", type=int, nargs="*", default=[],
        help="song indices to flag as demo (excluded from scoring)",
    )
    parser.add_argument(
        "--silent-bass", type=int, nargs="*", default=[],
        help="song indices whose bass stem is written silent and annotated",
    )
    args = parser.parse_args()
    manifest = make_dataset(
        args.out,
        n_songs=args.songs,
        duration=args.duration,
        sample_rate=args.sample_rate,
        seed=args.seed,
        demo_song_indices=tuple(args.demo),
        silent_bass_indices=tuple(args.silent_bass),
    )
    print(f"wrote {args.songs} songs, manifest at {manifest}")


if __name__ == "__main__":
    main()
