"""Regenerate the bundled characters, clips and configs under src/planarmimic/data."""

import json
from pathlib import Path

from planarmimic import authoring, charmodel, motion

DATA = Path(__file__).resolve().parent.parent / "src" / "planarmimic" / "data"


def main():
    for sub in ("characters", "clips", "configs"):
        (DATA / sub).mkdir(parents=True, exist_ok=True)
    hopper = charmodel.build_hopper()
    biped = charmodel.build_biped()
    for model in (hopper, biped, charmodel.build_pendulum()):
        charmodel.save_character(model, DATA / "characters" / f"{model.name}.json")
    motion.save_clip(authoring.author_hop(hopper, "hop"), DATA / "clips" / "hop.json")
    motion.save_clip(authoring.author_hop(hopper, "hop_forward", forward_speed=0.4),
                     DATA / "clips" / "hop_forward.json")
    motion.save_clip(authoring.author_hop(biped, "biped_hop"), DATA / "clips" / "biped_hop.json")


if __name__ == "__main__":
    main()
