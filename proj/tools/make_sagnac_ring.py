#!/usr/bin/env python3
"""Writes the rotating-ring scenario: N nodes on a circle, every neighbour pair
linked both ways, nominal rate chosen so a chord takes a whole number of cycles."""
import argparse
import json
import math

p = argparse.ArgumentParser()
p.add_argument("--nodes", type=int, default=32)
p.add_argument("--radius", type=float, default=1e5)
p.add_argument("--omega", type=float, default=1e-3)
p.add_argument("--c", type=float, default=299792458.0)
p.add_argument("--chord-cycles", type=int, default=6)
p.add_argument("--horizon", type=float, default=600)
p.add_argument("--warmup", type=float, default=50)
p.add_argument("out")
a = p.parse_args()

chord = 2 * a.radius * math.sin(math.pi / a.nodes)
rate = a.chord_cycles * a.c / chord
ids = [f"R{i:02d}" for i in range(a.nodes)]
nodes = [{
    "id": ids[i],
    "worldline": {"kind": "circular", "center": [0, 0, 0], "radius": a.radius,
                  "angular_rate": a.omega, "initial_angle": 2 * math.pi * i / a.nodes},
    "eta": 0.5,
} for i in range(a.nodes)]
channels = []
for i in range(a.nodes):
    j = (i + 1) % a.nodes
    for src, dst in ((ids[i], ids[j]), (ids[j], ids[i])):
        channels.append({"src": src, "dst": dst,
                         "aim": [{"kind": "phase", "value": 0.0},
                                 {"kind": "einstein", "weight": 0.0}]})
scenario = {
    "schema_version": 1,
    "horizon": a.horizon,
    "nominal_rate": rate,
    "seed": 1,
    "propagation": {"c": a.c},
    "nodes": nodes,
    "channels": channels,
    "sagnac": {"loop": ids, "angular_rate": a.omega, "radius": a.radius, "warmup_cycles": a.warmup},
}
with open(a.out, "w") as f:
    json.dump(scenario, f, indent=1)
    f.write("\n")
