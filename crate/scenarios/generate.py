"""Regenerate the bundled synthetic malls, venue maps and scenario files."""
import json
import math
import random
from pathlib import Path

RES = 0.5
HERE = Path(__file__).parent


def grid(width, height, free_rects, solid_rects=()):
    rows, cols = int(height / RES), int(width / RES)
    cells = [["#"] * cols for _ in range(rows)]

    def paint(rect, ch):
        x0, y0, x1, y1 = rect
        for r in range(int(y0 / RES), int(y1 / RES)):
            for c in range(int(x0 / RES), int(x1 / RES)):
                if 0 < r < rows - 1 and 0 < c < cols - 1:
                    cells[r][c] = ch

    for rect in free_rects:
        paint(rect, ".")
    for rect in solid_rects:
        paint(rect, "#")
    return ["".join(row) for row in cells]


def sign(x, y, nx, ny, label, distractor=False):
    s = {"x": x, "y": y, "nx": nx, "ny": ny, "label": label}
    if distractor:
        s["distractor"] = True
    return s


def venue_map(signs, seed, angle, scale, offset, jitter):
    rng = random.Random(seed)
    c, s = math.cos(angle), math.sin(angle)
    out = []
    for sg in signs:
        if sg.get("distractor"):
            continue
        x, y = sg["x"], sg["y"]
        vx = scale * (c * x - s * y) + offset[0] + rng.gauss(0, jitter)
        vy = scale * (s * x + c * y) + offset[1] + rng.gauss(0, jitter)
        out.append({"name": sg["label"], "x": round(vx, 1), "y": round(vy, 1)})
    return {"map_units": "px", "landmarks": out}


def write(name, obj):
    (HERE / name).write_text(json.dumps(obj, indent=1) + "\n")


def scenario(world, venue, start, extra=None):
    doc = {
        "world": world,
        "venue_map": venue,
        "start": start,
        "trials": 10,
        "base_seed": 1,
    }
    doc.update(extra or {})
    return doc


def mall4():
    free = [
        (4, 6, 66, 14),
        (4, 32, 66, 40),
        (4, 6, 12, 40),
        (31, 6, 39, 40),
        (58, 6, 66, 40),
        (20, 1, 26, 6),
        (44, 40, 50, 45),
    ]
    signs = [
        sign(12.0, 22.0, -1, 0, "Muji"),
        sign(31.0, 26.0, 1, 0, "Uniqlo"),
        sign(50.0, 32.0, 0, 1, "Starbucks"),
        sign(58.0, 20.0, 1, 0, "Watsons"),
    ]
    world = {
        "resolution": RES,
        "grid": grid(70, 46, free),
        "signage": signs,
        "start": {"x": 8.0, "y": 10.0, "theta": 0.0},
        "seed": 0,
    }
    return world, signs


def mall9():
    free = [
        (4, 6, 96, 14),
        (4, 36, 96, 44),
        (4, 6, 12, 44),
        (46, 6, 54, 44),
        (88, 6, 96, 44),
        (28, 1, 34, 6),
        (68, 44, 74, 49),
    ]
    signs = [
        sign(12.0, 24.0, -1, 0, "Zara"),
        sign(24.0, 14.0, 0, -1, "Apple"),
        sign(40.0, 36.0, 0, 1, "Nike"),
        sign(46.0, 22.0, 1, 0, "Sephora"),
        sign(54.0, 30.0, -1, 0, "Lego"),
        sign(66.0, 6.0, 0, 1, "Muji"),
        sign(80.0, 14.0, 0, -1, "Uniqlo"),
        sign(88.0, 28.0, 1, 0, "Starbucks"),
        sign(78.0, 36.0, 0, 1, "Watsons"),
        sign(20.0, 44.0, 0, -1, "SALE 50%", True),
        sign(62.0, 36.0, 0, 1, "EXIT", True),
    ]
    world = {
        "resolution": RES,
        "grid": grid(100, 50, free),
        "signage": signs,
        "start": {"x": 8.0, "y": 10.0, "theta": 0.0},
        "seed": 0,
    }
    return world, signs


def degenerate():
    free = [(1, 1, 19, 9), (1, 9, 7, 17), (7, 11, 19, 17)]
    world = {
        "resolution": RES,
        "grid": grid(20, 18, free),
        "signage": [],
        "start": {"x": 3.0, "y": 3.0, "theta": 0.0},
        "seed": 0,
    }
    distract = dict(world)
    distract["signage"] = [
        sign(10.0, 1.0, 0, 1, "SALE", True),
        sign(19.0, 14.0, -1, 0, "EXIT", True),
        sign(1.0, 13.0, 1, 0, "WC", True),
    ]
    vm = {"map_units": "px", "landmarks": [
        {"name": "Muji", "x": 10, "y": 10},
        {"name": "Lego", "x": 60, "y": 40},
    ]}
    return world, distract, vm


def main():
    w4, s4 = mall4()
    write("mall4.world.json", w4)
    write("mall4.venue.json", venue_map(s4, 4, 0.2, 4.0, (120.0, 40.0), 5.0))
    write("mall4_start1.json", scenario("mall4.world.json", "mall4.venue.json", {"x": 8.0, "y": 10.0, "theta": 0.0}))
    write("mall4_start2.json", scenario("mall4.world.json", "mall4.venue.json", {"x": 62.0, "y": 36.0, "theta": 3.14159}))

    w9, s9 = mall9()
    write("mall9.world.json", w9)
    write("mall9.venue.json", venue_map(s9, 9, -0.15, 5.0, (60.0, 90.0), 8.0))
    write("mall9_start1.json", scenario("mall9.world.json", "mall9.venue.json", {"x": 8.0, "y": 10.0, "theta": 0.0}))
    write("mall9_start2.json", scenario("mall9.world.json", "mall9.venue.json", {"x": 92.0, "y": 40.0, "theta": 3.14159}))

    empty, distract, vm = degenerate()
    write("empty.world.json", empty)
    write("distractors.world.json", distract)
    write("tiny.venue.json", vm)
    write("empty.json", scenario("empty.world.json", "tiny.venue.json", {"x": 3.0, "y": 3.0, "theta": 0.0}, {"trials": 1}))
    write("distractors.json", scenario("distractors.world.json", "tiny.venue.json", {"x": 3.0, "y": 3.0, "theta": 0.0}, {"trials": 1}))


if __name__ == "__main__":
    main()
