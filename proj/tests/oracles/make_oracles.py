"""Reference values for the unit tests, computed without the C++ library.

Run from the repository root to regenerate tests/oracles/oracles.json.
"""

import json
import math
from pathlib import Path


def chain3():
    # 0 -> 1 -> 2 -> 2, rewards 0, 0, 1, single action, gamma 0.5
    gamma = 0.5
    nxt = [1, 2, 2]
    r = [0.0, 0.0, 1.0]
    q = [0.0, 0.0, 0.0]
    for _ in range(10_000):
        q = [r[s] + gamma * q[nxt[s]] for s in range(3)]
    mdp = {
        "n_states": 3,
        "n_actions": 1,
        "gamma": gamma,
        "transition": [[[1.0 if k == nxt[s] else 0.0 for k in range(3)]] for s in range(3)],
        "reward": [[x] for x in r],
        "initial_dist": [1.0, 0.0, 0.0],
        "terminal": [False, False, False],
    }
    return {"mdp": mdp, "q": q}


def gridworld(width, height, goal, slip, gamma):
    # action 0: y+1, 1: y-1, 2: x-1, 3: x+1; slips go to the other three uniformly.
    moves = [(0, 1), (0, -1), (-1, 0), (1, 0)]
    cells = [(x, y) for y in range(height) for x in range(width)]
    v = {c: 0.0 for c in cells}

    def dest(c, d):
        x, y = c[0] + moves[d][0], c[1] + moves[d][1]
        if 0 <= x < width and 0 <= y < height:
            return (x, y)
        return c

    def backup(c, a, v):
        total = 0.0
        for d in range(4):
            p = 1.0 - slip if d == a else slip / 3.0
            n = dest(c, d)
            total += p * (1.0 if n == goal else gamma * v[n])
        return total

    for _ in range(100_000):
        delta = 0.0
        new = {}
        for c in cells:
            new[c] = 0.0 if c == goal else max(backup(c, a, v) for a in range(4))
            delta = max(delta, abs(new[c] - v[c]))
        v = new
        if delta < 1e-14:
            break
    rows = []
    for c in cells:
        for a in range(4):
            rows.append({"x": c[0], "y": c[1], "a": a, "q": 0.0 if c == goal else backup(c, a, v)})
    return {"width": width, "height": height, "goal": list(goal), "slip": slip, "gamma": gamma, "q": rows}


def iqm_by_replication(xs):
    # Replicating each value 4 times turns the quartile cut points into integers.
    n = len(xs)
    rep = sorted(x for x in xs for _ in range(4))
    kept = rep[n : 3 * n]
    return sum(kept) / len(kept)


def adam_transcript():
    # f(p) = 0.5 * (p - 3)^2 from p = 1 with lr 0.1
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    p, m, v = 1.0, 0.0, 0.0
    out = []
    for t in range(1, 4):
        g = p - 3.0
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        p = p - lr * mh / (math.sqrt(vh) + eps)
        out.append(p)
    return {"start": 1.0, "center": 3.0, "lr": lr, "params": out}


def main():
    out = {
        "chain3": chain3(),
        "gridworld_4x4_slip": gridworld(4, 4, (3, 3), 0.1, 0.9),
        "iqm_1_to_10": iqm_by_replication([float(i) for i in range(1, 11)]),
        "adam_quadratic": adam_transcript(),
    }
    path = Path(__file__).with_name("oracles.json")
    path.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
