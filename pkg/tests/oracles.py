"""Independent reference computations used by the tests.

Each one is the slow, obvious version of something the package does fast.
"""

from collections import deque


def pow_by_multiplication(base, exponent, modulus):
    acc = 1 % modulus
    for _ in range(exponent):
        acc = acc * base % modulus
    return acc


def interval_by_slicing(value, width, start, length):
    bits = format(value, f"0{width}b")[start:start + length]
    bits += "0" * (-len(bits) % 8)
    return bytes(int(bits[i:i + 8], 2) for i in range(0, len(bits), 8))


def bfs_hops(adjacency, root=0):
    hops = {root: 0}
    todo = deque([root])
    while todo:
        n = todo.popleft()
        for m in sorted(adjacency[n]):
            if m not in hops:
                hops[m] = hops[n] + 1
                todo.append(m)
    return hops


def adjacency_of(topology):
    adj = {n: set() for n in topology.ids}
    for ln in topology.links:
        adj[ln.a].add(ln.b)
        adj[ln.b].add(ln.a)
    return adj
