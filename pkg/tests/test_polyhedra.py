from fractions import Fraction as F

from hypothesis import given
from hypothesis import strategies as st

from ftaplab import HPolyhedron, enumerate_vertices, project, rank


def box(n, lo=-1, hi=1):
    A, b = [], []
    for i in range(n):
        e = [0] * n
        e[i] = 1
        A.append(list(e))
        b.append(hi)
        e[i] = -1
        A.append(list(e))
        b.append(-lo)
    return HPolyhedron(n, A, b)


def test_square_vertices():
    verts, rays = enumerate_vertices(box(2))
    assert sorted(verts) == [[-1, -1], [-1, 1], [1, -1], [1, 1]] and not rays


def test_projection_of_cube_is_square():
    P = project(box(3), [0, 1])
    assert sorted(enumerate_vertices(P)[0]) == [[-1, -1], [-1, 1], [1, -1], [1, 1]]


def test_projection_of_simplex():
    # x, y >= 0, x + y + z = 1, z >= 0, projected to (x, y)
    P = HPolyhedron(3, [[-1, 0, 0], [0, -1, 0], [0, 0, -1]], [0, 0, 0], [[1, 1, 1]], [1])
    Q = project(P, [0, 1])
    assert sorted(enumerate_vertices(Q)[0]) == [[0, 0], [0, 1], [1, 0]]


def test_rank():
    assert rank([(1, 2), (2, 4)]) == 1
    assert rank([(1, 0), (0, 1), (1, 1)]) == 2


@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=4))
def test_vertices_satisfy_constraints(extra):
    P = box(2, -2, 2)
    for a in extra:
        if any(a):
            P.A.append(tuple(F(x) for x in a))
            P.b.append(F(1))
    verts, _ = enumerate_vertices(P)
    for v in verts:
        assert P.contains(v)
