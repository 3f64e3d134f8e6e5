from __future__ import annotations

import pytest

from sharpbounds import kernels
from sharpbounds._accel import HAVE_NUMBA
from sharpbounds.graph import canonicalize, parse_graph

IV_TEXT = "Z -> X -> Y\nU -> X\nU -> Y\nlatent: U\ncard: Z=2, X=2, Y=2\n"

SIX_NODE_TEXT = (
    "edges: A->B; B->C; C->D; A->E; E->C; D->F; U1->B; U1->D; U2->A; U2->C; U2->E; U3->D; U3->F\n"
    "latent: U2, U3, U1\n"
    "card: A=2, B=2, C=2, D=2, E=2, F=2\n"
)

NESTED_LATENT_TEXT = (
    "U1->V1; U2->V2; U23->V2; U23->U3; U3->V3; V1->V2; V2->V3; V1->W13; W13->V3\n"
    "latent: U1, U2, U23, U3, W13\n"
    "card: V1=2, V2=2, V3=2\n"
)

PROXY_TEXT = (
    "A -> Astar; RA -> Astar; B -> Astar\n"
    "card: A=2, RA=2, B=2, Astar=2\n"
    "deterministic: Astar = * if RA=1 else NA\n"
)

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per kernel implementation."""
    monkeypatch.setattr(kernels, "USE_NUMBA", request.param == "numba")
    return request.param


@pytest.fixture
def iv_graph():
    return canonicalize(parse_graph(IV_TEXT))
