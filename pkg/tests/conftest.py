import pytest

from icsim.protocol_model import chunk_protocol
from icsim.sample_protocols import random_bits_protocol, xor_token_protocol
from icsim.scheme import make_variant
from icsim.topology import path_graph, ring_graph


@pytest.fixture
def ring4():
    return ring_graph(4)


@pytest.fixture
def path4():
    return path_graph(4)


def chunked(g, variant_tag="A", protocol="random-bits", dummy_chunks=0, **params):
    """A variant and a chunked sample protocol on ``g``."""
    variant = make_variant(variant_tag, g.m)
    gen = random_bits_protocol if protocol == "random-bits" else xor_token_protocol
    return variant, chunk_protocol(gen(g, **params), variant.K, dummy_chunks)
