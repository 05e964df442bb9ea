import ipaddress
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ipobf.addrcodec import EncodingLayout
from ipobf.cipher import CipherParams
from ipobf.keyring import KeyManager
from ipobf.packets import PROTO_UDP, IPv4Packet, build_udp, finalize_udp4
from ipobf.pipeline import Pipeline, PipelineConfig
from ipobf.traffic import synthetic_server_map

PREFIX = "2001:db8:1:2::/64"
INTERNAL = ipaddress.IPv4Network("10.20.0.0/16")


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def params56():
    return CipherParams.generate(56, random.Random(56))


@pytest.fixture(scope="session")
def params64():
    return CipherParams.generate(64, random.Random(64))


@pytest.fixture(scope="session")
def server_map():
    return synthetic_server_map(374 + 145, random.Random(99))


def make_setup(mode=56, port_obfuscation=True, seed=7, internal=INTERNAL, prefix=None, **cfg):
    r = random.Random(seed)
    if prefix is None:
        prefix = PREFIX if mode == 56 else "2001:db8:1::/56"
    layout = EncodingLayout.from_config(prefix, mode)
    pcfg = PipelineConfig(layout, internal, port_obfuscation=port_obfuscation, **cfg)
    smap = synthetic_server_map(519, random.Random(99))
    params = CipherParams.generate(mode, r)
    keys = KeyManager(mode, r)
    return Pipeline(pcfg, smap, params), keys, r


def client_packet(pipeline, src=None, sport=40000):
    dst = sorted(pipeline.server_map.ip4_to_6)[0]
    src = src if src is not None else int(INTERNAL.network_address) | 0x0304
    udp = finalize_udp4(src, dst, build_udp(sport, 53, b"\x12\x34" + bytes(10)))
    return IPv4Packet(src, dst, PROTO_UDP, udp, ttl=60)


@pytest.fixture
def setup56():
    return make_setup(56)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
